#include "mtaudit/base.hpp"

#include <array>

namespace mtaudit {

std::vector<std::string> split_tokens(std::string_view line) {
  std::vector<std::string> out;
  std::size_t i = 0;
  const std::size_t n = line.size();
  while (i < n) {
    while (i < n && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t start = i;
    while (i < n && line[i] != ' ' && line[i] != '\t') ++i;
    if (i > start) out.emplace_back(line.substr(start, i - start));
  }
  return out;
}

std::string join_tokens(const TokenSeq& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += tokens[i];
  }
  return out;
}

std::string_view to_string(Membership m) { return m == Membership::in ? "in" : "out"; }

std::string_view to_string(Tier t) {
  switch (t) {
    case Tier::shared: return "shared";
    case Tier::alice_private: return "private";
    case Tier::ood: return "ood";
  }
  return "shared";
}

Membership membership_from_string(std::string_view s) {
  if (s == "in") return Membership::in;
  if (s == "out") return Membership::out;
  throw FormatError("unknown membership label: " + std::string(s));
}

Tier tier_from_string(std::string_view s) {
  if (s == "shared") return Tier::shared;
  if (s == "private") return Tier::alice_private;
  if (s == "ood") return Tier::ood;
  throw FormatError("unknown tier: " + std::string(s) + " (expected shared|private|ood)");
}

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

std::string to_hex(std::uint64_t value) {
  static constexpr std::array<char, 16> digits = {'0', '1', '2', '3', '4', '5', '6', '7',
                                                  '8', '9', 'a', 'b', 'c', 'd', 'e', 'f'};
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

}  // namespace mtaudit
