#pragma once

#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace mtaudit {

// A token is a whitespace-free text unit; sentences are pre-tokenized upstream.
using TokenSeq = std::vector<std::string>;

std::vector<std::string> split_tokens(std::string_view line);
std::string join_tokens(const TokenSeq& tokens);

enum class Membership { in, out };
enum class Tier { shared, alice_private, ood };

std::string_view to_string(Membership m);
std::string_view to_string(Tier t);
Membership membership_from_string(std::string_view s);
Tier tier_from_string(std::string_view s);

// (domain, index) uniquely identifies a sentence pair corpus-wide.
struct PairKey {
  std::string domain;
  int index = 0;
  auto operator<=>(const PairKey&) const = default;
};

std::uint64_t fnv1a64(std::string_view data, std::uint64_t seed = 0xcbf29ce484222325ull);
std::string to_hex(std::uint64_t value);

struct PairKeyHash {
  std::size_t operator()(const PairKey& k) const {
    return static_cast<std::size_t>(
        fnv1a64(k.domain) * 0x100000001b3ull ^ static_cast<std::uint64_t>(k.index));
  }
};

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller passed a value outside an operation's contract.
struct InvalidArgument : Error {
  using Error::Error;
};

// Malformed input or artifact file (bad line, bad version tag, bad schema).
struct FormatError : Error {
  using Error::Error;
};

// A corpus or record set is too small for the requested construction.
struct SizingError : Error {
  using Error::Error;
};

// Invalid run configuration (unknown key, missing field, inconsistent options).
struct ConfigError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};

// A translation oracle could not serve one or more pairs.
struct TranslationError : Error {
  TranslationError(const std::string& message, std::vector<PairKey> failed_keys = {})
      : Error(message), failed(std::move(failed_keys)) {}
  std::vector<PairKey> failed;
};

// Feature-column schema disagreement between a model and its input.
struct SchemaError : Error {
  using Error::Error;
};

}  // namespace mtaudit
