#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "mtaudit/base.hpp"
#include "mtaudit/corpus.hpp"

namespace testutil {

namespace fs = std::filesystem;

inline fs::path unique_temp_dir(const std::string& tag) {
  static std::atomic<int> counter{0};
  const fs::path p = fs::temp_directory_path() /
                     ("mtaudit-" + tag + "-" + std::to_string(counter.fetch_add(1)) + "-" +
                      std::to_string(std::hash<std::string>{}(tag) & 0xffff));
  fs::create_directories(p);
  return p;
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag = "test") : path(unique_temp_dir(tag)) {}
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline void write_lines(const fs::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << "\n";
}

inline mtaudit::corpus::SentencePair make_pair(const std::string& src, const std::string& ref,
                                               const std::string& domain = "d", int index = 1,
                                               mtaudit::Tier tier = mtaudit::Tier::shared) {
  mtaudit::corpus::SentencePair p;
  p.source = mtaudit::split_tokens(src);
  p.reference = mtaudit::split_tokens(ref);
  p.domain = domain;
  p.tier = tier;
  p.index = index;
  return p;
}

}  // namespace testutil
