#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "mtaudit/corpus.hpp"

namespace mtaudit::translator {

struct Translation {
  TokenSeq hypothesis;                     // may be empty (degenerate output allowed)
  std::optional<double> model_score;       // present only if the oracle exposes it
  std::string origin;                      // oracle identifier
};

struct BatchResult {
  std::vector<std::optional<Translation>> results;  // aligned with the input
  std::vector<PairKey> failed;
};

// Black-box translation surface. calls() counts work actually sent to the
// underlying oracle — one per pair for synthetic/file oracles, one per request
// for HTTP (retries included). The cache layer keeps this at one call per
// probe pair across reruns, which is how the one-call discipline is audited.
class Oracle {
 public:
  virtual ~Oracle() = default;
  virtual std::string id() const = 0;
  virtual BatchResult translate_some(std::span<const corpus::SentencePair> pairs) = 0;
  virtual std::int64_t calls() const = 0;

  // All-or-error convenience over translate_some.
  std::vector<Translation> translate(std::span<const corpus::SentencePair> pairs);
};

struct MemorizingConfig {
  std::unordered_set<PairKey, PairKeyHash> member_set;  // pairs treated as trained-on
  double memorization_rate = 0.0;                       // m
  double noise_rate = 0.0;                              // q
  std::uint64_t seed = 0;
  std::vector<std::string> vocabulary;  // replacement tokens for the noise channel
};

// Memorizing translator: a member pair is echoed verbatim with probability m;
// everything else passes the reference through a token noise channel (replace
// with prob q/2, delete with prob q/2). Fully determined by (seed, domain,
// index). model_score is the length-normalized log-probability of the emitted
// outcome (0.0 on the verbatim path).
Translation synth_translate(const MemorizingConfig& config, const corpus::SentencePair& pair,
                            std::string_view origin);

class SyntheticOracle final : public Oracle {
 public:
  SyntheticOracle(std::string id, MemorizingConfig config)
      : id_(std::move(id)), config_(std::move(config)) {}

  std::string id() const override { return id_; }
  BatchResult translate_some(std::span<const corpus::SentencePair> pairs) override;
  std::int64_t calls() const override { return calls_.load(); }

  const MemorizingConfig& config() const { return config_; }

 private:
  std::string id_;
  MemorizingConfig config_;
  std::atomic<std::int64_t> calls_{0};
};

// Serves translations from a pre-supplied cache file; a miss is an error.
class FileCacheOracle final : public Oracle {
 public:
  FileCacheOracle(const std::filesystem::path& path, std::string id);

  std::string id() const override { return id_; }
  BatchResult translate_some(std::span<const corpus::SentencePair> pairs) override;
  std::int64_t calls() const override { return calls_.load(); }

 private:
  std::string id_;
  std::unordered_map<std::string, Translation> entries_;
  std::atomic<std::int64_t> calls_{0};
};

struct HttpOracleConfig {
  std::string endpoint;        // e.g. http://host:port/translate
  std::string auth_env;        // env var holding a bearer token ("" = none)
  int max_in_flight = 1;
  double requests_per_second = 0.0;  // 0 = unlimited
  int max_retries = 3;
  int backoff_ms = 100;
  int batch_size = 64;
};

// POST {"source": ...} -> {"hypothesis": ..., "score": number|null} per pair,
// with bounded retries; pairs still failing are reported, not retried forever.
class HttpOracle final : public Oracle {
 public:
  HttpOracle(std::string id, HttpOracleConfig config);

  std::string id() const override { return id_; }
  BatchResult translate_some(std::span<const corpus::SentencePair> pairs) override;
  std::int64_t calls() const override { return calls_.load(); }

 private:
  std::optional<Translation> request_one(const corpus::SentencePair& pair);

  std::string id_;
  HttpOracleConfig config_;
  std::string auth_token_;
  std::atomic<std::int64_t> calls_{0};
  std::mutex rate_mutex_;
  std::chrono::steady_clock::time_point next_slot_{};
};

// Persistent translation cache, TSV rows (oracle_id, domain, index, hypothesis,
// score-or-empty). Reruns never re-query pairs already cached; partial results
// of a failed batch are persisted before the error propagates.
class TranslationStore {
 public:
  explicit TranslationStore(std::filesystem::path path);

  std::vector<Translation> translate_batch(Oracle& oracle,
                                           std::span<const corpus::SentencePair> pairs);

  bool contains(const std::string& oracle_id, const PairKey& key) const;
  std::size_t size() const { return entries_.size(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  static std::string entry_key(const std::string& oracle_id, const PairKey& key);
  void append_row(const std::string& oracle_id, const PairKey& key, const Translation& t);

  std::filesystem::path path_;
  std::unordered_map<std::string, Translation> entries_;
  mutable std::mutex mutex_;
};

}  // namespace mtaudit::translator
