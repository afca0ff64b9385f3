#include "mtaudit/translator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "mtaudit/io_util.hpp"
#include "mtaudit/rng.hpp"

namespace mtaudit::translator {

using corpus::SentencePair;
using nlohmann::json;

namespace {

std::string format_score(double score) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", score);
  return buf;
}

std::string describe_keys(std::span<const PairKey> keys, std::size_t limit = 8) {
  std::string out;
  for (std::size_t i = 0; i < keys.size() && i < limit; ++i) {
    if (i) out += ", ";
    out += "(" + keys[i].domain + ", " + std::to_string(keys[i].index) + ")";
  }
  if (keys.size() > limit) out += ", ... (" + std::to_string(keys.size()) + " total)";
  return out;
}

}  // namespace

std::vector<Translation> Oracle::translate(std::span<const SentencePair> pairs) {
  BatchResult batch = translate_some(pairs);
  if (!batch.failed.empty()) {
    const std::string message = "oracle '" + id() + "' failed on " +
                                std::to_string(batch.failed.size()) +
                                " pair(s): " + describe_keys(batch.failed);
    throw TranslationError(message, std::move(batch.failed));
  }
  std::vector<Translation> out;
  out.reserve(batch.results.size());
  for (auto& r : batch.results) out.push_back(std::move(*r));
  return out;
}

Translation synth_translate(const MemorizingConfig& config, const SentencePair& pair,
                            std::string_view origin) {
  SplitMix64 rng(derive_seed(config.seed, pair.domain + "#" + std::to_string(pair.index)));

  Translation out;
  out.origin = std::string(origin);

  // The membership coin is drawn for every pair so member and non-member
  // inputs consume the identical stream shape.
  const double coin = rng.next_double();
  const bool memorized =
      config.member_set.count(pair.key()) > 0 && coin < config.memorization_rate;
  if (memorized) {
    out.hypothesis = pair.reference;
    out.model_score = 0.0;
    return out;
  }

  const double q = config.noise_rate;
  const std::size_t vocab_size = config.vocabulary.size();
  double log_prob = 0.0;
  out.hypothesis.reserve(pair.reference.size());
  for (const auto& token : pair.reference) {
    const double u = rng.next_double();
    if (u < q / 2 && vocab_size > 0) {
      out.hypothesis.push_back(
          config.vocabulary[static_cast<std::size_t>(rng.next_below(vocab_size))]);
      log_prob += std::log(q / 2);
    } else if (u < q) {
      log_prob += std::log(q / 2);  // deleted
    } else {
      out.hypothesis.push_back(token);
      log_prob += q > 0.0 ? std::log(1.0 - q) : 0.0;
    }
  }
  out.model_score = log_prob / static_cast<double>(pair.reference.size());
  return out;
}

BatchResult SyntheticOracle::translate_some(std::span<const SentencePair> pairs) {
  BatchResult out;
  out.results.reserve(pairs.size());
  for (const auto& pair : pairs) out.results.emplace_back(synth_translate(config_, pair, id_));
  calls_ += static_cast<std::int64_t>(pairs.size());
  return out;
}

// --- translation cache TSV ---------------------------------------------------

namespace {

struct CacheRow {
  std::string oracle_id;
  PairKey key;
  Translation translation;
};

CacheRow parse_cache_row(const std::string& line, const std::filesystem::path& path,
                         std::size_t line_no) {
  const auto fields = split_fields(line, '\t');
  if (fields.size() != 5)
    throw FormatError(path.string() + ":" + std::to_string(line_no) +
                      ": expected 5 tab-separated fields, got " +
                      std::to_string(fields.size()));
  CacheRow row;
  row.oracle_id = fields[0];
  row.key = {fields[1], std::stoi(fields[2])};
  row.translation.hypothesis = split_tokens(fields[3]);
  row.translation.origin = row.oracle_id;
  if (!fields[4].empty()) row.translation.model_score = std::strtod(fields[4].c_str(), nullptr);
  return row;
}

std::string cache_row_text(const std::string& oracle_id, const PairKey& key,
                           const Translation& t) {
  std::string line = oracle_id;
  line.push_back('\t');
  line += key.domain;
  line.push_back('\t');
  line += std::to_string(key.index);
  line.push_back('\t');
  line += join_tokens(t.hypothesis);
  line.push_back('\t');
  if (t.model_score) line += format_score(*t.model_score);
  line.push_back('\n');
  return line;
}

}  // namespace

FileCacheOracle::FileCacheOracle(const std::filesystem::path& path, std::string id)
    : id_(std::move(id)) {
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    CacheRow row = parse_cache_row(lines[i], path, i + 1);
    if (row.oracle_id != id_) continue;
    entries_[row.key.domain + "\t" + std::to_string(row.key.index)] =
        std::move(row.translation);
  }
}

BatchResult FileCacheOracle::translate_some(std::span<const SentencePair> pairs) {
  BatchResult out;
  out.results.resize(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto it =
        entries_.find(pairs[i].domain + "\t" + std::to_string(pairs[i].index));
    if (it == entries_.end()) {
      out.failed.push_back(pairs[i].key());
    } else {
      out.results[i] = it->second;
      ++calls_;
    }
  }
  return out;
}

// --- HTTP oracle --------------------------------------------------------------

namespace {

struct ParsedEndpoint {
  std::string base;  // scheme://host[:port]
  std::string path;  // /translate
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos)
    throw ConfigError("http oracle endpoint must include a scheme: " + endpoint);
  const auto path_start = endpoint.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {endpoint, "/"};
  return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

}  // namespace

HttpOracle::HttpOracle(std::string id, HttpOracleConfig config)
    : id_(std::move(id)), config_(std::move(config)) {
  if (!config_.auth_env.empty()) {
    const char* token = std::getenv(config_.auth_env.c_str());
    if (!token)
      throw ConfigError("http oracle auth variable '" + config_.auth_env + "' is not set");
    auth_token_ = token;
  }
  parse_endpoint(config_.endpoint);  // validate eagerly
}

std::optional<Translation> HttpOracle::request_one(const SentencePair& pair) {
  const ParsedEndpoint ep = parse_endpoint(config_.endpoint);
  httplib::Client client(ep.base);
  client.set_connection_timeout(10);
  client.set_read_timeout(30);
  httplib::Headers headers;
  if (!auth_token_.empty()) headers.emplace("Authorization", "Bearer " + auth_token_);

  const std::string body = json{{"source", join_tokens(pair.source)}}.dump();
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(
          std::chrono::milliseconds(config_.backoff_ms * (1 << (attempt - 1))));
    }
    if (config_.requests_per_second > 0.0) {
      std::chrono::steady_clock::time_point wait_until;
      {
        std::lock_guard lock(rate_mutex_);
        const auto now = std::chrono::steady_clock::now();
        const auto interval = std::chrono::duration_cast<std::chrono::steady_clock::duration>(
            std::chrono::duration<double>(1.0 / config_.requests_per_second));
        if (next_slot_ < now) next_slot_ = now;
        wait_until = next_slot_;
        next_slot_ += interval;
      }
      std::this_thread::sleep_until(wait_until);
    }
    auto res = client.Post(ep.path, headers, body, "application/json");
    ++calls_;
    if (!res || res->status != 200) continue;
    try {
      const json parsed = json::parse(res->body);
      Translation t;
      t.hypothesis = split_tokens(parsed.at("hypothesis").get<std::string>());
      if (parsed.contains("score") && !parsed.at("score").is_null())
        t.model_score = parsed.at("score").get<double>();
      t.origin = id_;
      return t;
    } catch (const json::exception&) {
      continue;  // malformed body counts as a failed attempt
    }
  }
  return std::nullopt;
}

BatchResult HttpOracle::translate_some(std::span<const SentencePair> pairs) {
  BatchResult out;
  out.results.resize(pairs.size());
  std::mutex failed_mutex;

  const int workers = std::max(1, config_.max_in_flight);
  const std::size_t chunk = static_cast<std::size_t>(std::max(1, config_.batch_size));
  for (std::size_t base = 0; base < pairs.size(); base += chunk) {
    const std::size_t end = std::min(pairs.size(), base + chunk);
    std::atomic<std::size_t> cursor{base};
    auto work = [&] {
      for (;;) {
        const std::size_t i = cursor.fetch_add(1);
        if (i >= end) return;
        auto result = request_one(pairs[i]);
        if (result) {
          out.results[i] = std::move(*result);
        } else {
          std::lock_guard lock(failed_mutex);
          out.failed.push_back(pairs[i].key());
        }
      }
    };
    if (workers == 1) {
      work();
    } else {
      std::vector<std::thread> threads;
      for (int w = 0; w < workers; ++w) threads.emplace_back(work);
      for (auto& t : threads) t.join();
    }
  }
  std::sort(out.failed.begin(), out.failed.end());
  return out;
}

// --- cache-backed batch translation -------------------------------------------

TranslationStore::TranslationStore(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(path_)) {
    const auto lines = read_lines(path_);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      CacheRow row = parse_cache_row(lines[i], path_, i + 1);
      entries_[entry_key(row.oracle_id, row.key)] = std::move(row.translation);
    }
  } else {
    ensure_parent_dir(path_);
  }
}

std::string TranslationStore::entry_key(const std::string& oracle_id, const PairKey& key) {
  return oracle_id + "\t" + key.domain + "\t" + std::to_string(key.index);
}

bool TranslationStore::contains(const std::string& oracle_id, const PairKey& key) const {
  std::lock_guard lock(mutex_);
  return entries_.count(entry_key(oracle_id, key)) > 0;
}

void TranslationStore::append_row(const std::string& oracle_id, const PairKey& key,
                                  const Translation& t) {
  std::ofstream out(path_, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to translation cache " + path_.string());
  const std::string line = cache_row_text(oracle_id, key, t);
  out.write(line.data(), static_cast<std::streamsize>(line.size()));
}

std::vector<Translation> TranslationStore::translate_batch(
    Oracle& oracle, std::span<const SentencePair> pairs) {
  const std::string oracle_id = oracle.id();
  std::vector<std::optional<Translation>> results(pairs.size());
  std::vector<std::size_t> miss_positions;
  {
    std::lock_guard lock(mutex_);
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      const auto it = entries_.find(entry_key(oracle_id, pairs[i].key()));
      if (it != entries_.end()) {
        results[i] = it->second;
      } else {
        miss_positions.push_back(i);
      }
    }
  }

  if (!miss_positions.empty()) {
    std::vector<SentencePair> misses;
    misses.reserve(miss_positions.size());
    for (const auto i : miss_positions) misses.push_back(pairs[i]);
    BatchResult batch = oracle.translate_some(misses);

    std::lock_guard lock(mutex_);
    for (std::size_t j = 0; j < miss_positions.size(); ++j) {
      if (!batch.results[j]) continue;
      const std::size_t i = miss_positions[j];
      append_row(oracle_id, pairs[i].key(), *batch.results[j]);
      entries_[entry_key(oracle_id, pairs[i].key())] = *batch.results[j];
      results[i] = std::move(batch.results[j]);
    }
    if (!batch.failed.empty()) {
      // Successes above are already persisted; rerunning resumes from them.
      const std::string message = "oracle '" + oracle_id + "' failed on " +
                                  std::to_string(batch.failed.size()) +
                                  " pair(s): " + describe_keys(batch.failed);
      throw TranslationError(message, std::move(batch.failed));
    }
  }

  std::vector<Translation> out;
  out.reserve(results.size());
  for (auto& r : results) out.push_back(std::move(*r));
  return out;
}

}  // namespace mtaudit::translator
