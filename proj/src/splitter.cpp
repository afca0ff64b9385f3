#include "mtaudit/splitter.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "mtaudit/rng.hpp"

namespace mtaudit::splitter {

using corpus::SentencePair;
using nlohmann::json;

namespace {

bool key_less(const SentencePair& a, const SentencePair& b) {
  return a.key() < b.key();
}

void sort_by_key(std::vector<SentencePair>& pairs) {
  std::sort(pairs.begin(), pairs.end(), key_less);
}

// Domain name -> positions in the input span, input order preserved.
std::map<std::string, std::vector<std::size_t>> group_by_domain(
    std::span<const SentencePair> pairs) {
  std::map<std::string, std::vector<std::size_t>> by_domain;
  for (std::size_t i = 0; i < pairs.size(); ++i) by_domain[pairs[i].domain].push_back(i);
  return by_domain;
}

json keys_to_json(std::span<const SentencePair> pairs) {
  std::map<std::string, std::vector<int>> by_domain;
  for (const auto& p : pairs) by_domain[p.domain].push_back(p.index);
  json out = json::object();
  for (auto& [domain, indices] : by_domain) {
    std::sort(indices.begin(), indices.end());
    out[domain] = indices;
  }
  return out;
}

std::unordered_map<std::string, const SentencePair*> index_by_key(
    std::span<const SentencePair> pairs) {
  std::unordered_map<std::string, const SentencePair*> by_key;
  by_key.reserve(pairs.size());
  for (const auto& p : pairs) by_key[p.domain + "\t" + std::to_string(p.index)] = &p;
  return by_key;
}

std::vector<SentencePair> keys_from_json(
    const json& listing,
    const std::unordered_map<std::string, const SentencePair*>& by_key,
    const std::string& set_name) {
  std::vector<SentencePair> out;
  for (const auto& [domain, indices] : listing.items()) {
    for (const auto& idx : indices) {
      const std::string key = domain + "\t" + std::to_string(idx.get<int>());
      const auto it = by_key.find(key);
      if (it == by_key.end())
        throw FormatError("manifest set '" + set_name + "' references (" + domain + ", " +
                          idx.dump() + ") which is not in the corpus");
      out.push_back(*it->second);
    }
  }
  sort_by_key(out);
  return out;
}

ShadowRole role_for_group(int group, int groups) {
  if (groups >= 3) {
    if (group <= groups - 2) return ShadowRole::attack_train;
    if (group == groups - 1) return ShadowRole::attack_validation;
    return ShadowRole::attack_test;
  }
  if (groups == 2) return group == 1 ? ShadowRole::attack_train : ShadowRole::attack_test;
  return ShadowRole::attack_train;
}

}  // namespace

std::string_view to_string(ShadowRole role) {
  switch (role) {
    case ShadowRole::attack_train: return "attack-train";
    case ShadowRole::attack_validation: return "attack-validation";
    case ShadowRole::attack_test: return "attack-test";
  }
  return "attack-train";
}

CorpusSplits make_carol_splits(std::span<const SentencePair> pairs,
                               const CarolParams& params) {
  if (params.k < 1) throw InvalidArgument("probe size k must be >= 1");
  const std::size_t k = static_cast<std::size_t>(params.k);

  CorpusSplits splits;
  splits.params = params;

  const auto by_domain = group_by_domain(pairs);
  for (const auto& [domain, positions] : by_domain) {
    const Tier tier = pairs[positions.front()].tier;
    splits.domains.push_back({domain, tier});

    SplitMix64 rng(derive_seed(params.seed, domain));
    std::vector<std::size_t> order = positions;
    shuffle_seeded_inplace(order, rng);

    if (tier == Tier::ood) {
      if (order.size() < k)
        throw SizingError("ood domain '" + domain + "' has " +
                          std::to_string(order.size()) + " pairs, needs at least " +
                          std::to_string(k));
      for (std::size_t i = 0; i < k; ++i) splits.a_ood.push_back(pairs[order[i]]);
      continue;
    }

    const std::size_t blocks = params.hold_spare_probe ? 3 : 2;
    const std::size_t required = blocks * k + 1;
    if (order.size() < required)
      throw SizingError("domain '" + domain + "' has " + std::to_string(order.size()) +
                        " pairs, needs at least " + std::to_string(required) +
                        " for k=" + std::to_string(params.k) +
                        (params.hold_spare_probe ? " with a spare probe" : ""));

    for (std::size_t i = 0; i < order.size(); ++i) {
      const SentencePair& p = pairs[order[i]];
      if (i < k) {
        splits.a_out.push_back(p);
        continue;  // the out-probe is the only block excluded from the training set
      }
      splits.a_train.push_back(p);
      if (i < 2 * k) {
        splits.a_in.push_back(p);
      } else if (params.hold_spare_probe && i < 3 * k) {
        splits.spare.push_back(p);
      } else if (tier == Tier::shared) {
        splits.b_all.push_back(p);
      }
    }
  }

  sort_by_key(splits.a_out);
  sort_by_key(splits.a_in);
  sort_by_key(splits.a_ood);
  sort_by_key(splits.a_train);
  sort_by_key(splits.b_all);
  sort_by_key(splits.spare);
  return splits;
}

std::vector<ShadowSplit> make_shadow_splits(std::span<const SentencePair> b_all,
                                            const ShadowParams& params) {
  if (params.groups < 1) throw InvalidArgument("shadow groups must be >= 1");
  if (params.k_prime < 1) throw InvalidArgument("shadow probe size k' must be >= 1");
  const std::size_t n_blocks = 2 * static_cast<std::size_t>(params.groups);
  const std::size_t kp = static_cast<std::size_t>(params.k_prime);

  const auto by_domain = group_by_domain(b_all);
  // Selection blocks, pooled across domains.
  std::vector<std::vector<SentencePair>> blocks(n_blocks);
  std::unordered_set<PairKey, PairKeyHash> blocked;

  for (const auto& [domain, positions] : by_domain) {
    if (positions.size() < n_blocks * kp)
      throw SizingError("domain '" + domain + "' contributes " +
                        std::to_string(positions.size()) + " pairs to the attacker set, " +
                        "needs at least " + std::to_string(n_blocks * kp) + " (2*" +
                        std::to_string(params.groups) + "*" + std::to_string(params.k_prime) +
                        ")");
    SplitMix64 rng(derive_seed(params.seed, "shadow:" + domain));
    std::vector<std::size_t> order = positions;
    shuffle_seeded_inplace(order, rng);
    for (std::size_t b = 0; b < n_blocks; ++b) {
      for (std::size_t i = 0; i < kp; ++i) {
        const SentencePair& p = b_all[order[b * kp + i]];
        blocks[b].push_back(p);
        blocked.insert(p.key());
      }
    }
  }
  for (auto& block : blocks) sort_by_key(block);

  // Shared remainder: everything outside the selection blocks.
  std::vector<PairKey> remainder;
  remainder.reserve(b_all.size());
  for (const auto& p : b_all) {
    if (!blocked.count(p.key())) remainder.push_back(p.key());
  }
  std::sort(remainder.begin(), remainder.end());

  std::vector<ShadowSplit> splits;
  splits.reserve(n_blocks);
  for (int g = 1; g <= params.groups; ++g) {
    const auto& first = blocks[static_cast<std::size_t>(2 * g - 2)];
    const auto& second = blocks[static_cast<std::size_t>(2 * g - 1)];
    for (const Polarity polarity : {Polarity::plus, Polarity::minus}) {
      ShadowSplit split;
      split.group = g;
      split.polarity = polarity;
      split.role = role_for_group(g, params.groups);
      split.b_in = polarity == Polarity::plus ? first : second;
      split.b_out = polarity == Polarity::plus ? second : first;
      split.b_train = remainder;
      for (const auto& p : split.b_in) split.b_train.push_back(p.key());
      std::sort(split.b_train.begin(), split.b_train.end());
      splits.push_back(std::move(split));
    }
  }
  return splits;
}

namespace {

std::set<PairKey> key_set(std::span<const SentencePair> pairs) {
  std::set<PairKey> keys;
  for (const auto& p : pairs) keys.insert(p.key());
  return keys;
}

std::string describe(const PairKey& key) {
  return "(" + key.domain + ", " + std::to_string(key.index) + ")";
}

void check_disjoint(const std::set<PairKey>& a, const std::set<PairKey>& b,
                    const std::string& check, std::vector<Violation>& out) {
  for (const auto& key : a) {
    if (b.count(key)) out.push_back({check, describe(key)});
  }
}

void check_subset(const std::set<PairKey>& small, const std::set<PairKey>& big,
                  const std::string& check, std::vector<Violation>& out) {
  for (const auto& key : small) {
    if (!big.count(key)) out.push_back({check, describe(key)});
  }
}

}  // namespace

std::vector<Violation> verify_splits(const CorpusSplits& splits) {
  std::vector<Violation> out;
  const auto a_out = key_set(splits.a_out);
  const auto a_in = key_set(splits.a_in);
  const auto a_ood = key_set(splits.a_ood);
  const auto a_train = key_set(splits.a_train);
  const auto b_all = key_set(splits.b_all);
  const auto spare = key_set(splits.spare);

  check_disjoint(a_out, a_train, "a_out disjoint from a_train", out);
  check_subset(a_in, a_train, "a_in subset of a_train", out);
  check_subset(b_all, a_train, "b_all subset of a_train", out);
  check_disjoint(b_all, a_in, "b_all disjoint from a_in", out);
  check_disjoint(b_all, spare, "b_all disjoint from spare probe", out);
  check_disjoint(a_ood, a_train, "a_ood disjoint from a_train", out);
  check_disjoint(a_in, a_out, "a_in disjoint from a_out", out);
  check_disjoint(spare, a_in, "spare disjoint from a_in", out);
  check_disjoint(spare, a_out, "spare disjoint from a_out", out);

  for (const auto& p : splits.b_all) {
    if (p.tier == Tier::alice_private)
      out.push_back({"b_all contains no private-tier pairs", describe(p.key())});
  }
  for (const auto& p : splits.a_ood) {
    if (p.tier != Tier::ood)
      out.push_back({"a_ood drawn only from ood-tier domains", describe(p.key())});
  }

  std::map<std::string, int> out_count, in_count;
  for (const auto& p : splits.a_out) ++out_count[p.domain];
  for (const auto& p : splits.a_in) ++in_count[p.domain];
  for (const auto& d : splits.domains) {
    if (d.tier == Tier::ood) continue;
    if (out_count[d.name] != splits.params.k)
      out.push_back({"per-domain out-probe size equals k",
                     d.name + " has " + std::to_string(out_count[d.name])});
    if (in_count[d.name] != splits.params.k)
      out.push_back({"per-domain in-probe size equals k",
                     d.name + " has " + std::to_string(in_count[d.name])});
  }
  return out;
}

std::vector<Violation> verify_shadow_splits(std::span<const ShadowSplit> splits,
                                            const CorpusSplits& carol) {
  std::vector<Violation> out;
  const auto b_all = key_set(carol.b_all);
  std::map<std::pair<int, int>, const ShadowSplit*> by_id;
  for (const auto& s : splits)
    by_id[{s.group, s.polarity == Polarity::plus ? 0 : 1}] = &s;

  for (const auto& s : splits) {
    const auto b_in = key_set(s.b_in);
    const auto b_out = key_set(s.b_out);
    const std::set<PairKey> b_train(s.b_train.begin(), s.b_train.end());
    const std::string tag = "split " + s.id() + ": ";
    check_subset(b_in, b_train, tag + "b_in subset of b_train", out);
    check_disjoint(b_out, b_train, tag + "b_out disjoint from b_train", out);
    check_subset(b_in, b_all, tag + "b_in subset of b_all", out);
    check_subset(b_out, b_all, tag + "b_out subset of b_all", out);
    check_subset(b_train, b_all, tag + "b_train subset of b_all", out);

    std::map<std::string, int> in_per_domain, out_per_domain;
    for (const auto& p : s.b_in) ++in_per_domain[p.domain];
    for (const auto& p : s.b_out) ++out_per_domain[p.domain];
    for (const auto& [domain, count] : in_per_domain) {
      if (out_per_domain[domain] != count)
        out.push_back({tag + "b_in and b_out balanced per domain", domain});
    }

    const auto other = by_id.find({s.group, s.polarity == Polarity::plus ? 1 : 0});
    if (other != by_id.end()) {
      if (key_set(other->second->b_out) != b_in)
        out.push_back({tag + "opposite polarity swaps in- and out-probes", "b_in"});
    }
  }
  return out;
}

json carol_manifest(const CorpusSplits& splits) {
  json domains = json::array();
  std::map<std::string, std::int64_t> counts;
  for (const auto& p : splits.a_train) ++counts[p.domain];
  for (const auto& p : splits.a_out) ++counts[p.domain];
  std::map<std::string, std::int64_t> ood_counts;
  for (const auto& p : splits.a_ood) ++ood_counts[p.domain];
  for (const auto& d : splits.domains) {
    domains.push_back({{"name", d.name},
                       {"tier", std::string(to_string(d.tier))},
                       {"probe_pool",
                        d.tier == Tier::ood ? ood_counts[d.name] : counts[d.name]}});
  }
  json sets = {{"a_out", keys_to_json(splits.a_out)},
               {"a_in", keys_to_json(splits.a_in)},
               {"a_ood", keys_to_json(splits.a_ood)},
               {"a_train", keys_to_json(splits.a_train)},
               {"b_all", keys_to_json(splits.b_all)}};
  if (splits.params.hold_spare_probe) sets["spare"] = keys_to_json(splits.spare);
  return {{"format", "mtaudit-split-manifest-v1"},
          {"rng", std::string(kRngVersion)},
          {"seed", splits.params.seed},
          {"k", splits.params.k},
          {"spare_probe_held", splits.params.hold_spare_probe},
          {"domains", domains},
          {"sets", sets}};
}

CorpusSplits splits_from_manifest(const json& manifest,
                                  std::span<const SentencePair> corpus) {
  if (manifest.value("format", "") != "mtaudit-split-manifest-v1")
    throw FormatError("not a split manifest (format tag mismatch)");
  CorpusSplits splits;
  splits.params.k = manifest.at("k").get<int>();
  splits.params.seed = manifest.at("seed").get<std::uint64_t>();
  splits.params.hold_spare_probe = manifest.at("spare_probe_held").get<bool>();
  for (const auto& d : manifest.at("domains"))
    splits.domains.push_back(
        {d.at("name").get<std::string>(), tier_from_string(d.at("tier").get<std::string>())});
  const auto by_key = index_by_key(corpus);
  const auto& sets = manifest.at("sets");
  splits.a_out = keys_from_json(sets.at("a_out"), by_key, "a_out");
  splits.a_in = keys_from_json(sets.at("a_in"), by_key, "a_in");
  splits.a_ood = keys_from_json(sets.at("a_ood"), by_key, "a_ood");
  splits.a_train = keys_from_json(sets.at("a_train"), by_key, "a_train");
  splits.b_all = keys_from_json(sets.at("b_all"), by_key, "b_all");
  if (sets.contains("spare"))
    splits.spare = keys_from_json(sets.at("spare"), by_key, "spare");
  return splits;
}

json shadow_manifest(std::span<const ShadowSplit> splits, const ShadowParams& params) {
  json out = {{"format", "mtaudit-shadow-manifest-v1"},
              {"rng", std::string(kRngVersion)},
              {"seed", params.seed},
              {"groups", params.groups},
              {"k_prime", params.k_prime}};
  json split_list = json::array();
  for (const auto& s : splits) {
    split_list.push_back({{"id", s.id()},
                          {"group", s.group},
                          {"polarity", s.polarity == Polarity::plus ? "+" : "-"},
                          {"role", std::string(to_string(s.role))},
                          {"b_in", keys_to_json(s.b_in)},
                          {"b_out", keys_to_json(s.b_out)}});
  }
  out["splits"] = split_list;
  return out;
}

std::vector<ShadowSplit> shadow_from_manifest(const json& manifest,
                                              std::span<const SentencePair> b_all) {
  if (manifest.value("format", "") != "mtaudit-shadow-manifest-v1")
    throw FormatError("not a shadow manifest (format tag mismatch)");
  const auto by_key = index_by_key(b_all);

  // Shadow training sets are derived, not listed: b_all minus every probe
  // block, plus the split's own in-probe.
  std::unordered_set<PairKey, PairKeyHash> blocked;
  for (const auto& s : manifest.at("splits")) {
    for (const char* set_name : {"b_in", "b_out"}) {
      for (const auto& [domain, indices] : s.at(set_name).items()) {
        for (const auto& idx : indices) blocked.insert({domain, idx.get<int>()});
      }
    }
  }
  std::vector<PairKey> remainder;
  for (const auto& p : b_all) {
    if (!blocked.count(p.key())) remainder.push_back(p.key());
  }
  std::sort(remainder.begin(), remainder.end());

  std::vector<ShadowSplit> splits;
  for (const auto& s : manifest.at("splits")) {
    ShadowSplit split;
    split.group = s.at("group").get<int>();
    split.polarity =
        s.at("polarity").get<std::string>() == "+" ? Polarity::plus : Polarity::minus;
    const std::string role = s.at("role").get<std::string>();
    if (role == "attack-train") split.role = ShadowRole::attack_train;
    else if (role == "attack-validation") split.role = ShadowRole::attack_validation;
    else if (role == "attack-test") split.role = ShadowRole::attack_test;
    else throw FormatError("unknown shadow role: " + role);
    split.b_in = keys_from_json(s.at("b_in"), by_key, "b_in");
    split.b_out = keys_from_json(s.at("b_out"), by_key, "b_out");
    split.b_train = remainder;
    for (const auto& p : split.b_in) split.b_train.push_back(p.key());
    std::sort(split.b_train.begin(), split.b_train.end());
    splits.push_back(std::move(split));
  }
  return splits;
}

}  // namespace mtaudit::splitter
