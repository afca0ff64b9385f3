#include "mtaudit/config.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "mtaudit/io_util.hpp"
#include "mtaudit/rng.hpp"

namespace mtaudit::config {

using nlohmann::json;

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& context) {
  if (!j.is_object()) throw ConfigError("config section '" + context + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key))
      throw ConfigError("unknown config key '" + context + "." + key + "'");
  }
}

bool valid_name(const std::string& name) {
  if (name.empty()) return false;
  return std::all_of(name.begin(), name.end(), [](char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
  });
}

OracleConfig parse_oracle(const json& j, const std::string& context, bool is_shadow) {
  OracleConfig oracle;
  check_keys(j, {"kind", "memorization_rate", "noise_rate", "seed", "path", "oracle_id",
                 "endpoint", "auth_env", "max_in_flight", "requests_per_second",
                 "max_retries", "backoff_ms", "batch_size"},
             context);
  const std::string kind = j.value("kind", "synthetic");
  if (kind == "synthetic") {
    oracle.kind = OracleKind::synthetic;
    oracle.memorization_rate = j.value("memorization_rate", 0.0);
    oracle.noise_rate = j.value("noise_rate", 0.0);
    oracle.seed = j.value("seed", std::uint64_t{0});
    if (oracle.memorization_rate < 0.0 || oracle.memorization_rate > 1.0)
      throw ConfigError(context + ".memorization_rate must be in [0, 1]");
    if (oracle.noise_rate < 0.0 || oracle.noise_rate > 1.0)
      throw ConfigError(context + ".noise_rate must be in [0, 1]");
  } else if (kind == "file_cache") {
    oracle.kind = OracleKind::file_cache;
    if (!j.contains("path")) throw ConfigError(context + ".path is required for file_cache");
    oracle.path = j.at("path").get<std::string>();
    oracle.oracle_id = j.value("oracle_id", is_shadow ? "shadow" : "alice");
  } else if (kind == "http_api") {
    if (is_shadow)
      throw ConfigError(context + ": shadow oracles must be synthetic or file_cache");
    oracle.kind = OracleKind::http_api;
    if (!j.contains("endpoint"))
      throw ConfigError(context + ".endpoint is required for http_api");
    oracle.endpoint = j.at("endpoint").get<std::string>();
    oracle.auth_env = j.value("auth_env", "");
    oracle.max_in_flight = j.value("max_in_flight", 1);
    oracle.requests_per_second = j.value("requests_per_second", 0.0);
    oracle.max_retries = j.value("max_retries", 3);
    oracle.backoff_ms = j.value("backoff_ms", 100);
    oracle.batch_size = j.value("batch_size", 64);
    if (oracle.max_in_flight < 1) throw ConfigError(context + ".max_in_flight must be >= 1");
  } else {
    throw ConfigError(context + ".kind must be synthetic, file_cache, or http_api");
  }
  return oracle;
}

classifiers::ClassifierSpec parse_classifier(const json& j, const std::string& context,
                                             std::uint64_t master_seed) {
  check_keys(j, {"kind", "seed", "tree_max_depth", "tree_min_split", "knn_k",
                 "knn_minkowski_p", "mlp_hidden", "mlp_l2", "mlp_learning_rate", "mlp_batch",
                 "mlp_epochs", "mlp_patience", "mlp_validation_fraction",
                 "perceptron_learning_rate", "perceptron_epochs", "nb_var_smoothing"},
             context);
  classifiers::ClassifierSpec spec;
  if (!j.contains("kind")) throw ConfigError(context + ".kind is required");
  spec.kind = classifiers::kind_from_string(j.at("kind").get<std::string>());
  spec.seed = j.value(
      "seed", derive_seed(master_seed, "classifier:" +
                                          std::string(classifiers::to_string(spec.kind))));
  spec.tree_max_depth = j.value("tree_max_depth", spec.tree_max_depth);
  spec.tree_min_split = j.value("tree_min_split", spec.tree_min_split);
  spec.knn_k = j.value("knn_k", spec.knn_k);
  spec.knn_minkowski_p = j.value("knn_minkowski_p", spec.knn_minkowski_p);
  spec.mlp_hidden = j.value("mlp_hidden", spec.mlp_hidden);
  spec.mlp_l2 = j.value("mlp_l2", spec.mlp_l2);
  spec.mlp_learning_rate = j.value("mlp_learning_rate", spec.mlp_learning_rate);
  spec.mlp_batch = j.value("mlp_batch", spec.mlp_batch);
  spec.mlp_epochs = j.value("mlp_epochs", spec.mlp_epochs);
  spec.mlp_patience = j.value("mlp_patience", spec.mlp_patience);
  spec.mlp_validation_fraction = j.value("mlp_validation_fraction",
                                         spec.mlp_validation_fraction);
  spec.perceptron_learning_rate = j.value("perceptron_learning_rate",
                                          spec.perceptron_learning_rate);
  spec.perceptron_epochs = j.value("perceptron_epochs", spec.perceptron_epochs);
  spec.nb_var_smoothing = j.value("nb_var_smoothing", spec.nb_var_smoothing);
  return spec;
}

json* navigate(json& root, const std::string& dotted, std::string* leaf) {
  json* node = &root;
  std::size_t start = 0;
  for (;;) {
    const std::size_t dot = dotted.find('.', start);
    if (dot == std::string::npos) {
      *leaf = dotted.substr(start);
      return node;
    }
    const std::string part = dotted.substr(start, dot - start);
    if (!node->contains(part)) (*node)[part] = json::object();
    node = &(*node)[part];
    start = dot + 1;
  }
}

}  // namespace

json RunConfig::to_json() const {
  json domain_list = json::array();
  for (const auto& d : domains) {
    domain_list.push_back({{"name", d.name},
                           {"tier", std::string(to_string(d.tier))},
                           {"source", d.source.string()},
                           {"reference", d.reference.string()}});
  }
  json classifier_list = json::array();
  for (const auto& spec : classifiers) {
    classifier_list.push_back({{"kind", std::string(classifiers::to_string(spec.kind))},
                               {"seed", spec.seed}});
  }
  const auto oracle_json = [](const OracleConfig& o) -> json {
    switch (o.kind) {
      case OracleKind::synthetic:
        return {{"kind", "synthetic"},
                {"memorization_rate", o.memorization_rate},
                {"noise_rate", o.noise_rate},
                {"seed", o.seed}};
      case OracleKind::file_cache:
        return {{"kind", "file_cache"}, {"path", o.path.string()},
                {"oracle_id", o.oracle_id}};
      case OracleKind::http_api:
        return {{"kind", "http_api"},
                {"endpoint", o.endpoint},
                {"auth_env", o.auth_env},
                {"max_in_flight", o.max_in_flight},
                {"requests_per_second", o.requests_per_second},
                {"max_retries", o.max_retries},
                {"backoff_ms", o.backoff_ms},
                {"batch_size", o.batch_size}};
    }
    return {};
  };
  json group_json = {{"size", group.size},
                     {"n_groups", group.n_groups},
                     {"sweep_step", group.sweep_step},
                     {"seed", group.seed}};
  if (group.measure_delta) {
    group_json["delta_bleu"] = "measure";
  } else if (group.delta_bleu) {
    group_json["delta_bleu"] = *group.delta_bleu;
  } else {
    group_json["delta_bleu"] = nullptr;
  }
  json features_json = {{"include_model_score", features.include_model_score}};
  if (features.external_scores_path) {
    features_json["external_scores"] = {{"path", features.external_scores_path->string()},
                                        {"names", features.external_names}};
  } else {
    features_json["external_scores"] = nullptr;
  }
  return {{"format", "mtaudit-config-v1"},
          {"seed", seed},
          {"out_dir", out_dir.string()},
          {"corpus", {{"domains", domain_list}}},
          {"splits",
           {{"k", splits.k},
            {"spare_probe", splits.spare_probe},
            {"shadow_groups", splits.shadow_groups},
            {"shadow_k", splits.shadow_k},
            {"seed", splits.seed},
            {"shadow_seed", splits.shadow_seed}}},
          {"oracles", {{"alice", oracle_json(alice)}, {"shadow", oracle_json(shadow)}}},
          {"features", features_json},
          {"classifiers", classifier_list},
          {"group", group_json}};
}

RunConfig run_config_from_json(json document) {
  check_keys(document, {"format", "seed", "out_dir", "corpus", "splits", "oracles",
                        "features", "classifiers", "group"},
             "config");
  const std::string format = document.value("format", "mtaudit-config-v1");
  if (format != "mtaudit-config-v1")
    throw ConfigError("unsupported config format tag '" + format + "'");

  RunConfig config;
  if (!document.contains("seed")) throw ConfigError("config.seed is required");
  config.seed = document.at("seed").get<std::uint64_t>();
  if (!document.contains("out_dir")) throw ConfigError("config.out_dir is required");
  config.out_dir = document.at("out_dir").get<std::string>();

  if (!document.contains("corpus")) throw ConfigError("config.corpus is required");
  check_keys(document.at("corpus"), {"domains"}, "corpus");
  if (!document.at("corpus").contains("domains") ||
      document.at("corpus").at("domains").empty())
    throw ConfigError("corpus.domains must list at least one domain");
  std::set<std::string> names;
  for (const auto& d : document.at("corpus").at("domains")) {
    check_keys(d, {"name", "tier", "source", "reference"}, "corpus.domains[]");
    DomainConfig domain;
    domain.name = d.at("name").get<std::string>();
    if (!valid_name(domain.name))
      throw ConfigError("domain name '" + domain.name +
                        "' must match [A-Za-z0-9_.-]+ (it is used in file formats)");
    if (!names.insert(domain.name).second)
      throw ConfigError("duplicate domain name '" + domain.name + "'");
    domain.tier = tier_from_string(d.at("tier").get<std::string>());
    domain.source = d.at("source").get<std::string>();
    domain.reference = d.at("reference").get<std::string>();
    config.domains.push_back(std::move(domain));
  }

  if (document.contains("splits")) {
    const auto& s = document.at("splits");
    check_keys(s, {"k", "spare_probe", "shadow_groups", "shadow_k", "seed", "shadow_seed"},
               "splits");
    config.splits.k = s.value("k", config.splits.k);
    config.splits.spare_probe = s.value("spare_probe", config.splits.spare_probe);
    config.splits.shadow_groups = s.value("shadow_groups", config.splits.shadow_groups);
    config.splits.shadow_k = s.value("shadow_k", config.splits.shadow_k);
    if (s.contains("seed")) config.splits.seed = s.at("seed").get<std::uint64_t>();
    if (s.contains("shadow_seed"))
      config.splits.shadow_seed = s.at("shadow_seed").get<std::uint64_t>();
  }
  if (config.splits.k < 1) throw ConfigError("splits.k must be >= 1");
  if (config.splits.shadow_groups < 1) throw ConfigError("splits.shadow_groups must be >= 1");
  if (config.splits.shadow_k < 1) throw ConfigError("splits.shadow_k must be >= 1");
  if (config.splits.seed == 0) config.splits.seed = derive_seed(config.seed, "splits");
  if (config.splits.shadow_seed == 0)
    config.splits.shadow_seed = derive_seed(config.seed, "shadow-splits");

  if (!document.contains("oracles") || !document.at("oracles").contains("alice"))
    throw ConfigError("oracles.alice is required");
  check_keys(document.at("oracles"), {"alice", "shadow"}, "oracles");
  config.alice = parse_oracle(document.at("oracles").at("alice"), "oracles.alice", false);
  if (config.alice.kind == OracleKind::synthetic && !document.at("oracles").at("alice").contains("seed"))
    config.alice.seed = derive_seed(config.seed, "oracle:alice");
  if (document.at("oracles").contains("shadow")) {
    config.shadow = parse_oracle(document.at("oracles").at("shadow"), "oracles.shadow", true);
    if (config.shadow.kind == OracleKind::synthetic &&
        !document.at("oracles").at("shadow").contains("seed"))
      config.shadow.seed = derive_seed(config.seed, "oracle:shadow");
  } else {
    config.shadow.kind = OracleKind::synthetic;
    config.shadow.seed = derive_seed(config.seed, "oracle:shadow");
  }

  if (document.contains("features")) {
    const auto& f = document.at("features");
    check_keys(f, {"include_model_score", "external_scores"}, "features");
    config.features.include_model_score =
        f.value("include_model_score", config.features.include_model_score);
    if (f.contains("external_scores") && !f.at("external_scores").is_null()) {
      const auto& e = f.at("external_scores");
      check_keys(e, {"path", "names"}, "features.external_scores");
      config.features.external_scores_path = e.at("path").get<std::string>();
      config.features.external_names = e.at("names").get<std::vector<std::string>>();
      if (config.features.external_names.empty())
        throw ConfigError("features.external_scores.names must not be empty");
    }
  }

  if (document.contains("classifiers")) {
    if (!document.at("classifiers").is_array() || document.at("classifiers").empty())
      throw ConfigError("config.classifiers must be a non-empty array");
    std::set<classifiers::ClassifierKind> kinds;
    for (const auto& c : document.at("classifiers")) {
      auto spec = parse_classifier(c, "classifiers[]", config.seed);
      if (!kinds.insert(spec.kind).second)
        throw ConfigError("duplicate classifier kind '" +
                          std::string(classifiers::to_string(spec.kind)) + "'");
      config.classifiers.push_back(spec);
    }
  } else {
    for (const auto kind :
         {classifiers::ClassifierKind::perceptron, classifiers::ClassifierKind::decision_tree,
          classifiers::ClassifierKind::gaussian_nb, classifiers::ClassifierKind::knn,
          classifiers::ClassifierKind::mlp}) {
      classifiers::ClassifierSpec spec;
      spec.kind = kind;
      spec.seed = derive_seed(config.seed,
                              "classifier:" + std::string(classifiers::to_string(kind)));
      config.classifiers.push_back(spec);
    }
  }

  if (document.contains("group")) {
    const auto& g = document.at("group");
    check_keys(g, {"size", "n_groups", "sweep_step", "delta_bleu", "seed"}, "group");
    config.group.size = g.value("size", config.group.size);
    config.group.n_groups = g.value("n_groups", config.group.n_groups);
    config.group.sweep_step = g.value("sweep_step", config.group.sweep_step);
    if (g.contains("seed")) config.group.seed = g.at("seed").get<std::uint64_t>();
    if (g.contains("delta_bleu") && !g.at("delta_bleu").is_null()) {
      if (g.at("delta_bleu").is_string()) {
        if (g.at("delta_bleu").get<std::string>() != "measure")
          throw ConfigError("group.delta_bleu must be a number, null, or \"measure\"");
        config.group.measure_delta = true;
      } else {
        config.group.delta_bleu = g.at("delta_bleu").get<double>();
      }
    }
  }
  if (config.group.size < 1) throw ConfigError("group.size must be >= 1");
  if (config.group.n_groups < 1) throw ConfigError("group.n_groups must be >= 1");
  if (config.group.sweep_step < 1 || config.group.sweep_step > 100)
    throw ConfigError("group.sweep_step must be in 1..100");
  if (config.group.seed == 0) config.group.seed = derive_seed(config.seed, "groups");
  if (config.group.measure_delta && !config.splits.spare_probe)
    throw ConfigError(
        "group.delta_bleu=\"measure\" requires splits.spare_probe=true (the spare block is "
        "the held-out set)");

  return config;
}

RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::string>& overrides) {
  json document;
  try {
    document = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  for (const auto& assignment : overrides) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos)
      throw ConfigError("override '" + assignment + "' must look like key.path=value");
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    std::string leaf;
    json* node = navigate(document, key, &leaf);
    const json parsed = json::parse(raw, nullptr, false);
    (*node)[leaf] = parsed.is_discarded() ? json(raw) : parsed;
  }
  try {
    return run_config_from_json(std::move(document));
  } catch (const json::exception& e) {
    throw ConfigError("invalid config " + path.string() + ": " + e.what());
  }
}

}  // namespace mtaudit::config
