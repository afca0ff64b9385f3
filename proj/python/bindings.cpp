#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <nlohmann/json.hpp>

#include "mtaudit/attack.hpp"
#include "mtaudit/splitter.hpp"
#include "mtaudit/pipeline.hpp"

namespace py = pybind11;
using namespace mtaudit;

namespace {

corpus::SentencePair make_sentence_pair(const std::vector<std::string>& source,
                                        const std::vector<std::string>& reference,
                                        const std::string& domain, const std::string& tier,
                                        int index) {
  corpus::SentencePair p;
  p.source = source;
  p.reference = reference;
  p.domain = domain;
  p.tier = tier_from_string(tier);
  p.index = index;
  return p;
}

std::unique_ptr<translator::SyntheticOracle> make_synthetic_oracle(
    const std::string& id, const std::vector<std::pair<std::string, int>>& members,
    double memorization_rate, double noise_rate, std::uint64_t seed,
    const std::vector<std::string>& vocabulary) {
  translator::MemorizingConfig config;
  for (const auto& [domain, index] : members) config.member_set.insert({domain, index});
  config.memorization_rate = memorization_rate;
  config.noise_rate = noise_rate;
  config.seed = seed;
  config.vocabulary = vocabulary;
  return std::make_unique<translator::SyntheticOracle>(id, std::move(config));
}

classifiers::ClassifierSpec spec_of(const std::string& kind, std::uint64_t seed) {
  classifiers::ClassifierSpec spec;
  spec.kind = classifiers::kind_from_string(kind);
  spec.seed = seed;
  return spec;
}

}  // namespace

PYBIND11_MODULE(_mtaudit, m) {
  m.doc() = "membership-leakage auditing for black-box translation APIs";
  m.attr("__version__") = std::string(pipeline::kToolkitVersion);

  // ---- metrics ----
  m.def("split_tokens", &split_tokens, py::arg("line"));
  m.def(
      "extract_ngrams",
      [](const TokenSeq& tokens, int order) {
        return metrics::extract_ngrams(tokens, order).counts;
      },
      py::arg("tokens"), py::arg("order"));
  m.def(
      "modified_precision",
      [](const TokenSeq& hypothesis, const TokenSeq& reference, int order) {
        const auto p = metrics::modified_precision(hypothesis, reference, order);
        return py::make_tuple(p.value, p.matched, p.total);
      },
      py::arg("hypothesis"), py::arg("reference"), py::arg("order"),
      "returns (precision, clipped_matches, total)");
  m.def("sentence_bleu",
        py::overload_cast<const TokenSeq&, const TokenSeq&>(&metrics::sentence_bleu),
        py::arg("hypothesis"), py::arg("reference"));
  m.def(
      "corpus_bleu",
      [](const std::vector<std::pair<TokenSeq, TokenSeq>>& segments) {
        return metrics::corpus_bleu(segments);
      },
      py::arg("segments"), "segments are (hypothesis, reference) pairs");

  // ---- corpus ----
  py::class_<corpus::SentencePair>(m, "SentencePair")
      .def(py::init(&make_sentence_pair), py::arg("source"), py::arg("reference"),
           py::arg("domain"), py::arg("tier") = "shared", py::arg("index") = 1)
      .def_readwrite("source", &corpus::SentencePair::source)
      .def_readwrite("reference", &corpus::SentencePair::reference)
      .def_readwrite("domain", &corpus::SentencePair::domain)
      .def_readwrite("index", &corpus::SentencePair::index)
      .def_property_readonly("tier",
                             [](const corpus::SentencePair& p) {
                               return std::string(to_string(p.tier));
                             })
      .def("__repr__", [](const corpus::SentencePair& p) {
        return "SentencePair(" + p.domain + ", " + std::to_string(p.index) + ")";
      });

  m.def(
      "load_parallel_corpus",
      [](const std::filesystem::path& source, const std::filesystem::path& reference,
         const std::string& domain, const std::string& tier) {
        return corpus::load_parallel_corpus(source, reference,
                                            {domain, tier_from_string(tier)})
            .pairs;
      },
      py::arg("source"), py::arg("reference"), py::arg("domain"),
      py::arg("tier") = "shared");
  m.def(
      "deduplicate",
      [](std::vector<corpus::SentencePair> pairs) {
        auto result = corpus::deduplicate(std::move(pairs));
        return py::make_tuple(result.pairs, result.removed);
      },
      py::arg("pairs"), "returns (pairs, removed_count)");
  m.def("shuffle_seeded", &corpus::shuffle_seeded, py::arg("pairs"), py::arg("seed"));
  m.def(
      "build_vocab",
      [](const std::vector<corpus::SentencePair>& pairs, const std::string& side) {
        return corpus::build_vocab(pairs, side == "source" ? corpus::Side::source
                                                           : corpus::Side::reference)
            .types;
      },
      py::arg("pairs"), py::arg("side"));
  m.def(
      "oov_flags",
      [](const corpus::SentencePair& pair, const std::set<std::string>& source_vocab,
         const std::set<std::string>& reference_vocab) {
        corpus::Vocabulary src{corpus::Side::source, {source_vocab.begin(), source_vocab.end()}};
        corpus::Vocabulary ref{corpus::Side::reference,
                               {reference_vocab.begin(), reference_vocab.end()}};
        const auto flags = corpus::oov_flags(pair, src, ref);
        return py::make_tuple(flags.in_source, flags.in_reference, flags.in_both);
      },
      py::arg("pair"), py::arg("source_vocab"), py::arg("reference_vocab"));

  // ---- splits ----
  py::class_<splitter::CorpusSplits>(m, "CorpusSplits")
      .def_readonly("a_out", &splitter::CorpusSplits::a_out)
      .def_readonly("a_in", &splitter::CorpusSplits::a_in)
      .def_readonly("a_ood", &splitter::CorpusSplits::a_ood)
      .def_readonly("a_train", &splitter::CorpusSplits::a_train)
      .def_readonly("b_all", &splitter::CorpusSplits::b_all)
      .def_readonly("spare", &splitter::CorpusSplits::spare)
      .def("manifest_json", [](const splitter::CorpusSplits& splits) {
        return splitter::carol_manifest(splits).dump(2);
      });

  py::class_<splitter::ShadowSplit>(m, "ShadowSplit")
      .def_property_readonly("id", &splitter::ShadowSplit::id)
      .def_property_readonly("role",
                             [](const splitter::ShadowSplit& s) {
                               return std::string(splitter::to_string(s.role));
                             })
      .def_readonly("b_in", &splitter::ShadowSplit::b_in)
      .def_readonly("b_out", &splitter::ShadowSplit::b_out)
      .def_property_readonly("b_train", [](const splitter::ShadowSplit& s) {
        std::vector<std::pair<std::string, int>> keys;
        keys.reserve(s.b_train.size());
        for (const auto& k : s.b_train) keys.emplace_back(k.domain, k.index);
        return keys;
      });

  m.def(
      "make_carol_splits",
      [](const std::vector<corpus::SentencePair>& pairs, int k, bool hold_spare_probe,
         std::uint64_t seed) {
        return splitter::make_carol_splits(pairs, {k, hold_spare_probe, seed});
      },
      py::arg("pairs"), py::arg("k"), py::arg("hold_spare_probe") = false,
      py::arg("seed") = 0);
  m.def(
      "make_shadow_splits",
      [](const std::vector<corpus::SentencePair>& b_all, int groups, int k_prime,
         std::uint64_t seed) {
        return splitter::make_shadow_splits(b_all, {groups, k_prime, seed});
      },
      py::arg("b_all"), py::arg("groups"), py::arg("k_prime"), py::arg("seed") = 0);
  m.def(
      "verify_splits",
      [](const splitter::CorpusSplits& splits) {
        std::vector<std::pair<std::string, std::string>> out;
        for (const auto& v : splitter::verify_splits(splits))
          out.emplace_back(v.check, v.detail);
        return out;
      },
      py::arg("splits"));

  // ---- synthetic translation oracle ----
  py::class_<translator::Translation>(m, "Translation")
      .def_readonly("hypothesis", &translator::Translation::hypothesis)
      .def_readonly("model_score", &translator::Translation::model_score)
      .def_readonly("origin", &translator::Translation::origin);

  py::class_<translator::SyntheticOracle>(m, "SyntheticOracle")
      .def(py::init(&make_synthetic_oracle), py::arg("id"), py::arg("members"),
           py::arg("memorization_rate"), py::arg("noise_rate"), py::arg("seed"),
           py::arg("vocabulary"))
      .def("translate",
           [](translator::SyntheticOracle& oracle,
              const std::vector<corpus::SentencePair>& pairs) {
             return oracle.translate(pairs);
           })
      .def_property_readonly("calls", &translator::SyntheticOracle::calls);

  // ---- features ----
  m.def(
      "sentence_feature_values",
      [](const TokenSeq& hypothesis, const TokenSeq& reference) {
        const auto stats = metrics::segment_stats(hypothesis, reference);
        const auto precision = [&stats](int order) {
          const auto i = static_cast<std::size_t>(order - 1);
          return stats.total[i] > 0 ? static_cast<double>(stats.matched[i]) /
                                          static_cast<double>(stats.total[i])
                                    : 0.0;
        };
        py::dict out;
        out["p1"] = precision(1);
        out["p2"] = precision(2);
        out["p3"] = precision(3);
        out["p4"] = precision(4);
        out["sbleu"] = metrics::sentence_bleu(stats);
        return out;
      },
      py::arg("hypothesis"), py::arg("reference"),
      "modified 1-4 gram precisions plus smoothed sentence BLEU");
  m.def(
      "group_feature_values",
      [](const std::vector<std::pair<TokenSeq, TokenSeq>>& segments, double delta_bleu) {
        std::vector<features::SentenceEval> evals;
        evals.reserve(segments.size());
        for (const auto& [hyp, ref] : segments) {
          features::SentenceEval eval;
          eval.stats = metrics::segment_stats(hyp, ref);
          eval.sbleu = metrics::sentence_bleu(eval.stats);
          evals.push_back(eval);
        }
        const auto gv = features::group_features(evals, delta_bleu);
        return py::make_tuple(std::vector<double>(gv.hist.begin(), gv.hist.end()),
                              gv.corpus_bleu);
      },
      py::arg("segments"), py::arg("delta_bleu") = 0.0,
      "returns (bleu_histogram[101], corpus_bleu)");

  // ---- classifiers ----
  py::class_<classifiers::TrainedModel>(m, "TrainedModel")
      .def_property_readonly("kind",
                             [](const classifiers::TrainedModel& model) {
                               return std::string(classifiers::to_string(model.spec.kind));
                             })
      .def_property_readonly("schema",
                             [](const classifiers::TrainedModel& model) {
                               return model.schema;
                             })
      .def_property_readonly("train_accuracy",
                             [](const classifiers::TrainedModel& model) {
                               return model.meta.train_accuracy;
                             })
      .def(
          "predict",
          [](const classifiers::TrainedModel& model, const std::vector<double>& row) {
            const auto pred = model.predict(row);
            return py::make_tuple(std::string(to_string(pred.label)), pred.score);
          },
          py::arg("row"), "returns (label, score)");

  m.def(
      "train_classifier",
      [](const std::string& kind, const std::vector<std::string>& schema,
         const std::vector<std::vector<double>>& rows, const std::vector<std::string>& labels,
         std::uint64_t seed) {
        classifiers::Dataset data;
        data.schema = schema;
        data.rows = rows;
        for (const auto& label : labels) data.labels.push_back(membership_from_string(label));
        return classifiers::train(spec_of(kind, seed), data);
      },
      py::arg("kind"), py::arg("schema"), py::arg("rows"), py::arg("labels"),
      py::arg("seed") = 0);
  m.def("save_model", &classifiers::save_model, py::arg("model"), py::arg("path"));
  m.def("load_model", &classifiers::load_model, py::arg("path"));

  // ---- attack helpers ----
  m.def(
      "threshold_sweep",
      [](const std::vector<double>& scores, const std::vector<std::string>& labels,
         int step_percent) {
        std::vector<Membership> gold;
        gold.reserve(labels.size());
        for (const auto& label : labels) gold.push_back(membership_from_string(label));
        std::vector<std::pair<int, double>> out;
        for (const auto& point : attack::threshold_sweep(scores, gold, step_percent))
          out.emplace_back(point.percent_in, point.accuracy);
        return out;
      },
      py::arg("scores"), py::arg("labels"), py::arg("step_percent") = 5);

  // typed errors surface as ValueError subclasses where it matters
  py::register_exception<InvalidArgument>(m, "InvalidArgumentError", PyExc_ValueError);
  py::register_exception<SizingError>(m, "SizingError", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_ValueError);
  py::register_exception<ConfigError>(m, "ConfigurationError", PyExc_ValueError);
}
