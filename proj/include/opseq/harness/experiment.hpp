#pragma once

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "opseq/classify/classifier.hpp"
#include "opseq/corpus.hpp"
#include "opseq/embed.hpp"
#include "opseq/harness/families.hpp"
#include "opseq/harness/report.hpp"
#include "opseq/harness/split.hpp"
#include "opseq/hmm.hpp"
#include "opseq/io.hpp"
#include "opseq/parallel.hpp"

namespace opseq {

struct HmmConfig {
  BaumWelchOptions options;
  RestartPolicy restarts;
  bool allow_general_n = false;
};

struct ExperimentConfig {
  std::string manifest;            // as written; resolved against base_dir
  fs::path base_dir;
  std::optional<json> synthetic;   // inline corpus instead of a manifest
  Provenance feature = Provenance::hmm2vec;
  std::size_t M = 31;
  std::size_t N = 2;
  std::size_t W = 1;
  HmmConfig hmm;
  Word2VecParams word2vec;
  ClassifierSpec classifier;
  bool classifier_seed_given = false;
  std::vector<double> split{0.7, 0.3};
  Seed seed = 1;
  double scramble_fraction = 0.0;
  std::size_t min_length = 10;  // shorter filtered samples are skipped
  unsigned threads = 0;         // 0: one per core; never affects results
};

// Receives pipeline warnings; prints to stderr unless replaced.
inline std::function<void(const std::string&)>& warning_sink() {
  static std::function<void(const std::string&)> sink = [](const std::string& msg) {
    std::fprintf(stderr, "warning: %s\n", msg.c_str());
  };
  return sink;
}

namespace detail {

inline void check_config_keys(const json& j, std::initializer_list<std::string_view> allowed,
                              std::string_view what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown " + std::string(what) + " key '" + key + "'");
  }
}

inline RestartPolicy restart_policy_from_json(const json& j) {
  if (j.is_number_integer()) {
    const int r = j.get<int>();
    if (r < 1) throw ConfigError("hmm restarts must be >= 1");
    return RestartPolicy::fixed(r);
  }
  check_config_keys(j, {"threshold_low", "threshold_high", "short", "long"}, "hmm restart policy");
  RestartPolicy p;
  p.threshold_low = j.value("threshold_low", p.threshold_low);
  p.threshold_high = j.value("threshold_high", p.threshold_high);
  p.restarts_short = j.value("short", p.restarts_short);
  p.restarts_long = j.value("long", p.restarts_long);
  if (p.restarts_short < 1 || p.restarts_long < 1) throw ConfigError("hmm restarts must be >= 1");
  return p;
}

inline json restart_policy_to_json(const RestartPolicy& p) {
  if (p.restarts_short == p.restarts_long) return p.restarts_short;
  return {{"threshold_low", p.threshold_low}, {"threshold_high", p.threshold_high},
          {"short", p.restarts_short}, {"long", p.restarts_long}};
}

}  // namespace detail

inline ExperimentConfig config_from_json(const json& j, const fs::path& base_dir = {}) {
  using detail::check_config_keys;
  check_config_keys(j, {"manifest", "synthetic", "feature", "M", "N", "W", "hmm", "word2vec", "classifier",
                        "split", "seed", "scramble_fraction", "min_length", "threads"}, "config");
  try {
    ExperimentConfig c;
    c.base_dir = base_dir;
    if (j.contains("manifest") == j.contains("synthetic"))
      throw ConfigError("config needs exactly one of 'manifest' or 'synthetic'");
    if (j.contains("manifest")) c.manifest = j["manifest"].get<std::string>();
    else c.synthetic = j["synthetic"];
    c.feature = parse_provenance(j.value("feature", std::string("hmm2vec")));
    c.M = j.value("M", c.M);
    c.N = j.value("N", c.N);
    c.W = j.value("W", c.W);
    if (c.M < 1 || c.N < 1 || c.W < 1) throw ConfigError("M, N and W must be >= 1");

    if (j.contains("hmm")) {
      const json& h = j["hmm"];
      check_config_keys(h, {"max_iters", "tol", "emission_floor", "restarts", "allow_general_n"}, "hmm");
      c.hmm.options.max_iters = h.value("max_iters", c.hmm.options.max_iters);
      c.hmm.options.tol = h.value("tol", c.hmm.options.tol);
      c.hmm.options.emission_floor = h.value("emission_floor", c.hmm.options.emission_floor);
      if (h.contains("restarts")) c.hmm.restarts = detail::restart_policy_from_json(h["restarts"]);
      c.hmm.allow_general_n = h.value("allow_general_n", false);
      if (c.hmm.options.max_iters < 0 || !(c.hmm.options.tol >= 0.0) ||
          !(c.hmm.options.emission_floor >= 0.0))
        throw ConfigError("hmm max_iters, tol and emission_floor must be non-negative");
    }
    if (c.feature == Provenance::hmm2vec && c.N != 2 && !c.hmm.allow_general_n)
      throw ConfigError("hmm2vec uses N = 2; set hmm.allow_general_n to use N = " + std::to_string(c.N));
    if (j.contains("word2vec")) {
      check_config_keys(j["word2vec"], {"epochs", "lr_start", "lr_end", "negatives", "noise_power"}, "word2vec");
      c.word2vec = word2vec_params_from_json(j["word2vec"]);
    }

    if (!j.contains("classifier")) throw ConfigError("config needs a 'classifier' block");
    const json& cj = j["classifier"];
    check_config_keys(cj, {"algo", "params"}, "classifier");
    const json params = cj.value("params", json::object());
    c.classifier = classifier_spec_from_json(parse_algo(cj.at("algo").get<std::string>()), params);
    c.classifier_seed_given = params.contains("seed");

    c.split = j.value("split", c.split);
    if (c.split.size() != 2 && c.split.size() != 3)
      throw ConfigError("split must be [train, test] or [train, validation, test]");
    validate_fractions(c.split);
    c.seed = j.value("seed", c.seed);
    c.scramble_fraction = j.value("scramble_fraction", 0.0);
    if (!(c.scramble_fraction >= 0.0 && c.scramble_fraction <= 1.0))
      throw ConfigError("scramble_fraction must lie in [0, 1]");
    c.min_length = j.value("min_length", c.min_length);
    c.threads = j.value("threads", 0u);
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
}

inline ExperimentConfig load_config(const fs::path& path) {
  try {
    return config_from_json(read_json_file(path), path.parent_path());
  } catch (const DataError& e) {
    throw ConfigError(e.what());
  }
}

inline Seed effective_classifier_seed(const ExperimentConfig& c) {
  return derive_seed(c.seed, "classifier");
}

inline ClassifierSpec effective_classifier(const ExperimentConfig& c) {
  ClassifierSpec s = c.classifier;
  if (!c.classifier_seed_given) set_seed(s, effective_classifier_seed(c));
  return s;
}

// Normalized echo of every setting that affects results.
inline json config_to_json(const ExperimentConfig& c) {
  json j;
  if (c.synthetic) j["synthetic"] = *c.synthetic;
  else j["manifest"] = c.manifest;
  j["feature"] = to_string(c.feature);
  j["M"] = c.M;
  j["N"] = c.N;
  if (c.feature == Provenance::word2vec) {
    j["W"] = c.W;
    j["word2vec"] = word2vec_params_to_json(c.word2vec);
  } else {
    j["hmm"] = {{"max_iters", c.hmm.options.max_iters}, {"tol", c.hmm.options.tol},
                {"emission_floor", c.hmm.options.emission_floor},
                {"restarts", detail::restart_policy_to_json(c.hmm.restarts)},
                {"allow_general_n", c.hmm.allow_general_n}};
  }
  j["classifier"] = {{"algo", to_string(c.classifier.algo)},
                     {"params", classifier_params_to_json(effective_classifier(c))}};
  j["split"] = c.split;
  j["seed"] = c.seed;
  j["scramble_fraction"] = c.scramble_fraction;
  j["min_length"] = c.min_length;
  return j;
}

// ---------------------------------------------------------------------------
// Corpus and features
// ---------------------------------------------------------------------------

struct PreparedCorpus {
  std::vector<std::string> families;
  Vocabulary vocab;
  std::vector<EncodedSequence> sequences;  // filtered, not scrambled
  std::vector<std::string> skipped;        // below the minimum length
};

inline PreparedCorpus prepare_corpus(const ExperimentConfig& c) {
  PreparedCorpus out;
  std::vector<OpcodeSequence> raw;
  try {
    if (c.synthetic) {
      const auto corpus = generate(synth_spec_from_json(*c.synthetic));
      out.families = corpus.manifest.families;
      raw = as_opcode_sequences(corpus);
    } else {
      fs::path p = c.manifest;
      if (p.is_relative() && !c.base_dir.empty()) p = c.base_dir / p;
      const auto m = load_manifest(p);
      out.families = m.families;
      raw = load_sequences(m);
    }
  } catch (const Error& e) {
    rethrow_with_context(e, "load");
  }
  if (raw.empty()) throw DataError("[load] corpus has no samples");
  try {
    out.vocab = build_vocabulary(raw, c.M);
  } catch (const Error& e) {
    rethrow_with_context(e, "vocabulary");
  }
  out.sequences.reserve(raw.size());
  for (const auto& s : raw) {
    std::size_t kept = 0;
    for (const auto& m : s.mnemonics) kept += out.vocab.find(m).has_value();
    if (kept < c.min_length) {
      out.skipped.push_back(s.sample_id);
      warning_sink()("skipping sample " + s.sample_id + ": " + std::to_string(kept) +
                     " tokens after filtering, minimum is " + std::to_string(c.min_length));
      continue;
    }
    out.sequences.push_back(filter_sequence(s, out.vocab));
  }
  if (out.sequences.empty()) throw DataError("[filter] no sample reaches the minimum length");
  return out;
}

inline unsigned resolve_threads(unsigned t) { return t == 0 ? default_thread_count() : t; }

// One feature vector per sample, trained in parallel. Every sample draws
// from seeds derived from its id, so thread count and order do not matter.
inline std::vector<FeatureVector> compute_features(const PreparedCorpus& corpus, const ExperimentConfig& c,
                                                   unsigned threads) {
  const std::size_t n = corpus.sequences.size();
  std::vector<FeatureVector> out(n);
  const Seed scramble_seed = derive_seed(c.seed, "scramble");
  const Seed hmm_seed = derive_seed(c.seed, "hmm");
  const Seed w2v_seed = derive_seed(c.seed, "word2vec");
  parallel_for(n, resolve_threads(threads), [&](std::size_t i) {
    const EncodedSequence& original = corpus.sequences[i];
    const std::string& id = original.sample_id;
    EncodedSequence scrambled;
    const EncodedSequence* seq = &original;
    if (c.scramble_fraction > 0.0) {
      scrambled = scramble(original, c.scramble_fraction, derive_seed(scramble_seed, id));
      seq = &scrambled;
    }
    FeatureVector fv;
    if (c.feature == Provenance::hmm2vec) {
      try {
        const auto model = train_with_restarts(seq->ids, c.N, corpus.vocab.size(), c.hmm.restarts,
                                               derive_seed(hmm_seed, id), c.hmm.options);
        fv = hmm2vec(model, corpus.vocab, {c.hmm.allow_general_n});
      } catch (const Error& e) {
        rethrow_with_context(e, "hmm", id);
      }
    } else {
      try {
        const auto model = train_word2vec(*seq, corpus.vocab, c.N, c.W, c.word2vec, w2v_seed);
        fv = word2vec_features(model.embedding, corpus.vocab);
      } catch (const Error& e) {
        rethrow_with_context(e, "word2vec", id);
      }
    }
    fv.sample_id = id;
    fv.family = original.family;
    out[i] = std::move(fv);
  });
  return out;
}

// Settings the corpus and the feature vectors depend on.
inline json corpus_key(const ExperimentConfig& c) {
  json j = config_to_json(c);
  j.erase("classifier");
  j.erase("split");
  j.erase("feature");
  j.erase("N");
  j.erase("W");
  j.erase("hmm");
  j.erase("word2vec");
  j.erase("scramble_fraction");
  return j;
}

inline json feature_key(const ExperimentConfig& c) {
  json j = config_to_json(c);
  j.erase("classifier");
  j.erase("split");
  return j;
}

// Caches prepared corpora and feature sets across the runs of a grid or a
// robustness study.
class FeatureCache {
 public:
  explicit FeatureCache(unsigned threads = 0) : threads_(threads) {}

  const PreparedCorpus& corpus(const ExperimentConfig& c, double* seconds = nullptr) {
    const std::string key = corpus_key(c).dump();
    auto it = corpora_.find(key);
    if (it == corpora_.end()) {
      const auto t0 = std::chrono::steady_clock::now();
      it = corpora_.emplace(key, prepare_corpus(c)).first;
      if (seconds) *seconds += elapsed(t0);
    }
    return it->second;
  }

  const std::vector<std::string>& skipped(const ExperimentConfig& c) { return corpus(c).skipped; }

  const LabeledDataset& features(const ExperimentConfig& c, double* load_seconds = nullptr,
                                 double* feature_seconds = nullptr) {
    const std::string key = feature_key(c).dump();
    auto it = features_.find(key);
    if (it == features_.end()) {
      const auto& pc = corpus(c, load_seconds);
      const auto t0 = std::chrono::steady_clock::now();
      const auto fv = compute_features(pc, c, threads_ ? threads_ : c.threads);
      it = features_.emplace(key, make_dataset(fv, pc.families)).first;
      if (feature_seconds) *feature_seconds += elapsed(t0);
    }
    return it->second;
  }

  static double elapsed(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  }

 private:
  unsigned threads_;
  std::map<std::string, PreparedCorpus> corpora_;
  std::map<std::string, LabeledDataset> features_;
};

// ---------------------------------------------------------------------------
// Single experiment
// ---------------------------------------------------------------------------

using Partitions = std::vector<std::vector<std::size_t>>;

inline Partitions split_dataset(const LabeledDataset& d, const ExperimentConfig& c) {
  try {
    return stratified_split(d.y, d.class_count, c.split, derive_seed(c.seed, "split"));
  } catch (const Error& e) {
    rethrow_with_context(e, "split");
  }
}

struct Evaluation {
  ConfusionMatrix confusion;
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::optional<TrainingCurves> curves;
  double train_seconds = 0.0;
  double evaluate_seconds = 0.0;
};

// Trains on the training partition and scores the test partition. With a
// three-way split only the network sees the validation partition; the other
// classifiers train on training and validation together.
inline Evaluation evaluate(const ClassifierSpec& spec, const LabeledDataset& data, const Partitions& parts,
                           unsigned threads) {
  const bool three = parts.size() == 3;
  std::vector<std::size_t> train_rows = parts[0];
  std::optional<LabeledDataset> validation;
  if (three) {
    if (spec.algo == Algo::nn) {
      validation = data.subset(parts[1]);
    } else {
      train_rows.insert(train_rows.end(), parts[1].begin(), parts[1].end());
      std::sort(train_rows.begin(), train_rows.end());
    }
  }
  const LabeledDataset train = data.subset(train_rows);
  const LabeledDataset test = data.subset(parts.back());

  Evaluation ev;
  ev.train_size = train.size();
  ev.test_size = test.size();
  auto t0 = std::chrono::steady_clock::now();
  TrainedClassifier model;
  try {
    model = train_classifier(spec, train, validation ? &*validation : nullptr, resolve_threads(threads));
  } catch (const Error& e) {
    rethrow_with_context(e, "train " + std::string(to_string(spec.algo)));
  }
  ev.train_seconds = FeatureCache::elapsed(t0);
  if (const auto* nn = std::get_if<NnModel>(&model.model)) ev.curves = nn->curves;
  t0 = std::chrono::steady_clock::now();
  const auto predicted = predict_all(model, test);
  ev.confusion = ConfusionMatrix::from_predictions(data.class_names, test.y, predicted);
  ev.evaluate_seconds = FeatureCache::elapsed(t0);
  return ev;
}

inline Report run_experiment(const ExperimentConfig& c, FeatureCache& cache) {
  const auto start = std::chrono::steady_clock::now();
  double load = 0.0, feats = 0.0;
  const auto& data = cache.features(c, &load, &feats);
  const auto parts = split_dataset(data, c);
  const auto ev = evaluate(effective_classifier(c), data, parts, c.threads);

  Report r;
  r.kind = "experiment";
  r.config = config_to_json(c);
  r.confusion = ev.confusion;
  r.accuracy = ev.confusion.accuracy();
  r.train_size = ev.train_size;
  r.test_size = ev.test_size;
  r.curves = ev.curves;
  r.skipped = cache.skipped(c);
  r.timing = {{"load", load}, {"features", feats}, {"train", ev.train_seconds},
              {"evaluate", ev.evaluate_seconds}, {"total", FeatureCache::elapsed(start)}};
  return r;
}

inline Report run_experiment(const ExperimentConfig& c) {
  FeatureCache cache(c.threads);
  return run_experiment(c, cache);
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

// {"grids": [{"dotted.path": [values...], ...}, ...], "mode": "exhaustive" |
// "random", "budget": n, "flag": {"dotted.path": value}}. Each grid is a
// cartesian product; the grids are concatenated. A bare object is one grid.
struct GridSpec {
  std::vector<json> grids;
  bool random = false;
  std::size_t budget = 50;
  json flag = json::object();
};

inline GridSpec grid_spec_from_json(const json& j) {
  try {
    GridSpec g;
    if (j.is_object() && !j.contains("grids")) {
      g.grids.push_back(j);
    } else if (j.is_array()) {
      for (const auto& x : j) g.grids.push_back(x);
    } else {
      detail::check_config_keys(j, {"grids", "mode", "budget", "flag"}, "grid");
      for (const auto& x : j.at("grids")) g.grids.push_back(x);
      const std::string mode = j.value("mode", std::string("exhaustive"));
      if (mode == "random") g.random = true;
      else if (mode != "exhaustive") throw ConfigError("grid mode must be exhaustive or random");
      g.budget = j.value("budget", g.budget);
      g.flag = j.value("flag", json::object());
    }
    if (g.grids.empty()) throw ConfigError("grid is empty");
    for (const auto& grid : g.grids) {
      if (!grid.is_object() || grid.empty()) throw ConfigError("each grid must be a non-empty object");
      for (const auto& [key, values] : grid.items()) {
        if (!values.is_array() || values.empty())
          throw ConfigError("grid values for '" + key + "' must be a non-empty array");
      }
    }
    if (g.random && g.budget == 0) throw ConfigError("random grid budget must be >= 1");
    return g;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid grid: ") + e.what());
  }
}

inline json grid_spec_to_json(const GridSpec& g) {
  json j{{"grids", g.grids}, {"mode", g.random ? "random" : "exhaustive"}};
  if (g.random) j["budget"] = g.budget;
  if (!g.flag.empty()) j["flag"] = g.flag;
  return j;
}

inline std::vector<json> grid_points(const GridSpec& g) {
  std::vector<json> points;
  for (const auto& grid : g.grids) {
    std::vector<std::pair<std::string, json>> axes;
    for (const auto& [key, values] : grid.items()) axes.emplace_back(key, values);
    // Odometer over the axes, last axis fastest.
    std::vector<std::size_t> at(axes.size(), 0);
    for (bool more = true; more;) {
      json p = json::object();
      for (std::size_t a = 0; a < axes.size(); ++a) p[axes[a].first] = axes[a].second[at[a]];
      points.push_back(std::move(p));
      more = false;
      for (std::size_t a = axes.size(); a-- > 0;) {
        if (++at[a] < axes[a].second.size()) {
          more = true;
          break;
        }
        at[a] = 0;
      }
    }
  }
  return points;
}

inline void set_dotted(json& j, const std::string& path, const json& value) {
  json* at = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("bad grid path '" + path + "'");
    if (!at->is_object()) throw ConfigError("grid path '" + path + "' runs through a non-object");
    if (dot == std::string::npos) {
      (*at)[key] = value;
      return;
    }
    at = &(*at)[key];
    if (at->is_null()) *at = json::object();
    start = dot + 1;
  }
}

inline std::optional<json> get_dotted(const json& j, const std::string& path) {
  const json* at = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (!at->is_object() || !at->contains(key)) return std::nullopt;
    at = &(*at)[key];
    if (dot == std::string::npos) return *at;
    start = dot + 1;
  }
}

// Runs every grid point on one split drawn from the base config. Rows are
// sorted by accuracy, highest first, ties in grid order; the first is best.
inline Report grid_search(const json& base, const fs::path& base_dir, const GridSpec& spec,
                          unsigned threads = 0) {
  const auto start = std::chrono::steady_clock::now();
  const ExperimentConfig base_cfg = config_from_json(base, base_dir);
  const unsigned t = threads ? threads : base_cfg.threads;
  FeatureCache cache(t);

  auto points = grid_points(spec);
  if (spec.random && spec.budget < points.size()) {
    std::vector<std::size_t> idx(points.size());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(derive_seed(base_cfg.seed, "grid"));
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(spec.budget);
    std::sort(idx.begin(), idx.end());
    std::vector<json> picked;
    for (std::size_t i : idx) picked.push_back(points[i]);
    points = std::move(picked);
  }

  double load = 0.0, feats = 0.0, train = 0.0, eval = 0.0;
  const auto& base_data = cache.features(base_cfg, &load, &feats);
  const auto parts = split_dataset(base_data, base_cfg);

  std::vector<GridRow> rows;
  std::vector<Evaluation> evals;
  for (std::size_t i = 0; i < points.size(); ++i) {
    json cj = base;
    // Switching classifier family drops the base parameters, which belong to the old one.
    if (points[i].contains("classifier.algo") && cj.contains("classifier") &&
        cj["classifier"].value("algo", json()) != points[i]["classifier.algo"])
      cj["classifier"]["params"] = json::object();
    for (const auto& [path, value] : points[i].items()) set_dotted(cj, path, value);
    ExperimentConfig cfg;
    try {
      cfg = config_from_json(cj, base_dir);
    } catch (const ConfigError& e) {
      throw ConfigError("grid point " + points[i].dump() + ": " + e.what());
    }
    const auto& data = cache.features(cfg, &load, &feats);
    if (data.y != base_data.y) throw ConfigError("grid point " + points[i].dump() + " changes the corpus");
    auto ev = evaluate(effective_classifier(cfg), data, parts, t);
    train += ev.train_seconds;
    eval += ev.evaluate_seconds;
    GridRow row;
    row.point = points[i];
    row.accuracy = ev.confusion.accuracy();
    row.index = i;
    row.flagged = !spec.flag.empty();
    for (const auto& [path, value] : spec.flag.items()) {
      const auto v = get_dotted(cj, path);
      if (!v || *v != value) row.flagged = false;
    }
    rows.push_back(std::move(row));
    evals.push_back(std::move(ev));
  }
  std::stable_sort(rows.begin(), rows.end(), [](const GridRow& a, const GridRow& b) { return a.accuracy > b.accuracy; });
  rows.front().best = true;

  Report r;
  r.kind = "grid";
  r.config = {{"base", config_to_json(base_cfg)}, {"grid", grid_spec_to_json(spec)}};
  const auto& best = evals[rows.front().index];
  r.accuracy = rows.front().accuracy;
  r.confusion = best.confusion;
  r.train_size = best.train_size;
  r.test_size = best.test_size;
  r.curves = best.curves;
  r.skipped = cache.skipped(base_cfg);
  r.grid = std::move(rows);
  r.timing = {{"load", load}, {"features", feats}, {"train", train}, {"evaluate", eval},
              {"total", FeatureCache::elapsed(start)}};
  return r;
}

// ---------------------------------------------------------------------------
// Robustness
// ---------------------------------------------------------------------------

struct NamedClassifier {
  std::string name;
  json classifier;  // {"algo": ..., "params": {...}}
};

// Re-runs the pipeline on scrambled sequences for every fraction and every
// classifier. Feature vectors are shared across classifiers at one fraction;
// fraction 0 leaves the sequences untouched.
inline Report robustness_study(const json& base, const fs::path& base_dir, const std::vector<double>& fractions,
                               std::vector<NamedClassifier> classifiers = {}, unsigned threads = 0) {
  const auto start = std::chrono::steady_clock::now();
  if (fractions.empty()) throw ConfigError("robustness study needs at least one fraction");
  for (double f : fractions) {
    if (!(f >= 0.0 && f <= 1.0)) throw ConfigError("scramble fractions must lie in [0, 1]");
  }
  const ExperimentConfig base_cfg = config_from_json(base, base_dir);
  if (classifiers.empty())
    classifiers.push_back({std::string(to_string(base_cfg.classifier.algo)), base.at("classifier")});
  const unsigned t = threads ? threads : base_cfg.threads;
  FeatureCache cache(t);

  Report r;
  r.kind = "robustness";
  json names = json::array();
  for (const auto& c : classifiers) names.push_back({{"name", c.name}, {"classifier", c.classifier}});
  r.config = {{"base", config_to_json(base_cfg)}, {"fractions", fractions}, {"classifiers", names}};
  for (const auto& c : classifiers) r.series.push_back({c.name, c.classifier, {}});

  r.skipped = cache.skipped(base_cfg);
  double load = 0.0, feats = 0.0, train = 0.0, eval = 0.0;
  for (double f : fractions) {
    for (std::size_t k = 0; k < classifiers.size(); ++k) {
      json cj = base;
      cj["scramble_fraction"] = f;
      cj["classifier"] = classifiers[k].classifier;
      const ExperimentConfig cfg = config_from_json(cj, base_dir);
      const auto& data = cache.features(cfg, &load, &feats);
      const auto parts = split_dataset(data, cfg);
      const auto ev = evaluate(effective_classifier(cfg), data, parts, t);
      train += ev.train_seconds;
      eval += ev.evaluate_seconds;
      r.series[k].points.push_back({f, ev.confusion.accuracy()});
    }
  }
  r.timing = {{"load", load}, {"features", feats}, {"train", train}, {"evaluate", eval},
              {"total", FeatureCache::elapsed(start)}};
  return r;
}

}  // namespace opseq
