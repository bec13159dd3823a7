#include <gtest/gtest.h>

#include <set>

#include "opseq/harness/presets.hpp"

using namespace opseq;

namespace {

std::vector<Label> balanced_labels(std::size_t classes, std::size_t per) {
  std::vector<Label> y;
  for (std::size_t i = 0; i < classes * per; ++i) y.push_back(static_cast<Label>(i % classes));
  return y;
}

// Small, fast configs over the planted families.
json small_w2v_config() {
  return {{"synthetic", presets::planted7_corpus(8, 150, 250, 3)},
          {"feature", "word2vec"}, {"M", 31}, {"N", 4}, {"W", 2},
          {"word2vec", {{"epochs", 2}}},
          {"classifier", {{"algo", "svm"}, {"params", {{"kernel", "linear"}, {"C", 10}}}}},
          {"split", {0.5, 0.5}}, {"seed", 5}, {"threads", 2}};
}

json small_hmm_config() {
  return {{"synthetic", presets::planted7_corpus(4, 200, 300, 3)},
          {"feature", "hmm2vec"}, {"M", 31}, {"N", 2},
          {"hmm", {{"restarts", 2}, {"max_iters", 30}}},
          {"classifier", {{"algo", "rf"}, {"params", presets::rf_hmm2vec_params(20)}}},
          {"split", {0.5, 0.5}}, {"seed", 5}, {"threads", 2}};
}

}  // namespace

TEST(Split, SevenFamiliesSeventyThirty) {
  const auto y = balanced_labels(7, 1000);
  const std::vector<double> f{0.7, 0.3};
  const auto parts = stratified_split(y, 7, f, 42);
  ASSERT_EQ(parts.size(), 2u);
  EXPECT_EQ(parts[0].size(), 4900u);
  EXPECT_EQ(parts[1].size(), 2100u);
  for (std::size_t k = 0; k < 2; ++k) {
    std::vector<std::size_t> per(7, 0);
    for (std::size_t i : parts[k]) ++per[static_cast<std::size_t>(y[i])];
    for (std::size_t c = 0; c < 7; ++c) EXPECT_EQ(per[c], k == 0 ? 700u : 300u);
  }
  std::set<std::size_t> all(parts[0].begin(), parts[0].end());
  all.insert(parts[1].begin(), parts[1].end());
  EXPECT_EQ(all.size(), y.size());
}

TEST(Split, SingleFractionIsTheInput) {
  const auto y = balanced_labels(3, 5);
  const std::vector<double> f{1.0};
  const auto parts = stratified_split(y, 3, f, 1);
  ASSERT_EQ(parts.size(), 1u);
  std::vector<std::size_t> expected(y.size());
  std::iota(expected.begin(), expected.end(), 0);
  EXPECT_EQ(parts[0], expected);
}

TEST(Split, DeterministicAndSeedSensitive) {
  const auto y = balanced_labels(4, 50);
  const std::vector<double> f{0.8, 0.1, 0.1};
  EXPECT_EQ(stratified_split(y, 4, f, 9), stratified_split(y, 4, f, 9));
  EXPECT_NE(stratified_split(y, 4, f, 9), stratified_split(y, 4, f, 10));
}

TEST(Split, LargestRemainderRounding) {
  const std::vector<double> f{0.8, 0.1, 0.1};
  EXPECT_EQ(apportion(10, f), (std::vector<std::size_t>{8, 1, 1}));
  EXPECT_EQ(apportion(7, f), (std::vector<std::size_t>{5, 1, 1}));
  const std::vector<double> half{0.5, 0.5};
  EXPECT_EQ(apportion(5, half), (std::vector<std::size_t>{3, 2}));
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t n = uniform_index(rng, 0, 500);
    const auto sizes = apportion(n, f);
    EXPECT_EQ(sizes[0] + sizes[1] + sizes[2], n);
    for (std::size_t k = 0; k < 3; ++k) EXPECT_LE(std::abs(double(sizes[k]) - f[k] * double(n)), 1.0);
  }
}

TEST(Split, Errors) {
  const auto y = balanced_labels(2, 2);
  const std::vector<double> three{0.5, 0.25, 0.25}, bad_sum{0.5, 0.4}, zero{1.0, 0.0};
  EXPECT_THROW(stratified_split(y, 2, three, 1), DataError);
  EXPECT_THROW(stratified_split(y, 2, bad_sum, 1), ConfigError);
  EXPECT_THROW(stratified_split(y, 2, zero, 1), ConfigError);
}

TEST(Config, ParsesAndEchoes) {
  const auto c = config_from_json(small_hmm_config());
  EXPECT_EQ(c.feature, Provenance::hmm2vec);
  EXPECT_EQ(c.hmm.restarts.restarts_for(10), 2);
  EXPECT_EQ(c.classifier.algo, Algo::rf);
  const json echo = config_to_json(c);
  EXPECT_FALSE(echo.contains("threads"));
  EXPECT_EQ(echo["classifier"]["params"]["seed"], derive_seed(5, "classifier"));
  // The echo is itself a valid config describing the same run.
  EXPECT_EQ(config_to_json(config_from_json(echo)), echo);
}

TEST(Config, Errors) {
  auto j = small_w2v_config();
  j["colour"] = 1;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = small_w2v_config();
  j["manifest"] = "x.json";
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = small_w2v_config();
  j["split"] = {0.6, 0.3};
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = small_w2v_config();
  j["split"] = {1.0};
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = small_hmm_config();
  j["N"] = 3;
  EXPECT_THROW(config_from_json(j), ConfigError);
  j["hmm"]["allow_general_n"] = true;
  EXPECT_NO_THROW(config_from_json(j));
  j = small_w2v_config();
  j["classifier"]["params"]["kernel"] = "poly";
  EXPECT_THROW(config_from_json(j), ConfigError);
  j = small_w2v_config();
  j["scramble_fraction"] = 1.5;
  EXPECT_THROW(config_from_json(j), ConfigError);
  EXPECT_THROW(load_config("/nonexistent/config.json"), ConfigError);
}

TEST(Experiment, DeterministicAcrossRunsAndThreads) {
  auto j = small_w2v_config();
  const auto a = run_experiment(config_from_json(j));
  const auto b = run_experiment(config_from_json(j));
  EXPECT_EQ(comparable(a).dump(), comparable(b).dump());
  j["threads"] = 1;
  const auto c = run_experiment(config_from_json(j));
  EXPECT_EQ(comparable(a).dump(), comparable(c).dump());
  EXPECT_EQ(a.train_size + a.test_size, 56u);
  EXPECT_DOUBLE_EQ(a.accuracy, a.confusion.accuracy());
  for (std::size_t f = 0; f < 7; ++f) {
    std::size_t row = 0;
    for (std::size_t v : a.confusion.counts[f]) row += v;
    EXPECT_EQ(row, 4u);
  }
  for (const char* k : {"load", "features", "train", "evaluate", "total"}) EXPECT_TRUE(a.timing.contains(k));
}

TEST(Experiment, HmmPipelineIsDeterministic) {
  const auto cfg = config_from_json(small_hmm_config());
  const auto a = run_experiment(cfg);
  const auto b = run_experiment(cfg);
  EXPECT_EQ(comparable(a).dump(), comparable(b).dump());
  EXPECT_GE(a.accuracy, 0.0);
  EXPECT_LE(a.accuracy, 1.0);
}

TEST(Experiment, ScrambleZeroMatchesUnscrambled) {
  auto j = small_w2v_config();
  const auto base = run_experiment(config_from_json(j));
  j["scramble_fraction"] = 0.0;
  const auto zero = run_experiment(config_from_json(j));
  EXPECT_EQ(comparable(base).dump(), comparable(zero).dump());
  j["scramble_fraction"] = 0.3;
  const auto scrambled = run_experiment(config_from_json(j));
  EXPECT_NE(comparable(base)["config"], comparable(scrambled)["config"]);
}

TEST(Experiment, ThreeWaySplitFeedsValidationToNetworkOnly) {
  auto j = small_w2v_config();
  j["split"] = {0.5, 0.25, 0.25};
  const auto svm = run_experiment(config_from_json(j));
  EXPECT_EQ(svm.train_size, 42u);
  EXPECT_EQ(svm.test_size, 14u);
  EXPECT_FALSE(svm.curves);

  j["classifier"] = {{"algo", "nn"}, {"params", {{"hidden", {8}}, {"epochs", 5}}}};
  const auto nn = run_experiment(config_from_json(j));
  EXPECT_EQ(nn.train_size, 28u);
  ASSERT_TRUE(nn.curves);
  EXPECT_EQ(nn.curves->val_accuracy.size(), 5u);
  EXPECT_TRUE(report_to_json(nn).contains("curves"));
}

TEST(Experiment, ShortSamplesAreSkippedAndErrorsNameStageAndSample) {
  const fs::path dir = fs::temp_directory_path() / "opseq_test_harness_errors";
  fs::remove_all(dir);
  auto ops = [](const std::string& pattern, int reps) {
    std::string s;
    for (int r = 0; r < reps; ++r) s += pattern;
    return s;
  };
  write_text_file(dir / "a1.ops", ops("mov\nmov\npush\n", 4));
  write_text_file(dir / "a2.ops", ops("mov\npush\nmov\n", 4));
  write_text_file(dir / "b1.ops", ops("push\nadd\npush\n", 5));
  write_text_file(dir / "b2.ops", "add\nmov\n");
  write_text_file(dir / "b3.ops", ops("push\npush\nmov\n", 4));
  json manifest{{"families", {"a", "b"}}, {"entries", json::array()}};
  for (const char* id : {"a1", "a2", "b1", "b2", "b3"})
    manifest["entries"].push_back({{"id", id}, {"family", std::string(1, id[0])}, {"path", std::string(id) + ".ops"}});
  write_json_file(dir / "manifest.json", manifest);

  std::vector<std::string> warnings;
  const auto saved = warning_sink();
  warning_sink() = [&](const std::string& m) { warnings.push_back(m); };
  json j{{"manifest", "manifest.json"}, {"M", 2}, {"hmm", {{"restarts", 1}, {"max_iters", 5}}},
         {"classifier", {{"algo", "knn"}, {"params", {{"k", 1}}}}}, {"split", {0.5, 0.5}}};
  const auto r = run_experiment(config_from_json(j, dir));
  EXPECT_EQ(r.skipped, std::vector<std::string>{"b2"});
  EXPECT_EQ(r.train_size + r.test_size, 4u);
  ASSERT_EQ(warnings.size(), 1u);
  EXPECT_NE(warnings[0].find("b2"), std::string::npos);
  EXPECT_EQ(report_from_json(report_to_json(r)).skipped, r.skipped);

  j["min_length"] = 1;
  try {
    run_experiment(config_from_json(j, dir));
    ADD_FAILURE() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("[hmm, sample b2]"), std::string::npos) << e.what();
  }

  j["M"] = 5;
  try {
    run_experiment(config_from_json(j, dir));
    ADD_FAILURE() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("[vocabulary]"), std::string::npos) << e.what();
  }

  j["manifest"] = "missing.json";
  try {
    run_experiment(config_from_json(j, dir));
    ADD_FAILURE() << "expected an error";
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("[load]"), std::string::npos) << e.what();
  }
  warning_sink() = saved;
  fs::remove_all(dir);
}

TEST(Experiment, ManifestCorpusMatchesInlineSynthetic) {
  const fs::path dir = fs::temp_directory_path() / "opseq_test_harness_manifest";
  fs::remove_all(dir);
  auto j = small_w2v_config();
  write_synthetic_corpus(generate(synth_spec_from_json(j["synthetic"])), dir);
  const auto inline_run = run_experiment(config_from_json(j));
  j.erase("synthetic");
  j["manifest"] = "manifest.json";
  const auto file_run = run_experiment(config_from_json(j, dir));
  EXPECT_EQ(file_run.confusion, inline_run.confusion);
  fs::remove_all(dir);
}

TEST(Grid, PointsAreCartesianPerGrid) {
  const auto svm = grid_points(presets::svm_grid());
  ASSERT_EQ(svm.size(), 12u);
  std::set<std::string> distinct;
  for (const auto& p : svm) distinct.insert(p.dump());
  EXPECT_EQ(distinct.size(), 12u);
  std::size_t rbf = 0;
  for (const auto& p : svm) rbf += p["classifier.params.kernel"] == "rbf";
  EXPECT_EQ(rbf, 8u);

  const auto w2v = grid_points(presets::word2vec_sweep());
  ASSERT_EQ(w2v.size(), 15u);
  std::set<std::pair<int, int>> nw;
  for (const auto& p : w2v) nw.insert({p["N"].get<int>(), p["W"].get<int>()});
  EXPECT_EQ(nw.size(), 15u);
  EXPECT_EQ(grid_points(presets::knn_sweep()).size(), 100u);
}

TEST(Grid, SpecParsing) {
  const auto g = grid_spec_from_json(json::parse(R"({"classifier.params.C": [1, 2]})"));
  EXPECT_EQ(grid_points(g).size(), 2u);
  EXPECT_THROW(grid_spec_from_json(json::parse(R"({"grids": []})")), ConfigError);
  EXPECT_THROW(grid_spec_from_json(json::parse(R"({"C": []})")), ConfigError);
  EXPECT_THROW(grid_spec_from_json(json::parse(R"({"grids": [{"C": [1]}], "mode": "bayes"})")), ConfigError);
  const auto round = grid_spec_from_json(grid_spec_to_json(presets::knn_sweep()));
  EXPECT_EQ(grid_points(round), grid_points(presets::knn_sweep()));
  EXPECT_EQ(round.flag, presets::knn_sweep().flag);
  const auto list = grid_spec_from_json(json::parse(R"([{"C": [1, 2]}, {"C": [3], "k": [4, 5]}])"));
  EXPECT_EQ(grid_points(list).size(), 4u);
}

TEST(Grid, DottedPaths) {
  json j{{"a", {{"b", 1}}}};
  set_dotted(j, "a.c.d", 5);
  EXPECT_EQ(j["a"]["c"]["d"], 5);
  EXPECT_EQ(get_dotted(j, "a.b"), json(1));
  EXPECT_FALSE(get_dotted(j, "a.x"));
  EXPECT_THROW(set_dotted(j, "a.b.c", 1), ConfigError);
  EXPECT_THROW(set_dotted(j, "a..b", 1), ConfigError);
}

TEST(Grid, SingletonEqualsExperiment) {
  const json base = small_w2v_config();
  GridSpec g;
  g.grids.push_back({{"classifier.params.C", json::array({10})}});
  const auto grid = grid_search(base, {}, g);
  const auto single = run_experiment(config_from_json(base));
  ASSERT_EQ(grid.grid.size(), 1u);
  EXPECT_TRUE(grid.grid[0].best);
  EXPECT_EQ(grid.grid[0].accuracy, single.accuracy);
  EXPECT_EQ(grid.confusion, single.confusion);
}

TEST(Grid, SvmPresetTwelveRowsSortedWithBestFirst) {
  const auto r = grid_search(small_w2v_config(), {}, presets::svm_grid());
  ASSERT_EQ(r.grid.size(), 12u);
  EXPECT_TRUE(r.grid[0].best);
  for (std::size_t i = 1; i < r.grid.size(); ++i) {
    EXPECT_FALSE(r.grid[i].best);
    EXPECT_GE(r.grid[i - 1].accuracy, r.grid[i].accuracy);
  }
  std::set<std::size_t> idx;
  for (const auto& row : r.grid) idx.insert(row.index);
  EXPECT_EQ(idx.size(), 12u);
  EXPECT_EQ(r.accuracy, r.grid[0].accuracy);
  EXPECT_EQ(comparable(r).dump(), comparable(grid_search(small_w2v_config(), {}, presets::svm_grid())).dump());
}

TEST(Grid, KnnSweepFlagsOperatingPointAndSwitchesAlgorithm) {
  const auto r = grid_search(small_w2v_config(), {}, presets::knn_sweep(20, 7));
  ASSERT_EQ(r.grid.size(), 20u);
  std::size_t flagged = 0;
  for (const auto& row : r.grid) {
    if (row.flagged) {
      ++flagged;
      EXPECT_EQ(row.point["classifier.params.k"], 7);
    }
  }
  EXPECT_EQ(flagged, 1u);
}

TEST(Grid, RandomModeRespectsBudget) {
  GridSpec g = presets::svm_grid();
  g.random = true;
  g.budget = 5;
  const auto a = grid_search(small_w2v_config(), {}, g);
  EXPECT_EQ(a.grid.size(), 5u);
  const auto b = grid_search(small_w2v_config(), {}, g);
  EXPECT_EQ(comparable(a).dump(), comparable(b).dump());
}

TEST(Grid, FeatureSweepRecomputesFeatures) {
  GridSpec g;
  g.grids.push_back({{"N", {2, 4}}, {"W", {1, 2}}});
  const auto r = grid_search(small_w2v_config(), {}, g);
  EXPECT_EQ(r.grid.size(), 4u);
  GridSpec bad;
  bad.grids.push_back({{"synthetic.samples_per_family", json::array({5})}});
  EXPECT_THROW(grid_search(small_w2v_config(), {}, bad), ConfigError);
}

TEST(Robustness, SeriesShapeAndBaseline) {
  const json base = small_w2v_config();
  const std::vector<double> fractions{0.0, 0.2, 0.4};
  std::vector<NamedClassifier> cls{{"svm", base["classifier"]},
                                   {"knn", {{"algo", "knn"}, {"params", {{"k", 3}}}}}};
  const auto r = robustness_study(base, {}, fractions, cls);
  ASSERT_EQ(r.series.size(), 2u);
  for (const auto& s : r.series) {
    ASSERT_EQ(s.points.size(), fractions.size());
    for (std::size_t i = 0; i < fractions.size(); ++i) EXPECT_EQ(s.points[i].fraction, fractions[i]);
  }
  EXPECT_EQ(r.series[0].points[0].accuracy, run_experiment(config_from_json(base)).accuracy);
  EXPECT_THROW(robustness_study(base, {}, {}), ConfigError);
  EXPECT_THROW(robustness_study(base, {}, {1.5}), ConfigError);
  const auto single = robustness_study(base, {}, {0.0});
  ASSERT_EQ(single.series.size(), 1u);
  EXPECT_EQ(single.series[0].name, "svm");
}
