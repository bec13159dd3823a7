#pragma once

#include <string>
#include <vector>

#include "opseq/harness/experiment.hpp"

namespace opseq::presets {

// SVM grid: linear kernel over C, RBF kernel over C x gamma (12 rows).
inline GridSpec svm_grid() {
  GridSpec g;
  g.grids.push_back({{"classifier.algo", json::array({"svm"})},
                     {"classifier.params.kernel", json::array({"linear"})},
                     {"classifier.params.C", {1, 10, 100, 1000}}});
  g.grids.push_back({{"classifier.algo", json::array({"svm"})},
                     {"classifier.params.kernel", json::array({"rbf"})},
                     {"classifier.params.C", {1, 10, 100, 1000}},
                     {"classifier.params.gamma", {0.001, 0.0001}}});
  return g;
}

// kNN sweep over k = 1..100, flagging the operating point k = 70.
inline GridSpec knn_sweep(std::size_t k_max = 100, std::size_t flagged = 70) {
  json ks = json::array();
  for (std::size_t k = 1; k <= k_max; ++k) ks.push_back(k);
  GridSpec g;
  g.grids.push_back({{"classifier.algo", json::array({"knn"})}, {"classifier.params.k", ks}});
  g.flag = {{"classifier.params.k", flagged}};
  return g;
}

// Word2Vec vector length N x window W (15 runs).
inline GridSpec word2vec_sweep() {
  GridSpec g;
  g.grids.push_back({{"feature", json::array({"word2vec"})}, {"N", {2, 31, 100}}, {"W", {1, 5, 10, 30, 100}}});
  return g;
}

// Opcode-count sweep for the binary experiment.
inline GridSpec opcode_count_sweep() {
  GridSpec g;
  g.grids.push_back({{"M", {20, 31, 40}}});
  return g;
}

// Random forest settings: 1000 trees, split 2, leaf 1, max_features auto,
// depth 50, no bootstrap; `trees` rescales the ensemble.
inline json rf_hmm2vec_params(int trees = 1000) {
  return {{"n_estimators", trees}, {"min_samples_split", 2}, {"min_samples_leaf", 1},
          {"max_features", "auto"}, {"max_depth", 50}, {"bootstrap", false}};
}

// Random forest settings for Word2Vec features: 1400 trees, depth 40.
inline json rf_word2vec_params(int trees = 1400) {
  return {{"n_estimators", trees}, {"min_samples_split", 2}, {"min_samples_leaf", 1},
          {"max_features", "auto"}, {"max_depth", 40}, {"bootstrap", false}};
}

// Dense networks: [D, 200, 500, C] with dropout 0.5 for 200 epochs, and
// [D, 20, 200, C] at learning rate 0.0001 for 50 epochs.
inline json nn_wide_params() {
  return {{"hidden", {200, 500}}, {"dropout", 0.5}, {"epochs", 200}, {"optimizer", "adam"},
          {"loss", "cross_entropy"}};
}

inline json nn_narrow_params() {
  return {{"hidden", {20, 200}}, {"learning_rate", 0.0001}, {"epochs", 50}, {"optimizer", "adam"},
          {"loss", "cross_entropy"}};
}

// Desk-scale classifier presets for the robustness study.
inline std::vector<NamedClassifier> robustness_classifiers() {
  return {
      {"knn", {{"algo", "knn"}, {"params", {{"k", "auto"}}}}},
      {"svm", {{"algo", "svm"}, {"params", {{"kernel", "linear"}, {"C", 100}}}}},
      {"rf", {{"algo", "rf"}, {"params", rf_hmm2vec_params(100)}}},
      {"nn", {{"algo", "nn"}, {"params", {{"hidden", json::array({32})}, {"epochs", 50}}}}},
  };
}

inline std::vector<double> robustness_fractions() { return {0.0, 0.1, 0.2, 0.3, 0.4}; }

// Seven planted families, 100 samples each, lengths 1000..3000.
inline json planted7_corpus(std::size_t per_family = 100, std::size_t min_len = 1000,
                            std::size_t max_len = 3000, Seed seed = 7) {
  return {{"preset", "planted7"}, {"samples_per_family", per_family}, {"lengths", {min_len, max_len}},
          {"seed", seed}};
}

// The two-family corpus of the robustness study.
inline json binary_pair_corpus(std::size_t per_family = 60, std::size_t min_len = 1000,
                               std::size_t max_len = 2000, Seed seed = 11) {
  return {{"preset", "binary_pair"}, {"samples_per_family", per_family}, {"lengths", {min_len, max_len}},
          {"seed", seed}};
}

inline json multiclass_hmm2vec_rf(int trees = 200) {
  return {{"synthetic", planted7_corpus()}, {"feature", "hmm2vec"}, {"M", 31}, {"N", 2},
          {"classifier", {{"algo", "rf"}, {"params", rf_hmm2vec_params(trees)}}},
          {"split", {0.7, 0.3}}, {"seed", 1}};
}

inline json multiclass_word2vec_svm() {
  return {{"synthetic", planted7_corpus()}, {"feature", "word2vec"}, {"M", 31}, {"N", 31}, {"W", 1},
          {"classifier", {{"algo", "svm"}, {"params", {{"kernel", "linear"}, {"C", 100}}}}},
          {"split", {0.7, 0.3}}, {"seed", 1}};
}

inline json robustness_base() {
  return {{"synthetic", binary_pair_corpus()}, {"feature", "word2vec"}, {"M", 31}, {"N", 31}, {"W", 1},
          {"classifier", {{"algo", "knn"}, {"params", {{"k", "auto"}}}}},
          {"split", {0.7, 0.3}}, {"seed", 3}};
}

}  // namespace opseq::presets
