#pragma once

#include <algorithm>
#include <span>
#include <utility>
#include <vector>

#include "opseq/classify/dataset.hpp"

namespace opseq {

struct KnnModel {
  std::size_t k = 5;
  LabeledDataset train;
};

// Majority label among the k nearest training points (Euclidean). Equal
// distances prefer the lower training index; equal votes the smaller label.
inline Label knn_predict(const LabeledDataset& train, std::size_t k, std::span<const double> query) {
  if (k < 1 || k > train.size())
    throw ConfigError("k must lie in [1, " + std::to_string(train.size()) + "], got " +
                      std::to_string(k));
  check_query(query, train.dim());

  std::vector<std::pair<double, std::size_t>> dist(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) dist[i] = {squared_distance(train.row(i), query), i};
  std::nth_element(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k - 1), dist.end());

  std::vector<double> votes(train.class_count, 0.0);
  for (std::size_t i = 0; i < k; ++i) votes[static_cast<std::size_t>(train.y[dist[i].second])] += 1.0;
  return argmax_label(votes);
}

inline Label predict(const KnnModel& m, std::span<const double> query) {
  return knn_predict(m.train, m.k, query);
}

}  // namespace opseq
