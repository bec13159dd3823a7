#pragma once

#include <algorithm>
#include <span>
#include <string>
#include <vector>

#include "opseq/error.hpp"
#include "opseq/features.hpp"
#include "opseq/matrix.hpp"

namespace opseq {

using Label = int;

// Feature rows with integer class labels in [0, class_count).
struct LabeledDataset {
  Matrix X;
  std::vector<Label> y;
  std::size_t class_count = 0;
  std::vector<std::string> class_names;  // optional, indexed by label
  std::vector<std::string> sample_ids;   // optional, indexed by row

  std::size_t size() const noexcept { return y.size(); }
  std::size_t dim() const noexcept { return X.cols(); }
  std::span<const double> row(std::size_t i) const noexcept { return X.row(i); }

  void validate() const {
    if (X.rows() != y.size()) throw DataError("dataset has a different number of rows and labels");
    for (Label l : y) {
      if (l < 0 || static_cast<std::size_t>(l) >= class_count)
        throw DataError("label " + std::to_string(l) + " outside [0, " +
                        std::to_string(class_count) + ")");
    }
  }

  LabeledDataset subset(std::span<const std::size_t> rows) const {
    LabeledDataset out;
    out.X = Matrix(rows.size(), dim());
    out.class_count = class_count;
    out.class_names = class_names;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      const auto src = row(rows[k]);
      std::copy(src.begin(), src.end(), out.X.row(k).begin());
      out.y.push_back(y[rows[k]]);
      if (!sample_ids.empty()) out.sample_ids.push_back(sample_ids[rows[k]]);
    }
    return out;
  }
};

// Builds a dataset from feature vectors; label = index of the family in
// `families`.
inline LabeledDataset make_dataset(std::span<const FeatureVector> features,
                                   const std::vector<std::string>& families) {
  LabeledDataset d;
  d.class_count = families.size();
  d.class_names = families;
  if (features.empty()) {
    return d;
  }
  const std::size_t dim = features.front().size();
  d.X = Matrix(features.size(), dim);
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& f = features[i];
    if (f.size() != dim)
      throw DataError("feature vector of " + f.sample_id + " has length " +
                      std::to_string(f.size()) + ", expected " + std::to_string(dim));
    auto it = std::find(families.begin(), families.end(), f.family);
    if (it == families.end()) throw DataError("unknown family '" + f.family + "' for " + f.sample_id);
    std::copy(f.values.begin(), f.values.end(), d.X.row(i).begin());
    d.y.push_back(static_cast<Label>(it - families.begin()));
    d.sample_ids.push_back(f.sample_id);
  }
  return d;
}

inline void check_query(std::span<const double> query, std::size_t dim) {
  if (query.size() != dim)
    throw DataError("query has length " + std::to_string(query.size()) + ", model expects " +
                    std::to_string(dim));
}

// Index of the largest count; ties go to the smaller label.
inline Label argmax_label(std::span<const double> scores) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < scores.size(); ++k)
    if (scores[k] > scores[best]) best = k;
  return static_cast<Label>(best);
}

}  // namespace opseq
