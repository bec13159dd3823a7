#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "opseq/classify/dataset.hpp"
#include "opseq/random.hpp"

namespace opseq {

inline void validate_fractions(std::span<const double> fractions) {
  if (fractions.empty()) throw ConfigError("split needs at least one fraction");
  double sum = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw ConfigError("split fractions must be positive");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
}

// Partition sizes for n items by largest remainder; leftover items go to the
// largest fractional parts, ties to the earlier partition.
inline std::vector<std::size_t> apportion(std::size_t n, std::span<const double> fractions) {
  std::vector<std::size_t> sizes(fractions.size());
  std::vector<std::pair<double, std::size_t>> rem;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    const double exact = fractions[k] * static_cast<double>(n);
    sizes[k] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += sizes[k];
    rem.push_back({exact - static_cast<double>(sizes[k]), k});
  }
  std::stable_sort(rem.begin(), rem.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++sizes[rem[i % rem.size()].second];
  return sizes;
}

// Stratified split of row indices: each class is shuffled with its own
// derived seed and cut by `fractions`. Partitions list rows in ascending order.
inline std::vector<std::vector<std::size_t>> stratified_split(std::span<const Label> labels,
                                                              std::size_t class_count,
                                                              std::span<const double> fractions, Seed seed) {
  validate_fractions(fractions);
  std::vector<std::vector<std::size_t>> by_class(class_count);
  for (std::size_t i = 0; i < labels.size(); ++i) by_class[static_cast<std::size_t>(labels[i])].push_back(i);

  std::vector<std::vector<std::size_t>> parts(fractions.size());
  for (std::size_t c = 0; c < class_count; ++c) {
    auto& rows = by_class[c];
    if (rows.empty()) continue;
    if (rows.size() < fractions.size())
      throw DataError("class " + std::to_string(c) + " has " + std::to_string(rows.size()) +
                      " samples, fewer than the " + std::to_string(fractions.size()) + " partitions");
    Rng rng(derive_seed(seed, c));
    std::shuffle(rows.begin(), rows.end(), rng);
    const auto sizes = apportion(rows.size(), fractions);
    std::size_t at = 0;
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      parts[k].insert(parts[k].end(), rows.begin() + static_cast<std::ptrdiff_t>(at),
                      rows.begin() + static_cast<std::ptrdiff_t>(at + sizes[k]));
      at += sizes[k];
    }
  }
  for (auto& p : parts) std::sort(p.begin(), p.end());
  return parts;
}

}  // namespace opseq
