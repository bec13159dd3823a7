#pragma once

// Independent reference computations used by the unit and acceptance tests.
// Nothing here calls into the code paths it is used to check.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "opseq/classify/dataset.hpp"
#include "opseq/hmm.hpp"

namespace oracle {

using opseq::HmmModel;
using opseq::Matrix;
using opseq::Rng;
using opseq::Symbol;

// Row-stochastic model with every entry bounded away from zero.
inline HmmModel random_stochastic_model(std::size_t N, std::size_t M, Rng& rng) {
  auto fill = [&](std::span<double> row) {
    double s = 0;
    for (double& v : row) {
      v = opseq::uniform(rng, 0.05, 1.0);
      s += v;
    }
    for (double& v : row) v /= s;
  };
  HmmModel m{Matrix(N, N), Matrix(N, M), std::vector<double>(N), 0, 0, 0};
  fill(m.pi);
  for (std::size_t i = 0; i < N; ++i) fill(m.A.row(i));
  for (std::size_t i = 0; i < N; ++i) fill(m.B.row(i));
  return m;
}

// P(O | model) as the sum over all N^T state paths.
inline double brute_force_probability(const HmmModel& m, const std::vector<Symbol>& seq) {
  const std::size_t N = m.N(), T = seq.size();
  std::vector<std::size_t> path(T, 0);
  double total = 0.0;
  while (true) {
    double p = m.pi[path[0]] * m.B(path[0], seq[0]);
    for (std::size_t t = 1; t < T; ++t) p *= m.A(path[t - 1], path[t]) * m.B(path[t], seq[t]);
    total += p;
    std::size_t k = 0;
    while (k < T && ++path[k] == N) path[k++] = 0;
    if (k == T) break;
  }
  return total;
}

// Two persistent states with emission rows (0.9, 0.1) and (0.1, 0.9).
inline HmmModel planted_two_state_model() {
  return {Matrix::from_rows({{0.9, 0.1}, {0.2, 0.8}}), Matrix::from_rows({{0.9, 0.1}, {0.1, 0.9}}),
          {0.5, 0.5}, 0, 0, 0};
}

// Smallest max-abs entry difference over all row permutations of `est`.
inline double permuted_emission_error(const Matrix& est, const Matrix& truth) {
  std::vector<std::size_t> perm(truth.rows());
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double worst = 0.0;
    for (std::size_t r = 0; r < truth.rows(); ++r)
      for (std::size_t c = 0; c < truth.cols(); ++c)
        worst = std::max(worst, std::abs(est(perm[r], c) - truth(r, c)));
    best = std::min(best, worst);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// kNN by sorting every training point.
inline opseq::Label brute_force_knn(const opseq::LabeledDataset& train, std::size_t k,
                                    std::span<const double> q) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < train.size(); ++i) {
    double s = 0;
    for (std::size_t j = 0; j < q.size(); ++j) s += (train.X(i, j) - q[j]) * (train.X(i, j) - q[j]);
    d.push_back({s, i});
  }
  std::sort(d.begin(), d.end());
  std::vector<int> votes(train.class_count, 0);
  for (std::size_t i = 0; i < k; ++i) ++votes[static_cast<std::size_t>(train.y[d[i].second])];
  int best = 0;
  for (std::size_t c = 1; c < votes.size(); ++c)
    if (votes[c] > votes[static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  return best;
}

// Euclidean projection onto {0 <= a <= C, y.a = 0}: a = clip(z - lambda*y),
// lambda found by bisection on the monotone constraint residual.
inline std::vector<double> project_dual(const std::vector<double>& z, const std::vector<double>& y, double C) {
  auto residual = [&](double lam) {
    double s = 0;
    for (std::size_t i = 0; i < z.size(); ++i) s += y[i] * std::clamp(z[i] - lam * y[i], 0.0, C);
    return s;
  };
  double lo = -1.0, hi = 1.0;
  while (residual(lo) < 0) lo *= 2;
  while (residual(hi) > 0) hi *= 2;
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (residual(mid) > 0 ? lo : hi) = mid;
  }
  const double lam = 0.5 * (lo + hi);
  std::vector<double> a(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) a[i] = std::clamp(z[i] - lam * y[i], 0.0, C);
  return a;
}

// Maximizes sum(a) - 0.5 a'Qa over the dual feasible set (linear kernel) by
// accelerated projected gradient. Returns the dual objective.
inline double reference_svm_dual(const Matrix& X, const std::vector<double>& y, double C,
                                 int iterations = 20000) {
  const std::size_t n = X.rows();
  Matrix Q(n, n);
  double trace = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double k = 0;
      for (std::size_t d = 0; d < X.cols(); ++d) k += X(i, d) * X(j, d);
      Q(i, j) = y[i] * y[j] * k;
      if (i == j) trace += Q(i, i);
    }
  // Lipschitz bound by power iteration.
  std::vector<double> v(n, 1.0), w(n);
  double L = trace;
  for (int it = 0; it < 200; ++it) {
    double norm = 0;
    for (std::size_t i = 0; i < n; ++i) {
      w[i] = 0;
      for (std::size_t j = 0; j < n; ++j) w[i] += Q(i, j) * v[j];
      norm += w[i] * w[i];
    }
    norm = std::sqrt(norm);
    if (norm == 0) break;
    L = norm;
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / norm;
  }
  L *= 1.01;

  auto objective = [&](const std::vector<double>& a) {
    double lin = 0, quad = 0;
    for (std::size_t i = 0; i < n; ++i) {
      lin += a[i];
      for (std::size_t j = 0; j < n; ++j) quad += a[i] * Q(i, j) * a[j];
    }
    return lin - 0.5 * quad;
  };

  std::vector<double> a(n, 0.0), a_prev = a, yk = a, z(n);
  double t = 1.0;
  double best = objective(a);
  for (int it = 0; it < iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      double g = 1.0;
      for (std::size_t j = 0; j < n; ++j) g -= Q(i, j) * yk[j];
      z[i] = yk[i] + g / L;
    }
    a_prev = a;
    a = project_dual(z, y, C);
    const double t_next = 0.5 * (1 + std::sqrt(1 + 4 * t * t));
    for (std::size_t i = 0; i < n; ++i) yk[i] = a[i] + ((t - 1) / t_next) * (a[i] - a_prev[i]);
    t = t_next;
    if (it % 500 == 499) best = std::max(best, objective(a));
  }
  return std::max(best, objective(a));
}

}  // namespace oracle
