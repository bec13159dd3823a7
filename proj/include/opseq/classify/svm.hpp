#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "opseq/classify/dataset.hpp"
#include "opseq/parallel.hpp"
#include "opseq/random.hpp"

namespace opseq {

enum class Kernel { linear, rbf };

struct SvmParams {
  Kernel kernel = Kernel::linear;
  double C = 1.0;
  double gamma = 0.001;  // rbf: K(x, z) = exp(-gamma * |x - z|^2)
  double tol = 1e-3;
  int max_passes = 5;
  long max_steps = 10'000'000;
  Seed seed = 0;

  void validate() const {
    if (!(C > 0.0)) throw ConfigError("SVM penalty C must be positive");
    if (kernel == Kernel::rbf && !(gamma > 0.0)) throw ConfigError("RBF gamma must be positive");
    if (!(tol > 0.0) || max_passes < 1) throw ConfigError("SVM tol must be > 0 and max_passes >= 1");
  }
};

inline double kernel_value(Kernel k, double gamma, std::span<const double> a,
                           std::span<const double> b) noexcept {
  return k == Kernel::linear ? dot(a, b) : std::exp(-gamma * squared_distance(a, b));
}

// Binary machine: f(x) = sum_i coef_i K(sv_i, x) + b, positive side > 0.
struct BinarySvm {
  Kernel kernel = Kernel::linear;
  double gamma = 0.0;
  Matrix support;             // support vectors (rbf only)
  std::vector<double> coef;   // alpha_i * y_i per support vector
  std::vector<double> w;      // primal weights (linear only)
  double b = 0.0;

  double decision(std::span<const double> x) const {
    if (kernel == Kernel::linear) {
      check_query(x, w.size());
      return dot(w, x) + b;
    }
    check_query(x, support.cols());
    double f = b;
    for (std::size_t i = 0; i < coef.size(); ++i)
      f += coef[i] * kernel_value(kernel, gamma, support.row(i), x);
    return f;
  }
};

struct SmoResult {
  BinarySvm machine;
  std::vector<double> alpha;
  double dual_objective = 0.0;
  double kkt_residual = 0.0;
  long steps = 0;
};

// Largest KKT violation of (alpha, f) where f_i = y_i * decision(x_i):
// alpha = 0 needs f >= 1, alpha = C needs f <= 1, free alphas need f = 1.
inline double kkt_residual(std::span<const double> alpha, std::span<const double> margins, double C) {
  double worst = 0.0;
  for (std::size_t i = 0; i < alpha.size(); ++i) {
    const double r = margins[i] - 1.0;
    if (alpha[i] < C) worst = std::max(worst, -r);
    if (alpha[i] > 0.0) worst = std::max(worst, r);
  }
  return worst;
}

// Soft-margin dual by sequential minimal optimization. Each sweep visits every
// KKT violator i and pairs it with a seeded random j; when that pair cannot
// move, the remaining j are tried from a random offset. Stops after
// max_passes consecutive sweeps with no update. y must be +1 / -1.
inline SmoResult smo_solve(const Matrix& X, std::span<const double> y, const SvmParams& p) {
  p.validate();
  const std::size_t n = X.rows();
  if (n == 0) throw DataError("SVM training set is empty");

  Matrix K(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i; j < n; ++j)
      K(i, j) = K(j, i) = kernel_value(p.kernel, p.gamma, X.row(i), X.row(j));

  std::vector<double> alpha(n, 0.0);
  std::vector<double> g(n, 0.0);  // g_i = sum_j alpha_j y_j K_ij
  double b = 0.0;
  const double C = p.C;
  Rng rng(p.seed);
  long steps = 0;

  auto error = [&](std::size_t i) { return g[i] + b - y[i]; };

  auto take_step = [&](std::size_t i, std::size_t j) {
    if (i == j) return false;
    const double ai = alpha[i], aj = alpha[j];
    const double Ei = error(i), Ej = error(j);
    double L, H;
    if (y[i] != y[j]) {
      L = std::max(0.0, aj - ai);
      H = std::min(C, C + aj - ai);
    } else {
      L = std::max(0.0, ai + aj - C);
      H = std::min(C, ai + aj);
    }
    if (H - L < 1e-12) return false;
    const double eta = 2.0 * K(i, j) - K(i, i) - K(j, j);
    if (eta >= 0.0) return false;
    double aj_new = std::clamp(aj - y[j] * (Ei - Ej) / eta, L, H);
    if (std::abs(aj_new - aj) < 1e-12 * (1.0 + aj_new + aj)) return false;
    double ai_new = ai + y[i] * y[j] * (aj - aj_new);
    // Snap values within rounding of a bound onto it.
    const double eps = 1e-12 * C;
    if (ai_new < eps) ai_new = 0.0;
    if (ai_new > C - eps) ai_new = C;
    if (aj_new < eps) aj_new = 0.0;
    if (aj_new > C - eps) aj_new = C;

    const double di = y[i] * (ai_new - ai);
    const double dj = y[j] * (aj_new - aj);
    const double b1 = b - Ei - di * K(i, i) - dj * K(i, j);
    const double b2 = b - Ej - di * K(i, j) - dj * K(j, j);
    if (ai_new > 0.0 && ai_new < C)
      b = b1;
    else if (aj_new > 0.0 && aj_new < C)
      b = b2;
    else
      b = 0.5 * (b1 + b2);
    alpha[i] = ai_new;
    alpha[j] = aj_new;
    for (std::size_t k = 0; k < n; ++k) g[k] += di * K(i, k) + dj * K(j, k);
    ++steps;
    return true;
  };

  int passes = 0;
  while (passes < p.max_passes && steps < p.max_steps) {
    std::size_t changed = 0;
    for (std::size_t i = 0; i < n && steps < p.max_steps; ++i) {
      const double r = y[i] * error(i);
      if (!((r < -p.tol && alpha[i] < C) || (r > p.tol && alpha[i] > 0.0))) continue;
      if (n < 2) break;
      std::size_t j = uniform_index(rng, 0, n - 2);
      if (j >= i) ++j;
      bool moved = take_step(i, j);
      if (!moved) {
        const std::size_t start = uniform_index(rng, 0, n - 1);
        for (std::size_t k = 0; k < n && !moved; ++k) moved = take_step(i, (start + k) % n);
      }
      if (moved) ++changed;
    }
    passes = changed == 0 ? passes + 1 : 0;
  }

  SmoResult res;
  std::vector<double> margins(n);
  double sum_alpha = 0.0, quad = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    margins[i] = y[i] * (g[i] + b);
    sum_alpha += alpha[i];
    quad += alpha[i] * y[i] * g[i];
  }
  res.dual_objective = sum_alpha - 0.5 * quad;
  res.kkt_residual = kkt_residual(alpha, margins, C);
  res.steps = steps;

  BinarySvm& m = res.machine;
  m.kernel = p.kernel;
  m.gamma = p.gamma;
  m.b = b;
  if (p.kernel == Kernel::linear) {
    m.w.assign(X.cols(), 0.0);
    for (std::size_t i = 0; i < n; ++i)
      if (alpha[i] > 0.0)
        for (std::size_t d = 0; d < X.cols(); ++d) m.w[d] += alpha[i] * y[i] * X(i, d);
  } else {
    std::vector<std::size_t> sv;
    for (std::size_t i = 0; i < n; ++i)
      if (alpha[i] > 0.0) sv.push_back(i);
    m.support = Matrix(sv.size(), X.cols());
    for (std::size_t k = 0; k < sv.size(); ++k) {
      std::copy(X.row(sv[k]).begin(), X.row(sv[k]).end(), m.support.row(k).begin());
      m.coef.push_back(alpha[sv[k]] * y[sv[k]]);
    }
  }
  res.alpha = std::move(alpha);
  return res;
}

// Binary SVM on a dataset holding exactly two labels; the larger label is
// the positive side.
struct BinarySvmModel {
  BinarySvm machine;
  Label positive = 1;
  Label negative = 0;
};

inline BinarySvmModel svm_train(const LabeledDataset& data, const SvmParams& params) {
  std::vector<Label> present(data.y.begin(), data.y.end());
  std::sort(present.begin(), present.end());
  present.erase(std::unique(present.begin(), present.end()), present.end());
  if (present.size() != 2)
    throw DataError("binary SVM needs exactly 2 classes, found " + std::to_string(present.size()));
  std::vector<double> y(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) y[i] = data.y[i] == present[1] ? 1.0 : -1.0;
  return {smo_solve(data.X, y, params).machine, present[1], present[0]};
}

inline Label predict(const BinarySvmModel& m, std::span<const double> query) {
  return m.machine.decision(query) > 0.0 ? m.positive : m.negative;
}

// One-vs-rest: machine c separates class c (positive) from all others.
struct OvrSvmModel {
  std::vector<BinarySvm> machines;
};

inline OvrSvmModel svm_train_ovr(const LabeledDataset& data, const SvmParams& params,
                                 unsigned threads = 1) {
  data.validate();
  if (data.class_count < 2) throw DataError("SVM needs at least 2 classes");
  OvrSvmModel model;
  model.machines.resize(data.class_count);
  parallel_for(data.class_count, threads, [&](std::size_t c) {
    std::vector<double> y(data.size());
    bool any_pos = false, any_neg = false;
    for (std::size_t i = 0; i < data.size(); ++i) {
      y[i] = static_cast<std::size_t>(data.y[i]) == c ? 1.0 : -1.0;
      (y[i] > 0 ? any_pos : any_neg) = true;
    }
    if (!any_pos || !any_neg)
      throw DataError("class " + std::to_string(c) + " has no training samples on one side");
    SvmParams pc = params;
    pc.seed = derive_seed(params.seed, c);
    model.machines[c] = smo_solve(data.X, y, pc).machine;
  });
  return model;
}

// Argmax of the per-class decision values; ties to the smaller label.
inline Label svm_predict_multiclass(std::span<const BinarySvm> machines, std::size_t class_count,
                                    std::span<const double> query) {
  if (machines.size() != class_count)
    throw DataError("one-vs-rest needs one machine per class: have " +
                    std::to_string(machines.size()) + " for " + std::to_string(class_count) +
                    " classes");
  std::vector<double> scores(class_count);
  for (std::size_t c = 0; c < class_count; ++c) scores[c] = machines[c].decision(query);
  return argmax_label(scores);
}

inline Label predict(const OvrSvmModel& m, std::span<const double> query) {
  return svm_predict_multiclass(m.machines, m.machines.size(), query);
}

}  // namespace opseq
