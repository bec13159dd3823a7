#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "opseq/corpus.hpp"
#include "opseq/error.hpp"
#include "opseq/features.hpp"
#include "opseq/matrix.hpp"
#include "opseq/parallel.hpp"
#include "opseq/random.hpp"

namespace opseq {

// Discrete HMM: A is N x N transitions, B is N x M emissions, pi the initial
// state distribution. All three are row stochastic.
struct HmmModel {
  Matrix A;
  Matrix B;
  std::vector<double> pi;
  double log_likelihood = -std::numeric_limits<double>::infinity();
  int iterations = 0;
  Seed seed = 0;

  std::size_t N() const noexcept { return A.rows(); }
  std::size_t M() const noexcept { return B.cols(); }

  friend bool operator==(const HmmModel&, const HmmModel&) = default;
};

inline void validate_model(const HmmModel& m, double tol = 1e-9) {
  const std::size_t n = m.N();
  if (n == 0 || m.A.cols() != n || m.B.rows() != n || m.pi.size() != n || m.M() == 0)
    throw DataError("HMM shape mismatch: expected A N x N, B N x M, pi length N");
  if (!is_row_stochastic(m.A, tol)) throw DataError("HMM transition matrix A is not row stochastic");
  if (!is_row_stochastic(m.B, tol)) throw DataError("HMM emission matrix B is not row stochastic");
  Matrix pi_row(1, n);
  std::copy(m.pi.begin(), m.pi.end(), pi_row.row(0).begin());
  if (!is_row_stochastic(pi_row, tol)) throw DataError("HMM initial distribution pi is not stochastic");
}

namespace detail {

inline void check_symbols(std::span<const Symbol> seq, std::size_t M) {
  for (std::size_t t = 0; t < seq.size(); ++t) {
    if (seq[t] >= M)
      throw DataError("symbol " + std::to_string(seq[t]) + " at position " + std::to_string(t) +
                      " is outside the model alphabet of size " + std::to_string(M));
  }
}

// Scaled forward pass. Fills alpha (T x N, each row normalized) and returns
// log P(O | model) as the sum of the log normalizers.
inline double forward_scaled(const HmmModel& m, std::span<const Symbol> seq,
                             std::vector<double>& alpha, std::vector<double>& norm) {
  const std::size_t T = seq.size();
  const std::size_t N = m.N();
  alpha.resize(T * N);
  norm.resize(T);

  double ll = 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < N; ++i) {
    alpha[i] = m.pi[i] * m.B(i, seq[0]);
    s += alpha[i];
  }
  norm[0] = s;
  if (s <= 0.0) return -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < N; ++i) alpha[i] /= s;
  ll += std::log(s);

  for (std::size_t t = 1; t < T; ++t) {
    const double* prev = &alpha[(t - 1) * N];
    double* cur = &alpha[t * N];
    const Symbol o = seq[t];
    s = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      double acc = 0.0;
      for (std::size_t i = 0; i < N; ++i) acc += prev[i] * m.A(i, j);
      cur[j] = acc * m.B(j, o);
      s += cur[j];
    }
    norm[t] = s;
    if (s <= 0.0) return -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < N; ++j) cur[j] /= s;
    ll += std::log(s);
  }
  return ll;
}

}  // namespace detail

// log P(O | model) by the scaled forward algorithm. -inf when the sequence is
// impossible under the model.
inline double forward_log_prob(const HmmModel& model, std::span<const Symbol> seq) {
  if (seq.empty()) throw DataError("cannot score an empty sequence");
  detail::check_symbols(seq, model.M());
  std::vector<double> alpha, norm;
  return detail::forward_scaled(model, seq, alpha, norm);
}

struct BaumWelchOptions {
  int max_iters = 500;
  double tol = 1e-6;
  double emission_floor = 1e-10;
};

// Random starting point: each cell is 1/K plus a uniform perturbation of
// half-width min(0.05, 0.5/K), then the row is renormalized.
inline HmmModel random_model(std::size_t N, std::size_t M, Seed seed) {
  Rng rng(seed);
  auto fill = [&](std::span<double> row) {
    const double k = static_cast<double>(row.size());
    const double w = std::min(0.05, 0.5 / k);
    for (double& v : row) v = 1.0 / k + uniform(rng, -w, w);
    normalize_row(row);
  };
  HmmModel m{Matrix(N, N), Matrix(N, M), std::vector<double>(N), 0.0, 0, seed};
  fill(m.pi);
  for (std::size_t i = 0; i < N; ++i) fill(m.A.row(i));
  for (std::size_t i = 0; i < N; ++i) fill(m.B.row(i));
  return m;
}

namespace detail {

// Buffers and expected counts for one Baum-Welch E-step. Emission tables are
// stored symbol-major (M x N) so each time step touches one contiguous row.
struct BaumWelchWorkspace {
  std::vector<double> alpha;            // T x N, rescaled by powers of two
  std::vector<unsigned char> rescaled;  // T, forward rescale events
  std::vector<double> bt;               // M x N, B transposed
  std::vector<double> xi_sum;           // N x N
  std::vector<double> em_sum;           // M x N
  std::vector<double> gamma0;           // N
};

// One restart in flight.
struct BaumWelchRun {
  HmmModel model;
  BaumWelchWorkspace ws;
  double prev_ll = -std::numeric_limits<double>::infinity();
  int iter = 0;
  std::vector<double>* history = nullptr;
};

inline constexpr double kRescaleBelow = 0x1p-256;
inline constexpr double kRescaleBy = 0x1p256;
inline const double kLogRescale = 256.0 * std::log(2.0);

// Forward-backward sweep for kL independent runs over the same sequence,
// interleaved so their dependency chains overlap. Forward variables are kept
// unnormalized and multiplied by 2^256 whenever they fall below 2^-256, which
// is exact. The posterior normalizer sum_i alpha_t(i) beta_t(i) is constant
// between rescale events, so it is only recomputed after one. Writes
// log P(O | model) per run; the expected counts are left in each workspace.
template <std::size_t kN, std::size_t kL>
void e_step(BaumWelchRun* const* runs, std::span<const Symbol> seq, double* ll) {
  const std::size_t N = kN > 0 ? kN : runs[0]->model.N();
  const std::size_t M = runs[0]->model.M();
  const std::size_t T = seq.size();
  const std::size_t stride = 3 * N + N * N;

  const double* A[kL];
  const double* bt[kL];
  double* alpha[kL];
  double* em_sum[kL];
  long rescales[kL];
  for (std::size_t l = 0; l < kL; ++l) {
    auto& ws = runs[l]->ws;
    const auto& m = runs[l]->model;
    ws.alpha.resize(T * N);
    ws.rescaled.assign(T, 0);
    ws.bt.resize(M * N);
    for (std::size_t o = 0; o < M; ++o)
      for (std::size_t j = 0; j < N; ++j) ws.bt[o * N + j] = m.B(j, o);
    ws.xi_sum.assign(N * N, 0.0);
    ws.em_sum.assign(M * N, 0.0);
    ws.gamma0.assign(N, 0.0);
    A[l] = m.A.data().data();
    bt[l] = ws.bt.data();
    alpha[l] = ws.alpha.data();
    em_sum[l] = ws.em_sum.data();
    rescales[l] = 0;
    const double* b = bt[l] + seq[0] * N;
    for (std::size_t i = 0; i < N; ++i) alpha[l][i] = m.pi[i] * b[i];
  }

  for (std::size_t t = 1; t < T; ++t) {
    const std::size_t sym = seq[t] * N;
    for (std::size_t l = 0; l < kL; ++l) {
      const double* prev = alpha[l] + (t - 1) * N;
      double* cur = alpha[l] + t * N;
      const double* b = bt[l] + sym;
      double mx = 0.0;
      for (std::size_t j = 0; j < N; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < N; ++i) acc += prev[i] * A[l][i * N + j];
        cur[j] = acc * b[j];
        mx = std::max(mx, cur[j]);
      }
      if (mx < kRescaleBelow && mx > 0.0) {
        for (std::size_t j = 0; j < N; ++j) cur[j] *= kRescaleBy;
        runs[l]->ws.rescaled[t] = 1;
        ++rescales[l];
      }
    }
  }

  bool live[kL];
  double inv[kL];
  bool stale[kL];
  for (std::size_t l = 0; l < kL; ++l) {
    double last = 0.0;
    for (std::size_t i = 0; i < N; ++i) last += alpha[l][(T - 1) * N + i];
    live[l] = last > 0.0 && std::isfinite(last);
    ll[l] = live[l] ? std::log(last) - static_cast<double>(rescales[l]) * kLogRescale
                    : -std::numeric_limits<double>::infinity();
    inv[l] = 1.0 / last;
    stale[l] = false;
  }

  // Backward sweep with running accumulation of the expected counts. Per run
  // scratch holds beta_{t+1}, beta_t, the emission-weighted beta_{t+1} and
  // the transition counts.
  std::conditional_t<(kN > 0), std::array<double, kL * (3 * kN + kN * kN)>, std::vector<double>>
      scratch{};
  if constexpr (kN == 0) scratch.assign(kL * stride, 0.0);
  for (std::size_t l = 0; l < kL; ++l) {
    if (!live[l]) continue;
    double* beta_next = scratch.data() + l * stride;
    const double* a = alpha[l] + (T - 1) * N;
    double* em = em_sum[l] + seq[T - 1] * N;
    for (std::size_t i = 0; i < N; ++i) {
      beta_next[i] = 1.0;
      em[i] += a[i] * inv[l];
    }
  }
  for (std::size_t t = T - 1; t-- > 0;) {
    const std::size_t sym_next = seq[t + 1] * N;
    const std::size_t sym = seq[t] * N;
    for (std::size_t l = 0; l < kL; ++l) {
      if (!live[l]) continue;
      double* beta_next = scratch.data() + l * stride;
      double* beta = beta_next + N;
      double* w = beta + N;
      double* xi = w + N;
      const double* Al = A[l];
      const double* a = alpha[l] + t * N;
      const double* b = bt[l] + sym_next;
      for (std::size_t j = 0; j < N; ++j) w[j] = b[j] * beta_next[j];
      for (std::size_t i = 0; i < N; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < N; ++j) acc += Al[i * N + j] * w[j];
        beta[i] = acc;
      }
      if (stale[l] || runs[l]->ws.rescaled[t + 1]) {
        double z = 0.0;
        for (std::size_t i = 0; i < N; ++i) z += a[i] * beta[i];
        inv[l] = 1.0 / z;
        stale[l] = false;
      }
      double* em = em_sum[l] + sym;
      double mx = 0.0;
      for (std::size_t i = 0; i < N; ++i) {
        const double ai = a[i] * inv[l];
        for (std::size_t j = 0; j < N; ++j) xi[i * N + j] += ai * w[j];
        em[i] += ai * beta[i];
        mx = std::max(mx, beta[i]);
      }
      if (t == 0)
        for (std::size_t i = 0; i < N; ++i) runs[l]->ws.gamma0[i] = a[i] * beta[i] * inv[l];
      if (mx < kRescaleBelow) {
        for (std::size_t i = 0; i < N; ++i) beta[i] *= kRescaleBy;
        stale[l] = true;
      }
      for (std::size_t i = 0; i < N; ++i) beta_next[i] = beta[i];
    }
  }
  for (std::size_t l = 0; l < kL; ++l) {
    const double* xi = scratch.data() + l * stride + 3 * N;
    for (std::size_t k = 0; k < N * N; ++k) runs[l]->ws.xi_sum[k] = xi[k] * A[l][k];
  }
}

using v2d = double __attribute__((vector_size(16)));

// Two-state specialization of e_step: each per-step quantity is one vector of
// the two state values. Transition counts are accumulated as
// sum_t alpha_t(i) w_t(j) / z and multiplied by A(i, j) once at the end.
template <std::size_t kL>
void e_step_two_state(BaumWelchRun* const* runs, std::span<const Symbol> seq, double* ll) {
  const std::size_t M = runs[0]->model.M();
  const std::size_t T = seq.size();
  const Symbol* o = seq.data();

  std::vector<v2d> storage(kL * (M + T + M));
  v2d* bt[kL];
  v2d* alpha[kL];
  v2d* em[kL];
  unsigned char* flag[kL];
  v2d row0[kL], row1[kL], col0[kL], col1[kL], a[kL];
  long rescales[kL];
  for (std::size_t l = 0; l < kL; ++l) {
    const auto& m = runs[l]->model;
    bt[l] = storage.data() + l * (2 * M + T);
    alpha[l] = bt[l] + M;
    em[l] = alpha[l] + T;
    for (std::size_t k = 0; k < M; ++k) {
      bt[l][k] = v2d{m.B(0, k), m.B(1, k)};
      em[l][k] = v2d{0.0, 0.0};
    }
    runs[l]->ws.rescaled.assign(T, 0);
    flag[l] = runs[l]->ws.rescaled.data();
    row0[l] = v2d{m.A(0, 0), m.A(0, 1)};
    row1[l] = v2d{m.A(1, 0), m.A(1, 1)};
    col0[l] = v2d{m.A(0, 0), m.A(1, 0)};
    col1[l] = v2d{m.A(0, 1), m.A(1, 1)};
    a[l] = v2d{m.pi[0], m.pi[1]} * bt[l][o[0]];
    alpha[l][0] = a[l];
    rescales[l] = 0;
  }

  for (std::size_t t = 1; t < T; ++t) {
    const Symbol sym = o[t];
    for (std::size_t l = 0; l < kL; ++l) {
      v2d n = (a[l][0] * row0[l] + a[l][1] * row1[l]) * bt[l][sym];
      const double mx = std::max(n[0], n[1]);
      if (mx < kRescaleBelow && mx > 0.0) [[unlikely]] {
        n *= kRescaleBy;
        flag[l][t] = 1;
        ++rescales[l];
      }
      a[l] = n;
      alpha[l][t] = n;
    }
  }

  v2d beta[kL], x0[kL], x1[kL], g[kL];
  double inv[kL];
  bool live[kL], stale[kL];
  for (std::size_t l = 0; l < kL; ++l) {
    const double last = a[l][0] + a[l][1];
    live[l] = last > 0.0 && std::isfinite(last);
    ll[l] = live[l] ? std::log(last) - static_cast<double>(rescales[l]) * kLogRescale
                    : -std::numeric_limits<double>::infinity();
    inv[l] = 1.0 / last;
    stale[l] = false;
    beta[l] = v2d{1.0, 1.0};
    x0[l] = x1[l] = v2d{0.0, 0.0};
    g[l] = a[l] * inv[l];
    em[l][o[T - 1]] += g[l];
  }

  for (std::size_t t = T - 1; t-- > 0;) {
    const Symbol sym_next = o[t + 1];
    const Symbol sym = o[t];
    for (std::size_t l = 0; l < kL; ++l) {
      const v2d w = bt[l][sym_next] * beta[l];
      v2d c = w[0] * col0[l] + w[1] * col1[l];
      const v2d p = alpha[l][t];
      if (stale[l] | flag[l][t + 1]) [[unlikely]] {
        const v2d pc = p * c;
        inv[l] = 1.0 / (pc[0] + pc[1]);
        stale[l] = false;
      }
      const v2d q = p * inv[l];
      x0[l] += q[0] * w;
      x1[l] += q[1] * w;
      g[l] = q * c;
      em[l][sym] += g[l];
      if (std::max(c[0], c[1]) < kRescaleBelow) [[unlikely]] {
        c *= kRescaleBy;
        stale[l] = true;
      }
      beta[l] = c;
    }
  }

  for (std::size_t l = 0; l < kL; ++l) {
    auto& ws = runs[l]->ws;
    const v2d xi0 = x0[l] * row0[l], xi1 = x1[l] * row1[l];
    ws.xi_sum = {xi0[0], xi0[1], xi1[0], xi1[1]};
    ws.gamma0 = {g[l][0], g[l][1]};
    ws.em_sum.resize(M * 2);
    for (std::size_t k = 0; k < M; ++k) {
      ws.em_sum[2 * k] = em[l][k][0];
      ws.em_sum[2 * k + 1] = em[l][k][1];
    }
  }
}

template <std::size_t kN>
void e_step_lanes(BaumWelchRun* const* runs, std::size_t lanes, std::span<const Symbol> seq, double* ll) {
  switch (lanes) {
    case 1: return e_step<kN, 1>(runs, seq, ll);
    case 2: return e_step<kN, 2>(runs, seq, ll);
    case 3: return e_step<kN, 3>(runs, seq, ll);
    default: return e_step<kN, 4>(runs, seq, ll);
  }
}

inline constexpr std::size_t kMaxLanes = 4;

inline std::size_t lanes_for(std::size_t N) { return N <= 4 ? kMaxLanes : 1; }

inline void e_step_group(BaumWelchRun* const* runs, std::size_t lanes, std::span<const Symbol> seq,
                         double* ll) {
  switch (runs[0]->model.N()) {
    case 1: return e_step_lanes<1>(runs, lanes, seq, ll);
    case 2:
      switch (lanes) {
        case 1: return e_step_two_state<1>(runs, seq, ll);
        case 2: return e_step_two_state<2>(runs, seq, ll);
        case 3: return e_step_two_state<3>(runs, seq, ll);
        default: return e_step_two_state<4>(runs, seq, ll);
      }
    case 3: return e_step_lanes<3>(runs, lanes, seq, ll);
    case 4: return e_step_lanes<4>(runs, lanes, seq, ll);
    default:
      for (std::size_t l = 0; l < lanes; ++l) e_step<0, 1>(runs + l, seq, ll + l);
  }
}

// Consumes one E-step result. Returns true once the run has stopped;
// otherwise re-estimates the parameters from the expected counts.
inline bool advance(BaumWelchRun& run, double ll, const BaumWelchOptions& opt) {
  if (!std::isfinite(ll))
    throw NumericError("Baum-Welch produced a non-finite log-likelihood at iteration " +
                       std::to_string(run.iter));
  if (run.history) run.history->push_back(ll);
  HmmModel& model = run.model;
  model.log_likelihood = ll;
  if ((run.iter > 0 && ll - run.prev_ll < opt.tol) || run.iter >= opt.max_iters) return true;
  run.prev_ll = ll;

  const std::size_t N = model.N(), M = model.M();
  const auto& ws = run.ws;
  std::copy(ws.gamma0.begin(), ws.gamma0.end(), model.pi.begin());
  normalize_row(model.pi);
  for (std::size_t i = 0; i < N; ++i) {
    auto arow = model.A.row(i);
    std::copy(ws.xi_sum.begin() + static_cast<std::ptrdiff_t>(i * N),
              ws.xi_sum.begin() + static_cast<std::ptrdiff_t>((i + 1) * N), arow.begin());
    normalize_row(arow);

    auto brow = model.B.row(i);
    for (std::size_t o = 0; o < M; ++o) brow[o] = ws.em_sum[o * N + i];
    normalize_row(brow);
    bool floored = false;
    for (double& v : brow) {
      if (v < opt.emission_floor) {
        v = opt.emission_floor;
        floored = true;
      }
    }
    if (floored) normalize_row(brow);
  }
  ++model.iterations;

  if (!is_row_stochastic(model.A) || !is_row_stochastic(model.B) ||
      std::abs(std::accumulate(model.pi.begin(), model.pi.end(), 0.0) - 1.0) > 1e-9)
    throw NumericError("Baum-Welch lost row stochasticity at iteration " + std::to_string(run.iter));
  ++run.iter;
  return false;
}

// Runs Baum-Welch from each seed, several at a time. Each result depends only
// on its own seed.
inline void baum_welch_batch(std::span<const Symbol> seq, std::size_t N, std::size_t M,
                             std::span<const Seed> seeds, const BaumWelchOptions& opt,
                             std::span<HmmModel> out, std::vector<double>* history = nullptr) {
  const std::size_t lanes = lanes_for(N);
  std::array<std::unique_ptr<BaumWelchRun>, kMaxLanes> slot;
  std::array<std::size_t, kMaxLanes> owner{};
  std::size_t next = 0;
  for (;;) {
    std::array<BaumWelchRun*, kMaxLanes> active{};
    std::array<std::size_t, kMaxLanes> where{};
    std::size_t n_active = 0;
    for (std::size_t l = 0; l < lanes; ++l) {
      if (!slot[l] && next < seeds.size()) {
        slot[l] = std::make_unique<BaumWelchRun>();
        slot[l]->model = random_model(N, M, seeds[next]);
        slot[l]->history = history;
        owner[l] = next++;
      }
      if (slot[l]) {
        where[n_active] = l;
        active[n_active++] = slot[l].get();
      }
    }
    if (n_active == 0) break;
    std::array<double, kMaxLanes> ll{};
    e_step_group(active.data(), n_active, seq, ll.data());
    for (std::size_t k = 0; k < n_active; ++k) {
      const std::size_t l = where[k];
      if (advance(*slot[l], ll[k], opt)) {
        out[owner[l]] = std::move(slot[l]->model);
        slot[l].reset();
      }
    }
  }
}

inline void check_training_input(std::span<const Symbol> seq, std::size_t N, std::size_t M) {
  if (N == 0 || M == 0) throw ConfigError("HMM needs N >= 1 and M >= 1");
  if (seq.size() < 2) throw DataError("Baum-Welch needs a sequence of length at least 2");
  check_symbols(seq, M);
}

}  // namespace detail

// Scaled Baum-Welch from random_model(N, M, seed). Stops once the
// log-likelihood gain drops below tol or after max_iters re-estimations. The
// returned log_likelihood is that of the returned parameters. When `history`
// is given it receives the log-likelihood evaluated at every iteration.
inline HmmModel baum_welch(std::span<const Symbol> seq, std::size_t N, std::size_t M, Seed seed,
                           const BaumWelchOptions& opt = {},
                           std::vector<double>* history = nullptr) {
  detail::check_training_input(seq, N, M);
  HmmModel model;
  detail::baum_welch_batch(seq, N, M, std::span<const Seed>(&seed, 1), opt,
                           std::span<HmmModel>(&model, 1), history);
  return model;
}

// Number of random restarts by (filtered) sequence length.
struct RestartPolicy {
  std::size_t threshold_low = 1000;
  std::size_t threshold_high = 5000;
  int restarts_short = 100;
  int restarts_long = 50;

  int restarts_for(std::size_t length) const {
    if (restarts_short < 1 || restarts_long < 1) throw ConfigError("restart counts must be >= 1");
    return length >= threshold_low && length <= threshold_high ? restarts_short : restarts_long;
  }

  static RestartPolicy fixed(int restarts) { return {0, 0, restarts, restarts}; }
};

// Best-of-R Baum-Welch. Restart r starts from derive_seed(seed, r); the model
// with the highest final log-likelihood wins, ties to the lower restart index.
inline HmmModel train_with_restarts(std::span<const Symbol> seq, std::size_t N, std::size_t M,
                                    const RestartPolicy& policy, Seed seed,
                                    const BaumWelchOptions& opt = {}, unsigned threads = 1) {
  detail::check_training_input(seq, N, M);
  const auto restarts = static_cast<std::size_t>(policy.restarts_for(seq.size()));
  std::vector<Seed> seeds(restarts);
  for (std::size_t r = 0; r < restarts; ++r) seeds[r] = derive_seed(seed, r);
  std::vector<HmmModel> models(restarts);

  const std::size_t chunks = std::clamp<std::size_t>(threads, 1, restarts);
  const std::size_t per = (restarts + chunks - 1) / chunks;
  parallel_for(chunks, threads, [&](std::size_t c) {
    const std::size_t lo = std::min(restarts, c * per), hi = std::min(restarts, lo + per);
    detail::baum_welch_batch(seq, N, M, std::span<const Seed>(seeds).subspan(lo, hi - lo), opt,
                             std::span<HmmModel>(models).subspan(lo, hi - lo));
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < restarts; ++r) {
    if (models[r].log_likelihood > models[best].log_likelihood) best = r;
  }
  return std::move(models[best]);
}

struct Hmm2VecOptions {
  // Permit N != 2, ordering rows by descending anchor emission probability.
  bool allow_general_n = false;
};

// Flattens B into a feature vector. Rows are ordered by their probability of
// emitting the anchor opcode (vocabulary id 0, the corpus' most frequent
// opcode), highest first; equal anchor probabilities fall back to comparing
// the remaining columns, then the state index. The result does not depend on
// how the hidden states happen to be numbered.
inline FeatureVector hmm2vec(const HmmModel& model, const Hmm2VecOptions& opt = {}) {
  const std::size_t N = model.N();
  const std::size_t M = model.M();
  if (N != 2 && !opt.allow_general_n)
    throw ConfigError("hmm2vec expects N = 2 hidden states, got " + std::to_string(N) +
                      " (enable general ordering to accept other N)");
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const auto ra = model.B.row(a);
    const auto rb = model.B.row(b);
    return std::lexicographical_compare(rb.begin(), rb.end(), ra.begin(), ra.end());
  });

  FeatureVector fv;
  fv.provenance = Provenance::hmm2vec;
  fv.values.reserve(N * M);
  for (std::size_t s : order) {
    const auto row = model.B.row(s);
    fv.values.insert(fv.values.end(), row.begin(), row.end());
  }
  return fv;
}

inline FeatureVector hmm2vec(const HmmModel& model, const Vocabulary& vocab,
                             const Hmm2VecOptions& opt = {}) {
  if (vocab.size() != model.M())
    throw DataError("model alphabet size " + std::to_string(model.M()) +
                    " differs from vocabulary size " + std::to_string(vocab.size()));
  return hmm2vec(model, opt);
}

// Reorders hidden states by `perm` (new state k is old state perm[k]).
inline HmmModel permute_states(const HmmModel& m, std::span<const std::size_t> perm) {
  HmmModel out = m;
  const std::size_t N = m.N();
  for (std::size_t k = 0; k < N; ++k) {
    out.pi[k] = m.pi[perm[k]];
    for (std::size_t l = 0; l < N; ++l) out.A(k, l) = m.A(perm[k], perm[l]);
    std::copy(m.B.row(perm[k]).begin(), m.B.row(perm[k]).end(), out.B.row(k).begin());
  }
  return out;
}

// Draws a state path and emissions of the given length from `m`.
inline std::vector<Symbol> sample_sequence(const HmmModel& m, std::size_t length, Rng& rng) {
  auto draw = [&](std::span<const double> p) {
    const double u = uniform01(rng);
    double acc = 0.0;
    for (std::size_t k = 0; k < p.size(); ++k) {
      acc += p[k];
      if (u < acc) return k;
    }
    // Rounding: fall back to the last nonzero cell.
    for (std::size_t k = p.size(); k-- > 0;)
      if (p[k] > 0.0) return k;
    return p.size() - 1;
  };
  std::vector<Symbol> out;
  out.reserve(length);
  if (length == 0) return out;
  std::size_t state = draw(m.pi);
  for (std::size_t t = 0; t < length; ++t) {
    if (t > 0) state = draw(m.A.row(state));
    out.push_back(static_cast<Symbol>(draw(m.B.row(state))));
  }
  return out;
}

}  // namespace opseq
