#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "opseq/corpus.hpp"
#include "opseq/error.hpp"
#include "opseq/features.hpp"
#include "opseq/matrix.hpp"
#include "opseq/random.hpp"

namespace opseq {

struct Word2VecParams {
  int epochs = 5;
  double lr_start = 0.025;
  double lr_end = 0.0001;
  int negatives = 5;
  double noise_power = 0.75;

  friend bool operator==(const Word2VecParams&, const Word2VecParams&) = default;
};

// Per-opcode center ("input") embeddings: M rows of length N.
struct EmbeddingMatrix {
  std::size_t N = 0;
  std::size_t M = 0;
  std::size_t W = 0;
  Word2VecParams params;
  Seed seed = 0;
  Matrix vectors;

  friend bool operator==(const EmbeddingMatrix&, const EmbeddingMatrix&) = default;
};

struct Word2VecModel {
  EmbeddingMatrix embedding;
  Matrix context;                  // output-side vectors, M x N
  std::vector<double> epoch_loss;  // mean pair loss per epoch
};

inline double log_sigmoid(double x) noexcept {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

inline double sigmoid(double x) noexcept {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// Skip-gram negative-sampling loss for one (center, context) pair:
//   -log s(u.v) - sum_i log s(-u.n_i)
// Gradients are written to grad_center, grad_context and grad_negatives
// (negatives.size() rows of length N, flattened).
inline double sgns_loss_and_grad(std::span<const double> center, std::span<const double> context,
                                 std::span<const std::span<const double>> negatives,
                                 std::span<double> grad_center, std::span<double> grad_context,
                                 std::span<double> grad_negatives) {
  const std::size_t n = center.size();
  const double pos = dot(center, context);
  double loss = -log_sigmoid(pos);
  const double g_pos = sigmoid(pos) - 1.0;
  for (std::size_t k = 0; k < n; ++k) {
    grad_center[k] = g_pos * context[k];
    grad_context[k] = g_pos * center[k];
  }
  for (std::size_t i = 0; i < negatives.size(); ++i) {
    const auto neg = negatives[i];
    const double s = dot(center, neg);
    loss -= log_sigmoid(-s);
    const double g = sigmoid(s);
    double* gn = grad_negatives.data() + i * n;
    for (std::size_t k = 0; k < n; ++k) {
      grad_center[k] += g * neg[k];
      gn[k] = g * center[k];
    }
  }
  return loss;
}

struct SgnsGradient {
  double loss = 0.0;
  std::vector<double> center;
  std::vector<double> context;
  std::vector<std::vector<double>> negatives;
};

inline SgnsGradient sgns_loss_and_grad(std::span<const double> center,
                                       std::span<const double> context,
                                       const std::vector<std::vector<double>>& negatives) {
  const std::size_t n = center.size();
  if (context.size() != n) throw DataError("sgns: context length differs from center length");
  std::vector<std::span<const double>> views;
  for (const auto& v : negatives) {
    if (v.size() != n) throw DataError("sgns: negative length differs from center length");
    views.emplace_back(v);
  }
  SgnsGradient g{0.0, std::vector<double>(n), std::vector<double>(n), {}};
  std::vector<double> flat(negatives.size() * n);
  g.loss = sgns_loss_and_grad(center, context, views, g.center, g.context, flat);
  for (std::size_t i = 0; i < negatives.size(); ++i)
    g.negatives.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(i * n),
                             flat.begin() + static_cast<std::ptrdiff_t>((i + 1) * n));
  return g;
}

// Seeded starting point: center vectors uniform in [-0.5/N, 0.5/N].
inline Matrix initial_embeddings(std::size_t M, std::size_t N, Seed seed) {
  Rng rng(derive_seed(seed, 0));
  Matrix v(M, N);
  const double half = 0.5 / static_cast<double>(N);
  for (double& x : v.data()) x = uniform(rng, -half, half);
  return v;
}

// Skip-gram with negative sampling over a single opcode stream. Every pair
// (t, c) with 1 <= |t - c| <= W is visited in order, each epoch. The noise
// distribution is the stream's own unigram counts raised to noise_power; a
// negative that equals the true context is skipped. Updates are serial.
inline Word2VecModel train_word2vec(std::span<const Symbol> seq, std::size_t M, std::size_t N,
                                    std::size_t W, const Word2VecParams& params, Seed seed) {
  if (N == 0 || M == 0) throw ConfigError("word2vec needs N >= 1 and M >= 1");
  if (W == 0) throw ConfigError("word2vec window W must be at least 1");
  if (params.epochs < 0 || params.negatives < 0)
    throw ConfigError("word2vec epochs and negatives must be non-negative");
  if (seq.size() < 2) throw DataError("word2vec needs at least 2 tokens to form a training pair");
  for (Symbol s : seq)
    if (s >= M) throw DataError("symbol " + std::to_string(s) + " is outside the vocabulary");

  Word2VecModel model;
  model.embedding = {N, M, W, params, seed, initial_embeddings(M, N, seed)};
  model.context = Matrix(M, N, 0.0);
  Matrix& in = model.embedding.vectors;
  Matrix& out = model.context;

  std::vector<double> noise_cdf(M, 0.0);
  {
    std::vector<double> counts(M, 0.0);
    for (Symbol s : seq) counts[s] += 1.0;
    double acc = 0.0;
    for (std::size_t k = 0; k < M; ++k) {
      acc += counts[k] > 0.0 ? std::pow(counts[k], params.noise_power) : 0.0;
      noise_cdf[k] = acc;
    }
    for (double& c : noise_cdf) c /= acc;
  }

  const std::size_t T = seq.size();
  std::size_t pairs_per_epoch = 0;
  for (std::size_t t = 0; t < T; ++t) {
    const std::size_t lo = t >= W ? t - W : 0;
    const std::size_t hi = std::min(T - 1, t + W);
    pairs_per_epoch += hi - lo;
  }
  const double total_pairs = static_cast<double>(pairs_per_epoch) * params.epochs;

  Rng rng(derive_seed(seed, 1));
  std::vector<Symbol> neg_ids;
  std::vector<std::span<const double>> neg_views;
  std::vector<double> g_center(N), g_context(N), g_neg(static_cast<std::size_t>(params.negatives) * N);
  double processed = 0.0;

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    double epoch_loss = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      const std::size_t lo = t >= W ? t - W : 0;
      const std::size_t hi = std::min(T - 1, t + W);
      for (std::size_t c = lo; c <= hi; ++c) {
        if (c == t) continue;
        const Symbol center = seq[t];
        const Symbol ctx = seq[c];
        const double lr =
            params.lr_start + (params.lr_end - params.lr_start) * (processed / total_pairs);

        neg_ids.clear();
        neg_views.clear();
        for (int k = 0; k < params.negatives; ++k) {
          const double u = uniform01(rng);
          auto it = std::upper_bound(noise_cdf.begin(), noise_cdf.end(), u);
          const auto id = static_cast<Symbol>(
              std::min<std::ptrdiff_t>(it - noise_cdf.begin(), static_cast<std::ptrdiff_t>(M) - 1));
          if (id == ctx) continue;
          neg_ids.push_back(id);
          neg_views.push_back(out.row(id));
        }

        epoch_loss += sgns_loss_and_grad(in.row(center), out.row(ctx), neg_views, g_center,
                                         g_context, g_neg);
        auto u = in.row(center);
        auto v = out.row(ctx);
        for (std::size_t k = 0; k < N; ++k) {
          u[k] -= lr * g_center[k];
          v[k] -= lr * g_context[k];
        }
        for (std::size_t i = 0; i < neg_ids.size(); ++i) {
          auto n = out.row(neg_ids[i]);
          for (std::size_t k = 0; k < N; ++k) n[k] -= lr * g_neg[i * N + k];
        }
        processed += 1.0;
      }
    }
    if (!std::isfinite(epoch_loss))
      throw NumericError("word2vec loss became non-finite in epoch " + std::to_string(epoch));
    model.epoch_loss.push_back(epoch_loss / static_cast<double>(pairs_per_epoch));
  }
  return model;
}

inline Word2VecModel train_word2vec(const EncodedSequence& seq, const Vocabulary& vocab,
                                    std::size_t N, std::size_t W, const Word2VecParams& params,
                                    Seed seed) {
  return train_word2vec(seq.ids, vocab.size(), N, W, params, seed);
}

// Concatenates the M embeddings in vocabulary rank order (id 0 first).
inline FeatureVector word2vec_features(const EmbeddingMatrix& emb) {
  if (emb.vectors.rows() != emb.M || emb.vectors.cols() != emb.N)
    throw DataError("embedding matrix shape does not match its declared N and M");
  FeatureVector fv;
  fv.provenance = Provenance::word2vec;
  fv.values = emb.vectors.data();
  return fv;
}

inline FeatureVector word2vec_features(const EmbeddingMatrix& emb, const Vocabulary& vocab) {
  if (emb.M != vocab.size())
    throw DataError("embedding covers " + std::to_string(emb.M) + " opcodes but vocabulary has " +
                    std::to_string(vocab.size()));
  return word2vec_features(emb);
}

}  // namespace opseq
