#include <gtest/gtest.h>

#include <cmath>

#include "opseq/embed.hpp"

using namespace opseq;

namespace {

std::vector<double> random_vec(Rng& rng, std::size_t n, double scale = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = uniform(rng, -scale, scale);
  return v;
}

double loss_only(const std::vector<double>& u, const std::vector<double>& v,
                 const std::vector<std::vector<double>>& negs) {
  double loss = std::log1p(std::exp(-dot(u, v)));
  for (const auto& n : negs) loss += std::log1p(std::exp(dot(u, n)));
  return loss;
}

// Central differences on a numerically independent loss expression.
void expect_gradient_matches(const std::vector<double>& u, const std::vector<double>& v,
                             const std::vector<std::vector<double>>& negs) {
  const double h = 1e-5;
  const auto g = sgns_loss_and_grad(u, v, negs);
  EXPECT_NEAR(g.loss, loss_only(u, v, negs), 1e-12 * std::max(1.0, g.loss));
  auto check = [&](double analytic, double numeric) {
    EXPECT_LE(std::abs(analytic - numeric), 1e-5 * std::max(1.0, std::abs(numeric)))
        << "analytic " << analytic << " numeric " << numeric;
  };
  for (std::size_t k = 0; k < u.size(); ++k) {
    auto up = u, dn = u;
    up[k] += h;
    dn[k] -= h;
    check(g.center[k], (loss_only(up, v, negs) - loss_only(dn, v, negs)) / (2 * h));
    auto vp = v, vd = v;
    vp[k] += h;
    vd[k] -= h;
    check(g.context[k], (loss_only(u, vp, negs) - loss_only(u, vd, negs)) / (2 * h));
    for (std::size_t i = 0; i < negs.size(); ++i) {
      auto np = negs, nd = negs;
      np[i][k] += h;
      nd[i][k] -= h;
      check(g.negatives[i][k], (loss_only(u, v, np) - loss_only(u, v, nd)) / (2 * h));
    }
  }
}

std::vector<Symbol> alternating(std::size_t n) {
  std::vector<Symbol> s(n);
  for (std::size_t i = 0; i < n; ++i) s[i] = static_cast<Symbol>(i % 2);
  return s;
}

}  // namespace

TEST(Sgns, OrthogonalPairHasLogTwoLoss) {
  const std::vector<double> u{1.0, 0.0}, v{0.0, 1.0};
  EXPECT_NEAR(sgns_loss_and_grad(u, v, {}).loss, std::log(2.0), 1e-15);
}

TEST(Sgns, LossVanishesMonotonicallyForAlignedVectors) {
  double prev = std::numeric_limits<double>::infinity();
  for (double scale : {0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0}) {
    const std::vector<double> u{scale, scale};
    const double loss = sgns_loss_and_grad(u, u, {}).loss;
    EXPECT_LT(loss, prev);
    EXPECT_GE(loss, 0.0);
    prev = loss;
  }
  const std::vector<double> huge{1e6, 1e6};
  const auto g = sgns_loss_and_grad(huge, huge, {{-1e6, -1e6}});
  EXPECT_TRUE(std::isfinite(g.loss));
  EXPECT_NEAR(g.loss, 0.0, 1e-12);
}

TEST(Sgns, GradientMatchesFiniteDifferences) {
  Rng rng(21);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + trial % 8;
    const std::size_t negs = trial % 2 == 0 ? 0 : 1 + trial % 5;
    const auto u = random_vec(rng, n), v = random_vec(rng, n);
    std::vector<std::vector<double>> ns;
    for (std::size_t i = 0; i < negs; ++i) ns.push_back(random_vec(rng, n));
    expect_gradient_matches(u, v, ns);
  }
}

TEST(Word2Vec, ZeroEpochsKeepsInitialization) {
  Word2VecParams p;
  p.epochs = 0;
  const auto seq = alternating(100);
  const auto m = train_word2vec(seq, 3, 4, 2, p, 55);
  EXPECT_EQ(m.embedding.vectors, initial_embeddings(3, 4, 55));
  for (double x : m.embedding.vectors.data()) {
    EXPECT_GE(x, -0.125);
    EXPECT_LE(x, 0.125);
  }
}

TEST(Word2Vec, Deterministic) {
  Rng rng(4);
  std::vector<Symbol> seq(500);
  for (auto& s : seq) s = static_cast<Symbol>(uniform_index(rng, 0, 9));
  const auto a = train_word2vec(seq, 10, 5, 3, {}, 99);
  const auto b = train_word2vec(seq, 10, 5, 3, {}, 99);
  EXPECT_EQ(a.embedding, b.embedding);
  EXPECT_NE(a.embedding.vectors, train_word2vec(seq, 10, 5, 3, {}, 100).embedding.vectors);
}

TEST(Word2Vec, UnseenOpcodesKeepInitialVectors) {
  const auto seq = alternating(200);
  const auto m = train_word2vec(seq, 5, 3, 1, {}, 8);
  const auto init = initial_embeddings(5, 3, 8);
  for (Symbol s = 2; s < 5; ++s) {
    for (std::size_t k = 0; k < 3; ++k) EXPECT_EQ(m.embedding.vectors(s, k), init(s, k));
  }
  EXPECT_NE(m.embedding.vectors(0, 0), init(0, 0));
}

TEST(Word2Vec, AlternatingSequenceLearnsTrueContexts) {
  const auto seq = alternating(10000);
  const auto m = train_word2vec(seq, 2, 2, 1, {}, 1);
  // Held-out positions: each center's true neighbor is the other symbol; the
  // negative is the center itself, the only other symbol in the alphabet.
  const auto held_out = alternating(1001);
  std::size_t wins = 0, total = 0;
  for (std::size_t t = 0; t + 1 < held_out.size(); ++t) {
    const Symbol c = held_out[t], ctx = held_out[t + 1];
    const double pos = dot(m.embedding.vectors.row(c), m.context.row(ctx));
    const double neg = dot(m.embedding.vectors.row(c), m.context.row(c));
    wins += pos > neg;
    ++total;
  }
  EXPECT_GE(static_cast<double>(wins) / static_cast<double>(total), 0.95);

  ASSERT_GE(m.epoch_loss.size(), 5u);
  for (std::size_t e = 1; e < 5; ++e) EXPECT_LE(m.epoch_loss[e], m.epoch_loss[e - 1]);
}

TEST(Word2Vec, Errors) {
  const std::vector<Symbol> one{0};
  EXPECT_THROW(train_word2vec(one, 2, 2, 1, {}, 0), DataError);
  const std::vector<Symbol> bad{0, 5};
  EXPECT_THROW(train_word2vec(bad, 2, 2, 1, {}, 0), DataError);
  const std::vector<Symbol> ok{0, 1};
  EXPECT_THROW(train_word2vec(ok, 2, 2, 0, {}, 0), ConfigError);
}

TEST(Word2VecFeatures, ConcatenatesInRankOrder) {
  EmbeddingMatrix e{2, 2, 1, {}, 0, Matrix::from_rows({{1, 2}, {3, 4}})};
  const auto fv = word2vec_features(e);
  EXPECT_EQ(fv.values, (std::vector<double>{1, 2, 3, 4}));
  EXPECT_EQ(fv.provenance, Provenance::word2vec);

  // Swapping the two vocabulary ranks swaps the two blocks.
  EmbeddingMatrix swapped{2, 2, 1, {}, 0, Matrix::from_rows({{3, 4}, {1, 2}})};
  EXPECT_EQ(word2vec_features(swapped).values, (std::vector<double>{3, 4, 1, 2}));
}

TEST(Word2VecFeatures, LengthIsNTimesM) {
  Rng rng(3);
  std::vector<Symbol> seq(400);
  for (auto& s : seq) s = static_cast<Symbol>(uniform_index(rng, 0, 30));
  std::vector<std::string> names;
  for (int i = 0; i < 31; ++i) names.push_back("op" + std::to_string(i));
  const Vocabulary vocab(names, std::vector<double>(31, 1.0));
  for (std::size_t N : {2u, 100u}) {
    const auto m = train_word2vec(seq, 31, N, 1, {}, 5);
    const auto fv = word2vec_features(m.embedding, vocab);
    ASSERT_EQ(fv.size(), N * 31);
    for (std::size_t i = 0; i < 31; ++i)
      for (std::size_t k = 0; k < N; ++k) EXPECT_EQ(fv.values[i * N + k], m.embedding.vectors(i, k));
  }
  const Vocabulary small({"a"}, {1.0});
  EXPECT_THROW(word2vec_features(train_word2vec(seq, 31, 2, 1, {}, 5).embedding, small), DataError);
}
