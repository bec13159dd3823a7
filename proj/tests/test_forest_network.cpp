#include <gtest/gtest.h>

#include <cmath>

#include "opseq/classify/forest.hpp"
#include "opseq/classify/network.hpp"

using namespace opseq;

namespace {

LabeledDataset random_consistent(Rng& rng, std::size_t n, std::size_t dim, std::size_t classes) {
  LabeledDataset d;
  d.X = Matrix(n, dim);
  d.class_count = classes;
  for (double& v : d.X.data()) v = std::round(uniform(rng, 0.0, 20.0)) / 4.0;  // many ties
  for (std::size_t i = 0; i < n; ++i) {
    // Labels are a function of the row, so duplicated rows agree.
    double h = 0;
    for (double v : d.X.row(i)) h = h * 7.0 + v;
    d.y.push_back(static_cast<Label>(static_cast<long>(h * 4.0) % static_cast<long>(classes)));
  }
  return d;
}

LabeledDataset two_blobs(Rng& rng, std::size_t per, double sigma) {
  std::normal_distribution<double> noise(0.0, sigma);
  LabeledDataset d;
  d.class_count = 2;
  d.X = Matrix(2 * per, 2);
  for (std::size_t i = 0; i < 2 * per; ++i) {
    const double c = i < per ? -1.5 : 1.5;
    d.X(i, 0) = c + noise(rng);
    d.X(i, 1) = c + noise(rng);
    d.y.push_back(i < per ? 0 : 1);
  }
  return d;
}

LabeledDataset small_random(Rng& rng, std::size_t n, std::size_t dim, std::size_t classes) {
  LabeledDataset d;
  d.X = Matrix(n, dim);
  d.class_count = classes;
  for (double& v : d.X.data()) v = uniform(rng, -1.0, 1.0);
  for (std::size_t i = 0; i < n; ++i) d.y.push_back(static_cast<Label>(i % classes));
  return d;
}

}  // namespace

TEST(RandomForest, SingleTreeMemorizesConsistentData) {
  Rng rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto d = random_consistent(rng, 150, 3, 3);
    RfParams p;
    p.n_estimators = 1;
    p.bootstrap = false;
    p.max_features = MaxFeatures::all;
    p.seed = static_cast<Seed>(trial);
    const auto f = rf_train(d, p);
    for (std::size_t i = 0; i < d.size(); ++i) ASSERT_EQ(predict(f, d.row(i)), d.y[i]) << "trial " << trial;
  }
}

TEST(RandomForest, PureNodeIsLeaf) {
  LabeledDataset d{Matrix::from_rows({{0, 1}, {2, 3}, {4, 5}}), {2, 2, 2}, 3, {}, {}};
  const auto f = rf_train(d, RfParams{});
  for (const auto& t : f.trees) EXPECT_EQ(t.nodes.size(), 1u);
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const std::vector<double> q{uniform(rng, -9, 9), uniform(rng, -9, 9)};
    EXPECT_EQ(predict(f, q), 2);
  }
}

TEST(RandomForest, LearnsThresholdRule) {
  Rng rng(12);
  LabeledDataset d;
  d.class_count = 2;
  d.X = Matrix(200, 1);
  for (std::size_t i = 0; i < 200; ++i) {
    d.X(i, 0) = uniform01(rng);
    d.y.push_back(d.X(i, 0) > 0.5 ? 1 : 0);
  }
  RfParams p;
  p.seed = 3;
  const auto f = rf_train(d, p);
  for (int k = 0; k <= 100; ++k) {
    const double x = k / 100.0;
    if (std::abs(x - 0.5) <= 0.02) continue;
    const std::vector<double> q{x};
    EXPECT_EQ(predict(f, q), x > 0.5 ? 1 : 0) << "x=" << x;
  }
}

TEST(RandomForest, DeterministicAcrossThreadCounts) {
  Rng rng(8);
  const auto d = small_random(rng, 120, 6, 3);
  RfParams p;
  p.n_estimators = 20;
  p.max_depth = 6;
  p.seed = 99;
  const auto a = rf_train(d, p);
  const auto b = rf_train(d, p, 4);
  ASSERT_EQ(a.trees.size(), b.trees.size());
  for (std::size_t t = 0; t < a.trees.size(); ++t) {
    ASSERT_EQ(a.trees[t].nodes.size(), b.trees[t].nodes.size());
    for (std::size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
      EXPECT_EQ(a.trees[t].nodes[k].feature, b.trees[t].nodes[k].feature);
      EXPECT_EQ(a.trees[t].nodes[k].threshold, b.trees[t].nodes[k].threshold);
    }
  }
  // A depth-6 binary tree has at most 2^7 - 1 nodes.
  for (const auto& t : a.trees) EXPECT_LE(t.nodes.size(), 127u);
}

TEST(RandomForest, Errors) {
  RfParams p;
  p.min_samples_split = 1;
  EXPECT_THROW(p.validate(), ConfigError);
  LabeledDataset empty;
  empty.class_count = 2;
  EXPECT_THROW(rf_train(empty, RfParams{}), DataError);
  LabeledDataset d{Matrix::from_rows({{0}, {1}}), {0, 1}, 2, {}, {}};
  const auto f = rf_train(d, RfParams{});
  const std::vector<double> bad{0.0, 1.0};
  EXPECT_THROW(predict(f, bad), DataError);
}

TEST(Network, GradientsMatchFiniteDifferences) {
  Rng rng(31);
  for (LossKind kind : {LossKind::cross_entropy, LossKind::mse}) {
    for (int trial = 0; trial < 10; ++trial) {
      const std::size_t D = 2 + static_cast<std::size_t>(trial) % 5, C = 2 + static_cast<std::size_t>(trial) % 2;
      const std::vector<std::size_t> sizes{D, 5, 4, C};
      Network net = init_network(sizes, static_cast<Seed>(100 + trial));
      for (auto& layer : net.layers)
        for (double& b : layer.b) b = uniform(rng, -0.3, 0.3);
      const auto data = small_random(rng, 6, D, C);
      std::vector<std::size_t> rows(data.size());
      std::iota(rows.begin(), rows.end(), 0);
      NetworkGradients g;
      nn_loss_and_gradients(net, data, rows, kind, g);

      const double h = 1e-5;
      auto numeric = [&](double& param) {
        const double saved = param;
        NetworkGradients scratch;
        param = saved + h;
        const double up = nn_loss_and_gradients(net, data, rows, kind, scratch);
        param = saved - h;
        const double dn = nn_loss_and_gradients(net, data, rows, kind, scratch);
        param = saved;
        return (up - dn) / (2 * h);
      };
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        auto& W = net.layers[l].W.data();
        for (std::size_t k = 0; k < W.size(); ++k) {
          const double num = numeric(W[k]);
          EXPECT_LE(std::abs(g.dW[l].data()[k] - num), 1e-4 * std::max(1e-3, std::abs(num)))
              << "layer " << l << " weight " << k;
        }
        for (std::size_t k = 0; k < net.layers[l].b.size(); ++k) {
          const double num = numeric(net.layers[l].b[k]);
          EXPECT_LE(std::abs(g.db[l][k] - num), 1e-4 * std::max(1e-3, std::abs(num)))
              << "layer " << l << " bias " << k;
        }
      }
    }
  }
}

TEST(Network, ZeroEpochsIsInitialization) {
  Rng rng(2);
  const auto d = small_random(rng, 10, 3, 2);
  NnParams p;
  p.layer_sizes = {3, 6, 2};
  p.epochs = 0;
  p.seed = 5;
  const auto m = nn_train(d, p);
  const auto init = init_network(p.layer_sizes, derive_seed(5, 0));
  for (std::size_t i = 0; i < d.size(); ++i) EXPECT_EQ(nn_forward(m.net, d.row(i)), nn_forward(init, d.row(i)));
  EXPECT_TRUE(m.curves.train_loss.empty());
}

TEST(Network, SeparatesBlobs) {
  Rng rng(17);
  const auto train = two_blobs(rng, 100, 0.5);
  const auto test = two_blobs(rng, 100, 0.5);
  NnParams p;
  p.layer_sizes = {2, 8, 2};
  p.epochs = 100;
  p.seed = 1;
  const auto m = nn_train(train, p, &test);
  EXPECT_GE(nn_evaluate(m.net, test, p.loss).second, 0.95);
  EXPECT_EQ(m.curves.train_loss.size(), 100u);
  EXPECT_EQ(m.curves.val_accuracy.size(), 100u);
  EXPECT_LT(m.curves.train_loss.back(), m.curves.train_loss.front());
}

TEST(Network, SoftmaxRowsSumToOne) {
  Rng rng(6);
  const std::vector<std::size_t> sizes{4, 7, 3};
  const auto net = init_network(sizes, 8);
  for (int i = 0; i < 100; ++i) {
    std::vector<double> x(4);
    for (double& v : x) v = uniform(rng, -50, 50);
    const auto p = nn_forward(net, x);
    double s = 0;
    for (double v : p) s += v;
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
  std::vector<double> big{1000.0, -1000.0, 0.0};
  softmax_in_place(big);
  EXPECT_NEAR(big[0], 1.0, 1e-12);
}

TEST(Network, ZeroDropoutMatchesNoDropout) {
  Rng rng(10);
  const auto d = small_random(rng, 40, 3, 3);
  NnParams p;
  p.layer_sizes = {3, 10, 6, 3};
  p.epochs = 5;
  p.batch_size = 7;
  p.seed = 12;
  p.optimizer = OptimizerKind::sgd;
  p.learning_rate = 0.05;
  const auto a = nn_train(d, p);
  p.dropout = 0.0;
  const auto b = nn_train(d, p);
  for (std::size_t l = 0; l < a.net.layers.size(); ++l) EXPECT_EQ(a.net.layers[l].W, b.net.layers[l].W);

  p.dropout = 0.5;
  const auto c = nn_train(d, p);
  EXPECT_NE(a.net.layers[0].W, c.net.layers[0].W);
}

TEST(Network, ConfigErrors) {
  Rng rng(1);
  const auto d = small_random(rng, 4, 3, 2);
  NnParams p;
  p.layer_sizes = {3, 4, 3};
  EXPECT_THROW(nn_train(d, p), ConfigError);
  p.layer_sizes = {2, 4, 2};
  EXPECT_THROW(nn_train(d, p), ConfigError);
  p.layer_sizes = {3, 4, 2};
  p.dropout = 1.0;
  EXPECT_THROW(nn_train(d, p), ConfigError);
}

TEST(Network, DivergenceReportsEpoch) {
  Rng rng(1);
  auto d = small_random(rng, 8, 2, 2);
  for (double& v : d.X.data()) v *= 1e200;
  NnParams p;
  p.layer_sizes = {2, 4, 2};
  p.optimizer = OptimizerKind::sgd;
  p.learning_rate = 1e10;
  p.epochs = 3;
  try {
    nn_train(d, p);
    FAIL() << "expected a numeric error";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("epoch"), std::string::npos);
  }
}
