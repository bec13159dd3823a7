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

enum class LossKind { mse, cross_entropy };
enum class OptimizerKind { sgd, adam };

struct NnParams {
  // Input, hidden..., output. Hidden layers use ReLU, the output softmax.
  std::vector<std::size_t> layer_sizes;
  LossKind loss = LossKind::cross_entropy;
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-7;
  double dropout = 0.0;  // applied to hidden activations while training
  int epochs = 200;
  std::size_t batch_size = 32;
  Seed seed = 0;

  void validate(std::size_t dim, std::size_t classes) const {
    if (layer_sizes.size() < 2) throw ConfigError("network needs at least input and output layers");
    if (layer_sizes.front() != dim)
      throw ConfigError("network input size " + std::to_string(layer_sizes.front()) +
                        " differs from feature dimension " + std::to_string(dim));
    if (layer_sizes.back() != classes)
      throw ConfigError("network output size " + std::to_string(layer_sizes.back()) +
                        " differs from class count " + std::to_string(classes));
    if (std::find(layer_sizes.begin(), layer_sizes.end(), 0u) != layer_sizes.end())
      throw ConfigError("layer sizes must be positive");
    if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout rate must lie in [0, 1)");
    if (epochs < 0 || batch_size == 0) throw ConfigError("epochs must be >= 0 and batch_size >= 1");
    if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  }
};

struct DenseLayer {
  Matrix W;  // out x in
  std::vector<double> b;
};

struct Network {
  std::vector<DenseLayer> layers;

  std::size_t input_size() const { return layers.front().W.cols(); }
  std::size_t output_size() const { return layers.back().W.rows(); }
};

struct NetworkGradients {
  std::vector<Matrix> dW;
  std::vector<std::vector<double>> db;
};

// Glorot-uniform weights, zero biases.
inline Network init_network(std::span<const std::size_t> sizes, Seed seed) {
  Rng rng(seed);
  Network net;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    DenseLayer layer{Matrix(sizes[l + 1], sizes[l]), std::vector<double>(sizes[l + 1], 0.0)};
    const double limit = std::sqrt(6.0 / static_cast<double>(sizes[l] + sizes[l + 1]));
    for (double& w : layer.W.data()) w = uniform(rng, -limit, limit);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

inline void softmax_in_place(std::span<double> z) {
  const double mx = *std::max_element(z.begin(), z.end());
  double s = 0.0;
  for (double& v : z) {
    v = std::exp(v - mx);
    s += v;
  }
  for (double& v : z) v /= s;
}

namespace detail {

// Activations of one forward pass. acts[0] is the input, acts[l+1] the output
// of layer l (post-ReLU and post-dropout for hidden layers, softmax at the
// top). masks[l] is the dropout scale applied to hidden layer l.
struct ForwardTrace {
  std::vector<std::vector<double>> acts;
  std::vector<std::vector<double>> masks;
  std::vector<double> logits;
};

inline void forward(const Network& net, std::span<const double> x, ForwardTrace& tr,
                    double dropout = 0.0, Rng* rng = nullptr) {
  const std::size_t L = net.layers.size();
  tr.acts.resize(L + 1);
  tr.masks.resize(L);
  tr.acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < L; ++l) {
    const auto& layer = net.layers[l];
    auto& out = tr.acts[l + 1];
    const auto& in = tr.acts[l];
    out.resize(layer.W.rows());
    for (std::size_t o = 0; o < out.size(); ++o) out[o] = dot(layer.W.row(o), in) + layer.b[o];
    if (l + 1 == L) {
      tr.logits = out;
      softmax_in_place(out);
      break;
    }
    auto& mask = tr.masks[l];
    mask.assign(out.size(), 1.0);
    for (std::size_t o = 0; o < out.size(); ++o) {
      if (out[o] < 0.0) out[o] = 0.0;
      if (dropout > 0.0) {
        mask[o] = uniform01(*rng) < dropout ? 0.0 : 1.0 / (1.0 - dropout);
        out[o] *= mask[o];
      }
    }
  }
}

inline double sample_loss(LossKind kind, std::span<const double> probs, std::span<const double> logits,
                          Label target) {
  if (kind == LossKind::cross_entropy) {
    const double mx = *std::max_element(logits.begin(), logits.end());
    double s = 0.0;
    for (double z : logits) s += std::exp(z - mx);
    return mx + std::log(s) - logits[static_cast<std::size_t>(target)];
  }
  double s = 0.0;
  for (std::size_t k = 0; k < probs.size(); ++k) {
    const double d = probs[k] - (static_cast<Label>(k) == target ? 1.0 : 0.0);
    s += d * d;
  }
  return s / static_cast<double>(probs.size());
}

// Adds d(loss)/d(params) for one traced sample into g, scaled by `scale`.
inline void backward(const Network& net, const ForwardTrace& tr, LossKind kind, Label target,
                     double scale, NetworkGradients& g) {
  const std::size_t L = net.layers.size();
  const auto& p = tr.acts[L];
  const std::size_t C = p.size();
  std::vector<double> delta(C);
  if (kind == LossKind::cross_entropy) {
    for (std::size_t k = 0; k < C; ++k) delta[k] = p[k] - (static_cast<Label>(k) == target ? 1.0 : 0.0);
  } else {
    std::vector<double> dp(C);
    double s = 0.0;
    for (std::size_t k = 0; k < C; ++k) {
      dp[k] = 2.0 * (p[k] - (static_cast<Label>(k) == target ? 1.0 : 0.0)) / static_cast<double>(C);
      s += dp[k] * p[k];
    }
    for (std::size_t k = 0; k < C; ++k) delta[k] = p[k] * (dp[k] - s);
  }

  for (std::size_t l = L; l-- > 0;) {
    const auto& layer = net.layers[l];
    const auto& in = tr.acts[l];
    for (std::size_t o = 0; o < delta.size(); ++o) {
      const double d = delta[o] * scale;
      if (d == 0.0) continue;
      auto grow = g.dW[l].row(o);
      for (std::size_t i = 0; i < in.size(); ++i) grow[i] += d * in[i];
      g.db[l][o] += d;
    }
    if (l == 0) break;
    std::vector<double> prev(in.size(), 0.0);
    for (std::size_t o = 0; o < delta.size(); ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      const auto wrow = layer.W.row(o);
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] += wrow[i] * d;
    }
    // in = relu(z) * mask, so d/dz is mask where in > 0.
    const auto& mask = tr.masks[l - 1];
    for (std::size_t i = 0; i < prev.size(); ++i) prev[i] = in[i] > 0.0 ? prev[i] * mask[i] : 0.0;
    delta = std::move(prev);
  }
}

inline NetworkGradients zero_gradients(const Network& net) {
  NetworkGradients g;
  for (const auto& layer : net.layers) {
    g.dW.emplace_back(layer.W.rows(), layer.W.cols(), 0.0);
    g.db.emplace_back(layer.b.size(), 0.0);
  }
  return g;
}

}  // namespace detail

// Class probabilities for one input.
inline std::vector<double> nn_forward(const Network& net, std::span<const double> x) {
  check_query(x, net.input_size());
  detail::ForwardTrace tr;
  detail::forward(net, x, tr);
  return tr.acts.back();
}

// Mean loss over `rows` of data and its exact gradient, without dropout.
inline double nn_loss_and_gradients(const Network& net, const LabeledDataset& data,
                                    std::span<const std::size_t> rows, LossKind kind,
                                    NetworkGradients& grads) {
  grads = detail::zero_gradients(net);
  detail::ForwardTrace tr;
  const double scale = 1.0 / static_cast<double>(rows.size());
  double loss = 0.0;
  for (std::size_t r : rows) {
    detail::forward(net, data.row(r), tr);
    loss += detail::sample_loss(kind, tr.acts.back(), tr.logits, data.y[r]);
    detail::backward(net, tr, kind, data.y[r], scale, grads);
  }
  return loss * scale;
}

struct TrainingCurves {
  std::vector<double> train_loss;
  std::vector<double> train_accuracy;
  std::vector<double> val_loss;
  std::vector<double> val_accuracy;
};

struct NnModel {
  Network net;
  NnParams params;
  TrainingCurves curves;
};

inline Label predict(const NnModel& m, std::span<const double> query) {
  const auto p = nn_forward(m.net, query);
  return argmax_label(p);
}

// Mean loss and accuracy of the network on a dataset (no dropout).
inline std::pair<double, double> nn_evaluate(const Network& net, const LabeledDataset& data,
                                             LossKind kind) {
  if (data.size() == 0) return {0.0, 0.0};
  detail::ForwardTrace tr;
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t r = 0; r < data.size(); ++r) {
    detail::forward(net, data.row(r), tr);
    loss += detail::sample_loss(kind, tr.acts.back(), tr.logits, data.y[r]);
    if (argmax_label(tr.acts.back()) == data.y[r]) ++correct;
  }
  const double n = static_cast<double>(data.size());
  return {loss / n, static_cast<double>(correct) / n};
}

// Mini-batch backpropagation. Batches are reshuffled every epoch; dropout
// draws come from their own stream, so rate 0 leaves the run identical to a
// network without dropout.
inline NnModel nn_train(const LabeledDataset& data, const NnParams& params,
                        const LabeledDataset* validation = nullptr) {
  data.validate();
  params.validate(data.dim(), data.class_count);
  if (data.size() == 0) throw DataError("network training set is empty");

  NnModel model{init_network(params.layer_sizes, derive_seed(params.seed, 0)), params, {}};
  Network& net = model.net;
  Rng shuffle_rng(derive_seed(params.seed, 1));
  Rng dropout_rng(derive_seed(params.seed, 2));

  auto m = detail::zero_gradients(net);
  auto v = detail::zero_gradients(net);
  auto grads = detail::zero_gradients(net);
  long step = 0;

  auto apply = [&](std::span<double> param, std::span<double> grad, std::span<double> m1,
                   std::span<double> m2) {
    if (params.optimizer == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < param.size(); ++i) param[i] -= params.learning_rate * grad[i];
      return;
    }
    const double c1 = 1.0 - std::pow(params.beta1, static_cast<double>(step));
    const double c2 = 1.0 - std::pow(params.beta2, static_cast<double>(step));
    for (std::size_t i = 0; i < param.size(); ++i) {
      m1[i] = params.beta1 * m1[i] + (1.0 - params.beta1) * grad[i];
      m2[i] = params.beta2 * m2[i] + (1.0 - params.beta2) * grad[i] * grad[i];
      const double mh = m1[i] / c1;
      const double vh = m2[i] / c2;
      param[i] -= params.learning_rate * mh / (std::sqrt(vh) + params.epsilon);
    }
  };

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  detail::ForwardTrace tr;

  for (int epoch = 0; epoch < params.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < order.size(); start += params.batch_size) {
      const std::size_t end = std::min(order.size(), start + params.batch_size);
      const double scale = 1.0 / static_cast<double>(end - start);
      for (auto& dw : grads.dW) std::fill(dw.data().begin(), dw.data().end(), 0.0);
      for (auto& db : grads.db) std::fill(db.begin(), db.end(), 0.0);
      for (std::size_t k = start; k < end; ++k) {
        const std::size_t r = order[k];
        detail::forward(net, data.row(r), tr, params.dropout, &dropout_rng);
        detail::backward(net, tr, params.loss, data.y[r], scale, grads);
      }
      ++step;
      for (std::size_t l = 0; l < net.layers.size(); ++l) {
        apply(net.layers[l].W.data(), grads.dW[l].data(), m.dW[l].data(), v.dW[l].data());
        apply(net.layers[l].b, grads.db[l], m.db[l], v.db[l]);
      }
    }

    const auto [loss, acc] = nn_evaluate(net, data, params.loss);
    if (!std::isfinite(loss))
      throw NumericError("network loss became non-finite in epoch " + std::to_string(epoch));
    model.curves.train_loss.push_back(loss);
    model.curves.train_accuracy.push_back(acc);
    if (validation && validation->size() > 0) {
      const auto [vl, va] = nn_evaluate(net, *validation, params.loss);
      model.curves.val_loss.push_back(vl);
      model.curves.val_accuracy.push_back(va);
    }
  }
  return model;
}

}  // namespace opseq
