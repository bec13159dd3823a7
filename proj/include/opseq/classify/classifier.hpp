#pragma once

#include <cmath>
#include <initializer_list>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "opseq/classify/dataset.hpp"
#include "opseq/classify/forest.hpp"
#include "opseq/classify/knn.hpp"
#include "opseq/classify/network.hpp"
#include "opseq/classify/svm.hpp"

namespace opseq {

enum class Algo { knn, svm, rf, nn };

inline std::string_view to_string(Algo a) noexcept {
  switch (a) {
    case Algo::knn: return "knn";
    case Algo::svm: return "svm";
    case Algo::rf: return "rf";
    case Algo::nn: return "nn";
  }
  return "?";
}

inline Algo parse_algo(std::string_view s) {
  if (s == "knn") return Algo::knn;
  if (s == "svm") return Algo::svm;
  if (s == "rf") return Algo::rf;
  if (s == "nn") return Algo::nn;
  throw ConfigError("unknown classifier '" + std::string(s) + "' (expected knn, svm, rf or nn)");
}

// k = 0 picks round(sqrt(training size)).
struct KnnParams {
  std::size_t k = 0;
};

inline std::size_t resolve_k(const KnnParams& p, std::size_t train_size) {
  if (p.k > 0) return p.k;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(std::sqrt(double(train_size)))));
}

// Network layer sizes may be given in full or as hidden sizes only; the input
// and output sizes then come from the training data.
struct NnSpec {
  NnParams params;
  std::vector<std::size_t> hidden;
  bool full_layers = false;
};

using ClassifierParams = std::variant<KnnParams, SvmParams, RfParams, NnSpec>;

struct ClassifierSpec {
  Algo algo = Algo::knn;
  ClassifierParams params = KnnParams{};
};

namespace detail {

using json = nlohmann::json;

inline void check_keys(const json& j, std::initializer_list<std::string_view> allowed,
                       std::string_view what) {
  if (!j.is_object()) throw ConfigError(std::string(what) + " parameters must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw ConfigError("unknown " + std::string(what) + " parameter '" + key + "'");
  }
}

}  // namespace detail

inline ClassifierSpec classifier_spec_from_json(Algo algo, const nlohmann::json& j) {
  using detail::check_keys;
  try {
    switch (algo) {
      case Algo::knn: {
        check_keys(j, {"k"}, "knn");
        KnnParams p;
        if (j.contains("k") && !(j["k"].is_string() && j["k"] == "auto")) {
          const long k = j["k"].get<long>();
          if (k < 1) throw ConfigError("knn k must be >= 1 or \"auto\"");
          p.k = static_cast<std::size_t>(k);
        }
        return {algo, p};
      }
      case Algo::svm: {
        check_keys(j, {"kernel", "C", "gamma", "tol", "max_passes", "max_steps", "seed"}, "svm");
        SvmParams p;
        const std::string kernel = j.value("kernel", std::string("linear"));
        if (kernel == "linear") p.kernel = Kernel::linear;
        else if (kernel == "rbf") p.kernel = Kernel::rbf;
        else throw ConfigError("unknown SVM kernel '" + kernel + "' (expected linear or rbf)");
        p.C = j.value("C", p.C);
        p.gamma = j.value("gamma", p.gamma);
        p.tol = j.value("tol", p.tol);
        p.max_passes = j.value("max_passes", p.max_passes);
        p.max_steps = j.value("max_steps", p.max_steps);
        p.seed = j.value("seed", p.seed);
        p.validate();
        return {algo, p};
      }
      case Algo::rf: {
        check_keys(j, {"n_estimators", "min_samples_split", "min_samples_leaf", "max_features",
                       "max_depth", "bootstrap", "seed"}, "rf");
        RfParams p;
        p.n_estimators = j.value("n_estimators", p.n_estimators);
        p.min_samples_split = j.value("min_samples_split", p.min_samples_split);
        p.min_samples_leaf = j.value("min_samples_leaf", p.min_samples_leaf);
        const std::string mf = j.value("max_features", std::string("auto"));
        if (mf == "auto" || mf == "sqrt") p.max_features = MaxFeatures::sqrt;
        else if (mf == "all") p.max_features = MaxFeatures::all;
        else throw ConfigError("unknown max_features '" + mf + "' (expected auto, sqrt or all)");
        if (j.contains("max_depth") && !j["max_depth"].is_null()) p.max_depth = j["max_depth"].get<int>();
        p.bootstrap = j.value("bootstrap", p.bootstrap);
        p.seed = j.value("seed", p.seed);
        p.validate();
        return {algo, p};
      }
      case Algo::nn: {
        check_keys(j, {"layer_sizes", "hidden", "loss", "optimizer", "learning_rate", "beta1", "beta2",
                       "epsilon", "dropout", "epochs", "batch_size", "seed"}, "nn");
        NnSpec s;
        NnParams& p = s.params;
        if (j.contains("layer_sizes")) {
          p.layer_sizes = j["layer_sizes"].get<std::vector<std::size_t>>();
          s.full_layers = true;
        }
        s.hidden = j.value("hidden", std::vector<std::size_t>{});
        const std::string loss = j.value("loss", std::string("cross_entropy"));
        if (loss == "cross_entropy") p.loss = LossKind::cross_entropy;
        else if (loss == "mse") p.loss = LossKind::mse;
        else throw ConfigError("unknown loss '" + loss + "' (expected cross_entropy or mse)");
        const std::string opt = j.value("optimizer", std::string("adam"));
        if (opt == "adam") p.optimizer = OptimizerKind::adam;
        else if (opt == "sgd") p.optimizer = OptimizerKind::sgd;
        else throw ConfigError("unknown optimizer '" + opt + "' (expected adam or sgd)");
        p.learning_rate = j.value("learning_rate", p.learning_rate);
        p.beta1 = j.value("beta1", p.beta1);
        p.beta2 = j.value("beta2", p.beta2);
        p.epsilon = j.value("epsilon", p.epsilon);
        p.dropout = j.value("dropout", p.dropout);
        p.epochs = j.value("epochs", p.epochs);
        p.batch_size = j.value("batch_size", p.batch_size);
        p.seed = j.value("seed", p.seed);
        return {algo, s};
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid ") + std::string(to_string(algo)) + " parameters: " + e.what());
  }
  throw ConfigError("unknown classifier");
}

inline nlohmann::json classifier_params_to_json(const ClassifierSpec& spec) {
  using json = nlohmann::json;
  return std::visit(
      [](const auto& p) -> json {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, KnnParams>) {
          return p.k == 0 ? json{{"k", "auto"}} : json{{"k", p.k}};
        } else if constexpr (std::is_same_v<T, SvmParams>) {
          return {{"kernel", p.kernel == Kernel::linear ? "linear" : "rbf"},
                  {"C", p.C}, {"gamma", p.gamma}, {"tol", p.tol},
                  {"max_passes", p.max_passes}, {"max_steps", p.max_steps}, {"seed", p.seed}};
        } else if constexpr (std::is_same_v<T, RfParams>) {
          return {{"n_estimators", p.n_estimators}, {"min_samples_split", p.min_samples_split},
                  {"min_samples_leaf", p.min_samples_leaf},
                  {"max_features", p.max_features == MaxFeatures::sqrt ? "auto" : "all"},
                  {"max_depth", p.max_depth}, {"bootstrap", p.bootstrap}, {"seed", p.seed}};
        } else {
          const NnParams& n = p.params;
          json j{{"loss", n.loss == LossKind::cross_entropy ? "cross_entropy" : "mse"},
                 {"optimizer", n.optimizer == OptimizerKind::adam ? "adam" : "sgd"},
                 {"learning_rate", n.learning_rate}, {"beta1", n.beta1}, {"beta2", n.beta2},
                 {"epsilon", n.epsilon}, {"dropout", n.dropout}, {"epochs", n.epochs},
                 {"batch_size", n.batch_size}, {"seed", n.seed}};
          if (p.full_layers) j["layer_sizes"] = n.layer_sizes;
          else j["hidden"] = p.hidden;
          return j;
        }
      },
      spec.params);
}

// Replaces the seed of any seeded classifier.
inline void set_seed(ClassifierSpec& spec, Seed seed) {
  std::visit(
      [&](auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, SvmParams> || std::is_same_v<T, RfParams>) p.seed = seed;
        else if constexpr (std::is_same_v<T, NnSpec>) p.params.seed = seed;
      },
      spec.params);
}

using ClassifierModel = std::variant<KnnModel, OvrSvmModel, RandomForest, NnModel>;

struct TrainedClassifier {
  Algo algo = Algo::knn;
  std::size_t dim = 0;
  std::size_t class_count = 0;
  ClassifierModel model;
};

inline Label predict(const TrainedClassifier& c, std::span<const double> query) {
  check_query(query, c.dim);
  return std::visit([&](const auto& m) { return predict(m, query); }, c.model);
}

inline std::vector<Label> predict_all(const TrainedClassifier& c, const LabeledDataset& data) {
  std::vector<Label> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) out[i] = predict(c, data.row(i));
  return out;
}

// `validation` is only used by the network, for its per-epoch curves.
inline TrainedClassifier train_classifier(const ClassifierSpec& spec, const LabeledDataset& train,
                                          const LabeledDataset* validation = nullptr,
                                          unsigned threads = 1) {
  train.validate();
  if (train.size() == 0) throw DataError("training set is empty");
  TrainedClassifier out{spec.algo, train.dim(), train.class_count, {}};
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, KnnParams>) {
          const std::size_t k = resolve_k(p, train.size());
          if (k > train.size())
            throw ConfigError("knn k = " + std::to_string(k) + " exceeds the training size " +
                              std::to_string(train.size()));
          out.model = KnnModel{k, train};
        } else if constexpr (std::is_same_v<T, SvmParams>) {
          out.model = svm_train_ovr(train, p, threads);
        } else if constexpr (std::is_same_v<T, RfParams>) {
          out.model = rf_train(train, p, threads);
        } else {
          NnParams np = p.params;
          if (!p.full_layers) {
            np.layer_sizes = {train.dim()};
            np.layer_sizes.insert(np.layer_sizes.end(), p.hidden.begin(), p.hidden.end());
            np.layer_sizes.push_back(train.class_count);
          }
          out.model = nn_train(train, np, validation);
        }
      },
      spec.params);
  return out;
}

// Model files.

inline nlohmann::json classifier_to_json(const TrainedClassifier& c) {
  using json = nlohmann::json;
  json j{{"algo", to_string(c.algo)}, {"dim", c.dim}, {"class_count", c.class_count}};
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, KnnModel>) {
          j["k"] = m.k;
          j["X"] = m.train.X.to_rows();
          j["y"] = m.train.y;
        } else if constexpr (std::is_same_v<T, OvrSvmModel>) {
          json machines = json::array();
          for (const auto& b : m.machines) {
            json mj{{"kernel", b.kernel == Kernel::linear ? "linear" : "rbf"}, {"b", b.b}};
            if (b.kernel == Kernel::linear) {
              mj["w"] = b.w;
            } else {
              mj["gamma"] = b.gamma;
              mj["support"] = b.support.to_rows();
              mj["coef"] = b.coef;
            }
            machines.push_back(std::move(mj));
          }
          j["machines"] = std::move(machines);
        } else if constexpr (std::is_same_v<T, RandomForest>) {
          json trees = json::array();
          for (const auto& t : m.trees) {
            json nodes = json::array();
            for (const auto& n : t.nodes) nodes.push_back({n.feature, n.threshold, n.left, n.right, n.label});
            trees.push_back(std::move(nodes));
          }
          j["trees"] = std::move(trees);
        } else {
          json layers = json::array();
          for (const auto& l : m.net.layers) layers.push_back({{"W", l.W.to_rows()}, {"b", l.b}});
          j["layers"] = std::move(layers);
        }
      },
      c.model);
  return j;
}

inline TrainedClassifier classifier_from_json(const nlohmann::json& j) {
  try {
    TrainedClassifier c;
    c.algo = parse_algo(j.at("algo").get<std::string>());
    c.dim = j.at("dim").get<std::size_t>();
    c.class_count = j.at("class_count").get<std::size_t>();
    switch (c.algo) {
      case Algo::knn: {
        KnnModel m;
        m.k = j.at("k").get<std::size_t>();
        m.train.X = Matrix::from_rows(j.at("X").get<std::vector<std::vector<double>>>());
        m.train.y = j.at("y").get<std::vector<Label>>();
        m.train.class_count = c.class_count;
        m.train.validate();
        c.model = std::move(m);
        break;
      }
      case Algo::svm: {
        OvrSvmModel m;
        for (const auto& mj : j.at("machines")) {
          BinarySvm b;
          b.b = mj.at("b").get<double>();
          if (mj.at("kernel") == "linear") {
            b.kernel = Kernel::linear;
            b.w = mj.at("w").get<std::vector<double>>();
          } else {
            b.kernel = Kernel::rbf;
            b.gamma = mj.at("gamma").get<double>();
            b.support = Matrix::from_rows(mj.at("support").get<std::vector<std::vector<double>>>());
            b.coef = mj.at("coef").get<std::vector<double>>();
          }
          m.machines.push_back(std::move(b));
        }
        c.model = std::move(m);
        break;
      }
      case Algo::rf: {
        RandomForest f;
        f.class_count = c.class_count;
        f.dim = c.dim;
        for (const auto& tj : j.at("trees")) {
          DecisionTree t;
          for (const auto& n : tj)
            t.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                               n.at(3).get<int>(), n.at(4).get<Label>()});
          f.trees.push_back(std::move(t));
        }
        c.model = std::move(f);
        break;
      }
      case Algo::nn: {
        NnModel m;
        for (const auto& lj : j.at("layers"))
          m.net.layers.push_back({Matrix::from_rows(lj.at("W").get<std::vector<std::vector<double>>>()),
                                  lj.at("b").get<std::vector<double>>()});
        c.model = std::move(m);
        break;
      }
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed classifier model: ") + e.what());
  }
}

}  // namespace opseq
