#pragma once

// Minimal deterministic federated-learning engine: a ReLU/softmax MLP kept
// as one flat parameter vector, minibatch Adam for local training, FedAvg
// aggregation, single-client probing and the K-round training loop.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fedsec/dataset.hpp"
#include "fedsec/errors.hpp"
#include "fedsec/random.hpp"

namespace fedsec {

struct MlpSpec {
  int input_dim = 10;
  std::vector<int> hidden_dims{25, 25};
  int output_dim = 28;

  int layer_count() const { return static_cast<int>(hidden_dims.size()) + 1; }
};

struct LayerShape {
  int fan_in = 0;
  int fan_out = 0;
  Eigen::Index weight_offset = 0;  // fan_out x fan_in, column-major
  Eigen::Index bias_offset = 0;

  bool operator==(const LayerShape&) const = default;
};

struct ParamLayout {
  std::vector<LayerShape> layers;
  Eigen::Index size = 0;

  static ParamLayout from(const MlpSpec& spec);
  int input_dim() const { return layers.front().fan_in; }
  int output_dim() const { return layers.back().fan_out; }
  bool operator==(const ParamLayout&) const = default;
};

template <typename Scalar>
struct ModelParams {
  ParamLayout layout;
  Vector<Scalar> values;
};

struct TrainingPlan {
  int rounds = 20;     // K
  int epochs = 8;      // E
  int batch_size = 3;
  double cycle_period = 1.0;  // delta, in selection cycles
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

enum class Aggregation { kUnweighted, kBySampleCount };

template <typename Scalar>
struct FederatedResult {
  ModelParams<Scalar> params;
  std::vector<double> history;  // test accuracy after each round
};

// Seed of client `client` in round `round` of federated_train.
inline std::uint64_t round_seed(std::uint64_t seed, int round, int client) {
  return derive_seed(seed, {seed_tag::kRound, static_cast<std::uint64_t>(round),
                            static_cast<std::uint64_t>(client)});
}

inline ParamLayout ParamLayout::from(const MlpSpec& spec) {
  if (spec.input_dim < 1 || spec.output_dim < 1) throw ShapeError("layer widths must be positive");
  ParamLayout layout;
  int fan_in = spec.input_dim;
  auto add = [&](int fan_out) {
    if (fan_out < 1) throw ShapeError("layer widths must be positive");
    LayerShape shape{fan_in, fan_out, layout.size, layout.size + Eigen::Index{fan_in} * fan_out};
    layout.size = shape.bias_offset + fan_out;
    layout.layers.push_back(shape);
    fan_in = fan_out;
  };
  for (int h : spec.hidden_dims) add(h);
  add(spec.output_dim);
  return layout;
}

namespace detail {

template <typename Scalar>
auto weights(const ModelParams<Scalar>& p, const LayerShape& s) {
  return Eigen::Map<const Matrix<Scalar>>(p.values.data() + s.weight_offset, s.fan_out, s.fan_in);
}

template <typename Scalar>
auto bias(const ModelParams<Scalar>& p, const LayerShape& s) {
  return Eigen::Map<const Vector<Scalar>>(p.values.data() + s.bias_offset, s.fan_out);
}

// Column-per-sample activations, reused across minibatches.
template <typename Scalar>
class MlpWorkspace {
 public:
  // Minibatches up to this width use coefficient-based products; the
  // blocked GEMM path costs more than it saves at batch size 3.
  static constexpr Eigen::Index kLazyCols = 16;

  explicit MlpWorkspace(const ParamLayout& layout)
      : layout_(layout), pre_(layout.layers.size()), act_(layout.layers.size() + 1) {}

  // Input columns are the samples.
  Matrix<Scalar>& input() { return act_[0]; }

  // Returns class probabilities, one column per sample.
  const Matrix<Scalar>& forward(const ModelParams<Scalar>& p) {
    const auto n_layers = layout_.layers.size();
    for (std::size_t l = 0; l < n_layers; ++l) {
      const auto& s = layout_.layers[l];
      if (act_[l].cols() <= kLazyCols) {
        pre_[l].noalias() = weights(p, s).lazyProduct(act_[l]);
      } else {
        pre_[l].noalias() = weights(p, s) * act_[l];
      }
      pre_[l].colwise() += bias(p, s);
      if (l + 1 < n_layers) {
        act_[l + 1] = pre_[l].cwiseMax(Scalar(0));
      } else {
        softmax_columns(pre_[l], act_[l + 1]);
      }
    }
    return act_.back();
  }

  // Mean cross-entropy of the last forward pass; writes dLoss/dParams.
  Scalar backward(const ModelParams<Scalar>& p, std::span<const int> labels, Vector<Scalar>& grad) {
    const Eigen::Index batch = act_[0].cols();
    const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(batch);
    Scalar loss = 0;
    delta_ = act_.back();
    for (Eigen::Index j = 0; j < batch; ++j) {
      const int y = labels[static_cast<std::size_t>(j)];
      loss -= std::log(std::max(delta_(y, j), std::numeric_limits<Scalar>::min()));
      delta_(y, j) -= Scalar(1);
    }
    delta_ *= inv_batch;

    grad.resize(layout_.size);
    for (std::size_t l = layout_.layers.size(); l-- > 0;) {
      const auto& s = layout_.layers[l];
      Eigen::Map<Matrix<Scalar>> grad_w(grad.data() + s.weight_offset, s.fan_out, s.fan_in);
      if (batch <= kLazyCols) {
        grad_w.noalias() = delta_.lazyProduct(act_[l].transpose());
      } else {
        grad_w.noalias() = delta_ * act_[l].transpose();
      }
      Eigen::Map<Vector<Scalar>>(grad.data() + s.bias_offset, s.fan_out) = delta_.rowwise().sum();
      if (l > 0) {
        if (batch <= kLazyCols) {
          back_.noalias() = weights(p, s).transpose().lazyProduct(delta_);
        } else {
          back_.noalias() = weights(p, s).transpose() * delta_;
        }
        delta_ = (pre_[l - 1].array() > Scalar(0)).select(back_, Scalar(0));
      }
    }
    return loss * inv_batch;
  }

  static void softmax_columns(const Matrix<Scalar>& logits, Matrix<Scalar>& out) {
    out.resize(logits.rows(), logits.cols());
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
      const Scalar peak = logits.col(j).maxCoeff();
      out.col(j) = (logits.col(j).array() - peak).exp().matrix();
      out.col(j) /= out.col(j).sum();
    }
  }

 private:
  const ParamLayout& layout_;
  std::vector<Matrix<Scalar>> pre_;
  std::vector<Matrix<Scalar>> act_;
  Matrix<Scalar> delta_;
  Matrix<Scalar> back_;
};

template <typename Scalar>
void require_input_dim(const ModelParams<Scalar>& p, Eigen::Index cols) {
  if (cols != p.layout.input_dim()) {
    throw ShapeError("batch has " + std::to_string(cols) + " columns, model expects " +
                     std::to_string(p.layout.input_dim()));
  }
}

template <typename Scalar>
void require_labels(const ModelParams<Scalar>& p, const Dataset<Scalar>& data) {
  if (data.labels.size() != data.features.rows()) throw ShapeError("label count != row count");
  const int classes = p.layout.output_dim();
  for (Eigen::Index i = 0; i < data.labels.size(); ++i) {
    if (data.labels(i) < 0 || data.labels(i) >= classes) {
      throw std::out_of_range("label outside [0, output_dim)");
    }
  }
}

}  // namespace detail

template <typename Scalar = double>
ModelParams<Scalar> init_model(const MlpSpec& spec, std::uint64_t seed) {
  ModelParams<Scalar> p{ParamLayout::from(spec), {}};
  p.values = Vector<Scalar>::Zero(p.layout.size);
  Rng rng(derive_seed(seed, {seed_tag::kInit}));
  for (const auto& s : p.layout.layers) {
    const double limit = std::sqrt(6.0 / static_cast<double>(s.fan_in + s.fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (Eigen::Index k = 0; k < Eigen::Index{s.fan_in} * s.fan_out; ++k) {
      p.values(s.weight_offset + k) = static_cast<Scalar>(dist(rng));
    }
  }
  return p;
}

// Class probabilities, one row per sample.
template <typename Scalar, typename Derived>
Matrix<Scalar> forward(const ModelParams<Scalar>& params, const Eigen::MatrixBase<Derived>& batch) {
  detail::require_input_dim(params, batch.cols());
  detail::MlpWorkspace<Scalar> ws(params.layout);
  ws.input() = batch.transpose().template cast<Scalar>();
  return ws.forward(params).transpose();
}

// Mean cross-entropy over `data` and its gradient.
template <typename Scalar>
std::pair<Scalar, Vector<Scalar>> loss_and_gradient(const ModelParams<Scalar>& params,
                                                    const Dataset<Scalar>& data) {
  detail::require_input_dim(params, data.dim());
  detail::require_labels(params, data);
  detail::MlpWorkspace<Scalar> ws(params.layout);
  ws.input() = data.features.transpose();
  ws.forward(params);
  Vector<Scalar> grad;
  std::vector<int> labels(data.labels.data(), data.labels.data() + data.labels.size());
  const Scalar loss = ws.backward(params, labels, grad);
  return {loss, std::move(grad)};
}

template <typename Scalar>
Scalar cross_entropy(const ModelParams<Scalar>& params, const Dataset<Scalar>& data) {
  return loss_and_gradient(params, data).first;
}

// E epochs of minibatch Adam from a fresh optimizer state. Batch order is
// reshuffled per (seed, epoch); the last batch of an epoch may be short.
template <typename Scalar>
ModelParams<Scalar> train_local(const ModelParams<Scalar>& params, const Dataset<Scalar>& data,
                                const TrainingPlan& plan, std::uint64_t seed,
                                const AdamConfig& adam = {}) {
  if (data.empty()) throw std::invalid_argument("local dataset is empty");
  if (plan.batch_size < 1) throw std::invalid_argument("batch size must be positive");
  detail::require_input_dim(params, data.dim());
  detail::require_labels(params, data);

  ModelParams<Scalar> out = params;
  if (plan.epochs <= 0) return out;

  const Eigen::Index n = data.size();
  const Eigen::Index dim = data.dim();
  detail::MlpWorkspace<Scalar> ws(out.layout);
  Vector<Scalar> grad(out.layout.size);
  Vector<Scalar> m = Vector<Scalar>::Zero(out.layout.size);
  Vector<Scalar> v = Vector<Scalar>::Zero(out.layout.size);
  const auto lr = static_cast<Scalar>(adam.learning_rate);
  const auto b1 = static_cast<Scalar>(adam.beta1);
  const auto b2 = static_cast<Scalar>(adam.beta2);
  const auto eps = static_cast<Scalar>(adam.epsilon);
  Scalar b1_pow = 1, b2_pow = 1;

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(plan.batch_size));

  for (int epoch = 0; epoch < plan.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    Rng rng(derive_seed(seed, {seed_tag::kEpoch, static_cast<std::uint64_t>(epoch)}));
    std::shuffle(order.begin(), order.end(), rng);

    for (Eigen::Index start = 0; start < n; start += plan.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(plan.batch_size, n - start);
      auto& x = ws.input();
      x.resize(dim, len);
      labels.clear();
      for (Eigen::Index j = 0; j < len; ++j) {
        const auto row = order[static_cast<std::size_t>(start + j)];
        x.col(j) = data.features.row(row).transpose();
        labels.push_back(data.labels(row));
      }
      ws.forward(out);
      ws.backward(out, labels, grad);

      b1_pow *= b1;
      b2_pow *= b2;
      const Scalar step = lr / (Scalar(1) - b1_pow);
      const Scalar v_corr = Scalar(1) / (Scalar(1) - b2_pow);
      m.array() = b1 * m.array() + (Scalar(1) - b1) * grad.array();
      v.array() = b2 * v.array() + (Scalar(1) - b2) * grad.array().square();
      out.values.array() -= step * m.array() / ((v.array() * v_corr).sqrt() + eps);
    }
  }
  return out;
}

// Fraction of samples whose argmax (ties to the lowest class) matches.
template <typename Scalar>
double evaluate(const ModelParams<Scalar>& params, const Dataset<Scalar>& test) {
  if (test.empty()) throw std::invalid_argument("test dataset is empty");
  detail::require_input_dim(params, test.dim());
  detail::MlpWorkspace<Scalar> ws(params.layout);
  ws.input() = test.features.transpose();
  const Matrix<Scalar>& probs = ws.forward(params);
  Eigen::Index hits = 0;
  for (Eigen::Index j = 0; j < probs.cols(); ++j) {
    Eigen::Index arg = 0;
    for (Eigen::Index c = 1; c < probs.rows(); ++c) {
      if (probs(c, j) > probs(arg, j)) arg = c;
    }
    if (arg == test.labels(j)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(test.size());
}

// Component-wise mean as a running update, so identical inputs average to
// themselves exactly. Optional weights (e.g. sample counts) must be positive.
template <typename Scalar>
ModelParams<Scalar> fedavg(std::span<const ModelParams<Scalar>> param_sets,
                           std::span<const double> weights = {}) {
  if (param_sets.empty()) throw std::invalid_argument("fedavg needs at least one parameter set");
  if (!weights.empty() && weights.size() != param_sets.size()) {
    throw std::invalid_argument("one weight per parameter set required");
  }
  ModelParams<Scalar> out = param_sets.front();
  double total = weights.empty() ? 1.0 : weights.front();
  for (std::size_t k = 1; k < param_sets.size(); ++k) {
    const auto& p = param_sets[k];
    if (!(p.layout == out.layout)) throw ShapeError("parameter layouts differ");
    const double w = weights.empty() ? 1.0 : weights[k];
    if (!(w > 0.0)) throw std::invalid_argument("aggregation weights must be positive");
    total += w;
    out.values += static_cast<Scalar>(w / total) * (p.values - out.values);
  }
  return out;
}

// One communication round with a single client, scored on the server test
// set. No averaging; `global_init` is not modified.
template <typename Scalar>
double probe_client(const ModelParams<Scalar>& global_init, const Dataset<Scalar>& client_data,
                    const Dataset<Scalar>& test, const TrainingPlan& plan, std::uint64_t seed) {
  return evaluate(train_local(global_init, client_data, plan, seed), test);
}

// K rounds of broadcast, E local epochs per client, then FedAvg.
template <typename Scalar>
FederatedResult<Scalar> federated_train(const ModelParams<Scalar>& global_init,
                                        std::span<const Dataset<Scalar>> clients,
                                        const Dataset<Scalar>& test, const TrainingPlan& plan,
                                        std::uint64_t seed,
                                        Aggregation aggregation = Aggregation::kUnweighted) {
  if (clients.empty()) throw std::invalid_argument("federated_train needs at least one client");
  FederatedResult<Scalar> result{global_init, {}};
  std::vector<double> weights;
  if (aggregation == Aggregation::kBySampleCount) {
    for (const auto& c : clients) weights.push_back(static_cast<double>(c.size()));
  }
  std::vector<ModelParams<Scalar>> locals(clients.size());
  for (int k = 0; k < plan.rounds; ++k) {
    for (std::size_t j = 0; j < clients.size(); ++j) {
      locals[j] = train_local(result.params, clients[j], plan, round_seed(seed, k, static_cast<int>(j)));
    }
    result.params = fedavg<Scalar>(locals, weights);
    result.history.push_back(evaluate(result.params, test));
  }
  return result;
}

extern template ModelParams<double> init_model<double>(const MlpSpec&, std::uint64_t);
extern template ModelParams<double> train_local<double>(const ModelParams<double>&,
                                                        const Dataset<double>&,
                                                        const TrainingPlan&, std::uint64_t,
                                                        const AdamConfig&);
extern template double evaluate<double>(const ModelParams<double>&, const Dataset<double>&);
extern template ModelParams<double> fedavg<double>(std::span<const ModelParams<double>>,
                                                   std::span<const double>);
extern template FederatedResult<double> federated_train<double>(
    const ModelParams<double>&, std::span<const Dataset<double>>, const Dataset<double>&,
    const TrainingPlan&, std::uint64_t, Aggregation);

}  // namespace fedsec
