#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "fedsec/data_pipeline.hpp"
#include "fedsec/errors.hpp"
#include "fedsec/fl_core.hpp"

using namespace fedsec;

namespace {

Dataset<double> tiny_data(int rows, int dim, int classes, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Dataset<double> d;
  d.features.resize(rows, dim);
  d.labels.resize(rows);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < dim; ++j) d.features(i, j) = u(rng);
    d.labels(i) = static_cast<int>(rng() % static_cast<unsigned>(classes));
  }
  return d;
}

// Loss computed with plain loops, independent of the workspace.
double loss_oracle(const ModelParams<double>& p, const Dataset<double>& d) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    std::vector<double> a;
    for (Eigen::Index j = 0; j < d.dim(); ++j) a.push_back(d.features(i, j));
    for (std::size_t l = 0; l < p.layout.layers.size(); ++l) {
      const auto& s = p.layout.layers[l];
      std::vector<double> z(static_cast<std::size_t>(s.fan_out));
      for (int o = 0; o < s.fan_out; ++o) {
        double acc = p.values(s.bias_offset + o);
        for (int k = 0; k < s.fan_in; ++k) {
          acc += p.values(s.weight_offset + Eigen::Index{k} * s.fan_out + o) * a[static_cast<std::size_t>(k)];
        }
        z[static_cast<std::size_t>(o)] = (l + 1 < p.layout.layers.size()) ? std::max(acc, 0.0) : acc;
      }
      a = z;
    }
    const double peak = *std::max_element(a.begin(), a.end());
    double denom = 0.0;
    for (double v : a) denom += std::exp(v - peak);
    total -= a[static_cast<std::size_t>(d.labels(i))] - peak - std::log(denom);
  }
  return total / static_cast<double>(d.size());
}

}  // namespace

TEST_CASE("layout of the default network") {
  const auto layout = ParamLayout::from(MlpSpec{});
  CHECK(layout.size == 10 * 25 + 25 + 25 * 25 + 25 + 25 * 28 + 28);
  CHECK(layout.size == 1653);
  CHECK(layout.input_dim() == 10);
  CHECK(layout.output_dim() == 28);
  CHECK_THROWS_AS(ParamLayout::from(MlpSpec{0, {4}, 3}), ShapeError);
}

TEST_CASE("init is deterministic and bounded") {
  const auto a = init_model<double>(MlpSpec{}, 5);
  const auto b = init_model<double>(MlpSpec{}, 5);
  const auto c = init_model<double>(MlpSpec{}, 6);
  CHECK(a.values == b.values);
  CHECK(a.values != c.values);
  for (const auto& s : a.layout.layers) {
    const double limit = std::sqrt(6.0 / (s.fan_in + s.fan_out));
    CHECK(a.values.segment(s.weight_offset, Eigen::Index{s.fan_in} * s.fan_out).cwiseAbs().maxCoeff() <= limit);
    CHECK(a.values.segment(s.bias_offset, s.fan_out).isZero());
  }
}

TEST_CASE("loss matches the loop oracle") {
  const auto p = init_model<double>(MlpSpec{6, {5, 4}, 3}, 1);
  const auto d = tiny_data(7, 6, 3, 2);
  CHECK(cross_entropy(p, d) == doctest::Approx(loss_oracle(p, d)).epsilon(1e-12));
}

TEST_CASE("gradient check") {
  auto p = init_model<double>(MlpSpec{6, {5, 4}, 3}, 3);
  // Nonzero biases so no unit sits exactly at the ReLU kink.
  for (const auto& s : p.layout.layers) p.values.segment(s.bias_offset, s.fan_out).setConstant(0.05);
  const auto d = tiny_data(9, 6, 3, 4);
  const auto [loss, grad] = loss_and_gradient(p, d);
  double worst = 0.0;
  const double h = 1e-6;
  for (Eigen::Index k = 0; k < p.values.size(); ++k) {
    auto up = p, down = p;
    up.values(k) += h;
    down.values(k) -= h;
    const double fd = (loss_oracle(up, d) - loss_oracle(down, d)) / (2 * h);
    const double rel = std::abs(fd - grad(k)) / std::max(1e-8, std::abs(fd) + std::abs(grad(k)));
    if (std::abs(fd) + std::abs(grad(k)) > 1e-7) worst = std::max(worst, rel);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("softmax rows sum to one for extreme logits") {
  ModelParams<double> p{ParamLayout::from(MlpSpec{2, {}, 4}), {}};
  p.values = Eigen::VectorXd::Zero(p.layout.size);
  const auto& s = p.layout.layers[0];
  p.values.segment(s.bias_offset, 4) << 1e3, -1e3, 0.0, 999.0;
  Eigen::MatrixXd x(3, 2);
  x << 0, 0, 1, 1, -1, 0.5;
  const auto probs = forward(p, x);
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    CHECK(std::abs(probs.row(i).sum() - 1.0) < 1e-9);
    CHECK(probs.row(i).allFinite());
  }
  CHECK(probs(0, 0) == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))));
}

TEST_CASE("fedavg properties") {
  const auto a = init_model<double>(MlpSpec{}, 1);
  const auto b = init_model<double>(MlpSpec{}, 2);
  const auto c = init_model<double>(MlpSpec{}, 3);
  std::vector<ModelParams<double>> same{a, a, a};
  CHECK(fedavg<double>(same).values == a.values);

  std::vector<ModelParams<double>> abc{a, b, c}, cab{c, a, b};
  const auto m1 = fedavg<double>(abc);
  const auto m2 = fedavg<double>(cab);
  CHECK((m1.values - m2.values).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((m1.values - (a.values + b.values + c.values) / 3.0).cwiseAbs().maxCoeff() < 1e-15);

  std::vector<ModelParams<double>> ab{a, b};
  std::vector<double> w{3.0, 1.0};
  const auto weighted = fedavg<double>(ab, w);
  CHECK((weighted.values - (0.75 * a.values + 0.25 * b.values)).cwiseAbs().maxCoeff() < 1e-15);

  CHECK_THROWS_AS(fedavg<double>(std::span<const ModelParams<double>>{}), std::invalid_argument);
  std::vector<ModelParams<double>> mixed{a, init_model<double>(MlpSpec{10, {5}, 28}, 1)};
  CHECK_THROWS_AS(fedavg<double>(mixed), ShapeError);
  std::vector<double> bad{1.0, 0.0};
  CHECK_THROWS_AS(fedavg<double>(ab, bad), std::invalid_argument);
}

TEST_CASE("single-client federated training equals sequential local training") {
  const auto init = init_model<double>(MlpSpec{6, {8}, 3}, 9);
  const auto train = tiny_data(20, 6, 3, 10);
  const auto test = tiny_data(10, 6, 3, 11);
  TrainingPlan plan;
  plan.rounds = 4;
  plan.epochs = 2;
  const std::uint64_t seed = 77;
  std::vector<Dataset<double>> one{train};
  const auto fed = federated_train<double>(init, one, test, plan, seed);

  auto seq = init;
  for (int k = 0; k < plan.rounds; ++k) seq = train_local(seq, train, plan, round_seed(seed, k, 0));
  CHECK(fed.params.values == seq.values);
  CHECK(fed.history.size() == 4);
  CHECK(fed.history.back() == evaluate(seq, test));
}

TEST_CASE("training is deterministic and learns a separable set") {
  const auto data = synth_dataset(600, 4, 3, 1, 0.05);
  const auto init = init_model<double>(MlpSpec{4, {16}, 3}, 2);
  TrainingPlan plan;
  plan.epochs = 30;
  const auto a = train_local(init, data, plan, 3);
  const auto b = train_local(init, data, plan, 3);
  CHECK(a.values == b.values);
  CHECK(cross_entropy(a, data) < cross_entropy(init, data));
  CHECK(evaluate(a, data) > 0.95);
}

TEST_CASE("zero epochs leaves params unchanged") {
  const auto init = init_model<double>(MlpSpec{4, {3}, 2}, 1);
  TrainingPlan plan;
  plan.epochs = 0;
  CHECK(train_local(init, tiny_data(5, 4, 2, 1), plan, 1).values == init.values);
}

TEST_CASE("input validation") {
  const auto init = init_model<double>(MlpSpec{4, {3}, 2}, 1);
  TrainingPlan plan;
  CHECK_THROWS_AS(train_local(init, tiny_data(5, 3, 2, 1), plan, 1), ShapeError);
  CHECK_THROWS_AS(train_local(init, tiny_data(5, 4, 5, 1), plan, 1), std::out_of_range);
  CHECK_THROWS_AS(train_local(init, Dataset<double>{}, plan, 1), std::invalid_argument);
  plan.batch_size = 0;
  CHECK_THROWS_AS(train_local(init, tiny_data(5, 4, 2, 1), plan, 1), std::invalid_argument);
  CHECK_THROWS_AS(evaluate(init, Dataset<double>{}), std::invalid_argument);
}

TEST_CASE("argmax ties go to the lowest class") {
  ModelParams<double> p{ParamLayout::from(MlpSpec{1, {}, 3}), {}};
  p.values = Eigen::VectorXd::Zero(p.layout.size);
  Dataset<double> d;
  d.features = Eigen::MatrixXd::Ones(2, 1);
  d.labels.resize(2);
  d.labels << 0, 1;
  CHECK(evaluate(p, d) == 0.5);
}
