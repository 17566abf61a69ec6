#include "fedsec/data_pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fedsec/errors.hpp"
#include "fedsec/random.hpp"

namespace fedsec {

Eigen::MatrixXd MinMaxScaler::transform(const Eigen::MatrixXd& table) const {
  if (table.cols() != min.size()) throw ShapeError("scaler column count mismatch");
  Eigen::MatrixXd out(table.rows(), table.cols());
  for (Eigen::Index c = 0; c < table.cols(); ++c) {
    const double range = max(c) - min(c);
    if (range > 0.0) {
      out.col(c) = (table.col(c).array() - min(c)) / range;
    } else {
      out.col(c).setZero();
    }
  }
  return out;
}

Normalized minmax_normalize(const Eigen::MatrixXd& table) {
  if (table.rows() == 0 || table.cols() == 0) throw std::invalid_argument("empty table");
  if (!table.allFinite()) throw std::domain_error("table contains non-finite values");
  Normalized out;
  out.scaler.min = table.colwise().minCoeff().transpose();
  out.scaler.max = table.colwise().maxCoeff().transpose();
  out.values = out.scaler.transform(table);
  return out;
}

TrainTestSplit shuffle_split(const Dataset<double>& table, double test_fraction,
                             std::uint64_t seed) {
  if (table.empty()) throw std::invalid_argument("empty table");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw std::domain_error("test fraction must lie in (0, 1)");
  }
  const Eigen::Index n = table.size();
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  Rng rng(derive_seed(seed, {seed_tag::kSplit}));
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_test = static_cast<Eigen::Index>(std::llround(test_fraction * static_cast<double>(n)));
  TrainTestSplit split;
  split.test_rows.assign(order.begin(), order.begin() + n_test);
  split.train_rows.assign(order.begin() + n_test, order.end());
  split.test = take_rows(table, split.test_rows);
  split.train = take_rows(table, split.train_rows);
  return split;
}

int ClientPartition::fat_count() const {
  return static_cast<int>(std::count(fat.begin(), fat.end(), true));
}

int fat_client_count(const PartitionSpec& spec) {
  return static_cast<int>(std::lround(spec.fat_fraction * spec.n_clients));
}

Eigen::Index fat_client_rows(const PartitionSpec& spec, Eigen::Index train_rows) {
  return static_cast<Eigen::Index>(std::llround(spec.fat_share * static_cast<double>(train_rows)));
}

Eigen::Index thin_client_rows(const PartitionSpec& spec, Eigen::Index train_rows) {
  return static_cast<Eigen::Index>(std::llround(spec.thin_share * static_cast<double>(train_rows)));
}

ClientPartition partition_clients(const Dataset<double>& train, const PartitionSpec& spec) {
  if (spec.n_clients < 1) throw std::invalid_argument("n_clients must be positive");
  if (!(spec.fat_fraction > 0.0 && spec.fat_fraction < 1.0)) {
    throw std::invalid_argument("fat_fraction must lie in (0, 1)");
  }
  if (!(spec.fat_share > 0.0 && spec.fat_share < 1.0) ||
      !(spec.thin_share > 0.0 && spec.thin_share < 1.0)) {
    throw std::invalid_argument("client shares must lie in (0, 1)");
  }
  const Eigen::Index n_rows = train.size();
  const Eigen::Index fat_rows = fat_client_rows(spec, n_rows);
  const Eigen::Index thin_rows = thin_client_rows(spec, n_rows);
  if (fat_rows < 1 || thin_rows < 1 || fat_rows > n_rows) {
    throw std::invalid_argument("train set too small for the requested client shares");
  }
  const int n_fat = fat_client_count(spec);

  Rng rng(derive_seed(spec.seed, {seed_tag::kPartition}));
  std::vector<Eigen::Index> pool(static_cast<std::size_t>(n_rows));
  std::vector<std::vector<Eigen::Index>> rows;
  std::vector<bool> fat;
  rows.reserve(static_cast<std::size_t>(spec.n_clients));
  for (int c = 0; c < spec.n_clients; ++c) {
    const bool is_fat = c < n_fat;
    const auto take = static_cast<std::size_t>(is_fat ? fat_rows : thin_rows);
    std::iota(pool.begin(), pool.end(), Eigen::Index{0});
    // Partial Fisher-Yates: the first `take` slots become a uniform subset.
    for (std::size_t k = 0; k < take; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, pool.size() - 1);
      std::swap(pool[k], pool[pick(rng)]);
    }
    rows.emplace_back(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    fat.push_back(is_fat);
  }

  std::vector<std::size_t> order(rows.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);

  ClientPartition out;
  for (auto idx : order) {
    out.clients.push_back(take_rows(train, rows[idx]));
    out.fat.push_back(fat[idx]);
    out.rows.push_back(std::move(rows[idx]));
  }
  return out;
}

Dataset<double> synth_dataset(int n_samples, int n_features, int n_classes, std::uint64_t seed,
                              double sigma) {
  if (n_samples < 1 || n_features < 1) throw std::invalid_argument("empty synthetic dataset");
  if (n_classes < 2) throw std::invalid_argument("need at least two classes");
  Rng rng(derive_seed(seed, {seed_tag::kData}));
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, sigma);

  Eigen::MatrixXd centroids(n_classes, n_features);
  for (Eigen::Index i = 0; i < centroids.size(); ++i) centroids.data()[i] = unif(rng);

  Dataset<double> out;
  out.features.resize(n_samples, n_features);
  out.labels.resize(n_samples);
  for (int i = 0; i < n_samples; ++i) {
    const int label = i % n_classes;
    out.labels(i) = label;
    for (int f = 0; f < n_features; ++f) {
      out.features(i, f) = std::clamp(centroids(label, f) + noise(rng), 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace fedsec
