#pragma once

#include <Eigen/Dense>

namespace fedsec {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

// Labeled samples, one per row. Labels are class ids in [0, n_classes).
template <typename Scalar>
struct Dataset {
  Matrix<Scalar> features;
  Eigen::VectorXi labels;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dim() const { return features.cols(); }
  bool empty() const { return features.rows() == 0; }
};

// Rows `rows` of `data`, in the given order.
template <typename Scalar, typename IndexRange>
Dataset<Scalar> take_rows(const Dataset<Scalar>& data, const IndexRange& rows) {
  Dataset<Scalar> out;
  const auto n = static_cast<Eigen::Index>(std::size(rows));
  out.features.resize(n, data.features.cols());
  out.labels.resize(n);
  Eigen::Index k = 0;
  for (auto r : rows) {
    out.features.row(k) = data.features.row(static_cast<Eigen::Index>(r));
    out.labels(k) = data.labels(static_cast<Eigen::Index>(r));
    ++k;
  }
  return out;
}

}  // namespace fedsec
