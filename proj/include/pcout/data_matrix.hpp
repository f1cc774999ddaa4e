#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "pcout/error.hpp"

namespace pcout {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// An n x p table of observations (rows) by variables (columns), with labels.
// Labels are optional; empty label vectors mean "use positional names".
struct DataMatrix {
  Matrix values;
  std::vector<std::string> row_ids;
  std::vector<std::string> column_names;

  DataMatrix() = default;
  explicit DataMatrix(Matrix v) : values(std::move(v)) {}

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }

  std::string row_id(Eigen::Index i) const {
    if (static_cast<size_t>(i) < row_ids.size()) return row_ids[static_cast<size_t>(i)];
    return std::to_string(i + 1);
  }
  std::string column_name(Eigen::Index j) const {
    if (static_cast<size_t>(j) < column_names.size()) return column_names[static_cast<size_t>(j)];
    return "V" + std::to_string(j + 1);
  }
};

inline void require_finite(const Eigen::Ref<const Matrix>& x, const std::string& step) {
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    for (Eigen::Index i = 0; i < x.rows(); ++i)
      if (!std::isfinite(x(i, j)))
        fail_input(step, "non-finite value at row " + std::to_string(i + 1) + ", column " +
                             std::to_string(j + 1));
}

inline std::vector<double> to_std(const Eigen::Ref<const Vector>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

} // namespace pcout
