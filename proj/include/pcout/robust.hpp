#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <ranges>
#include <string>
#include <vector>

#include "pcout/data_matrix.hpp"
#include "pcout/error.hpp"

namespace pcout {

// Consistency factor making the MAD an estimate of sigma at the normal: 1 / Phi^{-1}(3/4).
inline constexpr double kMadConstant = 1.4826;

namespace detail {

template <std::ranges::input_range R>
std::vector<double> collect(const R& r) {
  std::vector<double> v;
  if constexpr (std::ranges::sized_range<R>) v.reserve(std::ranges::size(r));
  for (auto&& x : r) v.push_back(static_cast<double>(x));
  return v;
}

inline std::vector<double> collect(const Eigen::Ref<const Vector>& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

// Median of a scratch buffer; reorders it.
inline double median_inplace(std::vector<double>& v) {
  const size_t n = v.size();
  const size_t mid = n / 2;
  auto mid_it = v.begin() + static_cast<std::ptrdiff_t>(mid);
  std::nth_element(v.begin(), mid_it, v.end());
  const double upper = *mid_it;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid_it);
  return 0.5 * (lower + upper);
}

// Linear interpolation between order statistics at position prob * (n - 1).
inline double quantile_inplace(std::vector<double>& v, double prob) {
  const size_t n = v.size();
  const double pos = prob * static_cast<double>(n - 1);
  const size_t lo = std::min(static_cast<size_t>(std::floor(pos)), n - 1);
  const size_t hi = std::min(lo + 1, n - 1);
  auto lo_it = v.begin() + static_cast<std::ptrdiff_t>(lo);
  std::nth_element(v.begin(), lo_it, v.end());
  const double a = *lo_it;
  const double frac = pos - static_cast<double>(lo);
  if (hi == lo || frac <= 0.0) return a;
  // after nth_element everything right of lo is >= a, so the next order statistic is its minimum
  const double b = *std::min_element(lo_it + 1, v.end());
  return a + (b - a) * frac;
}

inline double mad_inplace(std::vector<double>& v) {
  const double med = median_inplace(v);
  for (double& x : v) x = std::fabs(x - med);
  return kMadConstant * median_inplace(v);
}

inline void require_sample(const std::vector<double>& v, const char* step) {
  if (v.empty()) fail_numeric(step, "empty sample");
  for (double x : v)
    if (!std::isfinite(x)) fail_input(step, "sample contains a non-finite value");
}

} // namespace detail

template <class R>
double median(const R& sample) {
  auto v = detail::collect(sample);
  detail::require_sample(v, "median");
  return detail::median_inplace(v);
}

// 1.4826 * med |x - med(x)|
template <class R>
double mad(const R& sample) {
  auto v = detail::collect(sample);
  detail::require_sample(v, "mad");
  return detail::mad_inplace(v);
}

template <class R>
double quantile(const R& sample, double prob) {
  if (!(prob >= 0.0 && prob <= 1.0)) fail_config("quantile", "probability must lie in [0, 1]");
  auto v = detail::collect(sample);
  detail::require_sample(v, "quantile");
  return detail::quantile_inplace(v, prob);
}

// |mean((z - med)^4) / MAD^4 - 3|, the absolute robust excess kurtosis of one component.
template <class R>
double robust_kurtosis_weight(const R& sample) {
  auto v = detail::collect(sample);
  detail::require_sample(v, "robust kurtosis");
  auto scratch = v;
  const double med = detail::median_inplace(scratch);
  const double scale = detail::mad_inplace(scratch);
  if (!(scale > 0.0)) fail_numeric("robust kurtosis", "MAD is zero");
  double acc = 0.0;
  for (double x : v) {
    const double u = (x - med) / scale;
    acc += (u * u) * (u * u);
  }
  return std::fabs(acc / static_cast<double>(v.size()) - 3.0);
}

struct ScaleParams {
  Vector medians;                    // one per input column
  Vector mads;                       // one per input column; zero for dropped columns
  std::vector<Eigen::Index> dropped_columns;
  std::vector<Eigen::Index> kept_columns;
};

struct Sphered {
  DataMatrix data;
  ScaleParams params;
};

// Coordinatewise (x - median) / MAD. Columns with zero MAD are removed and recorded.
inline Sphered robust_sphere(const DataMatrix& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 2) fail_numeric("robust sphering", "at least two rows are required");
  require_finite(x.values, "robust sphering");

  ScaleParams params;
  params.medians.resize(p);
  params.mads.resize(p);
  std::vector<double> scratch(static_cast<size_t>(n));
  for (Eigen::Index j = 0; j < p; ++j) {
    auto col = x.values.col(j);
    std::copy(col.data(), col.data() + n, scratch.begin());
    const double med = detail::median_inplace(scratch);
    std::copy(col.data(), col.data() + n, scratch.begin());
    const double s = detail::mad_inplace(scratch);
    params.medians(j) = med;
    params.mads(j) = s;
    if (s > 0.0)
      params.kept_columns.push_back(j);
    else
      params.dropped_columns.push_back(j);
  }
  if (params.kept_columns.empty())
    fail_numeric("robust sphering", "every column has zero MAD; nothing to analyze");

  Sphered out;
  out.data.values.resize(n, static_cast<Eigen::Index>(params.kept_columns.size()));
  out.data.row_ids = x.row_ids;
  for (size_t k = 0; k < params.kept_columns.size(); ++k) {
    const Eigen::Index j = params.kept_columns[k];
    out.data.values.col(static_cast<Eigen::Index>(k)) =
        (x.values.col(j).array() - params.medians(j)) / params.mads(j);
    if (static_cast<size_t>(j) < x.column_names.size())
      out.data.column_names.push_back(x.column_names[static_cast<size_t>(j)]);
  }
  out.params = std::move(params);
  return out;
}

inline Sphered robust_sphere(const Matrix& x) { return robust_sphere(DataMatrix(x)); }

struct L1MedianOptions {
  double tolerance = 1e-10;
  int max_iterations = 500;
};

// Spatial (L1) median: argmin_mu sum_i ||x_i - mu||. Rows are observations.
//
// Weiszfeld iteration with the Vardi-Zhang modification, which keeps the
// update well defined when the iterate lands on a data point.
inline Vector l1_median(const Eigen::Ref<const Matrix>& x, const L1MedianOptions& opts = {}) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 1) fail_numeric("L1 median", "no observations");
  require_finite(x, "L1 median");
  if (n == 1) return x.row(0).transpose();

  Vector y(p);
  for (Eigen::Index j = 0; j < p; ++j) y(j) = median(Vector(x.col(j)));

  double scale = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) scale = std::max(scale, (x.row(i).transpose() - y).norm());
  const double coincide = 1e-14 * std::max(scale, 1.0);

  Vector num(p), pull(p);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    num.setZero();
    pull.setZero();
    double denom = 0.0;
    int at_point = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vector diff = x.row(i).transpose() - y;
      const double dist = diff.norm();
      if (dist <= coincide) {
        ++at_point;
        continue;
      }
      num += x.row(i).transpose() / dist;
      pull += diff / dist;
      denom += 1.0 / dist;
    }
    if (denom == 0.0) break;  // every point coincides with y

    Vector next = num / denom;
    if (at_point > 0) {
      const double r = pull.norm();
      if (r <= static_cast<double>(at_point)) break;  // y is optimal
      const double gamma = static_cast<double>(at_point) / r;
      next = (1.0 - gamma) * next + gamma * y;
    }
    const double step = (next - y).norm();
    y = std::move(next);
    if (step < opts.tolerance) break;
  }
  return y;
}

inline double l1_objective(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& mu) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) s += (x.row(i).transpose() - mu).norm();
  return s;
}

} // namespace pcout
