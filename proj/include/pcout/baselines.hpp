#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "pcout/chi_square.hpp"
#include "pcout/data_matrix.hpp"
#include "pcout/error.hpp"
#include "pcout/prcmpout.hpp"
#include "pcout/robust.hpp"
#include "pcout/spectral.hpp"

namespace pcout {

struct LocationScatter {
  Vector location;
  Matrix scatter;
};

struct DetectionResult {
  Vector distances;
  double cutoff = 0.0;
  std::vector<bool> flags;
  std::string method;
  Eigen::Index dimension = 0;  // degrees of freedom behind the cutoff

  Eigen::Index flagged_count() const {
    return static_cast<Eigen::Index>(std::count(flags.begin(), flags.end(), true));
  }
};

namespace detail {

inline DetectionResult threshold(Vector distances, double cutoff, std::string method, Eigen::Index dim) {
  DetectionResult r;
  r.flags.resize(static_cast<size_t>(distances.size()));
  for (Eigen::Index i = 0; i < distances.size(); ++i) r.flags[static_cast<size_t>(i)] = distances(i) > cutoff;
  r.distances = std::move(distances);
  r.cutoff = cutoff;
  r.method = std::move(method);
  r.dimension = dim;
  return r;
}

inline void require_alpha(double alpha, const char* step) {
  if (!(alpha > 0.0 && alpha < 1.0)) fail_config(step, "alpha must lie in (0, 1)");
}

} // namespace detail

// sqrt((x_i - T)^T C^{-1} (x_i - T)) for every row, evaluated through the
// eigendecomposition of C so that a deficient direction can be reported.
inline Vector robust_distances(const Eigen::Ref<const Matrix>& x, const LocationScatter& est) {
  const Eigen::Index p = x.cols();
  if (est.location.size() != p || est.scatter.rows() != p || est.scatter.cols() != p)
    fail_numeric("robust distances", "estimate dimension does not match the data");
  const EigenPairs eig = sym_eigen(est.scatter);
  const double largest = eig.values(0);
  const double smallest = eig.values(p - 1);
  if (!(smallest > 1e-12 * largest) || !(largest > 0.0))
    fail_numeric("robust distances", "scatter matrix is singular (eigenvalue " + std::to_string(p) + " is " +
                                         std::to_string(smallest) + ", largest " + std::to_string(largest) + ")");
  const Matrix centered = x.rowwise() - est.location.transpose();
  const Matrix proj = centered * eig.vectors;
  Vector d(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    d(i) = std::sqrt((proj.row(i).transpose().array().square() / eig.values.array()).sum());
  return d;
}

// Mean/covariance Mahalanobis distances against sqrt(chi2_{p, 1 - alpha}).
inline DetectionResult classical_detect(const Eigen::Ref<const Matrix>& x, double alpha) {
  detail::require_alpha(alpha, "classical detection");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n <= p)
    fail_numeric("classical detection", "needs more rows than columns (n = " + std::to_string(n) + ", p = " +
                                            std::to_string(p) + "); use prcmpout for high-dimensional data");
  require_finite(x, "classical detection");
  LocationScatter est{x.colwise().mean().transpose(), covariance(x)};
  Vector d = robust_distances(x, est);
  return detail::threshold(std::move(d), std::sqrt(chi2_quantile(1.0 - alpha, static_cast<double>(p))),
                           "classical", p);
}

// Gnanadesikan-Kettenring pairwise covariance: (sigma(x + y)^2 - sigma(x - y)^2) / 4.
template <class Scale>
double ogk_pairwise_cov(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y, Scale&& sigma) {
  if (x.size() != y.size()) fail_numeric("pairwise covariance", "samples differ in length");
  const double a = sigma(Vector(x + y));
  const double b = sigma(Vector(x - y));
  return 0.25 * (a * a - b * b);
}

inline double ogk_pairwise_cov(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& y) {
  return ogk_pairwise_cov(x, y, [](const Vector& v) { return mad(v); });
}

struct OgkEstimate : LocationScatter {
  // Decomposition the estimate was built from: scatter = D E diag(var) E^T D.
  Vector column_scales;  // D
  Matrix directions;     // E
  Vector centers;        // medians of the scores along E
  Vector variances;      // squared MADs of the scores along E
};

// Orthogonalized pairwise estimate (single pass). Positive semidefinite by construction.
inline OgkEstimate ogk_estimate(const Eigen::Ref<const Matrix>& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 2) fail_numeric("OGK", "at least two rows are required");
  require_finite(x, "OGK");

  OgkEstimate est;
  est.column_scales.resize(p);
  Matrix y(n, p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double s = mad(Vector(x.col(j)));
    if (!(s > 0.0)) fail_numeric("OGK", "column " + std::to_string(j + 1) + " has zero MAD");
    est.column_scales(j) = s;
    y.col(j) = x.col(j) / s;
  }

  Matrix u = Matrix::Identity(p, p);
  std::vector<double> sum(static_cast<size_t>(n)), diff(static_cast<size_t>(n));
  for (Eigen::Index j = 0; j < p; ++j) {
    for (Eigen::Index k = j + 1; k < p; ++k) {
      for (Eigen::Index i = 0; i < n; ++i) {
        sum[static_cast<size_t>(i)] = y(i, j) + y(i, k);
        diff[static_cast<size_t>(i)] = y(i, j) - y(i, k);
      }
      const double a = detail::mad_inplace(sum);
      const double b = detail::mad_inplace(diff);
      u(j, k) = u(k, j) = 0.25 * (a * a - b * b);
    }
  }

  const EigenPairs eig = sym_eigen(u);
  est.directions = eig.vectors;
  const Matrix z = y * eig.vectors;
  est.centers.resize(p);
  est.variances.resize(p);
  for (Eigen::Index k = 0; k < p; ++k) {
    const Vector col = z.col(k);
    est.centers(k) = median(col);
    const double s = mad(col);
    est.variances(k) = s * s;
  }
  const Matrix d = est.column_scales.asDiagonal();
  est.location = d * (eig.vectors * est.centers);
  est.scatter = d * eig.vectors * est.variances.asDiagonal() * eig.vectors.transpose() * d;
  est.scatter = 0.5 * (est.scatter + est.scatter.transpose()).eval();
  return est;
}

// Squared distances computed in the OGK eigenvector coordinates; no inversion needed.
inline Vector ogk_squared_distances(const Eigen::Ref<const Matrix>& x, const OgkEstimate& est) {
  const Eigen::Index p = x.cols();
  for (Eigen::Index k = 0; k < p; ++k)
    if (!(est.variances(k) > 0.0))
      fail_numeric("OGK distances", "score variance along direction " + std::to_string(k + 1) + " is zero");
  const Matrix z = (x * est.column_scales.cwiseInverse().asDiagonal()) * est.directions;
  Vector d2(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    d2(i) = ((z.row(i).transpose() - est.centers).array().square() / est.variances.array()).sum();
  return d2;
}

struct Reweighted : LocationScatter {
  std::vector<bool> retained;
};

// Hard-rejection reweighting: keep rows with d^2 < chi2_p(beta) * med(d^2) / chi2_p(0.5),
// then take the mean and covariance of the kept rows.
inline Reweighted ogk_reweight(const Eigen::Ref<const Matrix>& x, const LocationScatter& est, double beta = 0.9) {
  if (!(beta > 0.0 && beta < 1.0)) fail_config("OGK reweighting", "beta must lie in (0, 1)");
  const Eigen::Index p = x.cols();
  const Vector d = robust_distances(x, est);
  const Vector d2 = d.array().square();
  const double df = static_cast<double>(p);
  const double cut = chi2_quantile(beta, df) * median(d2) / chi2_quantile(0.5, df);

  Reweighted out;
  out.retained.assign(static_cast<size_t>(x.rows()), false);
  std::vector<Eigen::Index> kept;
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    if (d2(i) < cut) {
      kept.push_back(i);
      out.retained[static_cast<size_t>(i)] = true;
    }
  if (static_cast<Eigen::Index>(kept.size()) < p + 1)
    fail_numeric("OGK reweighting", "only " + std::to_string(kept.size()) + " rows retained; need at least " +
                                        std::to_string(p + 1));
  Matrix sub(static_cast<Eigen::Index>(kept.size()), p);
  for (size_t r = 0; r < kept.size(); ++r) sub.row(static_cast<Eigen::Index>(r)) = x.row(kept[r]);
  out.location = sub.colwise().mean().transpose();
  out.scatter = covariance(sub);
  return out;
}

// OGK detector. Distances come from the eigenvector form; the cutoff is
// sqrt(chi2_{p,1-alpha} * med(d^2) / chi2_{p,0.5}) since the raw MAD-based
// scatter is not calibrated to the normal model.
inline DetectionResult ogk_detect(const Eigen::Ref<const Matrix>& x, double alpha) {
  detail::require_alpha(alpha, "OGK detection");
  const OgkEstimate est = ogk_estimate(x);
  const Vector d2 = ogk_squared_distances(x, est);
  const double df = static_cast<double>(x.cols());
  const double cut2 = chi2_quantile(1.0 - alpha, df) * median(d2) / chi2_quantile(0.5, df);
  return detail::threshold(d2.cwiseSqrt(), std::sqrt(cut2), "ogk", x.cols());
}

// (x_i - center) / ||x_i - center||; rows at the center map to zero.
inline Matrix spatial_signs(const Eigen::Ref<const Matrix>& x, const Eigen::Ref<const Vector>& center) {
  Matrix s = x.rowwise() - center.transpose();
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double r = s.row(i).norm();
    if (r > 0.0)
      s.row(i) /= r;
    else
      s.row(i).setZero();
  }
  return s;
}

// (1/m) sum s_i s_i^T over the m nonzero signs.
inline Matrix sign_covariance(const Eigen::Ref<const Matrix>& signs) {
  Eigen::Index m = 0;
  for (Eigen::Index i = 0; i < signs.rows(); ++i)
    if (signs.row(i).squaredNorm() > 0.0) ++m;
  if (m == 0) fail_numeric("sign covariance", "every row coincides with the center");
  return (signs.transpose() * signs) / static_cast<double>(m);
}

struct Sign2Options {
  double variance_threshold = 0.99;
};

// Spatial-sign PCA detector.
inline DetectionResult sign2_detect(const Eigen::Ref<const Matrix>& x, double alpha, const Sign2Options& opts = {}) {
  detail::require_alpha(alpha, "sign2 detection");
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 3) fail_numeric("sign2 detection", "at least three rows are required");
  require_finite(x, "sign2 detection");

  Vector center(p);
  for (Eigen::Index j = 0; j < p; ++j) center(j) = median(Vector(x.col(j)));
  const Matrix signs = spatial_signs(x, center);

  Eigen::Index m = 0;
  for (Eigen::Index i = 0; i < n; ++i)
    if (signs.row(i).squaredNorm() > 0.0) ++m;
  if (m < 2) fail_numeric("sign2 detection", "fewer than two rows differ from the center");

  EigenPairs eig;
  if (p > n) {
    eig = gram_eigen(signs, static_cast<double>(m));
  } else {
    eig = sym_eigen(sign_covariance(signs));
  }
  eig.values = eig.values.cwiseMax(0.0);
  const Eigen::Index k = retain_components(eig.values, opts.variance_threshold, n - 1);

  const Matrix scores = (x.rowwise() - center.transpose()) * eig.vectors.leftCols(k);
  Matrix scaled(n, k);
  Eigen::Index used = 0;
  for (Eigen::Index j = 0; j < k; ++j) {
    const Vector col = scores.col(j);
    const double s = mad(col);
    if (!(s > 0.0)) continue;
    scaled.col(used++) = (col.array() - median(col)) / s;
  }
  if (used == 0) fail_numeric("sign2 detection", "every sign component has zero MAD");
  scaled.conservativeResize(n, used);

  const DistanceSet dist = transform_distances(scaled.rowwise().norm(), used);
  const double cutoff = std::sqrt(chi2_quantile(1.0 - alpha, static_cast<double>(used)));
  return detail::threshold(dist.transformed, cutoff, "sign2", used);
}

} // namespace pcout
