#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "pcout/data_matrix.hpp"
#include "pcout/error.hpp"

namespace pcout {

// Sample covariance with denominator n - 1.
inline Matrix covariance(const Eigen::Ref<const Matrix>& x) {
  const Eigen::Index n = x.rows();
  if (n < 2) fail_numeric("covariance", "at least two rows are required");
  const Vector mean = x.colwise().mean().transpose();
  const Matrix centered = x.rowwise() - mean.transpose();
  Matrix c = (centered.transpose() * centered) / static_cast<double>(n - 1);
  // exact symmetry; the product is symmetric only up to rounding
  c = 0.5 * (c + c.transpose()).eval();
  return c;
}

struct EigenPairs {
  Vector values;   // nonincreasing
  Matrix vectors;  // column k pairs with values(k)
};

namespace detail {

// Sort descending and fix each eigenvector's sign so its largest-magnitude
// entry is positive. Both make the output a deterministic function of the input.
inline EigenPairs sort_and_orient(const Vector& values, const Matrix& vectors) {
  const Eigen::Index k = values.size();
  std::vector<Eigen::Index> order(static_cast<size_t>(k));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return values(a) > values(b); });
  EigenPairs out;
  out.values.resize(k);
  out.vectors.resize(vectors.rows(), k);
  for (Eigen::Index c = 0; c < k; ++c) {
    const Eigen::Index src = order[static_cast<size_t>(c)];
    out.values(c) = values(src);
    Vector v = vectors.col(src);
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    out.vectors.col(c) = v;
  }
  return out;
}

} // namespace detail

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
//
// Sweeps visit the upper triangle in row-major order, so the rotation sequence,
// and therefore the result, depends only on the input. Iteration stops once the
// off-diagonal Frobenius mass falls below 1e-12 * ||C||_F.
inline EigenPairs sym_eigen(const Eigen::Ref<const Matrix>& c_in) {
  const Eigen::Index p = c_in.rows();
  if (c_in.cols() != p) fail_numeric("eigendecomposition", "matrix is not square");
  require_finite(c_in, "eigendecomposition");
  const double norm = c_in.norm();
  const double asym = (c_in - c_in.transpose()).cwiseAbs().maxCoeff();
  if (p > 0 && asym > 1e-10 * std::max(1.0, c_in.cwiseAbs().maxCoeff()))
    fail_numeric("eigendecomposition", "matrix is not symmetric");

  Matrix a = 0.5 * (c_in + c_in.transpose());
  Matrix v = Matrix::Identity(p, p);
  const double target = 1e-12 * norm;

  auto off_norm = [&] {
    double s = 0.0;
    for (Eigen::Index j = 1; j < p; ++j)
      for (Eigen::Index i = 0; i < j; ++i) s += a(i, j) * a(i, j);
    return std::sqrt(2.0 * s);
  };

  for (int sweep = 0; sweep < 100 && off_norm() > target; ++sweep) {
    for (Eigen::Index i = 0; i + 1 < p; ++i) {
      for (Eigen::Index j = i + 1; j < p; ++j) {
        const double aij = a(i, j);
        if (aij == 0.0) continue;
        const double theta = (a(j, j) - a(i, i)) / (2.0 * aij);
        const double t = std::copysign(1.0, theta) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double cs = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * cs;
        // A <- J^T A J with J the (i, j) plane rotation; columns first, then rows.
        for (Eigen::Index k = 0; k < p; ++k) {
          const double aki = a(k, i);
          const double akj = a(k, j);
          a(k, i) = cs * aki - sn * akj;
          a(k, j) = sn * aki + cs * akj;
        }
        for (Eigen::Index k = 0; k < p; ++k) {
          const double aik = a(i, k);
          const double ajk = a(j, k);
          a(i, k) = cs * aik - sn * ajk;
          a(j, k) = sn * aik + cs * ajk;
        }
        a(i, j) = 0.0;
        a(j, i) = 0.0;
        for (Eigen::Index k = 0; k < p; ++k) {
          const double vki = v(k, i);
          const double vkj = v(k, j);
          v(k, i) = cs * vki - sn * vkj;
          v(k, j) = sn * vki + cs * vkj;
        }
      }
    }
  }
  return detail::sort_and_orient(a.diagonal(), v);
}

// Nonzero eigenpairs of A^T A / denom (p x p) through the n x n Gram matrix A A^T / denom.
// An eigenvector u of the Gram matrix maps to A^T u / ||A^T u|| in p-space.
inline EigenPairs gram_eigen(const Eigen::Ref<const Matrix>& a, double denom) {
  const Eigen::Index n = a.rows();
  if (!(denom > 0.0)) fail_numeric("Gram eigendecomposition", "nonpositive normalizer");
  require_finite(a, "Gram eigendecomposition");
  const Matrix gram = (a * a.transpose()) / denom;
  EigenPairs small = sym_eigen(0.5 * (gram + gram.transpose()));

  const double top = small.values.size() > 0 ? std::max(small.values(0), 0.0) : 0.0;
  const double floor = 1e-12 * std::max(top, 1e-300);
  Eigen::Index keep = 0;
  while (keep < n && small.values(keep) > floor) ++keep;

  Vector values = small.values.head(keep);
  Matrix vectors = a.transpose() * small.vectors.leftCols(keep);
  for (Eigen::Index k = 0; k < keep; ++k) vectors.col(k).normalize();
  // re-orient in p-space so the sign convention matches sym_eigen
  return detail::sort_and_orient(values, vectors);
}

// Covariance spectrum of a column-centered matrix via its Gram matrix; at most n - 1 pairs.
inline EigenPairs gram_eigen(const Eigen::Ref<const Matrix>& centered) {
  if (centered.rows() < 2) fail_numeric("Gram eigendecomposition", "at least two rows are required");
  return gram_eigen(centered, static_cast<double>(centered.rows() - 1));
}

// Smallest k whose leading eigenvalues reach `threshold` of the total, capped at max_k.
inline Eigen::Index retain_components(const Eigen::Ref<const Vector>& eigenvalues, double threshold,
                                      Eigen::Index max_k = -1) {
  if (!(threshold > 0.0 && threshold <= 1.0)) fail_config("component retention", "threshold must lie in (0, 1]");
  double total = 0.0;
  for (double v : eigenvalues) total += std::max(v, 0.0);
  if (!(total > 0.0)) fail_numeric("component retention", "spectrum is identically zero");
  const double goal = threshold * total * (1.0 - 1e-12);
  Eigen::Index k = 0;
  double cum = 0.0;
  while (k < eigenvalues.size()) {
    cum += std::max(eigenvalues(k), 0.0);
    ++k;
    if (cum >= goal) break;
  }
  if (max_k > 0) k = std::min(k, max_k);
  return std::max<Eigen::Index>(k, 1);
}

struct PcaBasis {
  Matrix eigenvectors;    // p x p*
  Vector eigenvalues;     // p*, nonincreasing, clamped at zero
  double variance_fraction = 1.0;
  double total_variance = 0.0;
  bool gram_route = false;

  Eigen::Index p_star() const { return eigenvalues.size(); }
};

// Principal components of the rows of x, keeping enough for `threshold` of the
// variance and never more than n - 1. Uses the Gram route when p > n.
inline PcaBasis principal_components(const Eigen::Ref<const Matrix>& x, double threshold) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 2) fail_numeric("principal components", "at least two rows are required");

  PcaBasis basis;
  EigenPairs pairs;
  if (p > n) {
    const Vector mean = x.colwise().mean().transpose();
    const Matrix centered = x.rowwise() - mean.transpose();
    pairs = gram_eigen(centered);
    basis.gram_route = true;
    basis.total_variance = centered.squaredNorm() / static_cast<double>(n - 1);
  } else {
    const Matrix c = covariance(x);
    pairs = sym_eigen(c);
    basis.total_variance = c.trace();
  }
  pairs.values = pairs.values.cwiseMax(0.0);
  if (pairs.values.size() == 0 || !(basis.total_variance > 0.0))
    fail_numeric("principal components", "data have zero variance");

  const Eigen::Index k = retain_components(pairs.values, threshold, n - 1);
  basis.eigenvalues = pairs.values.head(k);
  basis.eigenvectors = pairs.vectors.leftCols(k);
  basis.variance_fraction = std::min(1.0, basis.eigenvalues.sum() / basis.total_variance);
  return basis;
}

// Scores Z = X V.
inline Matrix project(const Eigen::Ref<const Matrix>& x, const PcaBasis& basis) {
  if (x.cols() != basis.eigenvectors.rows())
    fail_numeric("projection", "data have " + std::to_string(x.cols()) + " columns but the basis expects " +
                                   std::to_string(basis.eigenvectors.rows()));
  return x * basis.eigenvectors;
}

} // namespace pcout
