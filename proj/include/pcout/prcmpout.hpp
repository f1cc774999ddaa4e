#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "pcout/chi_square.hpp"
#include "pcout/data_matrix.hpp"
#include "pcout/error.hpp"
#include "pcout/robust.hpp"
#include "pcout/spectral.hpp"

namespace pcout {

struct DetectorConfig {
  double variance_threshold = 0.99;
  double scale_const_s = 0.25;
  double outlier_cut = 0.25;
  double stage1_full_weight_fraction = 1.0 / 3.0;
  double stage1_c_mad_multiplier = 2.5;
  double stage2_m_quantile = 0.25;
  double stage2_c_quantile = 0.99;

  void validate() const {
    auto open01 = [](double v) { return v > 0.0 && v < 1.0; };
    if (!(variance_threshold > 0.0 && variance_threshold <= 1.0))
      fail_config("detector config", "variance_threshold must lie in (0, 1]");
    if (!(scale_const_s >= 0.0) || !std::isfinite(scale_const_s))
      fail_config("detector config", "scale_const_s must be nonnegative");
    if (!open01(outlier_cut)) fail_config("detector config", "outlier_cut must lie in (0, 1)");
    if (!open01(stage1_full_weight_fraction))
      fail_config("detector config", "stage1_full_weight_fraction must lie in (0, 1)");
    if (!(stage1_c_mad_multiplier > 0.0) || !std::isfinite(stage1_c_mad_multiplier))
      fail_config("detector config", "stage1_c_mad_multiplier must be positive");
    if (!open01(stage2_m_quantile) || !open01(stage2_c_quantile))
      fail_config("detector config", "stage-2 quantiles must lie in (0, 1)");
    if (!(stage2_m_quantile < stage2_c_quantile))
      fail_config("detector config", "stage2_m_quantile must be below stage2_c_quantile");
  }
};

struct DistanceSet {
  Vector raw;
  Vector transformed;
  Eigen::Index df = 0;
};

// Rescale distances so their median matches the median of a chi distribution with df degrees of freedom.
inline DistanceSet transform_distances(const Eigen::Ref<const Vector>& raw, Eigen::Index df) {
  if (df < 1) fail_config("distance calibration", "degrees of freedom must be positive");
  if (raw.size() == 0) fail_numeric("distance calibration", "no distances");
  if (raw.minCoeff() < 0.0) fail_numeric("distance calibration", "distances must be nonnegative");
  const double med = median(raw);
  if (!(med > 0.0)) fail_numeric("distance calibration", "median distance is zero");
  DistanceSet out;
  out.raw = raw;
  out.transformed = raw * (std::sqrt(chi2_quantile(0.5, static_cast<double>(df))) / med);
  out.df = df;
  return out;
}

// 1 inside M, 0 beyond c, biweight bridge in between.
inline double translated_biweight(double d, double m, double c) {
  if (!(c > m) || m < 0.0) fail_config("translated biweight", "requires c > M >= 0");
  if (d <= m) return 1.0;
  if (d >= c) return 0.0;
  const double u = (d - m) / (c - m);
  const double v = 1.0 - u * u;
  return v * v;
}

struct StageResult {
  Vector weights;
  DistanceSet distances;
  double m = 0.0;  // full-weight radius
  double c = 0.0;  // zero-weight radius
};

struct Stage1Result : StageResult {
  Vector kurtosis_weights;  // |robust excess kurtosis| per component, before normalization
};

namespace detail {

inline Vector biweight_all(const Vector& d, double m, double c) {
  Vector w(d.size());
  if (c > m) {
    for (Eigen::Index i = 0; i < d.size(); ++i) w(i) = translated_biweight(d(i), m, c);
  } else {
    // Degenerate spread of distances: hard step at the common radius.
    for (Eigen::Index i = 0; i < d.size(); ++i) w(i) = d(i) <= m ? 1.0 : 0.0;
  }
  return w;
}

} // namespace detail

// Location-outlier stage on sphered principal-component scores.
inline Stage1Result stage1_location(const Eigen::Ref<const Matrix>& scores, const DetectorConfig& cfg = {}) {
  const Eigen::Index n = scores.rows();
  const Eigen::Index k = scores.cols();
  if (n < 1 || k < 1) fail_numeric("stage 1", "empty score matrix");

  Stage1Result out;
  out.kurtosis_weights.resize(k);
  std::vector<Vector> centered(static_cast<size_t>(k));
  for (Eigen::Index j = 0; j < k; ++j) {
    const Vector col = scores.col(j);
    const double med = median(col);
    const double s = mad(col);
    if (!(s > 0.0)) fail_numeric("stage 1", "component " + std::to_string(j + 1) + " has zero MAD");
    out.kurtosis_weights(j) = robust_kurtosis_weight(col);
    centered[static_cast<size_t>(j)] = (col.array() - med) / s;
  }

  const double total = out.kurtosis_weights.sum();
  const Vector rel = total > 0.0 ? Vector(out.kurtosis_weights / total)
                                 : Vector(Vector::Constant(k, 1.0 / static_cast<double>(k)));

  Vector raw = Vector::Zero(n);
  for (Eigen::Index j = 0; j < k; ++j) raw += rel(j) * centered[static_cast<size_t>(j)].array().square().matrix();
  raw = raw.cwiseSqrt();

  out.distances = transform_distances(raw, k);
  const Vector& d = out.distances.transformed;
  out.m = quantile(d, cfg.stage1_full_weight_fraction);
  out.c = median(d) + cfg.stage1_c_mad_multiplier * mad(d);
  out.weights = detail::biweight_all(d, out.m, out.c);
  return out;
}

// Scatter-outlier stage: plain Euclidean norms of the sphered scores.
inline StageResult stage2_scatter(const Eigen::Ref<const Matrix>& scores, const DetectorConfig& cfg = {}) {
  const Eigen::Index k = scores.cols();
  if (scores.rows() < 1 || k < 1) fail_numeric("stage 2", "empty score matrix");
  StageResult out;
  out.distances = transform_distances(scores.rowwise().norm(), k);
  const double df = static_cast<double>(k);
  out.m = std::sqrt(chi2_quantile(cfg.stage2_m_quantile, df));
  out.c = std::sqrt(chi2_quantile(cfg.stage2_c_quantile, df));
  out.weights = detail::biweight_all(out.distances.transformed, out.m, out.c);
  return out;
}

// (w1 + s)(w2 + s) / (1 + s)^2
inline Vector combine_weights(const Eigen::Ref<const Vector>& w1, const Eigen::Ref<const Vector>& w2, double s) {
  if (w1.size() != w2.size()) fail_numeric("weight combination", "weight vectors differ in length");
  if (!(s >= 0.0)) fail_config("weight combination", "s must be nonnegative");
  return ((w1.array() + s) * (w2.array() + s) / ((1.0 + s) * (1.0 + s))).matrix();
}

struct WeightReport {
  Vector w1;
  Vector w2;
  Vector w_final;
  DistanceSet stage1_distances;
  DistanceSet stage2_distances;
  Vector kurtosis_weights;
  std::vector<bool> flags;
  Eigen::Index p_star = 0;
  std::vector<Eigen::Index> dropped_columns;     // input columns with zero MAD
  std::vector<Eigen::Index> dropped_components;  // principal components with zero MAD
  double stage1_m = 0.0, stage1_c = 0.0;
  double stage2_m = 0.0, stage2_c = 0.0;
  double variance_fraction = 0.0;
  bool gram_route = false;

  Eigen::Index flagged_count() const {
    return static_cast<Eigen::Index>(std::count(flags.begin(), flags.end(), true));
  }
};

// Two-stage principal-component outlier detection.
//
//   sphere columns by median/MAD -> covariance -> eigenvectors covering the
//   variance threshold (at most n - 1) -> scores -> sphere scores ->
//   stage 1 (kurtosis-weighted distances) and stage 2 (plain distances) ->
//   combined weights, flagged when below outlier_cut.
inline WeightReport detect(const DataMatrix& x, const DetectorConfig& cfg = {}) {
  cfg.validate();
  if (x.rows() < 3) fail_numeric("input", "at least three rows are required");

  Sphered sphered = robust_sphere(x);
  const PcaBasis basis = principal_components(sphered.data.values, cfg.variance_threshold);
  const Matrix z = project(sphered.data.values, basis);

  WeightReport report;
  report.dropped_columns = sphered.params.dropped_columns;
  report.variance_fraction = basis.variance_fraction;
  report.gram_route = basis.gram_route;

  // A score column with zero MAD carries no usable scale; it is set aside.
  Sphered zs;
  try {
    zs = robust_sphere(z);
  } catch (const Error&) {
    fail_numeric("rescaling principal components", "every retained component has zero MAD");
  }
  report.dropped_components = zs.params.dropped_columns;
  const Matrix& scores = zs.data.values;
  report.p_star = scores.cols();

  Stage1Result s1 = stage1_location(scores, cfg);
  StageResult s2 = stage2_scatter(scores, cfg);

  report.w1 = std::move(s1.weights);
  report.w2 = std::move(s2.weights);
  report.w_final = combine_weights(report.w1, report.w2, cfg.scale_const_s);
  report.stage1_distances = std::move(s1.distances);
  report.stage2_distances = std::move(s2.distances);
  report.kurtosis_weights = std::move(s1.kurtosis_weights);
  report.stage1_m = s1.m;
  report.stage1_c = s1.c;
  report.stage2_m = s2.m;
  report.stage2_c = s2.c;
  report.flags.resize(static_cast<size_t>(x.rows()));
  for (Eigen::Index i = 0; i < x.rows(); ++i) report.flags[static_cast<size_t>(i)] = report.w_final(i) < cfg.outlier_cut;
  return report;
}

inline WeightReport detect(const Matrix& x, const DetectorConfig& cfg = {}) { return detect(DataMatrix(x), cfg); }

} // namespace pcout
