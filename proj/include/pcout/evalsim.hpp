#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "pcout/baselines.hpp"
#include "pcout/data_matrix.hpp"
#include "pcout/error.hpp"
#include "pcout/prcmpout.hpp"
#include "pcout/robust.hpp"

namespace pcout {

// Counter-based generator: draw k of stream (seed, stream) is a pure hash of
// (seed, stream, k), so streams are reproducible on any platform and can be
// split without coordination.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream = 0)
      : key_(mix(seed ^ mix(stream + 0x632be59bd9b4e019ULL))) {}

  std::uint64_t next_u64() { return mix(key_ + (++counter_) * 0x9e3779b97f4a7c15ULL); }

  // uniform on the open interval (0, 1)
  double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  // Box-Muller; the second variate of each pair is cached.
  double normal() {
    if (cached_) {
      cached_ = false;
      return spare_;
    }
    const double u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double t = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(t);
    cached_ = true;
    return r * std::cos(t);
  }

  std::uint64_t counter() const { return counter_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t key_;
  std::uint64_t counter_ = 0;
  bool cached_ = false;
  double spare_ = 0.0;
};

// Row indices (1-based) of the planted outliers in the 100-observation design.
inline std::vector<int> reference_outlier_indices() {
  return {10, 16, 18, 22, 23, 25, 27, 29, 30, 47, 66, 70, 72, 80, 84, 90, 99, 100};
}

// Contamination model: inliers N(0, I_p); outliers N(location_shift, scatter_factor * I_p).
struct SimSpec {
  int n = 100;
  int p = 10;
  std::vector<int> outlier_indices;  // 1-based
  Vector location_shift;             // length p
  double scatter_factor = 1.0;
  std::uint64_t seed = 0;

  static SimSpec uniform_shift(int n, int p, std::vector<int> outliers, double shift, double scatter,
                               std::uint64_t seed) {
    SimSpec s;
    s.n = n;
    s.p = p;
    s.outlier_indices = std::move(outliers);
    s.location_shift = Vector::Constant(p, shift);
    s.scatter_factor = scatter;
    s.seed = seed;
    return s;
  }

  // Same design in dimension p. Requires a constant shift vector, which is broadcast.
  SimSpec with_dimension(int new_p) const {
    if (location_shift.size() > 0 && (location_shift.array() != location_shift(0)).any())
      fail_config("simulation", "only a constant location shift can be carried to another dimension");
    SimSpec s = *this;
    s.p = new_p;
    s.location_shift = Vector::Constant(new_p, location_shift.size() > 0 ? location_shift(0) : 0.0);
    return s;
  }

  void validate() const {
    if (n < 1 || p < 1) fail_config("simulation", "n and p must be positive");
    if (location_shift.size() != p) fail_config("simulation", "location_shift must have length p");
    if (!(scatter_factor > 0.0)) fail_config("simulation", "scatter_factor must be positive");
    for (int idx : outlier_indices)
      if (idx < 1 || idx > n) fail_config("simulation", "outlier index " + std::to_string(idx) + " outside 1..n");
  }
};

struct SimData {
  DataMatrix data;
  std::vector<bool> truth;
};

inline SimData generate_contaminated(const SimSpec& spec) {
  spec.validate();
  SimData out;
  out.truth.assign(static_cast<size_t>(spec.n), false);
  for (int idx : spec.outlier_indices) out.truth[static_cast<size_t>(idx - 1)] = true;

  // stream 0 of the seed; one normal draw per cell in row-major order
  CounterRng rng(spec.seed, 0);
  const double spread = std::sqrt(spec.scatter_factor);
  Matrix x(spec.n, spec.p);
  for (int i = 0; i < spec.n; ++i) {
    const bool outlier = out.truth[static_cast<size_t>(i)];
    for (int j = 0; j < spec.p; ++j) {
      const double z = rng.normal();
      x(i, j) = outlier ? spec.location_shift(j) + spread * z : z;
    }
  }
  out.data = DataMatrix(std::move(x));
  return out;
}

// Outcome table: a = outliers caught, b = outliers missed,
// c = inliers flagged, d = inliers passed.
struct ConfusionCounts {
  long a = 0, b = 0, c = 0, d = 0;

  std::optional<double> fn_rate() const {
    if (a + b == 0) return std::nullopt;
    return static_cast<double>(b) / static_cast<double>(a + b);
  }
  std::optional<double> fp_rate() const {
    if (c + d == 0) return std::nullopt;
    return static_cast<double>(c) / static_cast<double>(c + d);
  }
  long total() const { return a + b + c + d; }
};

inline ConfusionCounts confusion(const std::vector<bool>& truth, const std::vector<bool>& flags) {
  if (truth.size() != flags.size()) fail_numeric("confusion", "truth and flags differ in length");
  ConfusionCounts cc;
  for (size_t i = 0; i < truth.size(); ++i) {
    if (truth[i])
      (flags[i] ? cc.a : cc.b)++;
    else
      (flags[i] ? cc.c : cc.d)++;
  }
  return cc;
}

// A named detector reduced to "matrix in, flags out".
struct Detector {
  std::string name;
  std::optional<double> alpha;  // present for cutoff-based methods
  std::function<std::vector<bool>(const Matrix&)> run;
};

inline Detector prcmpout_detector(DetectorConfig cfg = {}) {
  return {"prcmpout", std::nullopt, [cfg](const Matrix& x) { return detect(x, cfg).flags; }};
}
inline Detector classical_detector(double alpha) {
  return {"classical", alpha, [alpha](const Matrix& x) { return classical_detect(x, alpha).flags; }};
}
inline Detector ogk_detector(double alpha) {
  return {"ogk", alpha, [alpha](const Matrix& x) { return ogk_detect(x, alpha).flags; }};
}
inline Detector sign2_detector(double alpha) {
  return {"sign2", alpha, [alpha](const Matrix& x) { return sign2_detect(x, alpha).flags; }};
}

struct SweepRow {
  int p = 0;
  std::optional<double> alpha;
  std::string detector;
  std::optional<double> mean_fn;  // absent when no replication defined it
  std::optional<double> mean_fp;
  int replications = 0;
  std::uint64_t seed = 0;  // base seed; replication r used seed + r
  int failures = 0;
  std::vector<std::string> failure_messages;
};

struct SweepTable {
  SimSpec base;
  std::vector<SweepRow> rows;
};

struct ReplicationOutcome {
  bool ok = false;
  std::string error;
  ConfusionCounts counts;
};

inline ReplicationOutcome run_replication(const Detector& det, const SimSpec& spec) {
  ReplicationOutcome out;
  try {
    const SimData sim = generate_contaminated(spec);
    out.counts = confusion(sim.truth, det.run(sim.data.values));
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  return out;
}

// Mean outlier/inlier error rates per dimension. Replications may run on
// separate threads; results are reduced in replication order.
inline SweepTable dimension_sweep(const Detector& det, const std::vector<int>& p_values, int replications,
                                  const SimSpec& base, bool parallel = false) {
  if (replications < 1) fail_config("dimension sweep", "replications must be positive");
  SweepTable table;
  table.base = base;
  for (int p : p_values) {
    const SimSpec dim_spec = base.with_dimension(p);
    std::vector<ReplicationOutcome> outcomes(static_cast<size_t>(replications));
    if (parallel) {
      std::vector<std::future<ReplicationOutcome>> jobs;
      for (int r = 0; r < replications; ++r) {
        SimSpec s = dim_spec;
        s.seed = base.seed + static_cast<std::uint64_t>(r);
        jobs.push_back(std::async(std::launch::async, [&det, s] { return run_replication(det, s); }));
      }
      for (int r = 0; r < replications; ++r) outcomes[static_cast<size_t>(r)] = jobs[static_cast<size_t>(r)].get();
    } else {
      for (int r = 0; r < replications; ++r) {
        SimSpec s = dim_spec;
        s.seed = base.seed + static_cast<std::uint64_t>(r);
        outcomes[static_cast<size_t>(r)] = run_replication(det, s);
      }
    }

    SweepRow row;
    row.p = p;
    row.alpha = det.alpha;
    row.detector = det.name;
    row.replications = replications;
    row.seed = base.seed;
    double fn_sum = 0.0, fp_sum = 0.0;
    int fn_n = 0, fp_n = 0;
    for (const auto& o : outcomes) {
      if (!o.ok) {
        ++row.failures;
        row.failure_messages.push_back(o.error);
        continue;
      }
      if (auto fn = o.counts.fn_rate()) fn_sum += *fn, ++fn_n;
      if (auto fp = o.counts.fp_rate()) fp_sum += *fp, ++fp_n;
    }
    if (fn_n > 0) row.mean_fn = fn_sum / fn_n;
    if (fp_n > 0) row.mean_fp = fp_sum / fp_n;
    table.rows.push_back(std::move(row));
  }
  return table;
}

struct TimingRow {
  std::string detector;
  double median_seconds = 0.0;
  std::vector<double> runs;
};

// Median wall-clock time of `repeats` runs per detector on one generated data set.
inline std::vector<TimingRow> time_detectors(const std::vector<Detector>& detectors, const SimSpec& spec,
                                             int repeats) {
  if (repeats < 3) fail_config("timing", "at least three repeats are required");
  const SimData sim = generate_contaminated(spec);
  std::vector<TimingRow> rows;
  for (const auto& det : detectors) {
    TimingRow row;
    row.detector = det.name;
    for (int r = 0; r < repeats; ++r) {
      const auto t0 = std::chrono::steady_clock::now();
      auto flags = det.run(sim.data.values);
      const auto t1 = std::chrono::steady_clock::now();
      // keep the result observable so the call cannot be elided
      if (flags.size() != static_cast<size_t>(spec.n)) fail_numeric("timing", "detector returned wrong length");
      row.runs.push_back(std::chrono::duration<double>(t1 - t0).count());
    }
    row.median_seconds = median(row.runs);
    rows.push_back(std::move(row));
  }
  return rows;
}

} // namespace pcout
