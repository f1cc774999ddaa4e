#pragma once

#include <CLI11.hpp>

#include <chrono>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "pcout/baselines.hpp"
#include "pcout/error.hpp"
#include "pcout/evalsim.hpp"
#include "pcout/io.hpp"
#include "pcout/prcmpout.hpp"

namespace pcout {

// Per-field overrides of DetectorConfig; unset fields keep the defaults.
struct DetectorOverrides {
  std::optional<double> variance_threshold, scale_const_s, outlier_cut, stage1_full_weight_fraction,
      stage1_c_mad_multiplier, stage2_m_quantile, stage2_c_quantile;

  bool any() const {
    return variance_threshold || scale_const_s || outlier_cut || stage1_full_weight_fraction ||
           stage1_c_mad_multiplier || stage2_m_quantile || stage2_c_quantile;
  }

  DetectorConfig apply(DetectorConfig c = {}) const {
    if (variance_threshold) c.variance_threshold = *variance_threshold;
    if (scale_const_s) c.scale_const_s = *scale_const_s;
    if (outlier_cut) c.outlier_cut = *outlier_cut;
    if (stage1_full_weight_fraction) c.stage1_full_weight_fraction = *stage1_full_weight_fraction;
    if (stage1_c_mad_multiplier) c.stage1_c_mad_multiplier = *stage1_c_mad_multiplier;
    if (stage2_m_quantile) c.stage2_m_quantile = *stage2_m_quantile;
    if (stage2_c_quantile) c.stage2_c_quantile = *stage2_c_quantile;
    return c;
  }
};

struct RunConfig {
  std::string input_path;
  std::string method = "prcmpout";
  std::optional<double> alpha;
  DetectorOverrides overrides;
  std::string format = "json";
  std::string output_path;  // empty: standard output
  std::optional<std::string> plot_data;
  bool include_timing = false;
};

inline bool is_cutoff_method(const std::string& m) { return m == "classical" || m == "ogk" || m == "sign2"; }

inline void validate(const RunConfig& cfg) {
  if (cfg.method != "prcmpout" && !is_cutoff_method(cfg.method))
    fail_config("config", "unknown method '" + cfg.method + "'");
  if (cfg.format != "json" && cfg.format != "csv") fail_config("config", "format must be json or csv");
  if (cfg.method == "prcmpout" && cfg.alpha) fail_config("config", "--alpha does not apply to prcmpout");
  if (cfg.method != "prcmpout" && cfg.overrides.any())
    fail_config("config", "detector overrides apply only to prcmpout");
  if (cfg.alpha && !(*cfg.alpha > 0.0 && *cfg.alpha < 1.0)) fail_config("config", "alpha must lie in (0, 1)");
  if (cfg.method == "prcmpout") cfg.overrides.apply().validate();
}

inline DetectionReport build_report(const RunConfig& cfg, const DataMatrix& data) {
  validate(cfg);
  DetectionReport r;
  r.method = cfg.method;
  r.input = cfg.input_path;
  r.n = data.rows();
  r.p = data.cols();
  for (Eigen::Index i = 0; i < data.rows(); ++i) r.row_ids.push_back(data.row_id(i));

  const auto t0 = std::chrono::steady_clock::now();
  if (cfg.method == "prcmpout") {
    r.config = cfg.overrides.apply();
    r.weights = detect(data, r.config);
    for (Eigen::Index j : r.weights->dropped_columns) r.dropped_columns.push_back(data.column_name(j));
  } else {
    r.alpha = cfg.alpha.value_or(0.05);
    if (cfg.method == "classical")
      r.cutoff = classical_detect(data.values, *r.alpha);
    else if (cfg.method == "ogk")
      r.cutoff = ogk_detect(data.values, *r.alpha);
    else
      r.cutoff = sign2_detect(data.values, *r.alpha);
  }
  const auto t1 = std::chrono::steady_clock::now();
  if (cfg.include_timing) r.elapsed_seconds = std::chrono::duration<double>(t1 - t0).count();
  return r;
}

inline std::string render_report(const DetectionReport& r, const std::string& format) {
  return format == "csv" ? report_to_csv(r) : report_to_json(r).dump(2) + "\n";
}

inline void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty() || path == "-")
    out << text;
  else
    write_text(path, text);
}

// Load, detect, write. Returns the process exit code.
inline int run_detection(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    validate(cfg);
    const auto t0 = std::chrono::steady_clock::now();
    const DataMatrix data = load_csv(cfg.input_path);
    const DetectionReport r = build_report(cfg, data);
    write_or_print(cfg.output_path, render_report(r, cfg.format), out);
    if (cfg.plot_data)
      emit_plot_data(r, r.is_prcmpout() ? PlotKind::weight_panels : PlotKind::distance_index, *cfg.plot_data);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const auto flagged = std::count(r.flags().begin(), r.flags().end(), true);
    err << r.method << ": " << flagged << " of " << r.n << " rows flagged";
    if (r.weights) err << " (p* = " << r.weights->p_star << ", " << r.dropped_columns.size() << " columns dropped)";
    err << ", " << secs << " s\n";
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  }
}

inline std::vector<int> parse_int_list(const std::string& s, const char* what) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    auto v = detail::parse_number(tok);
    if (!v || *v != std::floor(*v)) fail_config("config", std::string("bad integer in ") + what + ": '" + tok + "'");
    out.push_back(static_cast<int>(*v));
  }
  if (out.empty()) fail_config("config", std::string("empty list for ") + what);
  return out;
}

inline Detector make_detector(const std::string& method, std::optional<double> alpha, const DetectorConfig& cfg) {
  if (method == "prcmpout") {
    if (alpha) fail_config("config", "--alpha does not apply to prcmpout");
    return prcmpout_detector(cfg);
  }
  const double a = alpha.value_or(0.05);
  if (!(a > 0.0 && a < 1.0)) fail_config("config", "alpha must lie in (0, 1)");
  if (method == "classical") return classical_detector(a);
  if (method == "ogk") return ogk_detector(a);
  if (method == "sign2") return sign2_detector(a);
  fail_config("config", "unknown method '" + method + "'");
}

inline void add_detector_overrides(CLI::App* cmd, DetectorOverrides& o) {
  cmd->add_option("--variance-threshold", o.variance_threshold, "Variance fraction the components must cover");
  cmd->add_option("--scale-const", o.scale_const_s, "Constant s in the weight combination");
  cmd->add_option("--outlier-cut", o.outlier_cut, "Rows with combined weight below this are flagged");
  cmd->add_option("--full-weight-fraction", o.stage1_full_weight_fraction,
                  "Fraction of smallest stage-1 distances given full weight");
  cmd->add_option("--mad-multiplier", o.stage1_c_mad_multiplier, "Stage-1 zero-weight radius: med + k * MAD");
  cmd->add_option("--stage2-m-quantile", o.stage2_m_quantile, "Chi-square quantile for the stage-2 full-weight radius");
  cmd->add_option("--stage2-c-quantile", o.stage2_c_quantile, "Chi-square quantile for the stage-2 zero-weight radius");
}

// Entry point shared by the executable and the tests.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Principal-component outlier detection for wide numeric tables"};
  app.require_subcommand(1);

  RunConfig det;
  auto* detect_cmd = app.add_subcommand("detect", "Flag outlying rows of a CSV table");
  detect_cmd->add_option("--input,-i", det.input_path, "CSV file with a header row")->required();
  detect_cmd->add_option("--method,-m", det.method, "prcmpout | classical | ogk | sign2");
  detect_cmd->add_option("--alpha", det.alpha, "Tail probability for cutoff methods (default 0.05)");
  detect_cmd->add_option("--format,-f", det.format, "json | csv");
  detect_cmd->add_option("--output,-o", det.output_path, "Report path (default: standard output)");
  detect_cmd->add_option("--plot-data", det.plot_data, "Also write plot data (long CSV) here");
  detect_cmd->add_flag("--include-timing", det.include_timing, "Record detector wall time in the report header");
  add_detector_overrides(detect_cmd, det.overrides);

  struct SimArgs {
    std::string method = "prcmpout";
    std::optional<double> alpha;
    DetectorOverrides overrides;
    int n = 100;
    std::string p_list = "10,20,30,40";
    int p = 400;
    std::string outliers = "reference";
    double shift = 1.5;
    double scatter = 1.0;
    std::uint64_t seed = 20240101;
    int replications = 16;
    int repeats = 5;
    std::string methods = "prcmpout,ogk,sign2,classical";
    std::string format = "csv";
    std::string output;
    std::optional<std::string> plot_data;
  } sim;

  auto add_design = [&](CLI::App* cmd) {
    cmd->add_option("--n", sim.n, "Observations per data set");
    cmd->add_option("--outliers", sim.outliers, "'reference', 'none', or comma-separated 1-based row indices");
    cmd->add_option("--shift", sim.shift, "Per-coordinate mean shift of outlier rows");
    cmd->add_option("--scatter", sim.scatter, "Covariance multiplier of outlier rows");
    cmd->add_option("--seed", sim.seed, "Base seed; replication r uses seed + r");
    cmd->add_option("--output,-o", sim.output, "Output path (default: standard output)");
  };

  auto* sweep_cmd = app.add_subcommand("sweep", "Mean error rates over dimensions on simulated contamination");
  sweep_cmd->add_option("--method,-m", sim.method, "prcmpout | classical | ogk | sign2");
  sweep_cmd->add_option("--alpha", sim.alpha, "Tail probability for cutoff methods");
  sweep_cmd->add_option("--p", sim.p_list, "Comma-separated dimensions");
  sweep_cmd->add_option("--replications,-r", sim.replications, "Seeded replications per dimension");
  sweep_cmd->add_option("--format,-f", sim.format, "csv | json");
  sweep_cmd->add_option("--plot-data", sim.plot_data, "Also write sweep curves (long CSV) here");
  add_design(sweep_cmd);
  add_detector_overrides(sweep_cmd, sim.overrides);

  auto* bench_cmd = app.add_subcommand("bench", "Median wall-clock time per detector on one simulated data set");
  bench_cmd->add_option("--methods", sim.methods, "Comma-separated methods");
  bench_cmd->add_option("--alpha", sim.alpha, "Tail probability for cutoff methods");
  bench_cmd->add_option("--p", sim.p, "Dimension");
  bench_cmd->add_option("--repeats", sim.repeats, "Timed runs per detector (at least 3)");
  add_design(bench_cmd);

  std::string plot_kind, plot_report, plot_output;
  auto* plot_cmd = app.add_subcommand("plotdata", "Turn a JSON report or sweep into long-format plot data");
  plot_cmd->add_option("--kind,-k", plot_kind, "distance_index | weight_panels | sweep_curves")->required();
  plot_cmd->add_option("--report,-r", plot_report, "JSON document from 'detect' or 'sweep'")->required();
  plot_cmd->add_option("--output,-o", plot_output, "Output path (default: standard output)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(ErrorKind::config);
  }

  if (detect_cmd->parsed()) return run_detection(det, out, err);

  try {
    auto design = [&](int p) {
      std::vector<int> idx;
      if (sim.outliers == "reference")
        idx = reference_outlier_indices();
      else if (sim.outliers != "none")
        idx = parse_int_list(sim.outliers, "--outliers");
      SimSpec s = SimSpec::uniform_shift(sim.n, p, std::move(idx), sim.shift, sim.scatter, sim.seed);
      s.validate();
      return s;
    };

    if (sweep_cmd->parsed()) {
      if (sim.method != "prcmpout" && sim.overrides.any())
        fail_config("config", "detector overrides apply only to prcmpout");
      if (sim.format != "csv" && sim.format != "json") fail_config("config", "format must be csv or json");
      const DetectorConfig dc = sim.overrides.apply();
      dc.validate();
      const Detector d = make_detector(sim.method, sim.alpha, dc);
      const auto ps = parse_int_list(sim.p_list, "--p");
      const SweepTable t = dimension_sweep(d, ps, sim.replications, design(ps.front()));
      write_or_print(sim.output, sim.format == "json" ? sweep_to_json(t).dump(2) + "\n" : sweep_to_csv(t), out);
      if (sim.plot_data) emit_plot_data(t, PlotKind::sweep_curves, *sim.plot_data);
      for (const auto& r : t.rows)
        if (r.failures > 0) err << "p = " << r.p << ": " << r.failures << " replications failed\n";
      return 0;
    }

    if (bench_cmd->parsed()) {
      std::vector<Detector> dets;
      std::stringstream ss(sim.methods);
      std::string m;
      while (std::getline(ss, m, ','))
        dets.push_back(make_detector(m, m == "prcmpout" ? std::nullopt : sim.alpha, DetectorConfig{}));
      const auto rows = time_detectors(dets, design(sim.p), sim.repeats);
      write_or_print(sim.output, timing_to_csv(rows), out);
      return 0;
    }

    if (plot_cmd->parsed()) {
      const PlotKind kind = plot_kind_from_string(plot_kind);
      std::ifstream in(plot_report, std::ios::binary);
      if (!in) fail_input("plotdata", "cannot open '" + plot_report + "'");
      json doc;
      try {
        doc = json::parse(in);
      } catch (const json::exception& e) {
        fail_input("plotdata", std::string("not a JSON document: ") + e.what());
      }
      PlotSource src = doc.contains("spec") ? PlotSource(sweep_from_json(doc)) : PlotSource(report_from_json(doc));
      write_or_print(plot_output, plot_data(src, kind), out);
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(e.kind());
  }
  return exit_code(ErrorKind::config);
}

} // namespace pcout
