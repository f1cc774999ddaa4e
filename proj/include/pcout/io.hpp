#pragma once

#include <json.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pcout/baselines.hpp"
#include "pcout/data_matrix.hpp"
#include "pcout/error.hpp"
#include "pcout/evalsim.hpp"
#include "pcout/prcmpout.hpp"

namespace pcout {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// CSV input

namespace detail {

// RFC 4180 records: quoted fields, doubled quotes, CRLF or LF line ends.
inline std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  size_t i = 0;
  if (text.substr(0, 3) == "\xEF\xBB\xBF") i = 3;  // UTF-8 byte order mark

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    // a line holding nothing at all is skipped
    if (!(record.size() == 1 && record[0].empty())) records.push_back(std::move(record));
    record.clear();
  };

  for (; i < text.size(); ++i) {
    const char ch = text[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field.push_back(ch);
      }
      continue;
    }
    if (ch == '"' && !field_started) {
      quoted = true;
      field_started = true;
    } else if (ch == ',') {
      end_field();
    } else if (ch == '\r') {
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
      end_record();
    } else if (ch == '\n') {
      end_record();
    } else {
      field.push_back(ch);
      field_started = true;
    }
  }
  if (quoted) fail_input("csv", "unterminated quoted field");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

// Locale-independent; decimal point and exponents only. Rejects NaN/Inf and empty cells.
inline std::optional<double> parse_number(std::string_view s) {
  s = trim(s);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v, std::chars_format::general);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) return std::nullopt;
  return v;
}

} // namespace detail

// Header row required. The first column becomes row identifiers when it holds
// any non-numeric token; every other cell must be a finite number.
inline DataMatrix parse_csv(std::string_view text) {
  auto records = detail::split_csv(text);
  if (records.empty()) fail_input("csv", "file is empty");
  const auto& header = records.front();
  const size_t width = header.size();
  const size_t n = records.size() - 1;
  if (n == 0) fail_input("csv", "no data rows after the header");
  for (size_t r = 1; r < records.size(); ++r)
    if (records[r].size() != width)
      fail_input("csv", "row " + std::to_string(r + 1) + " has " + std::to_string(records[r].size()) +
                            " fields; header has " + std::to_string(width));

  bool id_column = false;
  for (size_t r = 1; r < records.size() && !id_column; ++r)
    if (!detail::parse_number(records[r][0])) id_column = true;
  const size_t first = id_column ? 1 : 0;
  if (width <= first) fail_input("csv", "no numeric columns");

  DataMatrix dm;
  dm.values.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(width - first));
  for (size_t c = first; c < width; ++c) dm.column_names.emplace_back(detail::trim(header[c]));
  for (size_t r = 1; r < records.size(); ++r) {
    const auto& rec = records[r];
    dm.row_ids.push_back(id_column ? std::string(detail::trim(rec[0])) : std::to_string(r));
    for (size_t c = first; c < width; ++c) {
      auto v = detail::parse_number(rec[c]);
      if (!v)
        fail_input("csv", "non-numeric value '" + rec[c] + "' at line " + std::to_string(r + 1) + ", column " +
                              std::to_string(c + 1) + " (" + header[c] + ")");
      dm.values(static_cast<Eigen::Index>(r - 1), static_cast<Eigen::Index>(c - first)) = *v;
    }
  }
  return dm;
}

inline DataMatrix load_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_input("csv", "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_csv(ss.str());
}

// ---------------------------------------------------------------------------
// Number formatting

// 17 significant digits: enough to round-trip any double.
inline std::string format_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

// ---------------------------------------------------------------------------
// Detection reports

inline json config_to_json(const DetectorConfig& c) {
  return json{{"variance_threshold", c.variance_threshold},
              {"scale_const_s", c.scale_const_s},
              {"outlier_cut", c.outlier_cut},
              {"stage1_full_weight_fraction", c.stage1_full_weight_fraction},
              {"stage1_c_mad_multiplier", c.stage1_c_mad_multiplier},
              {"stage2_m_quantile", c.stage2_m_quantile},
              {"stage2_c_quantile", c.stage2_c_quantile}};
}

inline DetectorConfig config_from_json(const json& j) {
  DetectorConfig c;
  c.variance_threshold = j.at("variance_threshold").get<double>();
  c.scale_const_s = j.at("scale_const_s").get<double>();
  c.outlier_cut = j.at("outlier_cut").get<double>();
  c.stage1_full_weight_fraction = j.at("stage1_full_weight_fraction").get<double>();
  c.stage1_c_mad_multiplier = j.at("stage1_c_mad_multiplier").get<double>();
  c.stage2_m_quantile = j.at("stage2_m_quantile").get<double>();
  c.stage2_c_quantile = j.at("stage2_c_quantile").get<double>();
  return c;
}

// One detector run with everything needed to re-run it and to draw its panels.
struct DetectionReport {
  std::string method;                 // prcmpout | classical | ogk | sign2
  std::string input;
  std::optional<double> alpha;        // cutoff methods
  DetectorConfig config;              // prcmpout
  Eigen::Index n = 0, p = 0;
  std::vector<std::string> row_ids;
  std::vector<std::string> dropped_columns;
  std::optional<WeightReport> weights;       // prcmpout
  std::optional<DetectionResult> cutoff;     // cutoff methods
  std::optional<double> elapsed_seconds;

  bool is_prcmpout() const { return weights.has_value(); }
  const std::vector<bool>& flags() const { return weights ? weights->flags : cutoff->flags; }
};

inline json header_json(const DetectionReport& r) {
  json h;
  h["method"] = r.method;
  h["input"] = r.input;
  h["n"] = r.n;
  h["p"] = r.p;
  h["dropped_columns"] = r.dropped_columns;
  if (r.weights) {
    const auto& w = *r.weights;
    h["config"] = config_to_json(r.config);
    h["p_star"] = w.p_star;
    h["variance_fraction"] = w.variance_fraction;
    h["gram_route"] = w.gram_route;
    h["dropped_components"] = w.dropped_components;
    h["kurtosis_weights"] = to_std(w.kurtosis_weights);
    h["boundaries"] = {{"stage1_m", w.stage1_m}, {"stage1_c", w.stage1_c},
                       {"stage2_m", w.stage2_m}, {"stage2_c", w.stage2_c},
                       {"outlier_cut", r.config.outlier_cut}};
  } else {
    h["alpha"] = *r.alpha;
    h["cutoff"] = r.cutoff->cutoff;
    h["p_star"] = r.cutoff->dimension;
  }
  h["flagged"] = std::count(r.flags().begin(), r.flags().end(), true);
  if (r.elapsed_seconds) h["elapsed_seconds"] = *r.elapsed_seconds;
  return h;
}

inline std::vector<std::string> record_columns(const DetectionReport& r) {
  if (r.is_prcmpout()) return {"row_id", "w1", "w2", "w_final", "stage1_distance", "stage2_distance", "flag"};
  return {"row_id", "distance", "cutoff", "flag"};
}

inline json report_to_json(const DetectionReport& r) {
  json records = json::array();
  for (Eigen::Index i = 0; i < r.n; ++i) {
    const size_t k = static_cast<size_t>(i);
    json rec;
    rec["row_id"] = r.row_ids[k];
    if (r.weights) {
      const auto& w = *r.weights;
      rec["w1"] = w.w1(i);
      rec["w2"] = w.w2(i);
      rec["w_final"] = w.w_final(i);
      rec["stage1_distance"] = w.stage1_distances.transformed(i);
      rec["stage2_distance"] = w.stage2_distances.transformed(i);
      rec["flag"] = static_cast<bool>(w.flags[k]);
    } else {
      rec["distance"] = r.cutoff->distances(i);
      rec["cutoff"] = r.cutoff->cutoff;
      rec["flag"] = static_cast<bool>(r.cutoff->flags[k]);
    }
    records.push_back(std::move(rec));
  }
  return json{{"header", header_json(r)}, {"records", std::move(records)}};
}

// CSV form: one comment line carrying the header as compact JSON, then the records.
inline std::string report_to_csv(const DetectionReport& r) {
  std::string out = "# " + header_json(r).dump() + "\n";
  const auto cols = record_columns(r);
  for (size_t c = 0; c < cols.size(); ++c) out += (c ? "," : "") + cols[c];
  out += "\n";
  for (Eigen::Index i = 0; i < r.n; ++i) {
    const size_t k = static_cast<size_t>(i);
    out += csv_escape(r.row_ids[k]);
    if (r.weights) {
      const auto& w = *r.weights;
      for (double v : {w.w1(i), w.w2(i), w.w_final(i), w.stage1_distances.transformed(i),
                       w.stage2_distances.transformed(i)})
        out += "," + format_number(v);
      out += w.flags[k] ? ",1" : ",0";
    } else {
      out += "," + format_number(r.cutoff->distances(i)) + "," + format_number(r.cutoff->cutoff);
      out += r.cutoff->flags[k] ? ",1" : ",0";
    }
    out += "\n";
  }
  return out;
}

inline DetectionReport report_from_json(const json& j) {
  try {
    const json& h = j.at("header");
    const json& recs = j.at("records");
    DetectionReport r;
    r.method = h.at("method").get<std::string>();
    r.input = h.at("input").get<std::string>();
    r.n = h.at("n").get<Eigen::Index>();
    r.p = h.at("p").get<Eigen::Index>();
    r.dropped_columns = h.at("dropped_columns").get<std::vector<std::string>>();
    if (h.contains("elapsed_seconds")) r.elapsed_seconds = h["elapsed_seconds"].get<double>();
    const Eigen::Index n = static_cast<Eigen::Index>(recs.size());
    if (n != r.n) fail_input("report", "record count does not match header n");
    for (const auto& rec : recs) r.row_ids.push_back(rec.at("row_id").get<std::string>());

    if (r.method == "prcmpout") {
      r.config = config_from_json(h.at("config"));
      WeightReport w;
      w.w1.resize(n);
      w.w2.resize(n);
      w.w_final.resize(n);
      w.stage1_distances.transformed.resize(n);
      w.stage2_distances.transformed.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const json& rec = recs[static_cast<size_t>(i)];
        w.w1(i) = rec.at("w1").get<double>();
        w.w2(i) = rec.at("w2").get<double>();
        w.w_final(i) = rec.at("w_final").get<double>();
        w.stage1_distances.transformed(i) = rec.at("stage1_distance").get<double>();
        w.stage2_distances.transformed(i) = rec.at("stage2_distance").get<double>();
        w.flags.push_back(rec.at("flag").get<bool>());
      }
      w.p_star = h.at("p_star").get<Eigen::Index>();
      w.stage1_distances.df = w.stage2_distances.df = w.p_star;
      w.variance_fraction = h.at("variance_fraction").get<double>();
      w.gram_route = h.at("gram_route").get<bool>();
      w.dropped_components = h.at("dropped_components").get<std::vector<Eigen::Index>>();
      const auto kw = h.at("kurtosis_weights").get<std::vector<double>>();
      w.kurtosis_weights = Eigen::Map<const Vector>(kw.data(), static_cast<Eigen::Index>(kw.size()));
      const json& b = h.at("boundaries");
      w.stage1_m = b.at("stage1_m").get<double>();
      w.stage1_c = b.at("stage1_c").get<double>();
      w.stage2_m = b.at("stage2_m").get<double>();
      w.stage2_c = b.at("stage2_c").get<double>();
      r.weights = std::move(w);
    } else {
      r.alpha = h.at("alpha").get<double>();
      DetectionResult d;
      d.method = r.method;
      d.cutoff = h.at("cutoff").get<double>();
      d.dimension = h.at("p_star").get<Eigen::Index>();
      d.distances.resize(n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const json& rec = recs[static_cast<size_t>(i)];
        d.distances(i) = rec.at("distance").get<double>();
        d.flags.push_back(rec.at("flag").get<bool>());
      }
      r.cutoff = std::move(d);
    }
    return r;
  } catch (const json::exception& e) {
    fail_input("report", std::string("malformed report: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Sweep tables

inline json simspec_to_json(const SimSpec& s) {
  return json{{"n", s.n},
              {"p", s.p},
              {"outlier_indices", s.outlier_indices},
              {"location_shift", to_std(s.location_shift)},
              {"scatter_factor", s.scatter_factor},
              {"seed", s.seed},
              {"model", "inliers N(0, I_p); outliers N(location_shift, scatter_factor * I_p)"}};
}

inline SimSpec simspec_from_json(const json& j) {
  SimSpec s;
  s.n = j.at("n").get<int>();
  s.p = j.at("p").get<int>();
  s.outlier_indices = j.at("outlier_indices").get<std::vector<int>>();
  const auto shift = j.at("location_shift").get<std::vector<double>>();
  s.location_shift = Eigen::Map<const Vector>(shift.data(), static_cast<Eigen::Index>(shift.size()));
  s.scatter_factor = j.at("scatter_factor").get<double>();
  s.seed = j.at("seed").get<std::uint64_t>();
  return s;
}

inline json sweep_to_json(const SweepTable& t) {
  json rows = json::array();
  for (const auto& r : t.rows) {
    json row{{"p", r.p}, {"detector", r.detector}, {"replications", r.replications}, {"seed", r.seed},
             {"failures", r.failures}, {"failure_messages", r.failure_messages}};
    row["alpha"] = r.alpha ? json(*r.alpha) : json(nullptr);
    row["mean_fn"] = r.mean_fn ? json(*r.mean_fn) : json(nullptr);
    row["mean_fp"] = r.mean_fp ? json(*r.mean_fp) : json(nullptr);
    rows.push_back(std::move(row));
  }
  return json{{"spec", simspec_to_json(t.base)}, {"rows", std::move(rows)}};
}

inline SweepTable sweep_from_json(const json& j) {
  try {
    SweepTable t;
    t.base = simspec_from_json(j.at("spec"));
    for (const auto& row : j.at("rows")) {
      SweepRow r;
      r.p = row.at("p").get<int>();
      r.detector = row.at("detector").get<std::string>();
      r.replications = row.at("replications").get<int>();
      r.seed = row.at("seed").get<std::uint64_t>();
      r.failures = row.value("failures", 0);
      if (!row.at("alpha").is_null()) r.alpha = row["alpha"].get<double>();
      if (!row.at("mean_fn").is_null()) r.mean_fn = row["mean_fn"].get<double>();
      if (!row.at("mean_fp").is_null()) r.mean_fp = row["mean_fp"].get<double>();
      t.rows.push_back(std::move(r));
    }
    return t;
  } catch (const json::exception& e) {
    fail_input("sweep", std::string("malformed sweep document: ") + e.what());
  }
}

// Undefined cells (no alpha, no defined rate) are written empty.
inline std::string sweep_to_csv(const SweepTable& t) {
  auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
  std::string out = "p,alpha,detector,mean_fn,mean_fp,replications,seed\n";
  for (const auto& r : t.rows) {
    out += std::to_string(r.p) + "," + opt(r.alpha) + "," + csv_escape(r.detector) + "," + opt(r.mean_fn) + "," +
           opt(r.mean_fp) + "," + std::to_string(r.replications) + "," + std::to_string(r.seed) + "\n";
  }
  return out;
}

inline std::string timing_to_csv(const std::vector<TimingRow>& rows) {
  std::string out = "detector,median_seconds,repeats\n";
  for (const auto& r : rows)
    out += csv_escape(r.detector) + "," + format_number(r.median_seconds) + "," + std::to_string(r.runs.size()) + "\n";
  return out;
}

// ---------------------------------------------------------------------------
// Plot data: long format (panel, x, y, flag). Observation rows carry a numeric
// x (1-based index, or p for sweep curves); boundary rows carry the boundary's
// name in x and leave flag empty.

enum class PlotKind { distance_index, weight_panels, sweep_curves };

inline PlotKind plot_kind_from_string(const std::string& s) {
  if (s == "distance_index") return PlotKind::distance_index;
  if (s == "weight_panels") return PlotKind::weight_panels;
  if (s == "sweep_curves") return PlotKind::sweep_curves;
  fail_config("plot data", "unknown plot kind '" + s + "'");
}

using PlotSource = std::variant<DetectionReport, SweepTable>;

namespace detail {

inline void plot_series(std::string& out, const std::string& panel, const Vector& y, const std::vector<bool>& flags) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    out += panel + "," + std::to_string(i + 1) + "," + format_number(y(i)) + "," +
           (flags[static_cast<size_t>(i)] ? "1" : "0") + "\n";
}

inline void plot_boundary(std::string& out, const std::string& panel, const std::string& name, double v) {
  out += panel + "," + name + "," + format_number(v) + ",\n";
}

} // namespace detail

inline std::string plot_data(const PlotSource& source, PlotKind kind) {
  std::string out = "panel,x,y,flag\n";
  if (kind == PlotKind::sweep_curves) {
    const auto* t = std::get_if<SweepTable>(&source);
    if (!t) fail_config("plot data", "sweep_curves needs a sweep table");
    auto opt = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string(); };
    for (const auto& r : t->rows) {
      out += "mean_fn," + std::to_string(r.p) + "," + opt(r.mean_fn) + ",\n";
      out += "mean_fp," + std::to_string(r.p) + "," + opt(r.mean_fp) + ",\n";
    }
    return out;
  }

  const auto* r = std::get_if<DetectionReport>(&source);
  if (!r) fail_config("plot data", "this plot kind needs a detection report");
  if (kind == PlotKind::distance_index) {
    if (!r->cutoff) fail_config("plot data", "distance_index needs a cutoff-method report (classical, ogk, sign2)");
    detail::plot_series(out, "distance", r->cutoff->distances, r->cutoff->flags);
    detail::plot_boundary(out, "distance", "cutoff", r->cutoff->cutoff);
    return out;
  }

  if (!r->weights) fail_config("plot data", "weight_panels needs a prcmpout report");
  const auto& w = *r->weights;
  Vector flag01(w.flags.size());
  for (size_t i = 0; i < w.flags.size(); ++i) flag01(static_cast<Eigen::Index>(i)) = w.flags[i] ? 1.0 : 0.0;
  detail::plot_series(out, "stage1_distance", w.stage1_distances.transformed, w.flags);
  detail::plot_boundary(out, "stage1_distance", "M", w.stage1_m);
  detail::plot_boundary(out, "stage1_distance", "c", w.stage1_c);
  detail::plot_series(out, "w1", w.w1, w.flags);
  detail::plot_series(out, "stage2_distance", w.stage2_distances.transformed, w.flags);
  detail::plot_boundary(out, "stage2_distance", "M", w.stage2_m);
  detail::plot_boundary(out, "stage2_distance", "c", w.stage2_c);
  detail::plot_series(out, "w2", w.w2, w.flags);
  detail::plot_series(out, "w_final", w.w_final, w.flags);
  detail::plot_boundary(out, "w_final", "outlier_cut", r->config.outlier_cut);
  detail::plot_series(out, "flag", flag01, w.flags);
  return out;
}

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_input("output", "cannot write '" + path + "'");
  out << text;
  if (!out) fail_input("output", "write to '" + path + "' failed");
}

inline void emit_plot_data(const PlotSource& source, PlotKind kind, const std::string& path) {
  write_text(path, plot_data(source, kind));
}

} // namespace pcout
