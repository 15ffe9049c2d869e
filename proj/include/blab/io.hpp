#pragma once

// JSON and CSV serialization of distributions, encoders and results.

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <tuple>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "blab/experiments.hpp"

namespace blab::io {

using json = nlohmann::json;

/// Shortest round-trip text for a double ("nan", "inf", "-inf" for specials).
inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

// JSON has no infinities; they travel as strings.
inline json number(double v) {
  if (std::isfinite(v)) return v;
  return fmt(v);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline json parse_json(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(what + ": malformed JSON (" + std::string(e.what()) + ")");
  }
}

namespace detail {

inline bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

template <typename T>
T get_field(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ValidationError(where + "." + key + ": missing");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError(where + "." + key + ": wrong type");
  }
}

inline std::vector<std::vector<std::string>> read_csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

inline double to_double(const std::string& s, const std::string& where) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ValidationError(where + ": not a number '" + s + "'");
  }
}

inline std::size_t to_index(const std::string& s, const std::string& where) {
  const double v = to_double(s, where);
  if (v < 0 || v != std::floor(v)) throw ValidationError(where + ": not an index '" + s + "'");
  return static_cast<std::size_t>(v);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Tables

inline json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (double v : m.row(r)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Matrix matrix_from_json(const json& j, const std::string& where) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw ValidationError(where + ": expected array of arrays");
  Matrix m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (!j[r].is_array() || j[r].size() != m.cols()) throw ValidationError(where + ": ragged rows");
    for (std::size_t c = 0; c < m.cols(); ++c) {
      if (!j[r][c].is_number()) throw ValidationError(where + ": non-numeric entry");
      m(r, c) = j[r][c].get<double>();
    }
  }
  return m;
}

inline json joint_to_json(const JointDistribution& p) {
  return {{"card_x", p.card_x()}, {"card_y", p.card_y()}, {"probs", matrix_to_json(p.probs())}};
}

inline JointDistribution joint_from_json(const json& j) {
  const auto nx = detail::get_field<std::size_t>(j, "card_x", "joint");
  const auto ny = detail::get_field<std::size_t>(j, "card_y", "joint");
  if (!j.contains("probs")) throw ValidationError("joint.probs: missing");
  Matrix m = matrix_from_json(j.at("probs"), "joint.probs");
  if (m.rows() != nx || m.cols() != ny) throw DimensionMismatch("joint: probs shape disagrees with card_x/card_y");
  return JointDistribution(std::move(m));
}

inline std::string joint_to_csv(const JointDistribution& p) {
  std::string out = "x,y,p\n";
  for (std::size_t x = 0; x < p.card_x(); ++x)
    for (std::size_t y = 0; y < p.card_y(); ++y)
      out += std::to_string(x) + "," + std::to_string(y) + "," + fmt(p(x, y)) + "\n";
  return out;
}

/// Cells absent from the CSV are zero; the shape is the largest index + 1.
inline JointDistribution joint_from_csv(const std::string& text) {
  const auto rows = detail::read_csv_rows(text);
  if (rows.empty() || rows[0] != std::vector<std::string>{"x", "y", "p"})
    throw ValidationError("joint CSV: header must be x,y,p");
  std::size_t nx = 0, ny = 0;
  std::vector<std::tuple<std::size_t, std::size_t, double>> cells;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 3) throw ValidationError("joint CSV: row " + std::to_string(i) + " needs 3 fields");
    const auto x = detail::to_index(rows[i][0], "joint CSV x");
    const auto y = detail::to_index(rows[i][1], "joint CSV y");
    cells.emplace_back(x, y, detail::to_double(rows[i][2], "joint CSV p"));
    nx = std::max(nx, x + 1);
    ny = std::max(ny, y + 1);
  }
  Matrix m(nx, ny, 0.0);
  for (const auto& [x, y, p] : cells) m(x, y) = p;
  return JointDistribution(std::move(m));
}

inline JointDistribution load_joint(const std::string& path) {
  const std::string text = read_file(path);
  if (detail::ends_with(path, ".csv")) return joint_from_csv(text);
  return joint_from_json(parse_json(text, path));
}

inline json counts_to_json(const CountTable& c) {
  json rows = json::array();
  for (std::size_t r = 0; r < c.counts.rows(); ++r) {
    json row = json::array();
    for (auto v : c.counts.row(r)) row.push_back(v);
    rows.push_back(std::move(row));
  }
  return {{"card_x", c.counts.rows()}, {"card_y", c.counts.cols()}, {"n", c.total_n}, {"counts", rows}};
}

inline CountTable counts_from_json(const json& j) {
  const auto nx = detail::get_field<std::size_t>(j, "card_x", "counts");
  const auto ny = detail::get_field<std::size_t>(j, "card_y", "counts");
  const auto n = detail::get_field<std::uint64_t>(j, "n", "counts");
  const auto rows = detail::get_field<std::vector<std::vector<std::uint64_t>>>(j, "counts", "counts");
  if (rows.size() != nx) throw DimensionMismatch("counts: row count disagrees with card_x");
  CountMatrix m(nx, ny, 0);
  for (std::size_t x = 0; x < nx; ++x) {
    if (rows[x].size() != ny) throw DimensionMismatch("counts: row length disagrees with card_y");
    for (std::size_t y = 0; y < ny; ++y) m(x, y) = rows[x][y];
  }
  CountTable t(std::move(m));
  if (t.total_n != n) throw ValidationError("counts: entries do not sum to n");
  return t;
}

inline std::string counts_to_csv(const CountTable& c) {
  std::string out = "# n=" + std::to_string(c.total_n) + "\nx,y,count\n";
  for (std::size_t x = 0; x < c.counts.rows(); ++x)
    for (std::size_t y = 0; y < c.counts.cols(); ++y)
      out += std::to_string(x) + "," + std::to_string(y) + "," + std::to_string(c.counts(x, y)) + "\n";
  return out;
}

inline json encoder_to_json(const Encoder& e) {
  return {{"card_source", e.card_source()}, {"card_t", e.card_t()}, {"cond", matrix_to_json(e.cond())}};
}

inline Encoder encoder_from_json(const json& j, const std::string& where) {
  if (!j.contains("cond")) throw ValidationError(where + ".cond: missing");
  return Encoder(matrix_from_json(j.at("cond"), where + ".cond"));
}

/// Encoder pair file: {"enc_x": {...}, "enc_y": {...}} with enc_y optional,
/// or a `solve` JSON output whose "result" holds the same keys.
inline std::pair<Encoder, std::optional<Encoder>> load_encoders(const std::string& path) {
  json j = parse_json(read_file(path), path);
  if (j.contains("result")) j = j.at("result");
  if (!j.contains("enc_x")) throw ValidationError(path + ": enc_x missing");
  std::optional<Encoder> ey;
  if (j.contains("enc_y") && !j.at("enc_y").is_null()) ey = encoder_from_json(j.at("enc_y"), "enc_y");
  return {encoder_from_json(j.at("enc_x"), "enc_x"), ey};
}

// ---------------------------------------------------------------------------
// Results

inline json solver_result_to_json(const SolverResult& r) {
  json j;
  j["kind"] = to_string(r.kind);
  j["enc_x"] = encoder_to_json(r.enc_x);
  j["enc_y"] = r.enc_y ? encoder_to_json(*r.enc_y) : json(nullptr);
  json traj = json::array();
  for (double v : r.loss_trajectory) traj.push_back(v);
  j["loss_trajectory"] = std::move(traj);
  j["final_loss"] = number(r.final_loss);
  j["converged"] = r.converged;
  j["selfconsistency_residual"] = number(r.selfconsistency_residual);
  j["fixedpoint_class"] = to_string(r.fixedpoint_class);
  j["iterations"] = r.iterations;
  j["best_restart"] = r.best_restart;
  j["loss_increase_fraction"] = r.loss_increase_fraction;
  json losses = json::array();
  for (double v : r.restart_losses) losses.push_back(number(v));
  j["restart_losses"] = std::move(losses);
  return j;
}

inline std::string solver_result_to_csv(const SolverResult& r) {
  std::string out;
  out += "# kind=" + std::string(to_string(r.kind)) + "\n";
  out += "# final_loss=" + fmt(r.final_loss) + "\n";
  out += "# converged=" + std::string(r.converged ? "true" : "false") + "\n";
  out += "# selfconsistency_residual=" + fmt(r.selfconsistency_residual) + "\n";
  out += "# fixedpoint_class=" + std::string(to_string(r.fixedpoint_class)) + "\n";
  out += "side,source,cluster,q\n";
  auto emit = [&](const char* side, const Encoder& e) {
    for (std::size_t s = 0; s < e.card_source(); ++s)
      for (std::size_t t = 0; t < e.card_t(); ++t)
        out += std::string(side) + "," + std::to_string(s) + "," + std::to_string(t) + "," + fmt(e(s, t)) + "\n";
  };
  emit("x", r.enc_x);
  if (r.enc_y) emit("y", *r.enc_y);
  return out;
}

inline json bound_config_to_json(const BoundConfig& c) {
  return {{"n", c.n},           {"delta1", c.delta1},   {"card_x", c.card_x},
          {"card_y", c.card_y}, {"card_tx", c.card_tx}, {"card_ty", c.card_ty},
          {"alpha_x", c.alpha_x}, {"alpha_y", c.alpha_y}, {"beta", c.beta},
          {"union_correction", c.union_correction}};
}

inline json bias_prediction_to_json(const BiasPrediction& b) {
  return {{"I_alpha_x", b.i_alpha_x}, {"I_alpha_y", b.i_alpha_y}, {"I_txty", b.i_txty},
          {"I_txy", b.i_txy},         {"I_tyx", b.i_tyx},         {"units", "1/(2N), E[estimate - truth] = -coef/(2N)"}};
}

inline json mse_prediction_to_json(const MsePrediction& m) {
  return {{"I_x_tx", m.i_x_tx}, {"I_y_ty", m.i_y_ty}, {"I_txty", m.i_txty},
          {"I_txy", m.i_txy},   {"I_tyx", m.i_tyx},   {"units", "1/N"}};
}

inline json theory_report_to_json(const TheoryReport& r) {
  json j;
  j["config"] = bound_config_to_json(r.config);
  j["bias_form"] = to_string(r.bias_form);
  json terms = json::object();
  for (const auto& [name, t] : r.per_term)
    terms[name] = {{"deviation_bound", t.deviation_bound}, {"bias_bound", t.bias_bound}, {"total_bound", t.total_bound}};
  j["per_term"] = std::move(terms);
  j["loss_bound_gsib"] = r.loss_bound_gsib;
  j["loss_bound_parallel_gib"] = r.loss_bound_parallel_gib;
  j["loss_bias_bound_gsib"] = r.loss_bias_gsib;
  j["loss_bias_bound_parallel_gib"] = r.loss_bias_parallel_gib;
  j["bias_prediction"] = r.bias_prediction ? bias_prediction_to_json(*r.bias_prediction) : json(nullptr);
  j["mse_prediction"] = r.mse_prediction ? mse_prediction_to_json(*r.mse_prediction) : json(nullptr);
  j["assumptions"] = "encoders held fixed; bias and MSE predictions are leading order in 1/N";
  return j;
}

/// One flat header line and one value line.
inline std::string theory_report_to_csv(const TheoryReport& r) {
  std::vector<std::pair<std::string, std::string>> cols = {
      {"n", std::to_string(r.config.n)},          {"delta1", fmt(r.config.delta1)},
      {"card_x", std::to_string(r.config.card_x)}, {"card_y", std::to_string(r.config.card_y)},
      {"card_tx", std::to_string(r.config.card_tx)}, {"card_ty", std::to_string(r.config.card_ty)},
      {"alpha_x", fmt(r.config.alpha_x)},         {"alpha_y", fmt(r.config.alpha_y)},
      {"beta", fmt(r.config.beta)},               {"bias_form", to_string(r.bias_form)}};
  for (const auto& [name, t] : r.per_term) {
    cols.emplace_back(name + "_deviation", fmt(t.deviation_bound));
    cols.emplace_back(name + "_bias", fmt(t.bias_bound));
    cols.emplace_back(name + "_total", fmt(t.total_bound));
  }
  cols.emplace_back("loss_bound_gsib", fmt(r.loss_bound_gsib));
  cols.emplace_back("loss_bound_parallel_gib", fmt(r.loss_bound_parallel_gib));
  cols.emplace_back("loss_bias_bound_gsib", fmt(r.loss_bias_gsib));
  cols.emplace_back("loss_bias_bound_parallel_gib", fmt(r.loss_bias_parallel_gib));
  if (r.bias_prediction) {
    const auto& b = *r.bias_prediction;
    for (const auto& [k, v] : std::vector<std::pair<std::string, double>>{
             {"I_alpha_x", b.i_alpha_x}, {"I_alpha_y", b.i_alpha_y}, {"I_txty", b.i_txty}, {"I_txy", b.i_txy}, {"I_tyx", b.i_tyx}})
      cols.emplace_back("bias_coef_" + k, fmt(v));
  }
  if (r.mse_prediction) {
    const auto& m = *r.mse_prediction;
    for (const auto& [k, v] : std::vector<std::pair<std::string, double>>{
             {"I_x_tx", m.i_x_tx}, {"I_y_ty", m.i_y_ty}, {"I_txty", m.i_txty}, {"I_txy", m.i_txy}, {"I_tyx", m.i_tyx}})
      cols.emplace_back("mse_n_" + k, fmt(v));
  }
  std::string head, vals;
  for (std::size_t i = 0; i < cols.size(); ++i) {
    head += (i ? "," : "") + cols[i].first;
    vals += (i ? "," : "") + cols[i].second;
  }
  return head + "\n" + vals + "\n";
}

inline json term_stats_to_json(const TermStats& s) {
  return {{"bias", s.mean_error},
          {"rms", s.rms_error},
          {"variance", s.variance},
          {"bias_se", s.std_error_of_mean},
          {"bound_deviation", s.deviation_bound},
          {"bound_bias", s.bias_bound},
          {"violations", s.violations},
          {"max_abs_deviation", s.max_abs_deviation}};
}

inline json summary_to_json(const ExperimentSummary& s) {
  json j;
  j["n"] = s.n;
  j["trials"] = s.trials;
  j["master_seed"] = s.master_seed;
  json truth = json::object();
  for (std::size_t k = 0; k < kNumSummaryTerms; ++k) truth[kSummaryTermNames[k]] = s.truth[k];
  j["truth"] = std::move(truth);
  json terms = json::object();
  for (const auto& [name, st] : s.per_term) terms[name] = term_stats_to_json(st);
  j["per_term"] = std::move(terms);
  j["theory"] = theory_report_to_json(s.theory);
  return j;
}

inline const char* const kSweepCsvHeader = "config_id,n,trials,term,bias,bias_se,rms,bound_deviation,bound_bias,violations\n";

inline std::string summary_csv_rows(const std::string& config_id, const ExperimentSummary& s) {
  std::string out;
  for (const auto* name : kSummaryTermNames) {
    const auto& st = s.per_term.at(name);
    out += config_id + "," + std::to_string(s.n) + "," + std::to_string(s.trials) + "," + name + "," +
           fmt(st.mean_error) + "," + fmt(st.std_error_of_mean) + "," + fmt(st.rms_error) + "," +
           fmt(st.deviation_bound) + "," + fmt(st.bias_bound) + "," + std::to_string(st.violations) + "\n";
  }
  return out;
}

inline json comparison_to_json(const ComparisonRecord& r) {
  return {{"measured_bias_gsib", number(r.measured_bias_gsib)},
          {"measured_bias_gib_pair", number(r.measured_bias_gib_pair)},
          {"measured_ratio", number(r.measured_ratio)},
          {"predicted_bias_gsib", number(r.predicted_bias_gsib)},
          {"predicted_bias_gib_pair", number(r.predicted_bias_gib_pair)},
          {"predicted_ratio", number(r.predicted_ratio)},
          {"bound_bias_gsib", number(r.bound_bias_gsib)},
          {"bound_bias_gib_pair", number(r.bound_bias_gib_pair)},
          {"bound_ratio", number(r.bound_ratio)},
          {"all_converged", r.all_converged},
          {"gsib", solver_result_to_json(r.gsib)},
          {"gib_x", solver_result_to_json(r.gib_x)},
          {"gib_y", solver_result_to_json(r.gib_y)},
          {"summary_gsib", summary_to_json(r.summary_gsib)},
          {"summary_gib_pair", summary_to_json(r.summary_gib_pair)}};
}

inline std::string comparison_to_csv(const ComparisonRecord& r) {
  std::string out =
      "measured_bias_gsib,measured_bias_gib_pair,measured_ratio,predicted_bias_gsib,predicted_bias_gib_pair,"
      "predicted_ratio,bound_bias_gsib,bound_bias_gib_pair,bound_ratio,all_converged\n";
  out += fmt(r.measured_bias_gsib) + "," + fmt(r.measured_bias_gib_pair) + "," + fmt(r.measured_ratio) + "," +
         fmt(r.predicted_bias_gsib) + "," + fmt(r.predicted_bias_gib_pair) + "," + fmt(r.predicted_ratio) + "," +
         fmt(r.bound_bias_gsib) + "," + fmt(r.bound_bias_gib_pair) + "," + fmt(r.bound_ratio) + "," +
         (r.all_converged ? "true" : "false") + "\n";
  out += "\n" + std::string(kSweepCsvHeader);
  out += summary_csv_rows("gsib", r.summary_gsib);
  out += summary_csv_rows("gib_pair", r.summary_gib_pair);
  return out;
}

}  // namespace blab::io
