#pragma once

// Run configuration, subcommand dispatch and reproducibility metadata for the
// `blab` command-line tool.

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "blab/io.hpp"

namespace blab::cli {

using json = nlohmann::json;

inline constexpr const char* kToolName = "blab";
inline constexpr const char* kVersion = "0.1.0";

enum class Command { solve, bounds, predict, experiment, compare, sweep };
enum class Format { json, csv };

inline const char* to_string(Command c) {
  switch (c) {
    case Command::solve: return "solve";
    case Command::bounds: return "bounds";
    case Command::predict: return "predict";
    case Command::experiment: return "experiment";
    case Command::compare: return "compare";
    case Command::sweep: return "sweep";
  }
  return "?";
}

inline Command command_from_string(const std::string& s) {
  for (auto c : {Command::solve, Command::bounds, Command::predict, Command::experiment, Command::compare,
                 Command::sweep})
    if (s == to_string(c)) return c;
  throw ValidationError("command: unknown '" + s + "'");
}

inline const char* to_string(Format f) { return f == Format::json ? "json" : "csv"; }

inline Format format_from_string(const std::string& s, const std::string& where = "format") {
  if (s == "json") return Format::json;
  if (s == "csv") return Format::csv;
  throw ValidationError(where + ": expected csv or json, got '" + s + "'");
}

struct ExperimentConfig {
  std::uint64_t n = 1000;
  std::size_t trials = 1000;
  std::vector<std::uint64_t> n_grid;
  std::vector<std::pair<std::size_t, std::size_t>> card_grid;
  bool compare = false;
  double max_total_draws = 2e10;
};

struct RunConfig {
  Command command = Command::solve;
  std::optional<std::string> input_path;
  std::optional<GeneratorSpec> generator;
  std::optional<std::string> encoder_path;

  SolverKind kind = SolverKind::gsib;
  std::size_t card_tx = 2, card_ty = 2;
  BottleneckParams solver;

  BoundConfig bound;
  BiasForm bias_form = BiasForm::log;
  ExperimentConfig experiment;

  std::string output_path;  // empty: stdout
  Format format = Format::json;
  std::uint64_t master_seed = 0;
  unsigned threads = 1;
  bool verify = false;

  bool needs_joint() const {
    return command == Command::solve || command == Command::predict || command == Command::experiment;
  }

  void validate() const {
    if (input_path && generator) throw ValidationError("input_path and generator are mutually exclusive");
    if (needs_joint() && !input_path && !generator)
      throw ValidationError(std::string(to_string(command)) + ": needs input_path or generator");
    if ((command == Command::compare || command == Command::sweep) && !generator)
      throw ValidationError(std::string(to_string(command)) + ": needs generator");
    if (generator) generator->validate();
    if (card_tx < 1 || card_ty < 1) throw ValidationError("solver: card_tx, card_ty must be >= 1");
    try {
      solver.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("solver: " + std::string(e.what()));
    }
    try {
      bound.validate();
    } catch (const ValidationError& e) {
      throw ValidationError("bound: " + std::string(e.what()));
    }
    if (experiment.n < 2) throw ValidationError("experiment.n must be >= 2");
    if (experiment.trials < 2) throw ValidationError("experiment.trials must be >= 2");
    for (auto n : experiment.n_grid)
      if (n < 2) throw ValidationError("experiment.n_grid entries must be >= 2");
    for (auto [tx, ty] : experiment.card_grid)
      if (tx < 1 || ty < 1) throw ValidationError("experiment.card_grid entries must be >= 1");
    if (!(experiment.max_total_draws > 0)) throw ValidationError("experiment.max_total_draws must be > 0");
  }
};

// ---------------------------------------------------------------------------
// Strict JSON reading

namespace detail {

inline void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ValidationError((path.empty() ? "config" : path) + ": expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, _] : j.items())
    if (!ok.count(key)) throw ValidationError((path.empty() ? "" : path + ".") + key + ": unknown key");
}

inline std::string field(const std::string& path, const char* key) {
  return path.empty() ? std::string(key) : path + "." + key;
}

inline void read(const json& j, const std::string& path, const char* key, double& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number()) throw ValidationError(field(path, key) + ": expected a number");
  out = j.at(key).get<double>();
}

template <typename U>
  requires std::is_unsigned_v<U>
inline void read(const json& j, const std::string& path, const char* key, U& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number_unsigned()) throw ValidationError(field(path, key) + ": expected a non-negative integer");
  out = j.at(key).get<U>();
}

inline void read(const json& j, const std::string& path, const char* key, int& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_number_integer()) throw ValidationError(field(path, key) + ": expected an integer");
  out = j.at(key).get<int>();
}

inline void read(const json& j, const std::string& path, const char* key, bool& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_boolean()) throw ValidationError(field(path, key) + ": expected true or false");
  out = j.at(key).get<bool>();
}

inline void read(const json& j, const std::string& path, const char* key, std::string& out) {
  if (!j.contains(key)) return;
  if (!j.at(key).is_string()) throw ValidationError(field(path, key) + ": expected a string");
  out = j.at(key).get<std::string>();
}

inline GeneratorSpec parse_generator(const json& j) {
  check_keys(j, "generator", {"kind", "card_x", "card_y", "k_blocks", "noise_eps", "concentration", "seed"});
  GeneratorSpec g;
  std::string kind = to_string(g.kind);
  read(j, "generator", "kind", kind);
  g.kind = generator_kind_from_string(kind);
  read(j, "generator", "card_x", g.card_x);
  read(j, "generator", "card_y", g.card_y);
  read(j, "generator", "k_blocks", g.k_blocks);
  read(j, "generator", "noise_eps", g.noise_eps);
  read(j, "generator", "concentration", g.concentration);
  read(j, "generator", "seed", g.seed);
  return g;
}

inline void parse_solver(const json& j, RunConfig& c) {
  check_keys(j, "solver",
             {"kind", "card_tx", "card_ty", "beta", "alpha_x", "alpha_y", "max_iters", "conv_tol", "n_restarts",
              "init_perturbation", "anneal_schedule", "update_mode"});
  std::string kind = to_string(c.kind);
  read(j, "solver", "kind", kind);
  c.kind = solver_kind_from_string(kind);
  read(j, "solver", "card_tx", c.card_tx);
  read(j, "solver", "card_ty", c.card_ty);
  auto& p = c.solver;
  read(j, "solver", "beta", p.beta);
  read(j, "solver", "alpha_x", p.alpha_x);
  read(j, "solver", "alpha_y", p.alpha_y);
  read(j, "solver", "max_iters", p.max_iters);
  read(j, "solver", "conv_tol", p.conv_tol);
  read(j, "solver", "n_restarts", p.n_restarts);
  read(j, "solver", "init_perturbation", p.init_perturbation);
  if (j.contains("anneal_schedule")) {
    const auto& a = j.at("anneal_schedule");
    if (a.is_string() && a.get<std::string>() == "default") {
      p.anneal_schedule = BottleneckParams::default_anneal_schedule(p.beta);
    } else if (a.is_array()) {
      p.anneal_schedule.clear();
      for (const auto& v : a) {
        if (!v.is_number()) throw ValidationError("solver.anneal_schedule: expected numbers");
        p.anneal_schedule.push_back(v.get<double>());
      }
    } else {
      throw ValidationError("solver.anneal_schedule: expected an array or \"default\"");
    }
  }
  std::string mode = p.mode == UpdateMode::synchronous ? "synchronous" : "alternating";
  read(j, "solver", "update_mode", mode);
  if (mode == "synchronous") p.mode = UpdateMode::synchronous;
  else if (mode == "alternating") p.mode = UpdateMode::alternating;
  else throw ValidationError("solver.update_mode: expected synchronous or alternating");
}

inline void parse_bound(const json& j, RunConfig& c) {
  check_keys(j, "bound",
             {"n", "delta1", "card_x", "card_y", "card_tx", "card_ty", "alpha_x", "alpha_y", "beta",
              "union_correction", "bias_form"});
  auto& b = c.bound;
  read(j, "bound", "n", b.n);
  read(j, "bound", "delta1", b.delta1);
  read(j, "bound", "card_x", b.card_x);
  read(j, "bound", "card_y", b.card_y);
  read(j, "bound", "card_tx", b.card_tx);
  read(j, "bound", "card_ty", b.card_ty);
  read(j, "bound", "alpha_x", b.alpha_x);
  read(j, "bound", "alpha_y", b.alpha_y);
  read(j, "bound", "beta", b.beta);
  read(j, "bound", "union_correction", b.union_correction);
  std::string form = blab::to_string(c.bias_form);
  read(j, "bound", "bias_form", form);
  if (form == "log") c.bias_form = BiasForm::log;
  else if (form == "linear") c.bias_form = BiasForm::linear;
  else throw ValidationError("bound.bias_form: expected log or linear");
}

inline void parse_experiment(const json& j, RunConfig& c) {
  check_keys(j, "experiment", {"n", "trials", "n_grid", "card_grid", "compare", "max_total_draws"});
  auto& e = c.experiment;
  read(j, "experiment", "n", e.n);
  read(j, "experiment", "trials", e.trials);
  read(j, "experiment", "compare", e.compare);
  read(j, "experiment", "max_total_draws", e.max_total_draws);
  if (j.contains("n_grid")) {
    try {
      e.n_grid = j.at("n_grid").get<std::vector<std::uint64_t>>();
    } catch (const json::exception&) {
      throw ValidationError("experiment.n_grid: expected an array of non-negative integers");
    }
  }
  if (j.contains("card_grid")) {
    try {
      e.card_grid.clear();
      for (const auto& pair : j.at("card_grid")) {
        const auto v = pair.get<std::vector<std::size_t>>();
        if (v.size() != 2) throw ValidationError("");
        e.card_grid.emplace_back(v[0], v[1]);
      }
    } catch (const std::exception&) {
      throw ValidationError("experiment.card_grid: expected an array of [card_tx, card_ty] pairs");
    }
  }
}

}  // namespace detail

/// Builds a validated RunConfig from a JSON document. Absent keys keep their
/// defaults; unknown keys are rejected with their field path.
inline RunConfig parse_config(const json& j, Command command) {
  detail::check_keys(j, "", {"command", "input_path", "generator", "encoder_path", "solver", "bound", "experiment",
                             "output_path", "format", "master_seed"});
  RunConfig c;
  c.command = command;
  if (j.contains("command")) {
    std::string name;
    detail::read(j, "", "command", name);
    if (command_from_string(name) != command)
      throw ValidationError("command: config says '" + name + "' but '" + to_string(command) + "' was requested");
  }
  if (j.contains("input_path")) {
    std::string p;
    detail::read(j, "", "input_path", p);
    c.input_path = p;
  }
  if (j.contains("encoder_path")) {
    std::string p;
    detail::read(j, "", "encoder_path", p);
    c.encoder_path = p;
  }
  if (j.contains("generator")) c.generator = detail::parse_generator(j.at("generator"));
  if (j.contains("solver")) detail::parse_solver(j.at("solver"), c);
  if (j.contains("bound")) detail::parse_bound(j.at("bound"), c);
  if (j.contains("experiment")) detail::parse_experiment(j.at("experiment"), c);
  detail::read(j, "", "output_path", c.output_path);
  std::string fmt = to_string(c.format);
  detail::read(j, "", "format", fmt);
  c.format = format_from_string(fmt);
  detail::read(j, "", "master_seed", c.master_seed);
  return c;
}

/// The effective configuration with every default filled in. output_path,
/// threads and verify are left out: they do not change the result.
inline json canonical_config(const RunConfig& c) {
  json j;
  j["command"] = to_string(c.command);
  j["input_path"] = c.input_path ? json(*c.input_path) : json(nullptr);
  j["encoder_path"] = c.encoder_path ? json(*c.encoder_path) : json(nullptr);
  if (c.generator) {
    const auto& g = *c.generator;
    j["generator"] = {{"kind", blab::to_string(g.kind)}, {"card_x", g.card_x}, {"card_y", g.card_y},
                      {"k_blocks", g.k_blocks}, {"noise_eps", g.noise_eps}, {"concentration", g.concentration},
                      {"seed", g.seed}};
  } else {
    j["generator"] = nullptr;
  }
  const auto& p = c.solver;
  j["solver"] = {{"kind", blab::to_string(c.kind)},
                 {"card_tx", c.card_tx},
                 {"card_ty", c.card_ty},
                 {"beta", p.beta},
                 {"alpha_x", p.alpha_x},
                 {"alpha_y", p.alpha_y},
                 {"max_iters", p.max_iters},
                 {"conv_tol", p.conv_tol},
                 {"n_restarts", p.n_restarts},
                 {"init_perturbation", p.init_perturbation},
                 {"anneal_schedule", p.anneal_schedule},
                 {"update_mode", p.mode == UpdateMode::synchronous ? "synchronous" : "alternating"}};
  j["bound"] = io::bound_config_to_json(c.bound);
  j["bound"]["bias_form"] = blab::to_string(c.bias_form);
  json cards = json::array();
  for (auto [tx, ty] : c.experiment.card_grid) cards.push_back({tx, ty});
  j["experiment"] = {{"n", c.experiment.n},
                     {"trials", c.experiment.trials},
                     {"n_grid", c.experiment.n_grid},
                     {"card_grid", cards},
                     {"compare", c.experiment.compare},
                     {"max_total_draws", c.experiment.max_total_draws}};
  j["format"] = to_string(c.format);
  j["master_seed"] = c.master_seed;
  return j;
}

/// 64-bit FNV-1a of the canonical configuration, as 16 hex digits.
inline std::string config_hash(const RunConfig& c) {
  const std::string text = canonical_config(c).dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// Dispatch

namespace detail {

inline JointDistribution load_or_generate(const RunConfig& c) {
  if (c.input_path) return io::load_joint(*c.input_path);
  return generate(*c.generator);
}

inline std::optional<std::size_t> card_ty_for(const RunConfig& c) {
  return is_symmetric(c.kind) ? std::optional<std::size_t>(c.card_ty) : std::nullopt;
}

// Encoders from encoder_path, or solved on the joint. One-sided solutions get
// a single-cluster Y encoder.
inline std::pair<Encoder, Encoder> obtain_encoders(const RunConfig& c, const JointDistribution& joint) {
  std::optional<Encoder> ex, ey;
  if (c.encoder_path) {
    std::tie(ex, ey) = io::load_encoders(*c.encoder_path);
  } else {
    auto r = solve(joint, c.kind, c.card_tx, card_ty_for(c), c.solver, derive_seed(c.master_seed, 0x5000));
    ex = std::move(r.enc_x);
    ey = std::move(r.enc_y);
  }
  if (!ey) ey = Encoder::uniform(joint.card_y(), 1);
  if (ex->card_source() != joint.card_x() || ey->card_source() != joint.card_y())
    throw DimensionMismatch("encoders do not match the joint's alphabets");
  return {std::move(*ex), std::move(*ey)};
}

inline RunOptions run_options(const RunConfig& c) {
  RunOptions o;
  o.threads = c.threads;
  o.delta1 = c.bound.delta1;
  o.bias_form = c.bias_form;
  return o;
}

inline BoundConfig concrete_bound(const RunConfig& c, const JointDistribution& joint, const Encoder& ex,
                                  const Encoder& ey, std::uint64_t n) {
  BoundConfig b = c.bound;
  b.n = n;
  b.card_x = joint.card_x();
  b.card_y = joint.card_y();
  b.card_tx = ex.card_t();
  b.card_ty = ey.card_t();
  b.alpha_x = c.solver.alpha_x;
  b.alpha_y = c.solver.alpha_y;
  b.beta = c.solver.beta;
  return b;
}

struct Rendered {
  json result;
  std::string csv;
};

inline Rendered sweep_output(const RunConfig& c) {
  SweepSpec s;
  s.generator = *c.generator;
  s.kind = c.kind;
  s.params = c.solver;
  s.n_grid = c.experiment.n_grid.empty() ? std::vector<std::uint64_t>{c.experiment.n} : c.experiment.n_grid;
  s.card_grid = c.experiment.card_grid;
  if (s.card_grid.empty()) s.card_grid.emplace_back(c.card_tx, c.card_ty);
  s.trials = c.experiment.trials;
  s.master_seed = c.master_seed;
  s.compare = c.experiment.compare;
  s.max_total_draws = c.experiment.max_total_draws;
  const auto points = sweep(s, run_options(c));

  Rendered out;
  out.result = json::array();
  std::string errors;
  std::string rows;
  for (const auto& p : points) {
    json jp = {{"config_id", p.config_id}, {"n", p.n}, {"card_tx", p.card_tx}, {"card_ty", p.card_ty}};
    if (p.summary) {
      jp["summary"] = io::summary_to_json(*p.summary);
      rows += io::summary_csv_rows(p.config_id, *p.summary);
    } else {
      jp["error"] = p.error;
      errors += "# error " + p.config_id + " n=" + std::to_string(p.n) + ": " + p.error + "\n";
    }
    out.result.push_back(std::move(jp));
  }
  out.csv = errors + io::kSweepCsvHeader + rows;
  return out;
}

inline Rendered execute(const RunConfig& c) {
  switch (c.command) {
    case Command::solve: {
      const auto joint = load_or_generate(c);
      const auto r = solve(joint, c.kind, c.card_tx, card_ty_for(c), c.solver, c.master_seed);
      return {io::solver_result_to_json(r), io::solver_result_to_csv(r)};
    }
    case Command::bounds: {
      const auto r = make_report(c.bound, c.bias_form);
      return {io::theory_report_to_json(r), io::theory_report_to_csv(r)};
    }
    case Command::predict: {
      const auto joint = load_or_generate(c);
      const auto [ex, ey] = obtain_encoders(c, joint);
      const auto r = make_report(concrete_bound(c, joint, ex, ey, c.bound.n), joint, ex, ey, c.bias_form);
      return {io::theory_report_to_json(r), io::theory_report_to_csv(r)};
    }
    case Command::experiment: {
      const auto joint = load_or_generate(c);
      const auto [ex, ey] = obtain_encoders(c, joint);
      const auto s =
          run_trials(joint, ex, ey, c.solver, c.experiment.n, c.experiment.trials, c.master_seed, run_options(c));
      return {io::summary_to_json(s), std::string(io::kSweepCsvHeader) + io::summary_csv_rows("c0", s)};
    }
    case Command::compare: {
      const auto r = compare_ssdr_isdr(*c.generator, c.card_tx, c.card_ty, c.solver, c.experiment.n,
                                       c.experiment.trials, c.master_seed, run_options(c));
      return {io::comparison_to_json(r), io::comparison_to_csv(r)};
    }
    case Command::sweep:
      return sweep_output(c);
  }
  throw ValidationError("command: unhandled");
}

}  // namespace detail

/// Runs the configured command and returns the complete output document,
/// metadata header included.
inline std::string render(const RunConfig& c) {
  c.validate();
  const auto out = detail::execute(c);
  const std::string hash = config_hash(c);
  if (c.format == Format::csv) {
    std::string head;
    head += "# tool=" + std::string(kToolName) + "\n";
    head += "# version=" + std::string(kVersion) + "\n";
    head += "# command=" + std::string(to_string(c.command)) + "\n";
    head += "# seed=" + std::to_string(c.master_seed) + "\n";
    head += "# config_hash=" + hash + "\n";
    return head + out.csv;
  }
  json doc;
  doc["meta"] = {{"tool", kToolName},
                 {"version", kVersion},
                 {"command", to_string(c.command)},
                 {"seed", c.master_seed},
                 {"config_hash", hash},
                 {"config", canonical_config(c)}};
  doc["result"] = out.result;
  return doc.dump(2) + "\n";
}

enum ExitCode : int { kOk = 0, kVerifyMismatch = 1, kValidation = 2, kNumerical = 3 };

}  // namespace blab::cli
