#pragma once

// Monte Carlo harness for plug-in bottleneck losses with frozen encoders.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "blab/bottleneck.hpp"
#include "blab/rng.hpp"
#include "blab/solve.hpp"
#include "blab/theory.hpp"

namespace blab {

// ---------------------------------------------------------------------------
// Ground-truth generators

enum class GeneratorKind { planted_blocks, dirichlet_random, noisy_channel };

inline const char* to_string(GeneratorKind k) {
  switch (k) {
    case GeneratorKind::planted_blocks: return "planted_blocks";
    case GeneratorKind::dirichlet_random: return "dirichlet_random";
    case GeneratorKind::noisy_channel: return "noisy_channel";
  }
  return "?";
}

inline GeneratorKind generator_kind_from_string(const std::string& s) {
  if (s == "planted_blocks") return GeneratorKind::planted_blocks;
  if (s == "dirichlet_random") return GeneratorKind::dirichlet_random;
  if (s == "noisy_channel") return GeneratorKind::noisy_channel;
  throw ValidationError("unknown generator kind '" + s + "'");
}

inline constexpr double kMaxConcentration = 1e6;

struct GeneratorSpec {
  GeneratorKind kind = GeneratorKind::planted_blocks;
  std::size_t card_x = 4;
  std::size_t card_y = 4;
  std::size_t k_blocks = 2;
  double noise_eps = 0.0;
  double concentration = 1.0;  // capped at kMaxConcentration
  std::uint64_t seed = 0;

  void validate() const {
    if (card_x < 1 || card_y < 1) throw ValidationError("generator: card_x, card_y must be >= 1");
    if (!(noise_eps >= 0.0 && noise_eps <= 0.5)) throw ValidationError("generator: noise_eps out of [0,0.5]");
    if (kind == GeneratorKind::planted_blocks && (k_blocks < 1 || k_blocks > std::min(card_x, card_y)))
      throw ValidationError("generator: k_blocks must be in [1, min(card_x, card_y)]");
    if (kind == GeneratorKind::dirichlet_random && !(concentration > 0.0))
      throw ValidationError("generator: concentration must be > 0");
  }
};

/// Block index of symbol s when n symbols are cut into k blocks of n/k, the
/// last block taking the remainder.
inline std::size_t block_of(std::size_t s, std::size_t n, std::size_t k) {
  return std::min(s / (n / k), k - 1);
}

/// planted_blocks: mass 1 - eps spread evenly over in-block cells, eps evenly
/// over off-block cells. dirichlet_random: one symmetric Dirichlet draw over
/// all cells. noisy_channel: uniform X, Y = X mod |Y| kept with probability
/// 1 - eps and shifted cyclically by one otherwise.
inline JointDistribution generate(const GeneratorSpec& spec) {
  spec.validate();
  const std::size_t nx = spec.card_x, ny = spec.card_y;
  Matrix w(nx, ny, 0.0);
  switch (spec.kind) {
    case GeneratorKind::planted_blocks: {
      std::size_t in = 0;
      for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y)
          if (block_of(x, nx, spec.k_blocks) == block_of(y, ny, spec.k_blocks)) ++in;
      const std::size_t off = nx * ny - in;
      const double in_mass = off == 0 ? 1.0 : 1.0 - spec.noise_eps;
      for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y)
          w(x, y) = block_of(x, nx, spec.k_blocks) == block_of(y, ny, spec.k_blocks)
                        ? in_mass / static_cast<double>(in)
                        : spec.noise_eps / static_cast<double>(off);
      break;
    }
    case GeneratorKind::dirichlet_random: {
      Rng rng(spec.seed);
      std::gamma_distribution<double> gamma(std::min(spec.concentration, kMaxConcentration), 1.0);
      for (double& v : w.flat()) v = gamma(rng.engine());
      break;
    }
    case GeneratorKind::noisy_channel: {
      const double px = 1.0 / static_cast<double>(nx);
      for (std::size_t x = 0; x < nx; ++x) {
        w(x, x % ny) += px * (1.0 - spec.noise_eps);
        w(x, (x + 1) % ny) += px * spec.noise_eps;
      }
      break;
    }
  }
  return JointDistribution::from_weights(std::move(w));
}

// ---------------------------------------------------------------------------
// Trials

inline constexpr std::size_t kNumSummaryTerms = 7;
inline const char* const kSummaryTermNames[kNumSummaryTerms] = {"I_alpha_x", "I_alpha_y", "I_txty", "I_txy",
                                                                 "I_tyx", "L_gsib", "L_gib_pair"};

/// Signed errors (estimate minus truth) of one trial, in kSummaryTermNames order.
struct TrialResult {
  std::size_t trial_index = 0;
  std::array<double, kNumSummaryTerms> error{};

  double per_term_error(std::size_t i) const { return error.at(i); }
  double loss_error_gsib() const { return error[5]; }
  double loss_error_gib_pair() const { return error[6]; }
};

struct TermStats {
  double mean_error = 0.0;          // bias
  double rms_error = 0.0;
  double variance = 0.0;            // (1/T) sum (e - mean)^2
  double std_error_of_mean = 0.0;   // sample std / sqrt(T)
  double deviation_bound = 0.0;     // McDiarmid term used in the audit
  double bias_bound = 0.0;
  std::size_t violations = 0;       // trials with |e - mean| > deviation_bound
  double max_abs_deviation = 0.0;
};

struct RunOptions {
  unsigned threads = 1;  // 0: hardware concurrency
  double delta1 = 0.05;
  BiasForm bias_form = BiasForm::log;
  bool keep_trials = false;
};

struct ExperimentSummary {
  std::uint64_t n = 0;
  std::size_t trials = 0;
  std::uint64_t master_seed = 0;
  double alpha_x = 1.0, alpha_y = 1.0, beta = 1.0;
  std::array<double, kNumSummaryTerms> truth{};
  std::map<std::string, TermStats> per_term;
  TheoryReport theory;
  std::vector<TrialResult> trial_results;  // filled only with keep_trials

  std::map<std::string, std::size_t> bound_violations() const {
    std::map<std::string, std::size_t> v;
    for (const auto& [k, s] : per_term) v[k] = s.violations;
    return v;
  }
};

namespace detail {

// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    comp_ += std::abs(sum_) >= std::abs(v) ? (sum_ - t) + v : (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0, comp_ = 0.0;
};

inline double entropy_of(const std::vector<double>& p) { return entropy_unchecked(p); }

// Evaluates every plug-in term from a sparse sample. Equivalent to
// evaluate_terms(plugin_estimate(counts), ...) but costs O(N |T_X| |T_Y|)
// instead of O(|X| |Y|) per trial.
class PluginEvaluator {
 public:
  PluginEvaluator(const JointDistribution& joint, const Encoder& enc_x, const Encoder& enc_y)
      : nx_(joint.card_x()), ny_(joint.card_y()), enc_x_(enc_x), enc_y_(enc_y) {
    if (enc_x.card_source() != nx_ || enc_y.card_source() != ny_)
      throw DimensionMismatch("PluginEvaluator: encoder source cardinality");
    hx_.resize(nx_);
    hy_.resize(ny_);
    for (std::size_t x = 0; x < nx_; ++x) hx_[x] = entropy_unchecked(enc_x.cond().row(x));
    for (std::size_t y = 0; y < ny_; ++y) hy_[y] = entropy_unchecked(enc_y.cond().row(y));
    constant_x_ = constant_rows(enc_x);
    constant_y_ = constant_rows(enc_y);
  }

  struct Cell {
    std::size_t x, y;
    std::uint64_t count;
  };

  LossTerms evaluate(const std::vector<Cell>& cells, std::uint64_t n) {
    const std::size_t tx = enc_x_.card_t(), ty = enc_y_.card_t();
    const double inv_n = 1.0 / static_cast<double>(n);
    p_tx_.assign(tx, 0.0);
    p_ty_.assign(ty, 0.0);
    p_txty_.assign(tx * ty, 0.0);
    px_.assign(nx_, 0.0);
    py_.assign(ny_, 0.0);
    p_txy_.assign(tx * ny_, 0.0);
    p_tyx_.assign(ty * nx_, 0.0);
    LossTerms t;
    for (const auto& c : cells) {
      const double p = static_cast<double>(c.count) * inv_n;
      px_[c.x] += p;
      py_[c.y] += p;
      const auto qx = enc_x_.cond().row(c.x);
      const auto qy = enc_y_.cond().row(c.y);
      for (std::size_t a = 0; a < tx; ++a) {
        if (qx[a] == 0.0) continue;
        const double pa = p * qx[a];
        p_txy_[a * ny_ + c.y] += pa;
        for (std::size_t b = 0; b < ty; ++b) p_txty_[a * ty + b] += pa * qy[b];
      }
      for (std::size_t b = 0; b < ty; ++b) p_tyx_[b * nx_ + c.x] += p * qy[b];
    }
    double hcx = 0.0, hcy = 0.0;
    // With identical rows p(t) is that row whatever the sample, so H(T) and
    // H(T|X) come out bit-equal instead of differing by rounding.
    if (constant_x_) {
      hcx = hx_[0];
      for (std::size_t a = 0; a < tx; ++a) p_tx_[a] = enc_x_(0, a);
    } else {
      for (std::size_t x = 0; x < nx_; ++x) {
        hcx += px_[x] * hx_[x];
        for (std::size_t a = 0; a < tx; ++a) p_tx_[a] += px_[x] * enc_x_(x, a);
      }
    }
    if (constant_y_) {
      hcy = hy_[0];
      for (std::size_t b = 0; b < ty; ++b) p_ty_[b] = enc_y_(0, b);
    } else {
      for (std::size_t y = 0; y < ny_; ++y) {
        hcy += py_[y] * hy_[y];
        for (std::size_t b = 0; b < ty; ++b) p_ty_[b] += py_[y] * enc_y_(y, b);
      }
    }
    t.h_tx = entropy_of(p_tx_);
    t.h_ty = entropy_of(p_ty_);
    t.h_tx_given_x = hcx;
    t.h_ty_given_y = hcy;
    t.i_txty = std::max(0.0, t.h_tx + t.h_ty - entropy_of(p_txty_));
    t.i_txy = std::max(0.0, t.h_tx + entropy_of(py_) - entropy_of(p_txy_));
    t.i_tyx = std::max(0.0, t.h_ty + entropy_of(px_) - entropy_of(p_tyx_));
    return t;
  }

 private:
  static bool constant_rows(const Encoder& e) {
    for (std::size_t s = 1; s < e.card_source(); ++s)
      if (!std::equal(e.cond().row(s).begin(), e.cond().row(s).end(), e.cond().row(0).begin())) return false;
    return true;
  }

  std::size_t nx_, ny_;
  bool constant_x_ = false, constant_y_ = false;
  const Encoder& enc_x_;
  const Encoder& enc_y_;
  std::vector<double> hx_, hy_;
  std::vector<double> p_tx_, p_ty_, p_txty_, px_, py_, p_txy_, p_tyx_;
};

inline std::array<double, kNumSummaryTerms> term_vector(const LossTerms& t, double ax, double ay, double beta) {
  return {t.i_alpha_x(ax), t.i_alpha_y(ay), t.i_txty, t.i_txy, t.i_tyx, t.gsib(ax, ay, beta),
          t.gib_pair(ax, ay, beta)};
}

inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : hw;
}

// Runs body(i) for i in [0, count) on `threads` workers; body must only touch
// slot i of any shared output.
template <typename Body>
void parallel_for(std::size_t count, unsigned threads, Body&& body) {
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
  if (threads == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i, 0u);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) body(i, w);
    });
  for (auto& th : pool) th.join();
}

inline BoundConfig bound_config_for(const JointDistribution& joint, const Encoder& ex, const Encoder& ey,
                                    const BottleneckParams& params, std::uint64_t n, double delta1) {
  BoundConfig c;
  c.n = n;
  c.delta1 = delta1;
  c.card_x = joint.card_x();
  c.card_y = joint.card_y();
  c.card_tx = ex.card_t();
  c.card_ty = ey.card_t();
  c.alpha_x = params.alpha_x;
  c.alpha_y = params.alpha_y;
  c.beta = params.beta;
  return c;
}

}  // namespace detail

/// Draws `trials` samples of size n (trial i seeded by derive_seed(master_seed, i),
/// identical to sample_counts with that seed), evaluates every plug-in term
/// with the encoders frozen, and aggregates signed errors in trial order.
inline ExperimentSummary run_trials(const JointDistribution& joint, const Encoder& enc_x, const Encoder& enc_y,
                                    const BottleneckParams& params, std::uint64_t n, std::size_t trials,
                                    std::uint64_t master_seed, const RunOptions& opts = {}) {
  if (n < 2) throw ValidationError("run_trials: n must be >= 2");
  if (trials < 2) throw ValidationError("run_trials: trials must be >= 2");
  const double ax = params.alpha_x, ay = params.alpha_y, beta = params.beta;

  ExperimentSummary s;
  s.n = n;
  s.trials = trials;
  s.master_seed = master_seed;
  s.alpha_x = ax;
  s.alpha_y = ay;
  s.beta = beta;
  s.truth = detail::term_vector(evaluate_terms(joint, enc_x, enc_y), ax, ay, beta);
  s.theory = make_report(detail::bound_config_for(joint, enc_x, enc_y, params, n, opts.delta1), joint, enc_x,
                         enc_y, opts.bias_form);

  const MultinomialSampler sampler(joint);
  const std::size_t cells = joint.card_x() * joint.card_y();
  const std::size_t ny = joint.card_y();
  std::vector<std::array<double, kNumSummaryTerms>> errors(trials);

  const unsigned threads = detail::resolve_threads(opts.threads);
  struct Workspace {
    std::vector<std::uint64_t> counts;
    std::vector<std::size_t> touched;
    std::vector<detail::PluginEvaluator::Cell> sparse;
    std::optional<detail::PluginEvaluator> eval;
  };
  std::vector<Workspace> ws(threads);
  for (auto& w : ws) {
    w.counts.assign(cells, 0);
    w.eval.emplace(joint, enc_x, enc_y);
  }

  detail::parallel_for(trials, threads, [&](std::size_t i, unsigned worker) {
    Workspace& w = ws[worker];
    sampler.sample_cells(n, derive_seed(master_seed, i), [&](std::size_t cell) {
      if (w.counts[cell]++ == 0) w.touched.push_back(cell);
    });
    std::sort(w.touched.begin(), w.touched.end());
    w.sparse.clear();
    for (std::size_t c : w.touched) {
      w.sparse.push_back({c / ny, c % ny, w.counts[c]});
      w.counts[c] = 0;
    }
    w.touched.clear();
    const auto est = detail::term_vector(w.eval->evaluate(w.sparse, n), ax, ay, beta);
    for (std::size_t k = 0; k < kNumSummaryTerms; ++k) errors[i][k] = est[k] - s.truth[k];
  });

  const auto& th = s.theory;
  const std::array<double, kNumSummaryTerms> dev_bounds = {
      th.per_term.at("I_alpha_x").deviation_bound, th.per_term.at("I_alpha_y").deviation_bound,
      th.per_term.at("I_txty").deviation_bound,    th.per_term.at("I_txy").deviation_bound,
      th.per_term.at("I_tyx").deviation_bound,     th.loss_bound_gsib - th.loss_bias_gsib,
      th.loss_bound_parallel_gib - th.loss_bias_parallel_gib};
  const std::array<double, kNumSummaryTerms> bias_bounds = {
      th.per_term.at("I_alpha_x").bias_bound, th.per_term.at("I_alpha_y").bias_bound,
      th.per_term.at("I_txty").bias_bound,    th.per_term.at("I_txy").bias_bound,
      th.per_term.at("I_tyx").bias_bound,     th.loss_bias_gsib,
      th.loss_bias_parallel_gib};

  const double t = static_cast<double>(trials);
  for (std::size_t k = 0; k < kNumSummaryTerms; ++k) {
    detail::CompensatedSum sum, sq;
    for (const auto& e : errors) {
      sum.add(e[k]);
      sq.add(e[k] * e[k]);
    }
    TermStats st;
    st.mean_error = sum.value() / t;
    detail::CompensatedSum centered;
    for (const auto& e : errors) centered.add((e[k] - st.mean_error) * (e[k] - st.mean_error));
    st.variance = centered.value() / t;
    st.rms_error = std::sqrt(sq.value() / t);
    st.std_error_of_mean = std::sqrt(centered.value() / (t - 1.0)) / std::sqrt(t);
    st.deviation_bound = dev_bounds[k];
    st.bias_bound = bias_bounds[k];
    for (const auto& e : errors) {
      const double d = std::abs(e[k] - st.mean_error);
      st.max_abs_deviation = std::max(st.max_abs_deviation, d);
      if (d > st.deviation_bound) ++st.violations;
    }
    s.per_term[kSummaryTermNames[k]] = st;
  }

  if (opts.keep_trials) {
    s.trial_results.resize(trials);
    for (std::size_t i = 0; i < trials; ++i) s.trial_results[i] = {i, errors[i]};
  }
  return s;
}

// ---------------------------------------------------------------------------
// GSIB versus two independent GIBs

struct ComparisonRecord {
  JointDistribution joint = JointDistribution(Matrix{{1.0}});
  SolverResult gsib;
  SolverResult gib_x;  // X -> T_X, relevance Y
  SolverResult gib_y;  // Y -> T_Y, relevance X
  bool all_converged = false;
  ExperimentSummary summary_gsib;      // trials with the GSIB encoders
  ExperimentSummary summary_gib_pair;  // trials with the two GIB encoders
  double measured_bias_gsib = 0.0;      // |mean(L̂_GSIB - L_GSIB)|
  double measured_bias_gib_pair = 0.0;
  double measured_ratio = 0.0;          // gib_pair / gsib
  double predicted_bias_gsib = 0.0;     // |leading-order prediction|
  double predicted_bias_gib_pair = 0.0;
  double predicted_ratio = 0.0;
  double bound_bias_gsib = 0.0;         // bias components of the loss bounds
  double bound_bias_gib_pair = 0.0;
  double bound_ratio = 0.0;
};

/// Signed leading-order E[L̂ - L] for the two losses from the bias coefficients.
inline double predicted_loss_bias_gsib(const BiasPrediction& b, double beta, std::uint64_t n) {
  return (-b.i_alpha_x - b.i_alpha_y + beta * b.i_txty) / (2.0 * static_cast<double>(n));
}

inline double predicted_loss_bias_gib_pair(const BiasPrediction& b, double beta, std::uint64_t n) {
  return (-b.i_alpha_x - b.i_alpha_y + beta * (b.i_txy + b.i_tyx)) / (2.0 * static_cast<double>(n));
}

/// Solves GSIB (deterministic when both alphas are below 1e-6) and the two
/// GIBs on the generated joint, freezes the encoders and measures loss bias.
inline ComparisonRecord compare_ssdr_isdr(const GeneratorSpec& spec, std::size_t card_tx, std::size_t card_ty,
                                          const BottleneckParams& params, std::uint64_t n, std::size_t trials,
                                          std::uint64_t master_seed, const RunOptions& opts = {}) {
  ComparisonRecord r;
  r.joint = generate(spec);
  const bool hard = params.alpha_x < kDeterministicAlpha && params.alpha_y < kDeterministicAlpha;
  r.gsib = solve(r.joint, hard ? SolverKind::dsib : SolverKind::gsib, card_tx, card_ty, params,
                 derive_seed(master_seed, 0x5001));
  BottleneckParams px = params, py = params;
  py.alpha_x = params.alpha_y;
  r.gib_x = solve(r.joint, params.alpha_x < kDeterministicAlpha ? SolverKind::dib : SolverKind::gib, card_tx,
                  std::nullopt, px, derive_seed(master_seed, 0x5002));
  const JointDistribution jt = r.joint.transposed();
  r.gib_y = solve(jt, params.alpha_y < kDeterministicAlpha ? SolverKind::dib : SolverKind::gib, card_ty,
                  std::nullopt, py, derive_seed(master_seed, 0x5003));
  r.all_converged = r.gsib.converged && r.gib_x.converged && r.gib_y.converged;

  // Both methods see the same samples.
  const std::uint64_t trial_seed = derive_seed(master_seed, 0x7001);
  r.summary_gsib = run_trials(r.joint, r.gsib.enc_x, *r.gsib.enc_y, params, n, trials, trial_seed, opts);
  r.summary_gib_pair = run_trials(r.joint, r.gib_x.enc_x, r.gib_y.enc_x, params, n, trials, trial_seed, opts);
  r.measured_bias_gsib = std::abs(r.summary_gsib.per_term.at("L_gsib").mean_error);
  r.measured_bias_gib_pair = std::abs(r.summary_gib_pair.per_term.at("L_gib_pair").mean_error);
  r.measured_ratio = r.measured_bias_gib_pair / r.measured_bias_gsib;
  r.predicted_bias_gsib = std::abs(predicted_loss_bias_gsib(*r.summary_gsib.theory.bias_prediction, params.beta, n));
  r.predicted_bias_gib_pair =
      std::abs(predicted_loss_bias_gib_pair(*r.summary_gib_pair.theory.bias_prediction, params.beta, n));
  r.predicted_ratio = r.predicted_bias_gib_pair / r.predicted_bias_gsib;
  const BoundConfig bc = detail::bound_config_for(r.joint, r.gsib.enc_x, *r.gsib.enc_y, params, n, opts.delta1);
  r.bound_bias_gsib = loss_bias_bound_gsib(bc, BiasForm::linear);
  r.bound_bias_gib_pair = loss_bias_bound_parallel_gib(bc, BiasForm::linear);
  r.bound_ratio = r.bound_bias_gib_pair / r.bound_bias_gsib;
  return r;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepSpec {
  GeneratorSpec generator;
  SolverKind kind = SolverKind::gsib;
  BottleneckParams params;
  std::vector<std::uint64_t> n_grid;
  std::vector<std::pair<std::size_t, std::size_t>> card_grid;  // (|T_X|, |T_Y|)
  std::size_t trials = 1000;
  std::uint64_t master_seed = 0;
  bool compare = false;                 // run compare_ssdr_isdr per point
  double max_total_draws = 2e10;        // trials * n summed over the grid
};

struct SweepPoint {
  std::string config_id;
  std::uint64_t n = 0;
  std::size_t card_tx = 0, card_ty = 0;
  std::optional<ExperimentSummary> summary;
  std::string error;  // non-empty when the point failed
};

/// Runs every (cardinality, n) point with seeds derived from the point index;
/// failures are recorded and the sweep continues.
inline std::vector<SweepPoint> sweep(const SweepSpec& spec, const RunOptions& opts = {}) {
  double draws = 0.0;
  for (auto n : spec.n_grid) draws += static_cast<double>(n) * static_cast<double>(spec.trials);
  draws *= static_cast<double>(std::max<std::size_t>(spec.card_grid.size(), 1)) * (spec.compare ? 2.0 : 1.0);
  if (draws > spec.max_total_draws) throw ValidationError("sweep: budget exceeded (trials * n over the grid)");

  std::vector<SweepPoint> out;
  if (spec.n_grid.empty()) return out;
  const JointDistribution joint = generate(spec.generator);
  auto cards = spec.card_grid;
  if (cards.empty()) cards.push_back({2, 2});

  std::uint64_t point = 0;
  for (std::size_t ci = 0; ci < cards.size(); ++ci) {
    const auto [tx, ty] = cards[ci];
    std::optional<SolverResult> solved;
    std::string solve_error;
    if (!spec.compare) {
      try {
        const bool sym = is_symmetric(spec.kind);
        solved = solve(joint, spec.kind, tx, sym ? std::optional<std::size_t>(ty) : std::nullopt, spec.params,
                       derive_seed(spec.master_seed, 0x10000 + ci));
      } catch (const std::exception& e) {
        solve_error = e.what();
      }
    }
    for (auto n : spec.n_grid) {
      const std::uint64_t seed = derive_seed(spec.master_seed, point++);
      const std::string id = "c" + std::to_string(ci);
      auto record = [&](const std::string& cid, auto&& fn) {
        SweepPoint p{cid, n, tx, ty, std::nullopt, {}};
        try {
          p.summary = fn();
        } catch (const std::exception& e) {
          p.error = e.what();
        }
        out.push_back(std::move(p));
      };
      if (spec.compare) {
        std::optional<ComparisonRecord> rec;
        std::string err;
        try {
          rec = compare_ssdr_isdr(spec.generator, tx, ty, spec.params, n, spec.trials, seed, opts);
        } catch (const std::exception& e) {
          err = e.what();
        }
        for (int side = 0; side < 2; ++side)
          record(id + (side == 0 ? "_gsib" : "_gib"), [&]() -> ExperimentSummary {
            if (!rec) throw NumericalError(err);
            return side == 0 ? rec->summary_gsib : rec->summary_gib_pair;
          });
      } else {
        record(id, [&]() -> ExperimentSummary {
          if (!solved) throw NumericalError(solve_error);
          const Encoder ey = solved->enc_y ? *solved->enc_y : Encoder::uniform(joint.card_y(), 1);
          return run_trials(joint, solved->enc_x, ey, spec.params, n, spec.trials, seed, opts);
        });
      }
    }
  }
  return out;
}

/// Least-squares slope of log|y| against log x.
inline double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ValidationError("loglog_slope: need >= 2 paired points");
  double mx = 0, my = 0;
  const double k = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / k;
    my += std::log(std::abs(y[i])) / k;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxy += dx * (std::log(std::abs(y[i])) - my);
    sxx += dx * dx;
  }
  return sxy / sxx;
}

}  // namespace blab
