#pragma once

// Bottleneck objectives and their self-consistent update equations.
//
//   GIB : H(T_X) - a_x H(T_X|X) - b I(T_X;Y)
//   GSIB: H(T_X) - a_x H(T_X|X) + H(T_Y) - a_y H(T_Y|Y) - b I(T_X;T_Y)
//
// IB and SIB are a = 1; DIB and DSIB are the a -> 0 limits, where the
// exponential-family update becomes an argmax.

#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "blab/errors.hpp"
#include "blab/prob.hpp"

namespace blab {

enum class SolverKind { gib, gsib, dib, dsib };
enum class UpdateMode { synchronous, alternating };

// Below this alpha the soft update exp(score / alpha) overflows; callers must
// use the deterministic (argmax) update.
inline constexpr double kDeterministicAlpha = 1e-6;

struct BottleneckParams {
  double beta = 1.0;
  double alpha_x = 1.0;
  double alpha_y = 1.0;
  int max_iters = 2000;
  double conv_tol = 1e-8;
  int n_restarts = 8;
  double init_perturbation = 0.1;
  std::vector<double> anneal_schedule;  // empty: no annealing
  UpdateMode mode = UpdateMode::synchronous;

  void validate() const {
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ValidationError("beta must be finite and >= 0");
    if (!(alpha_x >= 0.0 && alpha_x <= 1.0)) throw ValidationError("alpha_x out of [0,1]");
    if (!(alpha_y >= 0.0 && alpha_y <= 1.0)) throw ValidationError("alpha_y out of [0,1]");
    if (max_iters < 1) throw ValidationError("max_iters must be >= 1");
    if (!(conv_tol > 0.0)) throw ValidationError("conv_tol must be > 0");
    if (n_restarts < 1) throw ValidationError("n_restarts must be >= 1");
    if (!(init_perturbation > 0.0 && init_perturbation < 1.0))
      throw ValidationError("init_perturbation out of (0,1)");
    for (double b : anneal_schedule)
      if (!(b >= 0.0) || !std::isfinite(b)) throw ValidationError("anneal_schedule entries must be >= 0");
  }

  /// The standard three-stage warm-start schedule ending at `beta`.
  static std::vector<double> default_anneal_schedule(double beta) {
    return {0.1 * beta, 0.5 * beta, beta};
  }
};

inline const char* to_string(SolverKind k) {
  switch (k) {
    case SolverKind::gib: return "gib";
    case SolverKind::gsib: return "gsib";
    case SolverKind::dib: return "dib";
    case SolverKind::dsib: return "dsib";
  }
  return "?";
}

inline SolverKind solver_kind_from_string(const std::string& s) {
  if (s == "gib") return SolverKind::gib;
  if (s == "gsib") return SolverKind::gsib;
  if (s == "dib") return SolverKind::dib;
  if (s == "dsib") return SolverKind::dsib;
  throw ValidationError("unknown solver kind '" + s + "'");
}

inline bool is_symmetric(SolverKind k) noexcept {
  return k == SolverKind::gsib || k == SolverKind::dsib;
}

// ---------------------------------------------------------------------------
// Loss terms

/// Every entropy/information appearing in the GSIB loss and in the pair of
/// GIB losses (X -> T_X with relevance Y, Y -> T_Y with relevance X).
struct LossTerms {
  double h_tx = 0, h_tx_given_x = 0;
  double h_ty = 0, h_ty_given_y = 0;
  double i_txty = 0;  // I(T_X;T_Y)
  double i_txy = 0;   // I(T_X;Y)
  double i_tyx = 0;   // I(T_Y;X)

  double i_alpha_x(double alpha) const noexcept { return h_tx - alpha * h_tx_given_x; }
  double i_alpha_y(double alpha) const noexcept { return h_ty - alpha * h_ty_given_y; }

  double gsib(double alpha_x, double alpha_y, double beta) const noexcept {
    return i_alpha_x(alpha_x) + i_alpha_y(alpha_y) - beta * i_txty;
  }
  double gib_pair(double alpha_x, double alpha_y, double beta) const noexcept {
    return i_alpha_x(alpha_x) - beta * i_txy + i_alpha_y(alpha_y) - beta * i_tyx;
  }
};

inline LossTerms evaluate_terms(const JointDistribution& joint, const Encoder& enc_x,
                                const Encoder& enc_y) {
  const auto ind = induce(joint, enc_x, enc_y);
  const auto& px = joint.marginal_x();
  const auto& py = joint.marginal_y();
  LossTerms t;
  t.h_tx = detail::entropy_unchecked(ind.p_tx);
  t.h_ty = detail::entropy_unchecked(ind.p_ty);
  t.h_tx_given_x = conditional_entropy(px, enc_x);
  t.h_ty_given_y = conditional_entropy(py, enc_y);
  t.i_txty = mutual_information(ind.p_txty);

  // I(T_X;Y) = H(T_X) + H(Y) - H(T_X,Y) with p(t_x,y) = p(t_x|y) p(y).
  double h_txy = 0.0;
  for (std::size_t y = 0; y < py.size(); ++y)
    for (double c : ind.p_tx_given_y.row(y)) h_txy -= detail::xlogx(c * py[y]);
  t.i_txy = std::max(0.0, t.h_tx + detail::entropy_unchecked(py) - h_txy);
  double h_tyx = 0.0;
  for (std::size_t x = 0; x < px.size(); ++x)
    for (double c : ind.p_ty_given_x.row(x)) h_tyx -= detail::xlogx(c * px[x]);
  t.i_tyx = std::max(0.0, t.h_ty + detail::entropy_unchecked(px) - h_tyx);
  return t;
}

inline double gsib_loss(const JointDistribution& joint, const Encoder& enc_x, const Encoder& enc_y,
                        const BottleneckParams& params) {
  return evaluate_terms(joint, enc_x, enc_y).gsib(params.alpha_x, params.alpha_y, params.beta);
}

/// One-sided loss H(T) - a H(T|X) - b I(T;Y), using params.alpha_x.
inline double gib_loss(const JointDistribution& joint, const Encoder& enc,
                       const BottleneckParams& params) {
  const auto rel = induce_relevance(joint, enc);
  const double h_t = detail::entropy_unchecked(rel.p_t);
  const double h_t_given_x = conditional_entropy(joint.marginal_x(), enc);
  const double i_ty = mutual_information(rel.p_ty);
  return h_t - params.alpha_x * h_t_given_x - params.beta * i_ty;
}

/// Sum of the two independent GIB losses (X -> T_X | Y and Y -> T_Y | X).
inline double parallel_gib_loss(const JointDistribution& joint, const Encoder& enc_x,
                                const Encoder& enc_y, const BottleneckParams& params) {
  return evaluate_terms(joint, enc_x, enc_y).gib_pair(params.alpha_x, params.alpha_y, params.beta);
}

/// All rows identical within 1e-9.
inline bool is_trivial(const Encoder& enc) {
  const auto& m = enc.cond();
  for (std::size_t s = 1; s < m.rows(); ++s)
    for (std::size_t t = 0; t < m.cols(); ++t)
      if (std::abs(m(s, t) - m(0, t)) > 1e-9) return false;
  return true;
}

// ---------------------------------------------------------------------------
// Updates

namespace detail {

// score(s, t) = ln p(t) - beta * D(p(.|s) || p(.|t)). Empty clusters and
// infinite divergences score -inf. Zero-mass sources keep only ln p(t): they
// carry no weight in any expectation.
inline Matrix bottleneck_scores(const Matrix& cond_given_source, const std::vector<std::uint8_t>& degenerate_source,
                                const Vector& p_t, const Matrix& cond_given_t, double beta) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  Matrix scores(cond_given_source.rows(), p_t.size());
  for (std::size_t s = 0; s < scores.rows(); ++s)
    for (std::size_t t = 0; t < p_t.size(); ++t) {
      if (p_t[t] < kEmptyMass) {
        scores(s, t) = kNegInf;
        continue;
      }
      double score = std::log(p_t[t]);
      if (!degenerate_source[s] && beta > 0.0) {
        const double kl = kl_divergence(cond_given_source.row(s), cond_given_t.row(t));
        score = std::isinf(kl) ? kNegInf : score - beta * kl;
      }
      scores(s, t) = score;
    }
  return scores;
}

inline Encoder soft_assign(const Matrix& scores, double alpha) {
  Matrix w(scores.rows(), scores.cols(), 0.0);
  for (std::size_t s = 0; s < scores.rows(); ++s) {
    auto row = scores.row(s);
    double top = -std::numeric_limits<double>::infinity();
    for (double v : row) top = std::max(top, v);
    if (std::isinf(top))
      throw NumericalError("update row " + std::to_string(s) +
                           " is all-zero: every cluster is empty or has infinite divergence");
    for (std::size_t t = 0; t < row.size(); ++t)
      w(s, t) = std::isinf(row[t]) ? 0.0 : std::exp((row[t] - top) / alpha);
  }
  return Encoder::from_weights(std::move(w));
}

// Argmax per row, lowest index on ties.
inline Encoder hard_assign(const Matrix& scores) {
  std::vector<std::size_t> labels(scores.rows());
  for (std::size_t s = 0; s < scores.rows(); ++s) {
    auto row = scores.row(s);
    std::size_t best = row.size();
    for (std::size_t t = 0; t < row.size(); ++t) {
      if (std::isinf(row[t]) && row[t] < 0) continue;
      if (best == row.size() || row[t] > row[best]) best = t;
    }
    if (best == row.size())
      throw NumericalError("deterministic update row " + std::to_string(s) +
                           " has no admissible cluster (all scores -inf)");
    labels[s] = best;
  }
  return Encoder::deterministic(labels, scores.cols());
}

inline Encoder assign(const Matrix& scores, double alpha) {
  return alpha < kDeterministicAlpha ? hard_assign(scores) : soft_assign(scores, alpha);
}

inline Matrix gsib_scores_x(const InducedDistributions& ind, double beta) {
  return bottleneck_scores(ind.p_ty_given_x, ind.degenerate_x, ind.p_tx, ind.p_ty_given_tx, beta);
}

inline Matrix gsib_scores_y(const InducedDistributions& ind, double beta) {
  return bottleneck_scores(ind.p_tx_given_y, ind.degenerate_y, ind.p_ty, ind.p_tx_given_ty, beta);
}

inline Matrix gib_scores(const JointDistribution& joint, const Encoder& enc, double beta) {
  const auto rel = induce_relevance(joint, enc);
  std::vector<std::uint8_t> degenerate;
  const Matrix p_y_given_x = conditional_rows(joint.probs(), joint.marginal_x(), degenerate, "p(y|x)");
  return bottleneck_scores(p_y_given_x, degenerate, rel.p_t, rel.p_y_given_t, beta);
}

// One sweep with per-side soft/hard rule chosen by each side's alpha.
inline std::pair<Encoder, Encoder> symmetric_sweep(const JointDistribution& joint, const Encoder& enc_x,
                                                   const Encoder& enc_y, double alpha_x, double alpha_y,
                                                   double beta, UpdateMode mode) {
  const auto ind = induce(joint, enc_x, enc_y);
  Encoder next_x = assign(gsib_scores_x(ind, beta), alpha_x);
  if (mode == UpdateMode::synchronous) return {std::move(next_x), assign(gsib_scores_y(ind, beta), alpha_y)};
  const auto ind2 = induce(joint, next_x, enc_y);
  Encoder next_y = assign(gsib_scores_y(ind2, beta), alpha_y);
  return {std::move(next_x), std::move(next_y)};
}

}  // namespace detail

/// One synchronous (or alternating, per params.mode) sweep of the GSIB
/// self-consistent equations. Requires both alphas >= kDeterministicAlpha.
inline std::pair<Encoder, Encoder> gsib_update(const JointDistribution& joint, const Encoder& enc_x,
                                               const Encoder& enc_y, const BottleneckParams& params) {
  if (params.alpha_x < kDeterministicAlpha || params.alpha_y < kDeterministicAlpha)
    throw ValidationError("gsib_update: alpha below 1e-6; use dsib_update for the deterministic limit");
  return detail::symmetric_sweep(joint, enc_x, enc_y, params.alpha_x, params.alpha_y, params.beta,
                                 params.mode);
}

/// Deterministic limit: each row becomes one-hot at the argmax score.
inline std::pair<Encoder, Encoder> dsib_update(const JointDistribution& joint, const Encoder& enc_x,
                                               const Encoder& enc_y, const BottleneckParams& params) {
  return detail::symmetric_sweep(joint, enc_x, enc_y, 0.0, 0.0, params.beta, params.mode);
}

inline Encoder gib_update(const JointDistribution& joint, const Encoder& enc_x,
                          const BottleneckParams& params) {
  if (enc_x.card_source() != joint.card_x()) throw DimensionMismatch("gib_update: encoder source cardinality");
  if (params.alpha_x < kDeterministicAlpha)
    throw ValidationError("gib_update: alpha below 1e-6; use dib_update for the deterministic limit");
  return detail::soft_assign(detail::gib_scores(joint, enc_x, params.beta), params.alpha_x);
}

inline Encoder dib_update(const JointDistribution& joint, const Encoder& enc_x,
                          const BottleneckParams& params) {
  if (enc_x.card_source() != joint.card_x()) throw DimensionMismatch("dib_update: encoder source cardinality");
  return detail::hard_assign(detail::gib_scores(joint, enc_x, params.beta));
}

}  // namespace blab
