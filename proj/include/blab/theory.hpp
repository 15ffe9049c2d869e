#pragma once

// Closed-form finite-sample error analysis of plug-in bottleneck losses.
//
// Bounds: McDiarmid deviation terms ~ sqrt(log(2/delta)/(2N)) plus
// entropy-bias terms ~ (K-1)/N, per loss term and combined for GSIB versus
// two independent GIBs. Predictions: exact leading-order biases (units of
// 1/(2N)) and variances (units of 1/N) of the plug-in informations with the
// encoders held fixed.
//
// Everything is in nats.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <string>

#include "blab/bottleneck.hpp"
#include "blab/errors.hpp"
#include "blab/prob.hpp"

namespace blab {

// (K-1)/N as printed in the combined loss bounds, or the tighter log(1+(K-1)/N).
enum class BiasForm { linear, log };

inline const char* to_string(BiasForm f) { return f == BiasForm::linear ? "linear" : "log"; }

struct BoundConfig {
  std::uint64_t n = 1000;
  double delta1 = 0.05;
  std::size_t card_x = 2, card_y = 2, card_tx = 2, card_ty = 2;
  double alpha_x = 1.0, alpha_y = 1.0;
  double beta = 1.0;
  // Split delta1 over the k McDiarmid invocations of a combined loss bound
  // (delta1/3 for GSIB, delta1/4 for the GIB pair). Off by default.
  bool union_correction = false;

  void validate() const {
    if (n < 2) throw ValidationError("bound.n must be >= 2");
    if (!(delta1 > 0.0 && delta1 <= 2.0)) throw ValidationError("bound.delta1 out of (0,2]");
    if (card_x < 1 || card_y < 1 || card_tx < 1 || card_ty < 1)
      throw ValidationError("bound cardinalities must be >= 1");
    if (!(alpha_x >= 0.0 && alpha_x <= 1.0)) throw ValidationError("alpha_x out of [0,1]");
    if (!(alpha_y >= 0.0 && alpha_y <= 1.0)) throw ValidationError("alpha_y out of [0,1]");
    if (!(beta >= 0.0)) throw ValidationError("beta must be >= 0");
  }
};

/// sqrt(log(2/delta)) / sqrt(2N); zero at delta = 2.
inline double mcdiarmid_factor(std::uint64_t n, double delta1) {
  const double l = std::log(2.0 / delta1);
  return std::sqrt(std::max(0.0, l)) / std::sqrt(2.0 * static_cast<double>(n));
}

inline double deviation_bound_compression(std::size_t card_t, double alpha, const BoundConfig& cfg) {
  const double ln_n = std::log(static_cast<double>(cfg.n));
  const double k = static_cast<double>(card_t);
  return (k * ln_n + alpha * std::log(k)) * mcdiarmid_factor(cfg.n, cfg.delta1);
}

inline double deviation_bound_txty(const BoundConfig& cfg) {
  const double tx = static_cast<double>(cfg.card_tx), ty = static_cast<double>(cfg.card_ty);
  return ((tx + 1.0) * (ty + 1.0) - 1.0) * std::log(static_cast<double>(cfg.n)) *
         mcdiarmid_factor(cfg.n, cfg.delta1);
}

inline double deviation_bound_relevance_gib(std::size_t card_t, const BoundConfig& cfg) {
  return (3.0 * static_cast<double>(card_t) + 2.0) * std::log(static_cast<double>(cfg.n)) *
         mcdiarmid_factor(cfg.n, cfg.delta1);
}

/// |H - E Ĥ| <= log(1 + (K-1)/N).
inline double bias_bound_entropy(std::size_t card, std::uint64_t n) {
  if (n < 1) throw ValidationError("bias_bound_entropy: n must be >= 1");
  return std::log1p((static_cast<double>(card) - 1.0) / static_cast<double>(n));
}

inline double bias_bound_entropy_linear(std::size_t card, std::uint64_t n) {
  if (n < 1) throw ValidationError("bias_bound_entropy_linear: n must be >= 1");
  return (static_cast<double>(card) - 1.0) / static_cast<double>(n);
}

inline double bias_bound_entropy(std::size_t card, std::uint64_t n, BiasForm form) {
  return form == BiasForm::log ? bias_bound_entropy(card, n) : bias_bound_entropy_linear(card, n);
}

/// Bias of Î(T_X;T_Y): entropy biases of T_X, T_Y and (T_X,T_Y). The linear
/// form equals ((|T_X|+1)(|T_Y|+1) - 4)/N.
inline double bias_bound_txty(const BoundConfig& cfg, BiasForm form) {
  return bias_bound_entropy(cfg.card_tx, cfg.n, form) + bias_bound_entropy(cfg.card_ty, cfg.n, form) +
         bias_bound_entropy(cfg.card_tx * cfg.card_ty, cfg.n, form);
}

/// Bias of Î(T;R) for a one-sided bottleneck with relevance alphabet R.
/// The linear form equals ((|T|+1)(|R|+1) - 4)/N.
inline double bias_bound_relevance_gib(std::size_t card_t, std::size_t card_relevance, std::uint64_t n,
                                       BiasForm form) {
  return bias_bound_entropy(card_t, n, form) + bias_bound_entropy(card_relevance, n, form) +
         bias_bound_entropy(card_t * card_relevance, n, form);
}

namespace detail {

inline BoundConfig with_delta(const BoundConfig& cfg, double k) {
  BoundConfig c = cfg;
  if (cfg.union_correction) c.delta1 = cfg.delta1 / k;
  return c;
}

}  // namespace detail

/// Deviation part of the GSIB loss error bound.
inline double loss_deviation_bound_gsib(const BoundConfig& cfg) {
  const BoundConfig c = detail::with_delta(cfg, 3.0);
  return deviation_bound_compression(c.card_tx, c.alpha_x, c) +
         deviation_bound_compression(c.card_ty, c.alpha_y, c) + c.beta * deviation_bound_txty(c);
}

inline double loss_bias_bound_gsib(const BoundConfig& cfg, BiasForm form = BiasForm::linear) {
  return bias_bound_entropy(cfg.card_tx, cfg.n, form) + bias_bound_entropy(cfg.card_ty, cfg.n, form) +
         cfg.beta * bias_bound_txty(cfg, form);
}

/// |L_GSIB - L̂_GSIB| bound; does not depend on |X| or |Y|.
inline double loss_error_bound_gsib(const BoundConfig& cfg, BiasForm form = BiasForm::linear) {
  cfg.validate();
  return loss_deviation_bound_gsib(cfg) + loss_bias_bound_gsib(cfg, form);
}

inline double loss_deviation_bound_parallel_gib(const BoundConfig& cfg) {
  const BoundConfig c = detail::with_delta(cfg, 4.0);
  return deviation_bound_compression(c.card_tx, c.alpha_x, c) +
         deviation_bound_compression(c.card_ty, c.alpha_y, c) +
         c.beta * (deviation_bound_relevance_gib(c.card_tx, c) + deviation_bound_relevance_gib(c.card_ty, c));
}

inline double loss_bias_bound_parallel_gib(const BoundConfig& cfg, BiasForm form = BiasForm::linear) {
  return bias_bound_entropy(cfg.card_tx, cfg.n, form) + bias_bound_entropy(cfg.card_ty, cfg.n, form) +
         cfg.beta * (bias_bound_relevance_gib(cfg.card_tx, cfg.card_y, cfg.n, form) +
                     bias_bound_relevance_gib(cfg.card_ty, cfg.card_x, cfg.n, form));
}

/// Error bound for the sum of two GIBs (X -> T_X | Y, Y -> T_Y | X).
inline double loss_error_bound_parallel_gib(const BoundConfig& cfg, BiasForm form = BiasForm::linear) {
  cfg.validate();
  return loss_deviation_bound_parallel_gib(cfg) + loss_bias_bound_parallel_gib(cfg, form);
}

// ---------------------------------------------------------------------------
// Exact leading-order predictions for fixed encoders

/// Bias coefficients: E[Î - I] = -coef / (2N) to leading order, for each term.
/// For deterministic encoders i_txty and i_txy are negative (upward bias of
/// plug-in information); the compression coefficients are always >= 0.
struct BiasPrediction {
  double i_alpha_x = 0, i_alpha_y = 0, i_txty = 0, i_txy = 0, i_tyx = 0;
  // Building blocks: sum_a sum_z K(a|z) p(z|a) - 1 for each induced variable.
  double c_tx = 0, c_ty = 0, c_txty = 0, c_tx_y = 0, c_ty_x = 0;
};

/// Variances times N: N * E[(Î - E Î)^2] to leading order.
struct MsePrediction {
  double i_x_tx = 0, i_y_ty = 0, i_txty = 0, i_txy = 0, i_tyx = 0;
};

namespace detail {

inline std::size_t support_size(const Vector& p) {
  return static_cast<std::size_t>(std::count_if(p.begin(), p.end(), [](double v) { return v > 0.0; }));
}

// sum_t sum_s q(t|s)^2 p(s) / p(t) - 1 over t with p(t) > 0.
inline double collision_coefficient(const Vector& p_source, const Encoder& enc) {
  double total = 0.0;
  for (std::size_t t = 0; t < enc.card_t(); ++t) {
    double pt = 0.0, sq = 0.0;
    for (std::size_t s = 0; s < p_source.size(); ++s) {
      pt += enc(s, t) * p_source[s];
      sq += enc(s, t) * enc(s, t) * p_source[s];
    }
    if (pt > kEmptyMass) total += sq / pt;
  }
  return total - 1.0;
}

// Same for (T, R) where T encodes the row variable and R is the column variable.
inline double collision_coefficient_relevance(const JointDistribution& joint, const Encoder& enc) {
  double total = 0.0;
  for (std::size_t t = 0; t < enc.card_t(); ++t)
    for (std::size_t y = 0; y < joint.card_y(); ++y) {
      double pty = 0.0, sq = 0.0;
      for (std::size_t x = 0; x < joint.card_x(); ++x) {
        const double q = enc(x, t);
        pty += q * joint(x, y);
        sq += q * q * joint(x, y);
      }
      if (pty > kEmptyMass) total += sq / pty;
    }
  return total - 1.0;
}

inline double collision_coefficient_pair(const JointDistribution& joint, const Encoder& ex, const Encoder& ey,
                                         const Matrix& p_txty) {
  // sum_{a,b} [sum_{x,y} qx(a|x)^2 qy(b|y)^2 p(x,y)] / p(a,b)
  const std::size_t nx = joint.card_x(), ny = joint.card_y(), tx = ex.card_t(), ty = ey.card_t();
  Matrix sq_x_b(nx, ty, 0.0);  // sum_y qy(b|y)^2 p(x,y)
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) {
      const double p = joint(x, y);
      if (p == 0.0) continue;
      for (std::size_t b = 0; b < ty; ++b) sq_x_b(x, b) += ey(y, b) * ey(y, b) * p;
    }
  double total = 0.0;
  for (std::size_t a = 0; a < tx; ++a)
    for (std::size_t b = 0; b < ty; ++b) {
      if (p_txty(a, b) <= kEmptyMass) continue;
      double sq = 0.0;
      for (std::size_t x = 0; x < nx; ++x) sq += ex(x, a) * ex(x, a) * sq_x_b(x, b);
      total += sq / p_txty(a, b);
    }
  return total - 1.0;
}

}  // namespace detail

inline BiasPrediction bias_prediction_exact(const JointDistribution& joint, const Encoder& enc_x,
                                            const Encoder& enc_y) {
  const auto ind = induce(joint, enc_x, enc_y);
  BiasPrediction b;
  b.c_tx = detail::collision_coefficient(joint.marginal_x(), enc_x);
  b.c_ty = detail::collision_coefficient(joint.marginal_y(), enc_y);
  b.c_txty = detail::collision_coefficient_pair(joint, enc_x, enc_y, ind.p_txty);
  const auto jt = joint.transposed();
  b.c_tx_y = detail::collision_coefficient_relevance(joint, enc_x);
  b.c_ty_x = detail::collision_coefficient_relevance(jt, enc_y);

  const double c_x = static_cast<double>(detail::support_size(joint.marginal_x())) - 1.0;
  const double c_y = static_cast<double>(detail::support_size(joint.marginal_y())) - 1.0;
  b.i_alpha_x = b.c_tx;
  b.i_alpha_y = b.c_ty;
  b.i_txty = b.c_tx + b.c_ty - b.c_txty;
  b.i_txy = b.c_tx + c_y - b.c_tx_y;
  b.i_tyx = b.c_ty + c_x - b.c_ty_x;
  return b;
}

inline MsePrediction mse_prediction(const JointDistribution& joint, const Encoder& enc_x, const Encoder& enc_y) {
  const auto ind = induce(joint, enc_x, enc_y);
  const auto& px = joint.marginal_x();
  const auto& py = joint.marginal_y();
  const std::size_t nx = joint.card_x(), ny = joint.card_y(), tx = enc_x.card_t(), ty = enc_y.card_t();
  MsePrediction m;

  // One-sided: influence D(s) = sum_t q(t|s) ln(q(t|s)/p(t)).
  auto compression = [](const Vector& p_source, const Encoder& enc, const Vector& p_t) {
    double second = 0.0, first = 0.0;
    for (std::size_t s = 0; s < p_source.size(); ++s) {
      if (p_source[s] <= 0.0) continue;
      double d = 0.0;
      for (std::size_t t = 0; t < enc.card_t(); ++t) {
        const double q = enc(s, t);
        if (q > 0.0) d += q * std::log(q / p_t[t]);
      }
      first += p_source[s] * d;
      second += p_source[s] * d * d;
    }
    return second - first * first;
  };
  m.i_x_tx = compression(px, enc_x, ind.p_tx);
  m.i_y_ty = compression(py, enc_y, ind.p_ty);

  // Pair: G(x,y) = sum_{a,b} qx(a|x) qy(b|y) ln(p(a,b)/(p(a)p(b))).
  Matrix log_ratio(tx, ty, 0.0);
  for (std::size_t a = 0; a < tx; ++a)
    for (std::size_t b = 0; b < ty; ++b)
      if (ind.p_txty(a, b) > 0.0) log_ratio(a, b) = std::log(ind.p_txty(a, b) / (ind.p_tx[a] * ind.p_ty[b]));
  {
    double first = 0.0, second = 0.0;
    for (std::size_t x = 0; x < nx; ++x)
      for (std::size_t y = 0; y < ny; ++y) {
        const double p = joint(x, y);
        if (p == 0.0) continue;
        double g = 0.0;
        for (std::size_t a = 0; a < tx; ++a) {
          if (enc_x(x, a) == 0.0) continue;
          for (std::size_t b = 0; b < ty; ++b) g += enc_x(x, a) * enc_y(y, b) * log_ratio(a, b);
        }
        first += p * g;
        second += p * g * g;
      }
    m.i_txty = second - first * first;
  }

  // Relevance: G(x,y) = sum_t q(t|x) ln(p(t,y)/(p(t)p(y))), p(t,y) = p(t|y)p(y).
  auto relevance = [&](const Encoder& enc, const Matrix& p_t_given_r, const Vector& p_t, bool rows_are_x) {
    const std::size_t nt = enc.card_t();
    const std::size_t n_src = rows_are_x ? nx : ny, n_rel = rows_are_x ? ny : nx;
    double first = 0.0, second = 0.0;
    for (std::size_t s = 0; s < n_src; ++s)
      for (std::size_t r = 0; r < n_rel; ++r) {
        const double p = rows_are_x ? joint(s, r) : joint(r, s);
        if (p == 0.0) continue;
        double g = 0.0;
        for (std::size_t t = 0; t < nt; ++t) {
          const double q = enc(s, t);
          if (q == 0.0) continue;
          g += q * std::log(p_t_given_r(r, t) / p_t[t]);
        }
        first += p * g;
        second += p * g * g;
      }
    return second - first * first;
  };
  m.i_txy = relevance(enc_x, ind.p_tx_given_y, ind.p_tx, true);
  m.i_tyx = relevance(enc_y, ind.p_ty_given_x, ind.p_ty, false);
  return m;
}

/// (ln min(a, b))^2: N * MSE upper bound for a winner-take-all encoder.
inline double mse_bound_wta(std::size_t card_a, std::size_t card_b) {
  const double l = std::log(static_cast<double>(std::min(card_a, card_b)));
  return l * l;
}

/// First-order change of I(A;B) under a perturbation dp of the joint table:
/// sum dp(a,b) (ln p(a,b)/(p(a)p(b)) - 1), cells with p(a,b) = 0 skipped.
inline double mi_linearization(const Matrix& pab, const Matrix& dp) {
  if (pab.rows() != dp.rows() || pab.cols() != dp.cols()) throw DimensionMismatch("mi_linearization");
  Vector pa(pab.rows(), 0.0), pb(pab.cols(), 0.0);
  for (std::size_t a = 0; a < pab.rows(); ++a)
    for (std::size_t b = 0; b < pab.cols(); ++b) {
      pa[a] += pab(a, b);
      pb[b] += pab(a, b);
    }
  double d = 0.0;
  for (std::size_t a = 0; a < pab.rows(); ++a)
    for (std::size_t b = 0; b < pab.cols(); ++b)
      if (pab(a, b) > 0.0) d += dp(a, b) * (std::log(pab(a, b) / (pa[a] * pb[b])) - 1.0);
  return d;
}

// ---------------------------------------------------------------------------
// Report

struct TermBound {
  double deviation_bound = 0.0;
  double bias_bound = 0.0;
  double total_bound = 0.0;
};

inline const char* const kTermNames[] = {"I_alpha_x", "I_alpha_y", "I_txty", "I_txy", "I_tyx"};

struct TheoryReport {
  BoundConfig config;
  BiasForm bias_form = BiasForm::log;
  std::map<std::string, TermBound> per_term;
  double loss_bound_gsib = 0.0;
  double loss_bound_parallel_gib = 0.0;
  double loss_bias_gsib = 0.0;
  double loss_bias_parallel_gib = 0.0;
  std::optional<BiasPrediction> bias_prediction;
  std::optional<MsePrediction> mse_prediction;
};

/// Per-term and combined bounds. The combined losses weight the relevance
/// terms by beta, so loss_bound_* equals the weighted sum of per-term totals
/// (absent union correction).
inline TheoryReport make_report(const BoundConfig& cfg, BiasForm form = BiasForm::log) {
  cfg.validate();
  TheoryReport r;
  r.config = cfg;
  r.bias_form = form;
  auto put = [&](const char* name, double dev, double bias) { r.per_term[name] = {dev, bias, dev + bias}; };
  put("I_alpha_x", deviation_bound_compression(cfg.card_tx, cfg.alpha_x, cfg), bias_bound_entropy(cfg.card_tx, cfg.n, form));
  put("I_alpha_y", deviation_bound_compression(cfg.card_ty, cfg.alpha_y, cfg), bias_bound_entropy(cfg.card_ty, cfg.n, form));
  put("I_txty", deviation_bound_txty(cfg), bias_bound_txty(cfg, form));
  put("I_txy", deviation_bound_relevance_gib(cfg.card_tx, cfg),
      bias_bound_relevance_gib(cfg.card_tx, cfg.card_y, cfg.n, form));
  put("I_tyx", deviation_bound_relevance_gib(cfg.card_ty, cfg),
      bias_bound_relevance_gib(cfg.card_ty, cfg.card_x, cfg.n, form));
  r.loss_bias_gsib = loss_bias_bound_gsib(cfg, form);
  r.loss_bias_parallel_gib = loss_bias_bound_parallel_gib(cfg, form);
  r.loss_bound_gsib = loss_error_bound_gsib(cfg, form);
  r.loss_bound_parallel_gib = loss_error_bound_parallel_gib(cfg, form);
  return r;
}

/// Report with exact bias/MSE predictions for a concrete configuration.
inline TheoryReport make_report(const BoundConfig& cfg, const JointDistribution& joint, const Encoder& enc_x,
                                const Encoder& enc_y, BiasForm form = BiasForm::log) {
  TheoryReport r = make_report(cfg, form);
  r.bias_prediction = bias_prediction_exact(joint, enc_x, enc_y);
  r.mse_prediction = mse_prediction(joint, enc_x, enc_y);
  return r;
}

}  // namespace blab
