#pragma once

// Second-order analysis of trivial (data-independent) fixed points.
//
// At an encoder whose rows all equal A(t), the Hessian of the compression
// cost H(T) - a H(T|S) in the coordinates q(t|s) is
//
//   d2/dq(t|s)dq(t'|s') = delta(t,t') / A(t) * [a p(s) delta(s,s') - p(s) p(s')]
//
// and the relevance term -b I(T;Y) of the one-sided loss adds
//   -b delta(t,t') / A(t) * sum_y d(s,y) d(s',y) / p(y),  d = p(s,y) - p(s)p(y).
// For the symmetric loss I(T_X;T_Y) is fourth order around a trivial pair, so
// it contributes nothing. Curvatures are the eigenvalues of this Hessian
// restricted to perturbations that keep every row normalized, over clusters
// with A(t) > 0 and sources with p(s) > 0.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "blab/bottleneck.hpp"

namespace blab {

enum class FixedPointClass { trivial_maximum, trivial_saddle, nontrivial, unclassified };

inline const char* to_string(FixedPointClass c) {
  switch (c) {
    case FixedPointClass::trivial_maximum: return "trivial-maximum";
    case FixedPointClass::trivial_saddle: return "trivial-saddle";
    case FixedPointClass::nontrivial: return "nontrivial";
    case FixedPointClass::unclassified: return "unclassified";
  }
  return "?";
}

inline FixedPointClass fixed_point_class_from_string(const std::string& s) {
  if (s == "trivial-maximum") return FixedPointClass::trivial_maximum;
  if (s == "trivial-saddle") return FixedPointClass::trivial_saddle;
  if (s == "nontrivial") return FixedPointClass::nontrivial;
  if (s == "unclassified") return FixedPointClass::unclassified;
  throw ValidationError("unknown fixed point class '" + s + "'");
}

inline constexpr double kCurvatureSignTol = 1e-8;
inline constexpr double kFiniteDifferenceStep = 1e-5;
// FD Hessians cost O(m^2) loss evaluations; skipped above this dimension.
inline constexpr std::size_t kMaxFiniteDifferenceDim = 64;
// Clusters lighter than this count as collapsed; the FD check additionally
// needs every live cluster well inside the simplex.
inline constexpr double kLiveClusterMass = 1e-9;
inline constexpr double kFiniteDifferenceMinMass = 1e-3;

struct CurvatureReport {
  std::vector<double> analytic;           // ascending
  std::vector<double> finite_difference;  // ascending; empty when skipped
  // max |H_analytic - H_fd| / max |H_analytic| over the projected entries
  double max_relative_discrepancy = std::numeric_limits<double>::quiet_NaN();
  FixedPointClass classification = FixedPointClass::unclassified;
};

namespace detail {

// Orthonormal basis of {v in R^k : sum v = 0} (Helmert contrasts), k x (k-1).
inline Eigen::MatrixXd sum_zero_basis(std::size_t k) {
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k ? k - 1 : 0));
  for (std::size_t j = 1; j < k; ++j) {
    const double norm = std::sqrt(static_cast<double>(j * (j + 1)));
    for (std::size_t i = 0; i < j; ++i) h(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) = 1.0 / norm;
    h(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j - 1)) = -static_cast<double>(j) / norm;
  }
  return h;
}

// Feasible directions for one encoder side around a trivial row A.
struct SideTangent {
  std::vector<std::size_t> sources;   // p(s) > 0
  std::vector<std::size_t> clusters;  // A(t) > 0
  Eigen::MatrixXd contrasts;          // |clusters| x (|clusters|-1)

  std::size_t dim() const { return sources.size() * static_cast<std::size_t>(contrasts.cols()); }

  bool fd_safe(const Encoder& enc) const {
    return std::all_of(clusters.begin(), clusters.end(),
                       [&](std::size_t t) { return enc(0, t) >= kFiniteDifferenceMinMass; });
  }

  // Encoder-shaped perturbation for coordinate vector c (length dim()).
  Matrix direction(const Eigen::VectorXd& c, std::size_t card_source, std::size_t card_t) const {
    Matrix d(card_source, card_t, 0.0);
    const auto m = contrasts.cols();
    for (std::size_t i = 0; i < sources.size(); ++i)
      for (Eigen::Index j = 0; j < m; ++j) {
        const double coef = c(static_cast<Eigen::Index>(i) * m + j);
        if (coef == 0.0) continue;
        for (std::size_t r = 0; r < clusters.size(); ++r)
          d(sources[i], clusters[r]) += coef * contrasts(static_cast<Eigen::Index>(r), j);
      }
    return d;
  }
};

inline SideTangent side_tangent(const Vector& p_source, const Encoder& enc) {
  SideTangent st;
  for (std::size_t s = 0; s < p_source.size(); ++s)
    if (p_source[s] > 0.0) st.sources.push_back(s);
  for (std::size_t t = 0; t < enc.card_t(); ++t)
    if (enc(0, t) > kLiveClusterMass) st.clusters.push_back(t);
  st.contrasts = sum_zero_basis(st.clusters.size());
  return st;
}

// Projected Hessian for one side: C (over sources) Kronecker W (over contrasts),
// C = a diag(p) - p p^T - b G, W_jj' = sum_t h_j(t) h_j'(t) / A(t).
inline Eigen::MatrixXd side_hessian(const SideTangent& st, const Vector& p_source, const Encoder& enc,
                                    double alpha, const Eigen::MatrixXd* relevance_gram, double beta) {
  const auto ns = static_cast<Eigen::Index>(st.sources.size());
  const auto nc = st.contrasts.cols();
  Eigen::MatrixXd c(ns, ns);
  for (Eigen::Index i = 0; i < ns; ++i)
    for (Eigen::Index j = 0; j < ns; ++j) {
      const double pi = p_source[st.sources[static_cast<std::size_t>(i)]];
      const double pj = p_source[st.sources[static_cast<std::size_t>(j)]];
      c(i, j) = (i == j ? alpha * pi : 0.0) - pi * pj;
      if (relevance_gram) c(i, j) -= beta * (*relevance_gram)(i, j);
    }
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(nc, nc);
  for (Eigen::Index a = 0; a < nc; ++a)
    for (Eigen::Index b = 0; b < nc; ++b)
      for (std::size_t r = 0; r < st.clusters.size(); ++r)
        w(a, b) += st.contrasts(static_cast<Eigen::Index>(r), a) * st.contrasts(static_cast<Eigen::Index>(r), b) /
                   enc(0, st.clusters[r]);
  Eigen::MatrixXd h(ns * nc, ns * nc);
  for (Eigen::Index i = 0; i < ns; ++i)
    for (Eigen::Index j = 0; j < ns; ++j) h.block(i * nc, j * nc, nc, nc) = c(i, j) * w;
  return h;
}

// G(s,s') = sum_y d(s,y) d(s',y) / p(y) over the tangent's sources.
inline Eigen::MatrixXd relevance_gram(const JointDistribution& joint, const SideTangent& st) {
  const auto ns = static_cast<Eigen::Index>(st.sources.size());
  const auto& px = joint.marginal_x();
  const auto& py = joint.marginal_y();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(ns, ns);
  for (std::size_t y = 0; y < joint.card_y(); ++y) {
    if (py[y] <= 0.0) continue;
    for (Eigen::Index i = 0; i < ns; ++i) {
      const std::size_t si = st.sources[static_cast<std::size_t>(i)];
      const double di = joint(si, y) - px[si] * py[y];
      for (Eigen::Index j = 0; j < ns; ++j) {
        const std::size_t sj = st.sources[static_cast<std::size_t>(j)];
        g(i, j) += di * (joint(sj, y) - px[sj] * py[y]) / py[y];
      }
    }
  }
  return g;
}

inline std::vector<double> symmetric_eigenvalues(const Eigen::MatrixXd& m) {
  if (m.rows() == 0) return {};
  const Eigen::MatrixXd sym = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  std::vector<double> out(es.eigenvalues().data(), es.eigenvalues().data() + es.eigenvalues().size());
  std::sort(out.begin(), out.end());
  return out;
}

// Central finite-difference Hessian of `loss` along the columns of an
// identity basis of size m, where `loss(c)` evaluates at coordinates c.
template <typename LossFn>
Eigen::MatrixXd finite_difference_hessian(std::size_t m, LossFn&& loss, double h) {
  const auto n = static_cast<Eigen::Index>(m);
  Eigen::MatrixXd out(n, n);
  const double f0 = loss(Eigen::VectorXd::Zero(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(i) = h;
    out(i, i) = (loss(e) - 2.0 * f0 + loss(-e)) / (h * h);
    for (Eigen::Index j = i + 1; j < n; ++j) {
      Eigen::VectorXd f = Eigen::VectorXd::Zero(n);
      f(j) = h;
      const double v = (loss(e + f) - loss(e - f) - loss(-e + f) + loss(-e - f)) / (4.0 * h * h);
      out(i, j) = v;
      out(j, i) = v;
    }
  }
  return out;
}

inline FixedPointClass classify_curvatures(const std::vector<double>& eig) {
  if (eig.empty()) return FixedPointClass::unclassified;
  const bool any_neg = eig.front() < -kCurvatureSignTol;
  const bool any_pos = eig.back() > kCurvatureSignTol;
  if (eig.back() < -kCurvatureSignTol) return FixedPointClass::trivial_maximum;
  if (any_neg && any_pos) return FixedPointClass::trivial_saddle;
  return FixedPointClass::unclassified;
}

inline void compare_with_fd(CurvatureReport& rep, const Eigen::MatrixXd& analytic, const Eigen::MatrixXd& fd) {
  rep.finite_difference = symmetric_eigenvalues(fd);
  const double scale = analytic.cwiseAbs().maxCoeff();
  const double diff = (analytic - fd).cwiseAbs().maxCoeff();
  rep.max_relative_discrepancy = scale > 0.0 ? diff / scale : diff;
}

inline Encoder perturbed(const Encoder& base, const Matrix& dir, double scale) {
  Matrix m = base.cond();
  auto f = m.flat();
  auto d = dir.flat();
  for (std::size_t i = 0; i < f.size(); ++i) f[i] += scale * d[i];
  return Encoder(std::move(m));
}

}  // namespace detail

/// Curvature of the GSIB loss at a trivial encoder pair, analytic and (for
/// small problems) central finite differences of gsib_loss.
inline CurvatureReport trivial_curvature_gsib(const JointDistribution& joint, const Encoder& enc_x,
                                              const Encoder& enc_y, const BottleneckParams& params) {
  if (!is_trivial(enc_x) || !is_trivial(enc_y))
    throw ValidationError("trivial_curvature_gsib: encoders are not trivial");
  const auto tx = detail::side_tangent(joint.marginal_x(), enc_x);
  const auto ty = detail::side_tangent(joint.marginal_y(), enc_y);
  const Eigen::MatrixXd hx = detail::side_hessian(tx, joint.marginal_x(), enc_x, params.alpha_x, nullptr, 0.0);
  const Eigen::MatrixXd hy = detail::side_hessian(ty, joint.marginal_y(), enc_y, params.alpha_y, nullptr, 0.0);
  const auto mx = hx.rows(), my = hy.rows();
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(mx + my, mx + my);
  h.topLeftCorner(mx, mx) = hx;
  h.bottomRightCorner(my, my) = hy;

  CurvatureReport rep;
  rep.analytic = detail::symmetric_eigenvalues(h);
  rep.classification = detail::classify_curvatures(rep.analytic);

  const auto m = static_cast<std::size_t>(mx + my);
  if (m > 0 && m <= kMaxFiniteDifferenceDim && tx.fd_safe(enc_x) && ty.fd_safe(enc_y)) {
    auto loss = [&](const Eigen::VectorXd& c) {
      const Matrix dx = tx.direction(c.head(mx), enc_x.card_source(), enc_x.card_t());
      const Matrix dy = ty.direction(c.tail(my), enc_y.card_source(), enc_y.card_t());
      return gsib_loss(joint, detail::perturbed(enc_x, dx, 1.0), detail::perturbed(enc_y, dy, 1.0), params);
    };
    detail::compare_with_fd(rep, h, detail::finite_difference_hessian(m, loss, kFiniteDifferenceStep));
  }
  return rep;
}

/// Same analysis for the one-sided GIB loss (relevance Y), using alpha_x.
inline CurvatureReport trivial_curvature_gib(const JointDistribution& joint, const Encoder& enc,
                                             const BottleneckParams& params) {
  if (!is_trivial(enc)) throw ValidationError("trivial_curvature_gib: encoder is not trivial");
  const auto st = detail::side_tangent(joint.marginal_x(), enc);
  const Eigen::MatrixXd g = detail::relevance_gram(joint, st);
  const Eigen::MatrixXd h = detail::side_hessian(st, joint.marginal_x(), enc, params.alpha_x, &g, params.beta);

  CurvatureReport rep;
  rep.analytic = detail::symmetric_eigenvalues(h);
  rep.classification = detail::classify_curvatures(rep.analytic);
  const std::size_t m = st.dim();
  if (m > 0 && m <= kMaxFiniteDifferenceDim && st.fd_safe(enc)) {
    auto loss = [&](const Eigen::VectorXd& c) {
      return gib_loss(joint, detail::perturbed(enc, st.direction(c, enc.card_source(), enc.card_t()), 1.0), params);
    };
    detail::compare_with_fd(rep, h, detail::finite_difference_hessian(m, loss, kFiniteDifferenceStep));
  }
  return rep;
}

/// L-infinity change of one more symmetric sweep (soft or hard per side).
inline double selfconsistency_residual(const JointDistribution& joint, const Encoder& enc_x,
                                       const Encoder& enc_y, const BottleneckParams& params) {
  const auto [nx, ny] = detail::symmetric_sweep(joint, enc_x, enc_y, params.alpha_x, params.alpha_y,
                                                params.beta, params.mode);
  return std::max(linf_distance(nx.cond(), enc_x.cond()), linf_distance(ny.cond(), enc_y.cond()));
}

inline double selfconsistency_residual(const JointDistribution& joint, const Encoder& enc,
                                       const BottleneckParams& params) {
  const Encoder next = params.alpha_x < kDeterministicAlpha ? dib_update(joint, enc, params)
                                                            : gib_update(joint, enc, params);
  return linf_distance(next.cond(), enc.cond());
}

inline constexpr double kFixedPointResidualTol = 1e-6;

inline FixedPointClass classify_fixed_point(const JointDistribution& joint, const Encoder& enc_x,
                                            const Encoder& enc_y, const BottleneckParams& params) {
  const double r = selfconsistency_residual(joint, enc_x, enc_y, params);
  if (!(r < kFixedPointResidualTol))
    throw ValidationError("classify_fixed_point: not a fixed point (residual " + std::to_string(r) + ")");
  if (!is_trivial(enc_x) || !is_trivial(enc_y)) return FixedPointClass::nontrivial;
  return trivial_curvature_gsib(joint, enc_x, enc_y, params).classification;
}

inline FixedPointClass classify_fixed_point_gib(const JointDistribution& joint, const Encoder& enc,
                                                const BottleneckParams& params) {
  const double r = selfconsistency_residual(joint, enc, params);
  if (!(r < kFixedPointResidualTol))
    throw ValidationError("classify_fixed_point_gib: not a fixed point (residual " + std::to_string(r) + ")");
  if (!is_trivial(enc)) return FixedPointClass::nontrivial;
  return trivial_curvature_gib(joint, enc, params).classification;
}

}  // namespace blab
