#pragma once

// Exact discrete-probability kernels: joint tables, stochastic encoders, the
// distributions an encoder pair induces, entropies/informations in nats, the
// plug-in estimator and multinomial sampling.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "blab/errors.hpp"
#include "blab/matrix.hpp"
#include "blab/rng.hpp"

namespace blab {

inline constexpr double kConstructionTol = 1e-12;
inline constexpr double kAccumulationTol = 1e-10;
// Induced masses below this are treated as empty clusters.
inline constexpr double kEmptyMass = 1e-300;

using Vector = std::vector<double>;
using CountMatrix = Table<std::uint64_t>;

namespace detail {

inline double xlogx(double p) noexcept { return p > 0.0 ? p * std::log(p) : 0.0; }

inline double entropy_unchecked(std::span<const double> p) noexcept {
  double h = 0.0;
  for (double v : p) h -= xlogx(v);
  return h;
}

inline void check_normalized(std::span<const double> p, double tol, const char* what) {
  double s = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw InvalidDistribution(std::string(what) + ": negative or NaN entry");
    s += v;
  }
  if (std::abs(s - 1.0) > tol)
    throw InvalidDistribution(std::string(what) + ": entries sum to " + std::to_string(s));
}

// Renormalize a computed distribution in place; rejects drift beyond tol.
inline void renormalize(std::span<double> p, double tol, const char* what) {
  double s = 0.0;
  for (double v : p) s += v;
  if (std::abs(s - 1.0) > tol)
    throw NumericalError(std::string(what) + ": accumulated normalization error " +
                         std::to_string(s - 1.0));
  for (double& v : p) v /= s;
}

}  // namespace detail

/// Normalized probability table p(x, y) over a finite product alphabet.
/// Marginals are computed once at construction.
class JointDistribution {
 public:
  explicit JointDistribution(Matrix probs) : probs_(std::move(probs)) {
    if (probs_.rows() == 0 || probs_.cols() == 0)
      throw InvalidDistribution("joint distribution needs card_x, card_y >= 1");
    detail::check_normalized(probs_.flat(), kConstructionTol, "joint distribution");
    px_.assign(card_x(), 0.0);
    py_.assign(card_y(), 0.0);
    for (std::size_t x = 0; x < card_x(); ++x)
      for (std::size_t y = 0; y < card_y(); ++y) {
        px_[x] += probs_(x, y);
        py_[y] += probs_(x, y);
      }
  }

  /// Normalizes non-negative weights; throws if they sum to zero.
  static JointDistribution from_weights(Matrix weights) {
    double s = 0.0;
    for (double v : weights.flat()) {
      if (!(v >= 0.0)) throw InvalidDistribution("joint weights: negative or NaN entry");
      s += v;
    }
    if (!(s > 0.0)) throw InvalidDistribution("joint weights sum to zero");
    for (double& v : weights.flat()) v /= s;
    return JointDistribution(std::move(weights));
  }

  std::size_t card_x() const noexcept { return probs_.rows(); }
  std::size_t card_y() const noexcept { return probs_.cols(); }
  double operator()(std::size_t x, std::size_t y) const noexcept { return probs_(x, y); }
  const Matrix& probs() const noexcept { return probs_; }
  const Vector& marginal_x() const noexcept { return px_; }
  const Vector& marginal_y() const noexcept { return py_; }

  /// Same distribution with the roles of X and Y swapped.
  JointDistribution transposed() const {
    Matrix t(card_y(), card_x());
    for (std::size_t x = 0; x < card_x(); ++x)
      for (std::size_t y = 0; y < card_y(); ++y) t(y, x) = probs_(x, y);
    return JointDistribution(std::move(t));
  }

 private:
  Matrix probs_;
  Vector px_;
  Vector py_;
};

/// Row-stochastic conditional table q(t | s).
class Encoder {
 public:
  explicit Encoder(Matrix cond) : cond_(std::move(cond)) {
    if (cond_.rows() == 0 || cond_.cols() == 0)
      throw InvalidDistribution("encoder needs card_source, card_t >= 1");
    for (std::size_t s = 0; s < cond_.rows(); ++s) {
      for (double v : cond_.row(s))
        if (!(v >= 0.0 && v <= 1.0)) throw InvalidDistribution("encoder entry outside [0,1]");
      detail::check_normalized(cond_.row(s), kConstructionTol, "encoder row");
    }
  }

  static Encoder uniform(std::size_t card_source, std::size_t card_t) {
    return Encoder(Matrix(card_source, card_t, 1.0 / static_cast<double>(card_t)));
  }

  static Encoder identity(std::size_t card) {
    Matrix m(card, card, 0.0);
    for (std::size_t i = 0; i < card; ++i) m(i, i) = 1.0;
    return Encoder(std::move(m));
  }

  /// One-hot encoder sending source s to cluster labels[s].
  static Encoder deterministic(std::span<const std::size_t> labels, std::size_t card_t) {
    Matrix m(labels.size(), card_t, 0.0);
    for (std::size_t s = 0; s < labels.size(); ++s) {
      if (labels[s] >= card_t) throw ValidationError("encoder label out of range");
      m(s, labels[s]) = 1.0;
    }
    return Encoder(std::move(m));
  }

  /// Normalizes each row of non-negative weights.
  static Encoder from_weights(Matrix w) {
    for (std::size_t s = 0; s < w.rows(); ++s) {
      double total = 0.0;
      for (double v : w.row(s)) {
        if (!(v >= 0.0)) throw InvalidDistribution("encoder weights: negative or NaN entry");
        total += v;
      }
      if (!(total > 0.0)) throw NumericalError("encoder weights: all-zero row " + std::to_string(s));
      for (double& v : w.row(s)) v /= total;
    }
    return Encoder(std::move(w));
  }

  std::size_t card_source() const noexcept { return cond_.rows(); }
  std::size_t card_t() const noexcept { return cond_.cols(); }
  double operator()(std::size_t s, std::size_t t) const noexcept { return cond_(s, t); }
  const Matrix& cond() const noexcept { return cond_; }

  /// True when every row is one-hot.
  bool is_deterministic() const noexcept {
    for (double v : cond_.flat())
      if (v != 0.0 && v != 1.0) return false;
    return true;
  }

  /// Argmax label per row (lowest index on ties).
  std::vector<std::size_t> labels() const {
    std::vector<std::size_t> out(card_source());
    for (std::size_t s = 0; s < card_source(); ++s) {
      auto r = cond_.row(s);
      std::size_t best = 0;
      for (std::size_t t = 1; t < r.size(); ++t)
        if (r[t] > r[best]) best = t;
      out[s] = best;
    }
    return out;
  }

  bool operator==(const Encoder&) const = default;

 private:
  Matrix cond_;
};

/// Sample counts n(x, y) with their total N.
struct CountTable {
  CountMatrix counts;
  std::uint64_t total_n = 0;

  CountTable() = default;
  explicit CountTable(CountMatrix c) : counts(std::move(c)) {
    for (auto v : counts.flat()) total_n += v;
  }
};

/// Everything the formal solutions need, induced from p(x,y) and an encoder
/// pair. Conditionals on zero-mass outcomes are uniform rows and flagged.
struct InducedDistributions {
  Vector p_tx;
  Vector p_ty;
  Matrix p_txty;         // Tx x Ty
  Matrix p_ty_given_x;   // X x Ty
  Matrix p_tx_given_y;   // Y x Tx
  Matrix p_ty_given_tx;  // Tx x Ty
  Matrix p_tx_given_ty;  // Ty x Tx
  std::vector<std::uint8_t> degenerate_x, degenerate_y, degenerate_tx, degenerate_ty;

  bool has_degenerate_support() const noexcept {
    auto any = [](const std::vector<std::uint8_t>& v) {
      for (auto f : v)
        if (f) return true;
      return false;
    };
    return any(degenerate_x) || any(degenerate_y) || any(degenerate_tx) || any(degenerate_ty);
  }
};

/// p(t) and p(y | t) for a one-sided bottleneck X -> T with relevance Y.
struct RelevanceDistributions {
  Vector p_t;
  Matrix p_ty;           // T x Y joint
  Matrix p_y_given_t;    // T x Y
  std::vector<std::uint8_t> degenerate_t;
};

// ---------------------------------------------------------------------------
// Entropies and informations (nats, 0 ln 0 = 0)

inline double entropy(std::span<const double> p) {
  if (p.empty()) throw InvalidDistribution("entropy of empty vector");
  detail::check_normalized(p, kAccumulationTol, "entropy");
  return detail::entropy_unchecked(p);
}

inline double mutual_information(const JointDistribution& joint) {
  const double hxy = detail::entropy_unchecked(joint.probs().flat());
  const double mi = detail::entropy_unchecked(joint.marginal_x()) +
                    detail::entropy_unchecked(joint.marginal_y()) - hxy;
  return mi < 0.0 ? 0.0 : mi;
}

/// D(p || q); +infinity when p puts mass where q has none.
inline double kl_divergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw DimensionMismatch("kl_divergence: length mismatch");
  double d = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    d += p[i] * std::log(p[i] / q[i]);
  }
  return d;
}

/// H(T | S) = sum_s p(s) H(q(. | s)).
inline double conditional_entropy(std::span<const double> p_source, const Encoder& enc) {
  if (p_source.size() != enc.card_source())
    throw DimensionMismatch("conditional_entropy: encoder source cardinality");
  double h = 0.0;
  for (std::size_t s = 0; s < p_source.size(); ++s)
    if (p_source[s] > 0.0) h += p_source[s] * detail::entropy_unchecked(enc.cond().row(s));
  return h;
}

/// I(A;B) for a (not necessarily validated) joint table.
inline double mutual_information(const Matrix& pab) {
  Vector pa(pab.rows(), 0.0), pb(pab.cols(), 0.0);
  double hab = 0.0;
  for (std::size_t a = 0; a < pab.rows(); ++a)
    for (std::size_t b = 0; b < pab.cols(); ++b) {
      const double v = pab(a, b);
      pa[a] += v;
      pb[b] += v;
      hab -= detail::xlogx(v);
    }
  const double mi = detail::entropy_unchecked(pa) + detail::entropy_unchecked(pb) - hab;
  return mi < 0.0 ? 0.0 : mi;
}

// ---------------------------------------------------------------------------
// Induced distributions

namespace detail {

// Rows of `joint_rows` (R x C) divided by `mass` (R); zero-mass rows become
// uniform and are flagged.
inline Matrix conditional_rows(const Matrix& joint_rows, const Vector& mass,
                               std::vector<std::uint8_t>& degenerate, const char* what) {
  Matrix out(joint_rows.rows(), joint_rows.cols());
  degenerate.assign(joint_rows.rows(), 0);
  const double uniform = 1.0 / static_cast<double>(joint_rows.cols());
  for (std::size_t r = 0; r < joint_rows.rows(); ++r) {
    if (mass[r] < kEmptyMass) {
      degenerate[r] = 1;
      for (double& v : out.row(r)) v = uniform;
      continue;
    }
    for (std::size_t c = 0; c < joint_rows.cols(); ++c) out(r, c) = joint_rows(r, c) / mass[r];
    renormalize(out.row(r), kAccumulationTol, what);
  }
  return out;
}

}  // namespace detail

inline InducedDistributions induce(const JointDistribution& joint, const Encoder& enc_x,
                                   const Encoder& enc_y) {
  if (enc_x.card_source() != joint.card_x() || enc_y.card_source() != joint.card_y())
    throw DimensionMismatch("induce: encoder source cardinality does not match joint");
  const std::size_t nx = joint.card_x(), ny = joint.card_y();
  const std::size_t tx = enc_x.card_t(), ty = enc_y.card_t();
  const auto& px = joint.marginal_x();
  const auto& py = joint.marginal_y();

  InducedDistributions out;
  // p(x, t_y) = sum_y p(x,y) q(t_y|y)
  Matrix p_x_ty(nx, ty, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) {
      const double pxy = joint(x, y);
      if (pxy == 0.0) continue;
      for (std::size_t t = 0; t < ty; ++t) p_x_ty(x, t) += pxy * enc_y(y, t);
    }
  // p(t_x, y) = sum_x q(t_x|x) p(x,y), stored as Y x Tx
  Matrix p_y_tx(ny, tx, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t y = 0; y < ny; ++y) {
      const double pxy = joint(x, y);
      if (pxy == 0.0) continue;
      for (std::size_t t = 0; t < tx; ++t) p_y_tx(y, t) += pxy * enc_x(x, t);
    }
  out.p_txty = Matrix(tx, ty, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t a = 0; a < tx; ++a) {
      const double q = enc_x(x, a);
      if (q == 0.0) continue;
      for (std::size_t b = 0; b < ty; ++b) out.p_txty(a, b) += q * p_x_ty(x, b);
    }
  detail::renormalize(out.p_txty.flat(), kAccumulationTol, "induced p(t_x,t_y)");

  out.p_tx.assign(tx, 0.0);
  out.p_ty.assign(ty, 0.0);
  for (std::size_t a = 0; a < tx; ++a)
    for (std::size_t b = 0; b < ty; ++b) {
      out.p_tx[a] += out.p_txty(a, b);
      out.p_ty[b] += out.p_txty(a, b);
    }

  out.p_ty_given_x = detail::conditional_rows(p_x_ty, px, out.degenerate_x, "p(t_y|x)");
  out.p_tx_given_y = detail::conditional_rows(p_y_tx, py, out.degenerate_y, "p(t_x|y)");
  out.p_ty_given_tx =
      detail::conditional_rows(out.p_txty, out.p_tx, out.degenerate_tx, "p(t_y|t_x)");
  Matrix p_ty_tx(ty, tx);
  for (std::size_t a = 0; a < tx; ++a)
    for (std::size_t b = 0; b < ty; ++b) p_ty_tx(b, a) = out.p_txty(a, b);
  out.p_tx_given_ty = detail::conditional_rows(p_ty_tx, out.p_ty, out.degenerate_ty, "p(t_x|t_y)");
  return out;
}

inline RelevanceDistributions induce_relevance(const JointDistribution& joint, const Encoder& enc) {
  if (enc.card_source() != joint.card_x())
    throw DimensionMismatch("induce_relevance: encoder source cardinality does not match joint");
  const std::size_t nx = joint.card_x(), ny = joint.card_y(), nt = enc.card_t();
  RelevanceDistributions out;
  out.p_ty = Matrix(nt, ny, 0.0);
  for (std::size_t x = 0; x < nx; ++x)
    for (std::size_t t = 0; t < nt; ++t) {
      const double q = enc(x, t);
      if (q == 0.0) continue;
      for (std::size_t y = 0; y < ny; ++y) out.p_ty(t, y) += q * joint(x, y);
    }
  detail::renormalize(out.p_ty.flat(), kAccumulationTol, "induced p(t,y)");
  out.p_t.assign(nt, 0.0);
  for (std::size_t t = 0; t < nt; ++t)
    for (std::size_t y = 0; y < ny; ++y) out.p_t[t] += out.p_ty(t, y);
  out.p_y_given_t = detail::conditional_rows(out.p_ty, out.p_t, out.degenerate_t, "p(y|t)");
  return out;
}

// ---------------------------------------------------------------------------
// Estimation and sampling

/// Maximum-likelihood estimate p(x,y) = n(x,y) / N.
inline JointDistribution plugin_estimate(const CountTable& counts) {
  if (counts.total_n == 0) throw ValidationError("plugin_estimate: empty sample (N = 0)");
  Matrix p(counts.counts.rows(), counts.counts.cols());
  const double n = static_cast<double>(counts.total_n);
  auto src = counts.counts.flat();
  auto dst = p.flat();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = static_cast<double>(src[i]) / n;
  return JointDistribution(std::move(p));
}

/// Multinomial sampler over the cells of a joint; the alias table is built
/// once and reused for every draw.
class MultinomialSampler {
 public:
  explicit MultinomialSampler(const JointDistribution& joint)
      : rows_(joint.card_x()), cols_(joint.card_y()), table_(joint.probs().flat()) {}

  CountTable sample(std::uint64_t n, std::uint64_t seed) const {
    CountMatrix counts(rows_, cols_, 0);
    auto flat = counts.flat();
    sample_cells(n, seed, [&](std::size_t cell) { ++flat[cell]; });
    CountTable out;
    out.counts = std::move(counts);
    out.total_n = n;
    return out;
  }

  /// Calls visit(cell) for each of the n draws, cell = x * card_y + y, in the
  /// same order sample() consumes them.
  template <typename Visit>
  void sample_cells(std::uint64_t n, std::uint64_t seed, Visit&& visit) const {
    if (n == 0) throw ValidationError("sample_counts: n must be >= 1");
    Rng rng(seed);
    for (std::uint64_t i = 0; i < n; ++i) visit(table_.draw(rng));
  }

 private:
  std::size_t rows_, cols_;
  AliasTable table_;
};

inline CountTable sample_counts(const JointDistribution& joint, std::uint64_t n,
                                std::uint64_t seed) {
  return MultinomialSampler(joint).sample(n, seed);
}

}  // namespace blab
