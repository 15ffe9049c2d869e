#pragma once

// Multi-restart fixed-point iteration for the four bottleneck kinds.

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <vector>

#include "blab/bottleneck.hpp"
#include "blab/fixed_point.hpp"
#include "blab/rng.hpp"

namespace blab {

struct SolverResult {
  SolverKind kind = SolverKind::gsib;
  Encoder enc_x = Encoder::uniform(1, 1);
  std::optional<Encoder> enc_y;  // absent for one-sided kinds
  std::vector<double> loss_trajectory;  // best restart, final annealing stage
  double final_loss = 0.0;
  bool converged = false;
  double selfconsistency_residual = std::numeric_limits<double>::infinity();
  FixedPointClass fixedpoint_class = FixedPointClass::unclassified;

  // diagnostics
  std::size_t best_restart = 0;
  std::size_t iterations = 0;
  double loss_increase_fraction = 0.0;  // share of steps raising the loss by > 1e-9
  std::vector<double> restart_losses;
};

namespace detail {

// Uniform rows times (1 + u * eps), u ~ U[-1, 1], renormalized.
inline Encoder perturbed_uniform(std::size_t card_source, std::size_t card_t, double eps, Rng& rng) {
  Matrix w(card_source, card_t);
  for (double& v : w.flat()) v = 1.0 + eps * rng.uniform(-1.0, 1.0);
  return Encoder::from_weights(std::move(w));
}

// Argmax of perturbed-uniform rows, redrawn until no cluster is empty (when
// |S| >= |T|): a uniformly random surjective labelling. Empty clusters are
// never revived by the hard update, so they are avoided from the start.
inline Encoder random_partition(std::size_t card_source, std::size_t card_t, double eps, Rng& rng) {
  for (int attempt = 0;; ++attempt) {
    const auto labels = perturbed_uniform(card_source, card_t, eps, rng).labels();
    std::vector<char> used(card_t, 0);
    for (auto l : labels) used[l] = 1;
    const bool surjective = std::all_of(used.begin(), used.end(), [](char u) { return u != 0; });
    if (surjective || card_source < card_t || attempt == 1000) return Encoder::deterministic(labels, card_t);
  }
}

inline double loss_increase_fraction(const std::vector<double>& traj) {
  if (traj.size() < 2) return 0.0;
  std::size_t ups = 0;
  for (std::size_t i = 1; i < traj.size(); ++i)
    if (traj[i] > traj[i - 1] + 1e-9) ++ups;
  return static_cast<double>(ups) / static_cast<double>(traj.size() - 1);
}

struct RestartOutcome {
  Encoder enc_x;
  std::optional<Encoder> enc_y;
  std::vector<double> trajectory;
  double loss = 0.0;
  bool converged = false;
  std::size_t iterations = 0;
};

class FixedPointIteration {
 public:
  FixedPointIteration(const JointDistribution& joint, SolverKind kind, const BottleneckParams& params)
      : joint_(joint), kind_(kind), params_(params) {}

  RestartOutcome run(Encoder enc_x, std::optional<Encoder> enc_y) const {
    std::vector<double> schedule = params_.anneal_schedule;
    if (schedule.empty()) schedule.push_back(params_.beta);
    RestartOutcome out{enc_x, enc_y, {}, 0.0, false, 0};
    for (double beta : schedule) {
      BottleneckParams stage = params_;
      stage.beta = beta;
      out.trajectory.clear();
      out.converged = false;
      for (int it = 0; it < params_.max_iters; ++it) {
        double change = 0.0;
        if (enc_y) {
          auto [nx, ny] = step(stage, out.enc_x, *out.enc_y);
          change = std::max(linf_distance(nx.cond(), out.enc_x.cond()), linf_distance(ny.cond(), out.enc_y->cond()));
          out.enc_x = std::move(nx);
          out.enc_y = std::move(ny);
        } else {
          Encoder nx = step(stage, out.enc_x);
          change = linf_distance(nx.cond(), out.enc_x.cond());
          out.enc_x = std::move(nx);
        }
        ++out.iterations;
        out.trajectory.push_back(loss(stage, out.enc_x, out.enc_y));
        if (change < params_.conv_tol) {
          out.converged = true;
          break;
        }
      }
    }
    out.loss = loss(params_, out.enc_x, out.enc_y);
    return out;
  }

  double residual(const Encoder& enc_x, const std::optional<Encoder>& enc_y) const {
    if (enc_y) {
      auto [nx, ny] = step(params_, enc_x, *enc_y);
      return std::max(linf_distance(nx.cond(), enc_x.cond()), linf_distance(ny.cond(), enc_y->cond()));
    }
    return linf_distance(step(params_, enc_x).cond(), enc_x.cond());
  }

  double loss(const BottleneckParams& p, const Encoder& enc_x, const std::optional<Encoder>& enc_y) const {
    return enc_y ? gsib_loss(joint_, enc_x, *enc_y, p) : gib_loss(joint_, enc_x, p);
  }

  double alpha_x() const { return deterministic() ? 0.0 : params_.alpha_x; }
  double alpha_y() const { return deterministic() ? 0.0 : params_.alpha_y; }
  bool deterministic() const { return kind_ == SolverKind::dib || kind_ == SolverKind::dsib; }

 private:
  std::pair<Encoder, Encoder> step(const BottleneckParams& p, const Encoder& ex, const Encoder& ey) const {
    return symmetric_sweep(joint_, ex, ey, alpha_x(), alpha_y(), p.beta, p.mode);
  }

  Encoder step(const BottleneckParams& p, const Encoder& ex) const {
    const Matrix scores = gib_scores(joint_, ex, p.beta);
    return assign(scores, alpha_x());
  }

  const JointDistribution& joint_;
  SolverKind kind_;
  BottleneckParams params_;
};

}  // namespace detail

/// Runs params.n_restarts seeded initializations and returns the one with the
/// lowest final loss (lowest restart index on ties). For gsib/dsib both
/// cardinalities are required; one-sided kinds ignore card_ty.
inline SolverResult solve(const JointDistribution& joint, SolverKind kind, std::size_t card_tx,
                          std::optional<std::size_t> card_ty, const BottleneckParams& params,
                          std::uint64_t seed) {
  params.validate();
  if (card_tx < 1) throw ValidationError("solve: |T_X| must be >= 1");
  const bool symmetric = is_symmetric(kind);
  if (symmetric && (!card_ty || *card_ty < 1)) throw ValidationError("solve: symmetric kinds need |T_Y| >= 1");

  const detail::FixedPointIteration iter(joint, kind, params);
  std::optional<detail::RestartOutcome> best;
  std::size_t best_index = 0;
  SolverResult result;
  result.kind = kind;

  for (int r = 0; r < params.n_restarts; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    auto init = [&](std::size_t card_source, std::size_t card_t, double alpha) {
      return alpha < kDeterministicAlpha
                 ? detail::random_partition(card_source, card_t, params.init_perturbation, rng)
                 : detail::perturbed_uniform(card_source, card_t, params.init_perturbation, rng);
    };
    Encoder ex = init(joint.card_x(), card_tx, iter.alpha_x());
    std::optional<Encoder> ey;
    if (symmetric) ey = init(joint.card_y(), *card_ty, iter.alpha_y());

    auto outcome = iter.run(std::move(ex), std::move(ey));
    result.restart_losses.push_back(outcome.loss);
    if (!best || outcome.loss < best->loss) {
      best = std::move(outcome);
      best_index = static_cast<std::size_t>(r);
    }
  }

  result.enc_x = best->enc_x;
  result.enc_y = best->enc_y;
  result.loss_trajectory = best->trajectory;
  result.final_loss = best->loss;
  result.converged = best->converged;
  result.iterations = best->iterations;
  result.best_restart = best_index;
  result.loss_increase_fraction = detail::loss_increase_fraction(best->trajectory);
  result.selfconsistency_residual = iter.residual(result.enc_x, result.enc_y);

  if (result.selfconsistency_residual < kFixedPointResidualTol) {
    BottleneckParams cp = params;
    cp.alpha_x = iter.alpha_x();
    cp.alpha_y = iter.alpha_y();
    if (symmetric) {
      result.fixedpoint_class = (is_trivial(result.enc_x) && is_trivial(*result.enc_y))
                                    ? trivial_curvature_gsib(joint, result.enc_x, *result.enc_y, cp).classification
                                    : FixedPointClass::nontrivial;
    } else {
      result.fixedpoint_class = is_trivial(result.enc_x)
                                    ? trivial_curvature_gib(joint, result.enc_x, cp).classification
                                    : FixedPointClass::nontrivial;
    }
  }
  return result;
}

}  // namespace blab
