#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "blab/solve.hpp"
#include "oracles.hpp"

using namespace blab;

namespace {

const double kLn2 = std::log(2.0);

JointDistribution diag_half() { return JointDistribution(Matrix{{0.5, 0.0}, {0.0, 0.5}}); }
JointDistribution planted4() { return oracle::to_joint(oracle::planted(4, 2)); }
Encoder blocks4() { return Encoder::deterministic(std::vector<std::size_t>{0, 0, 1, 1}, 2); }

BottleneckParams params(double beta, double ax = 1.0, double ay = 1.0) {
  BottleneckParams p;
  p.beta = beta;
  p.alpha_x = ax;
  p.alpha_y = ay;
  return p;
}

}  // namespace

TEST(Losses, GsibAtUniformEncoders) {
  std::mt19937_64 gen(1);
  const auto j = oracle::to_joint(oracle::random_grid(3, 4, gen));
  for (double beta : {0.0, 1.0, 7.0}) {
    EXPECT_NEAR(gsib_loss(j, Encoder::uniform(3, 2), Encoder::uniform(4, 3), params(beta)), 0.0, 1e-12);
    EXPECT_NEAR(gsib_loss(j, Encoder::uniform(3, 2), Encoder::uniform(4, 3), params(beta, 0.3, 0.6)),
                0.7 * std::log(2.0) + 0.4 * std::log(3.0), 1e-12);
  }
}

TEST(Losses, GsibIdentityOnDiagonal) {
  for (double beta : {0.0, 0.5, 2.0})
    EXPECT_NEAR(gsib_loss(diag_half(), Encoder::identity(2), Encoder::identity(2), params(beta)),
                (2.0 - beta) * kLn2, 1e-14);
}

TEST(Losses, Gib) {
  EXPECT_NEAR(gib_loss(diag_half(), Encoder::uniform(2, 3), params(3.0)), 0.0, 1e-12);
  EXPECT_NEAR(gib_loss(diag_half(), Encoder::identity(2), params(3.0)), (1.0 - 3.0) * kLn2, 1e-14);
  EXPECT_NEAR(gib_loss(diag_half(), Encoder::uniform(2, 3), params(3.0, 0.0)), std::log(3.0), 1e-14);
}

TEST(Losses, ParallelGibIsSumOfTwoGibs) {
  std::mt19937_64 gen(2);
  const auto j = oracle::to_joint(oracle::random_grid(4, 3, gen));
  const auto ex = oracle::random_encoder(4, 2, gen);
  const auto ey = oracle::random_encoder(3, 2, gen);
  const auto p = params(2.0, 0.4, 0.4);
  EXPECT_NEAR(parallel_gib_loss(j, ex, ey, p), gib_loss(j, ex, p) + gib_loss(j.transposed(), ey, p), 1e-12);
}

TEST(Losses, DimensionMismatch) {
  EXPECT_THROW(gsib_loss(diag_half(), Encoder::uniform(3, 2), Encoder::uniform(2, 2), params(1)), DimensionMismatch);
}

TEST(Params, Validation) {
  auto p = params(1.0, 1.5);
  try {
    p.validate();
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_STREQ(e.what(), "alpha_x out of [0,1]");
  }
  p = params(1.0);
  p.conv_tol = 0;
  EXPECT_THROW(p.validate(), ValidationError);
}

TEST(Updates, UniformIsExactFixedPoint) {
  std::mt19937_64 gen(3);
  const auto j = oracle::to_joint(oracle::random_grid(5, 4, gen));
  const auto ux = Encoder::uniform(5, 3), uy = Encoder::uniform(4, 2);
  for (double a : {0.25, 0.5, 1.0})
    for (double b : {0.0, 1.0, 10.0}) {
      const auto [nx, ny] = gsib_update(j, ux, uy, params(b, a, a));
      EXPECT_LE(linf_distance(nx.cond(), ux.cond()), 1e-12);
      EXPECT_LE(linf_distance(ny.cond(), uy.cond()), 1e-12);
      EXPECT_LE(linf_distance(gib_update(j, ux, params(b, a)).cond(), ux.cond()), 1e-12);
    }
}

TEST(Updates, BetaZeroRowsEqualClusterMarginal) {
  std::mt19937_64 gen(4);
  const auto j = oracle::to_joint(oracle::random_grid(4, 4, gen));
  const auto ex = oracle::random_encoder(4, 3, gen);
  const auto ey = oracle::random_encoder(4, 3, gen);
  const auto ind = induce(j, ex, ey);
  const auto [nx, ny] = gsib_update(j, ex, ey, params(0.0));
  for (std::size_t x = 0; x < 4; ++x)
    for (std::size_t t = 0; t < 3; ++t) {
      EXPECT_NEAR(nx(x, t), ind.p_tx[t], 1e-14);
      EXPECT_NEAR(ny(x, t), ind.p_ty[t], 1e-14);
    }
  const auto g = gib_update(j, ex, params(0.0, 0.5));
  double z = 0.0;
  for (double v : ind.p_tx) z += v * v;
  for (std::size_t t = 0; t < 3; ++t) EXPECT_NEAR(g(0, t), ind.p_tx[t] * ind.p_tx[t] / z, 1e-14);
}

TEST(Updates, SoftUpdatesRejectTinyAlpha) {
  EXPECT_THROW(gsib_update(diag_half(), Encoder::uniform(2, 2), Encoder::uniform(2, 2), params(1, 0.0)),
               ValidationError);
  EXPECT_THROW(gib_update(diag_half(), Encoder::uniform(2, 2), params(1, 1e-7)), ValidationError);
}

TEST(Updates, GibKeepsPlantedPartition) {
  const auto next = gib_update(planted4(), blocks4(), params(10.0));
  EXPECT_LE(linf_distance(next.cond(), blocks4().cond()), 1e-8);
}

TEST(Updates, DsibBetaZeroPicksHeaviestCluster) {
  std::mt19937_64 gen(9);
  const auto j = oracle::to_joint(oracle::random_grid(5, 5, gen));
  const auto ex = Encoder::deterministic(std::vector<std::size_t>{0, 1, 1, 1, 0}, 2);
  const auto ey = Encoder::deterministic(std::vector<std::size_t>{0, 0, 0, 1, 1}, 2);
  const auto ind = induce(j, ex, ey);
  const auto [nx, ny] = dsib_update(j, ex, ey, params(0.0));
  const std::size_t bx = ind.p_tx[1] > ind.p_tx[0] ? 1 : 0;
  const std::size_t by = ind.p_ty[1] > ind.p_ty[0] ? 1 : 0;
  for (auto l : nx.labels()) EXPECT_EQ(l, bx);
  for (auto l : ny.labels()) EXPECT_EQ(l, by);
}

TEST(Updates, DsibTieBreaksToLowestIndex) {
  const JointDistribution u(Matrix(2, 2, 0.25));
  const auto [nx, ny] = dsib_update(u, Encoder::identity(2), Encoder::identity(2), params(0.0));
  for (auto l : nx.labels()) EXPECT_EQ(l, 0u);
  for (auto l : ny.labels()) EXPECT_EQ(l, 0u);
}

TEST(Updates, DsibPlantedPartitionIsFixedPointAndOptimal) {
  const auto g = oracle::planted(4, 2);
  const auto [nx, ny] = dsib_update(planted4(), blocks4(), blocks4(), params(10.0));
  EXPECT_EQ(nx, blocks4());
  EXPECT_EQ(ny, blocks4());
  const double best = oracle::dsib_exhaustive_min(g, 2, 2, 10.0);
  EXPECT_NEAR(gsib_loss(planted4(), blocks4(), blocks4(), params(10.0, 0.0, 0.0)), best, 1e-12);
}

TEST(Trivial, Detection) {
  EXPECT_TRUE(is_trivial(Encoder::uniform(4, 3)));
  EXPECT_FALSE(is_trivial(Encoder::identity(3)));
  EXPECT_TRUE(is_trivial(Encoder(Matrix{{0.3, 0.7}, {0.3, 0.7}, {0.3, 0.7}})));
}

TEST(Solve, DsibPlantedMatchesExhaustiveMinimum) {
  const auto r = solve(planted4(), SolverKind::dsib, 2, 2, params(10.0), 123);
  EXPECT_NEAR(r.final_loss, oracle::dsib_exhaustive_min(oracle::planted(4, 2), 2, 2, 10.0), 1e-9);
  EXPECT_TRUE(r.converged);
  EXPECT_EQ(r.fixedpoint_class, FixedPointClass::nontrivial);
}

TEST(Solve, GibRecoversBlockInformation) {
  const auto r = solve(planted4(), SolverKind::gib, 2, std::nullopt, params(10.0), 5);
  ASSERT_FALSE(r.enc_y.has_value());
  const auto rel = induce_relevance(planted4(), r.enc_x);
  EXPECT_NEAR(mutual_information(rel.p_ty), kLn2, 1e-8);
  // Lower-bound oracle: the best deterministic encoder over all 16.
  double best = 0.0;
  for (std::uint64_t c = 0; c < 16; ++c) {
    const auto e = Encoder::deterministic(oracle::digits(c, 4, 2), 2);
    best = std::max(best, mutual_information(induce_relevance(planted4(), e).p_ty));
  }
  EXPECT_GE(mutual_information(rel.p_ty), best - 1e-8);
}

TEST(Solve, CompressionOnlyObjectiveIsTrivial) {
  std::mt19937_64 gen(12);
  const auto j = oracle::to_joint(oracle::random_grid(4, 4, gen));
  const auto r = solve(j, SolverKind::gsib, 3, 3, params(0.0), 77);
  EXPECT_GE(r.final_loss, -1e-12);
  EXPECT_TRUE(is_trivial(r.enc_x));
  EXPECT_TRUE(is_trivial(*r.enc_y));
}

TEST(Solve, DeterministicForFixedSeed) {
  std::mt19937_64 gen(13);
  const auto j = oracle::to_joint(oracle::random_grid(5, 5, gen));
  const auto a = solve(j, SolverKind::gsib, 2, 3, params(5.0, 0.5, 0.5), 99);
  const auto b = solve(j, SolverKind::gsib, 2, 3, params(5.0, 0.5, 0.5), 99);
  EXPECT_EQ(a.enc_x, b.enc_x);
  EXPECT_EQ(*a.enc_y, *b.enc_y);
  EXPECT_EQ(a.loss_trajectory, b.loss_trajectory);
}

TEST(Solve, ConvergedResultsAreSelfConsistent) {
  std::mt19937_64 gen(14);
  for (int c = 0; c < 10; ++c) {
    const auto j = oracle::to_joint(oracle::random_grid(6, 6, gen));
    auto p = params(5.0, 0.5, 0.5);
    p.n_restarts = 3;
    const auto r = solve(j, SolverKind::gsib, 3, 3, p, static_cast<std::uint64_t>(c));
    EXPECT_LE(r.loss_trajectory.size(), static_cast<std::size_t>(p.max_iters));
    EXPECT_GE(r.loss_increase_fraction, 0.0);
    EXPECT_LE(r.loss_increase_fraction, 1.0);
    if (r.converged) {
      EXPECT_LE(r.selfconsistency_residual, 10 * p.conv_tol);
      EXPECT_LE(selfconsistency_residual(j, r.enc_x, *r.enc_y, p), 10 * p.conv_tol);
    }
  }
}

TEST(Solve, AnnealingAndAlternatingModeRun) {
  std::mt19937_64 gen(15);
  const auto j = oracle::to_joint(oracle::random_grid(5, 5, gen));
  auto p = params(8.0, 0.5, 0.5);
  p.anneal_schedule = BottleneckParams::default_anneal_schedule(8.0);
  p.mode = UpdateMode::alternating;
  const auto r = solve(j, SolverKind::gsib, 2, 2, p, 3);
  EXPECT_TRUE(std::isfinite(r.final_loss));
  EXPECT_NEAR(r.final_loss, gsib_loss(j, r.enc_x, *r.enc_y, p), 1e-12);
}

TEST(Solve, BestRestartHasLowestLoss) {
  std::mt19937_64 gen(16);
  const auto j = oracle::to_joint(oracle::random_grid(5, 5, gen));
  const auto r = solve(j, SolverKind::dsib, 2, 2, params(4.0), 8);
  ASSERT_EQ(r.restart_losses.size(), 8u);
  for (double l : r.restart_losses) EXPECT_GE(l, r.final_loss);
  EXPECT_EQ(r.restart_losses[r.best_restart], r.final_loss);
}

TEST(Solve, RejectsMissingCardinality) {
  EXPECT_THROW(solve(diag_half(), SolverKind::gsib, 2, std::nullopt, params(1), 1), ValidationError);
}
