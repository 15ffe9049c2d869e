#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "blab/experiments.hpp"
#include "oracles.hpp"

using namespace blab;

namespace {

GeneratorSpec planted(std::size_t n, std::size_t k, double eps) {
  GeneratorSpec g;
  g.kind = GeneratorKind::planted_blocks;
  g.card_x = g.card_y = n;
  g.k_blocks = k;
  g.noise_eps = eps;
  return g;
}

BottleneckParams params(double beta, double ax = 1.0, double ay = 1.0) {
  BottleneckParams p;
  p.beta = beta;
  p.alpha_x = ax;
  p.alpha_y = ay;
  return p;
}

std::size_t term_index(const std::string& name) {
  for (std::size_t k = 0; k < kNumSummaryTerms; ++k)
    if (name == kSummaryTermNames[k]) return k;
  throw std::out_of_range(name);
}

}  // namespace

TEST(Generate, PlantedBlocks) {
  const auto j = generate(planted(4, 2, 0.0));
  for (std::size_t x = 0; x < 4; ++x)
    for (std::size_t y = 0; y < 4; ++y) EXPECT_EQ(j(x, y), (x / 2 == y / 2) ? 0.125 : 0.0);
  EXPECT_NEAR(mutual_information(j), std::log(2.0), 1e-15);
  const auto u = generate(planted(4, 2, 0.5));
  for (double v : u.probs().flat()) EXPECT_NEAR(v, 1.0 / 16, 1e-16);
  EXPECT_NEAR(mutual_information(u), 0.0, 1e-15);
}

TEST(Generate, PlantedRemainderGoesToLastBlock) {
  const auto j = generate(planted(5, 2, 0.0));
  // Blocks {0,1} and {2,3,4}: 4 + 9 in-block cells share the mass.
  EXPECT_NEAR(j(0, 1), 1.0 / 13, 1e-15);
  EXPECT_NEAR(j(4, 2), 1.0 / 13, 1e-15);
  EXPECT_EQ(j(1, 2), 0.0);
  EXPECT_EQ(block_of(4, 5, 2), 1u);
}

TEST(Generate, DirichletDeterministicAndConcentrates) {
  GeneratorSpec g;
  g.kind = GeneratorKind::dirichlet_random;
  g.card_x = 3;
  g.card_y = 5;
  g.seed = 17;
  EXPECT_EQ(generate(g).probs(), generate(g).probs());
  g.concentration = 1e9;
  const auto j = generate(g);
  double l1 = 0.0;
  for (double v : j.probs().flat()) l1 += std::abs(v - 1.0 / 15);
  EXPECT_LT(l1, 0.01);
}

TEST(Generate, NoisyChannel) {
  GeneratorSpec g;
  g.kind = GeneratorKind::noisy_channel;
  g.card_x = 4;
  g.card_y = 3;
  g.noise_eps = 0.2;
  const auto j = generate(g);
  for (double v : j.marginal_x()) EXPECT_NEAR(v, 0.25, 1e-15);
  EXPECT_NEAR(j(3, 0), 0.25 * 0.8, 1e-15);
  EXPECT_NEAR(j(3, 1), 0.25 * 0.2, 1e-15);
}

TEST(Generate, Validation) {
  auto g = planted(4, 5, 0.0);
  EXPECT_THROW(generate(g), ValidationError);
  g = planted(4, 2, 0.7);
  EXPECT_THROW(generate(g), ValidationError);
}

TEST(Trials, FastEvaluatorMatchesReferencePath) {
  std::mt19937_64 gen(51);
  const auto j = oracle::to_joint(oracle::random_grid(5, 4, gen, 0.2));
  const auto ex = oracle::random_encoder(5, 3, gen);
  const auto ey = Encoder::deterministic(std::vector<std::size_t>{1, 0, 1, 1}, 2);
  const auto p = params(2.5, 0.7, 0.3);
  RunOptions o;
  o.keep_trials = true;
  const auto s = run_trials(j, ex, ey, p, 40, 20, 1234, o);
  const auto truth = evaluate_terms(j, ex, ey);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto est = plugin_estimate(sample_counts(j, 40, derive_seed(1234, i)));
    const auto t = evaluate_terms(est, ex, ey);
    const auto& e = s.trial_results[i].error;
    EXPECT_NEAR(e[0], t.i_alpha_x(0.7) - truth.i_alpha_x(0.7), 1e-12);
    EXPECT_NEAR(e[1], t.i_alpha_y(0.3) - truth.i_alpha_y(0.3), 1e-12);
    EXPECT_NEAR(e[2], t.i_txty - truth.i_txty, 1e-12);
    EXPECT_NEAR(e[3], t.i_txy - truth.i_txy, 1e-12);
    EXPECT_NEAR(e[4], t.i_tyx - truth.i_tyx, 1e-12);
    EXPECT_NEAR(s.trial_results[i].loss_error_gsib(), t.gsib(0.7, 0.3, 2.5) - truth.gsib(0.7, 0.3, 2.5), 1e-12);
    EXPECT_NEAR(s.trial_results[i].loss_error_gib_pair(),
                t.gib_pair(0.7, 0.3, 2.5) - truth.gib_pair(0.7, 0.3, 2.5), 1e-12);
  }
}

TEST(Trials, UniformEncodersCarryNoError) {
  const auto j = generate(planted(6, 3, 0.1));
  const auto s = run_trials(j, Encoder::uniform(6, 3), Encoder::uniform(6, 2), params(1.0), 100, 200, 9);
  EXPECT_LE(std::abs(s.per_term.at("I_alpha_x").mean_error), 1e-15);
  EXPECT_LE(s.per_term.at("I_alpha_x").rms_error, 1e-15);
  EXPECT_LE(s.per_term.at("I_txty").rms_error, 1e-15);
}

TEST(Trials, BiasVarianceDecomposition) {
  std::mt19937_64 gen(52);
  const auto j = oracle::to_joint(oracle::random_grid(4, 4, gen));
  const auto s = run_trials(j, oracle::random_encoder(4, 2, gen), oracle::random_encoder(4, 3, gen),
                            params(3.0, 0.5, 0.5), 50, 500, 3);
  for (const auto& [name, st] : s.per_term) {
    EXPECT_NEAR(st.rms_error * st.rms_error, st.mean_error * st.mean_error + st.variance, 1e-10) << name;
    EXPECT_GE(st.rms_error * st.rms_error, st.mean_error * st.mean_error - 1e-14) << name;
  }
}

TEST(Trials, ThreadCountDoesNotChangeResults) {
  const auto j = generate(planted(6, 2, 0.2));
  const auto ex = Encoder::deterministic(std::vector<std::size_t>{0, 0, 0, 1, 1, 1}, 2);
  RunOptions one, three;
  three.threads = 3;
  const auto a = run_trials(j, ex, ex, params(2.0), 200, 300, 77, one);
  const auto b = run_trials(j, ex, ex, params(2.0), 200, 300, 77, three);
  for (const auto* name : kSummaryTermNames) {
    EXPECT_EQ(a.per_term.at(name).mean_error, b.per_term.at(name).mean_error);
    EXPECT_EQ(a.per_term.at(name).rms_error, b.per_term.at(name).rms_error);
  }
}

TEST(Trials, DeterministicEncoderBiasLaw) {
  // Uniform p(x) on 4 symbols, two clusters of equal mass.
  const JointDistribution j(Matrix(4, 2, 0.125));
  const auto ex = Encoder::deterministic(std::vector<std::size_t>{0, 0, 1, 1}, 2);
  const auto s = run_trials(j, ex, Encoder::uniform(2, 1), params(0.0), 1000, 20000, 5);
  const auto& st = s.per_term.at("I_alpha_x");
  EXPECT_NEAR(st.mean_error, -(2.0 - 1.0) / 2000.0, 3 * st.std_error_of_mean);
  EXPECT_EQ(st.violations, 0u);
  EXPECT_NEAR(s.theory.bias_prediction->i_alpha_x, 1.0, 1e-14);
}

TEST(Trials, GsibTermsIgnoreDuplicatedSymbols) {
  // Splitting every x and y into two equiprobable copies leaves the induced
  // T distributions unchanged; GSIB biases stay put while the relevance-term
  // bias of the GIBs grows with |Y|.
  const auto small = generate(planted(4, 2, 0.2));
  Matrix big(8, 8);
  for (std::size_t x = 0; x < 8; ++x)
    for (std::size_t y = 0; y < 8; ++y) big(x, y) = small(x / 2, y / 2) / 4.0;
  const JointDistribution dup(big);
  const auto e4 = Encoder::deterministic(std::vector<std::size_t>{0, 0, 1, 1}, 2);
  const auto e8 = Encoder::deterministic(std::vector<std::size_t>{0, 0, 0, 0, 1, 1, 1, 1}, 2);
  const auto p = params(1.0, 0.0, 0.0);
  const auto a = run_trials(small, e4, e4, p, 500, 20000, 11);
  const auto b = run_trials(dup, e8, e8, p, 500, 20000, 12);
  for (const char* name : {"I_alpha_x", "I_txty"}) {
    const auto& sa = a.per_term.at(name);
    const auto& sb = b.per_term.at(name);
    EXPECT_NEAR(sa.mean_error, sb.mean_error, 3 * std::hypot(sa.std_error_of_mean, sb.std_error_of_mean)) << name;
  }
  const double ra = a.per_term.at("I_txy").mean_error, rb = b.per_term.at("I_txy").mean_error;
  EXPECT_GT(rb / ra, 1.7);
  EXPECT_LT(rb / ra, 2.6);
  EXPECT_NEAR(a.theory.bias_prediction->i_txty, b.theory.bias_prediction->i_txty, 1e-12);
}

TEST(Compare, EqualCardinalitiesShowNoGap) {
  GeneratorSpec g;
  g.kind = GeneratorKind::noisy_channel;
  g.card_x = g.card_y = 3;
  g.noise_eps = 0.1;
  auto p = params(10.0, 0.0, 0.0);
  p.n_restarts = 4;
  const auto r = compare_ssdr_isdr(g, 3, 3, p, 1000, 100000, 21);
  EXPECT_GE(r.measured_ratio, 0.3);
  EXPECT_LE(r.measured_ratio, 3.0);
  EXPECT_GE(r.predicted_ratio, 0.3);
  EXPECT_LE(r.predicted_ratio, 3.0);
}

TEST(Sweep, EmptyGrid) {
  SweepSpec s;
  EXPECT_TRUE(sweep(s).empty());
}

TEST(Sweep, BiasScalesAsInverseN) {
  SweepSpec s;
  s.generator = planted(4, 2, 0.1);
  s.kind = SolverKind::dsib;
  s.params = params(10.0, 0.0, 0.0);
  s.n_grid = {250, 500, 1000, 2000, 4000};
  s.card_grid = {{2, 2}};
  s.trials = 10000;
  s.master_seed = 4;
  const auto pts = sweep(s);
  ASSERT_EQ(pts.size(), 5u);
  std::vector<double> n, bias;
  for (const auto& p : pts) {
    ASSERT_TRUE(p.summary) << p.error;
    n.push_back(static_cast<double>(p.n));
    bias.push_back(p.summary->per_term.at("I_alpha_x").mean_error);
  }
  EXPECT_NEAR(loglog_slope(n, bias), -1.0, 0.15);
  const auto again = sweep(s);
  for (std::size_t i = 0; i < pts.size(); ++i)
    EXPECT_EQ(pts[i].summary->per_term.at("L_gsib").mean_error, again[i].summary->per_term.at("L_gsib").mean_error);
}

TEST(Sweep, BudgetEnforced) {
  SweepSpec s;
  s.n_grid = {1000000};
  s.trials = 100000;
  EXPECT_THROW(sweep(s), ValidationError);
}

TEST(Sweep, FailuresAreRecorded) {
  SweepSpec s;
  s.generator = planted(4, 2, 0.0);
  s.n_grid = {100};
  s.card_grid = {{2, 2}};
  s.trials = 1;  // run_trials rejects fewer than two trials
  const auto pts = sweep(s);
  ASSERT_EQ(pts.size(), 1u);
  EXPECT_FALSE(pts[0].summary.has_value());
  EXPECT_FALSE(pts[0].error.empty());
  EXPECT_EQ(term_index("L_gsib"), 5u);
}

TEST(RunTrials, TrivialEncoderCompressionTermIsExactlyZero) {
  const auto j = generate(planted(6, 2, 0.2));
  const auto s = run_trials(j, Encoder::uniform(6, 3), Encoder::uniform(6, 2), params(2.0), 50, 200, 12);
  EXPECT_EQ(s.per_term.at("I_alpha_x").variance, 0.0);
  EXPECT_EQ(s.per_term.at("I_alpha_y").max_abs_deviation, 0.0);
}
