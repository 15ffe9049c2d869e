#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "blab/io.hpp"
#include "oracles.hpp"

using namespace blab;

namespace {

std::string temp_file(const std::string& name, const std::string& text) {
  const auto path = std::filesystem::temp_directory_path() / ("blab_test_io_" + name);
  std::ofstream(path, std::ios::binary) << text;
  return path.string();
}

}  // namespace

TEST(Format, ShortestRoundTrip) {
  EXPECT_EQ(io::fmt(0.05), "0.05");
  EXPECT_EQ(io::fmt(1.0), "1");
  EXPECT_EQ(io::fmt(-std::numeric_limits<double>::infinity()), "-inf");
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(gen);
    EXPECT_EQ(std::stod(io::fmt(v)), v);
  }
}

TEST(Joint, JsonAndCsvRoundTripExactly) {
  std::mt19937_64 gen(11);
  for (int rep = 0; rep < 20; ++rep) {
    const auto p = oracle::to_joint(oracle::random_grid(3, 5, gen, 0.2));
    EXPECT_EQ(io::joint_from_json(io::joint_to_json(p)).probs(), p.probs());
    EXPECT_EQ(io::joint_from_json(io::json::parse(io::joint_to_json(p).dump())).probs(), p.probs());
    EXPECT_EQ(io::joint_from_csv(io::joint_to_csv(p)).probs(), p.probs());
  }
}

TEST(Joint, CsvMissingCellsAreZero) {
  const auto p = io::joint_from_csv("# comment\nx,y,p\n0,0,0.5\n2,1,0.5\n");
  EXPECT_EQ(p.card_x(), 3u);
  EXPECT_EQ(p.card_y(), 2u);
  EXPECT_EQ(p(1, 1), 0.0);
  EXPECT_EQ(p(2, 1), 0.5);
}

TEST(Joint, MalformedInputsAreValidationErrors) {
  EXPECT_THROW(io::joint_from_csv("a,b,c\n0,0,1\n"), ValidationError);
  EXPECT_THROW(io::joint_from_csv("x,y,p\n0,0,abc\n"), ValidationError);
  EXPECT_THROW(io::joint_from_csv("x,y,p\n0,0,0.4\n"), ValidationError);
  EXPECT_THROW(io::joint_from_json(io::json{{"card_x", 1}, {"card_y", 2}, {"probs", {{1.0}}}}), DimensionMismatch);
  EXPECT_THROW(io::joint_from_json(io::json{{"card_x", 1}, {"card_y", 1}}), ValidationError);
  EXPECT_THROW(io::parse_json("{oops", "cfg"), ValidationError);
  EXPECT_THROW(io::read_file("/nonexistent/blab/file.json"), ValidationError);
}

TEST(Joint, LoadDispatchesOnExtension) {
  const JointDistribution p(Matrix{{0.25, 0.25}, {0.125, 0.375}});
  EXPECT_EQ(io::load_joint(temp_file("j.csv", io::joint_to_csv(p))).probs(), p.probs());
  EXPECT_EQ(io::load_joint(temp_file("j.json", io::joint_to_json(p).dump())).probs(), p.probs());
}

TEST(Counts, JsonRoundTrip) {
  const JointDistribution p(Matrix{{0.1, 0.2}, {0.3, 0.4}});
  const auto c = sample_counts(p, 500, 9);
  const auto back = io::counts_from_json(io::counts_to_json(c));
  EXPECT_EQ(back.counts, c.counts);
  EXPECT_EQ(back.total_n, 500u);
  auto j = io::counts_to_json(c);
  j["n"] = 499;
  EXPECT_THROW(io::counts_from_json(j), ValidationError);
  EXPECT_NE(io::counts_to_csv(c).find("x,y,count\n"), std::string::npos);
}

TEST(Encoders, LoadFromPairFileOrSolveOutput) {
  const auto ex = Encoder::deterministic(std::vector<std::size_t>{0, 1, 1}, 2);
  const auto ey = Encoder::uniform(2, 3);
  const io::json pair = {{"enc_x", io::encoder_to_json(ex)}, {"enc_y", io::encoder_to_json(ey)}};
  auto [a, b] = io::load_encoders(temp_file("enc.json", pair.dump()));
  EXPECT_EQ(a, ex);
  ASSERT_TRUE(b);
  EXPECT_EQ(*b, ey);

  const io::json wrapped = {{"meta", io::json::object()}, {"result", {{"enc_x", io::encoder_to_json(ex)}, {"enc_y", nullptr}}}};
  auto [c, d] = io::load_encoders(temp_file("solve.json", wrapped.dump()));
  EXPECT_EQ(c, ex);
  EXPECT_FALSE(d);
}

TEST(Reports, TheoryCsvIsOneHeaderAndOneRow) {
  BoundConfig cfg;
  cfg.n = 10000;
  const auto r = make_report(cfg, BiasForm::linear);
  const std::string csv = io::theory_report_to_csv(r);
  const auto nl = csv.find('\n');
  ASSERT_NE(nl, std::string::npos);
  EXPECT_EQ(csv.find('\n', nl + 1), csv.size() - 1);
  const std::string head = csv.substr(0, nl), row = csv.substr(nl + 1);
  EXPECT_EQ(std::count(head.begin(), head.end(), ','), std::count(row.begin(), row.end(), ','));
  EXPECT_NE(head.find("loss_bound_gsib"), std::string::npos);
  const auto j = io::theory_report_to_json(r);
  EXPECT_DOUBLE_EQ(j["loss_bound_gsib"].get<double>(), r.loss_bound_gsib);
  EXPECT_EQ(j["per_term"].size(), 5u);
  EXPECT_TRUE(j["bias_prediction"].is_null());
}

TEST(Reports, SolverResultCarriesEncodersAndDiagnostics) {
  const JointDistribution p(Matrix{{0.4, 0.1}, {0.1, 0.4}});
  BottleneckParams prm;
  prm.beta = 5.0;
  const auto r = solve(p, SolverKind::gsib, 2, 2, prm, 1);
  const auto j = io::solver_result_to_json(r);
  EXPECT_EQ(j["kind"], "gsib");
  EXPECT_EQ(io::encoder_from_json(j["enc_x"], "enc_x"), r.enc_x);
  EXPECT_EQ(j["restart_losses"].size(), static_cast<std::size_t>(prm.n_restarts));
  EXPECT_NE(io::solver_result_to_csv(r).find("side,source,cluster,q\n"), std::string::npos);
}

TEST(Reports, SummaryRowsFollowSweepColumns) {
  const JointDistribution p(Matrix{{0.4, 0.1}, {0.1, 0.4}});
  const auto ex = Encoder::deterministic(std::vector<std::size_t>{0, 1}, 2);
  const auto s = run_trials(p, ex, ex, BottleneckParams{}, 100, 50, 4);
  const std::string rows = io::summary_csv_rows("c0", s);
  EXPECT_EQ(std::count(rows.begin(), rows.end(), '\n'), static_cast<long>(kNumSummaryTerms));
  const std::string header = io::kSweepCsvHeader;
  const auto first = rows.substr(0, rows.find('\n'));
  EXPECT_EQ(std::count(first.begin(), first.end(), ','), std::count(header.begin(), header.end(), ','));
  EXPECT_EQ(first.rfind("c0,100,50,I_alpha_x,", 0), 0u);
}
