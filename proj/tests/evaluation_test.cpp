#include "alberdice/baselines.hpp"
#include "alberdice/environments.hpp"
#include "alberdice/evaluation.hpp"
#include "support/instances.hpp"

#include <gtest/gtest.h>

#include <cmath>

namespace alberdice {
namespace {

const TabularMMDP& penalty_xor() {
  static const TabularMMDP game = build_matrix_game(penalty_xor_spec());
  return game;
}

TEST(OodRate, BehaviorCloningOnDatasetBHitsTheUnseenPairsHalfTheTime) {
  const OfflineDataset b = matrix_dataset(penalty_xor(), 'b');
  const auto dist = empirical_distribution(b);
  const FactorizedPolicy bc = bc_train(b).policy;
  EXPECT_DOUBLE_EQ(ood_rate(bc, dist, OodMode::support_exact), 0.5);
  EXPECT_NEAR(ood_rate(bc, dist, OodMode::sampled, 100000, 3), 0.5, 0.02);
}

TEST(OodRate, FullCoverageAndPointMasses) {
  const auto d = empirical_distribution(matrix_dataset(penalty_xor(), 'd'));
  EXPECT_EQ(ood_rate(FactorizedPolicy::uniform(penalty_xor()), d, OodMode::support_exact), 0.0);
  const auto a = empirical_distribution(matrix_dataset(penalty_xor(), 'a'));
  FactorizedPolicy ab = FactorizedPolicy::uniform(penalty_xor());
  ab.tables = {{1.0, 0.0}, {0.0, 1.0}};
  EXPECT_EQ(ood_rate(ab, a, OodMode::support_exact), 0.0);
  ab.tables[0] = {0.0, 1.0};
  EXPECT_EQ(ood_rate(ab, a, OodMode::support_exact), 1.0);
  EXPECT_EQ(ood_rate(ab, a, OodMode::sampled, 1000, 0), 1.0);
}

TEST(EpisodicReturn, MonteCarloAgreesWithBackwardInduction) {
  Rng rng(8);
  for (int trial = 0; trial < 5; ++trial) {
    const TabularMMDP m = testing::random_mmdp(rng, 4, {2, 3}, 0.9);
    const FactorizedPolicy pi = testing::random_policy(rng, 4, {2, 3});
    const double exact = episodic_return(m, pi, 12);
    const MonteCarloEstimate mc = monte_carlo_return(m, pi, 12, 20000, trial);
    EXPECT_EQ(mc.episodes, 20000);
    EXPECT_LE(std::abs(mc.mean - exact), 4.0 * mc.standard_error) << "trial " << trial;
  }
}

TEST(EpisodicReturn, MatrixGameIsTheExpectedPayoff) {
  EXPECT_DOUBLE_EQ(episodic_return(penalty_xor(), FactorizedPolicy::uniform(penalty_xor()), 1), 0.0);
  FactorizedPolicy ab = FactorizedPolicy::uniform(penalty_xor());
  ab.tables = {{1.0, 0.0}, {0.0, 1.0}};
  EXPECT_DOUBLE_EQ(episodic_return(penalty_xor(), ab, 1), 1.0);
}

std::vector<RunRecord> sample_runs() {
  std::vector<RunRecord> runs;
  for (int seed = 0; seed < 3; ++seed) {
    runs.push_back({"alberdice", "c", static_cast<std::uint64_t>(seed), 1.0 + seed, 0.0, 0.1, {0.0, 1.0, 0.0, 0.0}});
    runs.push_back({"bc", "c", static_cast<std::uint64_t>(seed), 0.0, 0.25, 0.1, {0.25, 0.25, 0.25, 0.25}});
  }
  runs.push_back({"bc", "a", 0, 1.0, 0.0, 0.1, {0.0, 1.0, 0.0, 0.0}});
  return runs;
}

TEST(Report, MeansStandardErrorsAndOrdering) {
  const EvalReport report = make_report(sample_runs(), {"AA", "AB", "BA", "BB"});
  ASSERT_EQ(report.rows.size(), 3u);
  EXPECT_EQ(report.rows[0].dataset, "a");
  EXPECT_EQ(report.rows[1].algorithm, "alberdice");
  EXPECT_EQ(report.rows[2].algorithm, "bc");
  const ReportRow& alber = report.rows[1];
  EXPECT_EQ(alber.runs, 3);
  EXPECT_DOUBLE_EQ(alber.mean_return, 2.0);
  ASSERT_TRUE(alber.se_return.has_value());
  EXPECT_NEAR(*alber.se_return, 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_EQ(*report.rows[2].se_ood, 0.0);
  EXPECT_FALSE(report.rows[0].se_return.has_value());
  EXPECT_EQ(alber.mean_joint, (std::vector<double>{0.0, 1.0, 0.0, 0.0}));
}

TEST(Report, CsvAndTable) {
  const EvalReport report = make_report(sample_runs(), {"AA", "AB", "BA", "BB"});
  const std::string csv = report_csv(report);
  EXPECT_EQ(csv.substr(0, csv.find('\n')),
            "dataset,algorithm,runs,mean_return,se_return,mean_ood,se_ood,p_AA,p_AB,p_BA,p_BB");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_NE(csv.find("a,bc,1,1,,0,"), std::string::npos);  // single run: empty SE fields
  const std::string table = render_table(report);
  EXPECT_NE(table.find("alberdice"), std::string::npos);
  EXPECT_NE(table.find("+-"), std::string::npos);
}

TEST(BridgeRendering, ShowsTheOtherAgentAndOneArrowPerCell) {
  const BridgeSpec spec;
  const BridgeLayout layout(spec);
  const TabularMMDP bridge = build_bridge(spec);
  const std::string grid = render_bridge_policy(layout, FactorizedPolicy::uniform(bridge), 0, 0);
  EXPECT_NE(grid.find("agent 1"), std::string::npos);
  EXPECT_NE(grid.find('2'), std::string::npos);
}

}  // namespace
}  // namespace alberdice
