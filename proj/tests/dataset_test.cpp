#include "alberdice/dataset.hpp"
#include "alberdice/environments.hpp"
#include "alberdice/experiments.hpp"
#include "support/instances.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <set>

namespace alberdice {
namespace {

const TabularMMDP& penalty_xor() {
  static const TabularMMDP game = build_matrix_game(penalty_xor_spec());
  return game;
}

TEST(MatrixDatasets, LiteralRecordLists) {
  const OfflineDataset c = matrix_dataset(penalty_xor(), 'c');
  ASSERT_EQ(c.transitions.size(), 3u);
  EXPECT_EQ(c.transitions[0].joint, 0);
  EXPECT_EQ(c.transitions[1].joint, 1);
  EXPECT_EQ(c.transitions[2].joint, 2);
  EXPECT_EQ(c.transitions[0].r, 0.0);
  EXPECT_EQ(c.transitions[1].r, 1.0);
  EXPECT_EQ(c.transitions[2].r, 1.0);
  EXPECT_EQ(matrix_dataset(penalty_xor(), 'a').transitions.size(), 1u);
  EXPECT_EQ(matrix_dataset(penalty_xor(), 'b').transitions.size(), 2u);
  EXPECT_EQ(matrix_dataset(penalty_xor(), 'd').transitions.size(), 4u);
  EXPECT_THROW(matrix_dataset(penalty_xor(), 'e'), ValidationError);
}

TEST(Generate, EmptyMixtureIsRejected) {
  EXPECT_THROW(generate(penalty_xor(), {}, {}, 10, 1, 0), ValidationError);
}

TEST(Generate, DeterministicPolicyGivesIdenticalTrajectories) {
  const BridgeSpec spec;
  const TabularMMDP bridge = build_bridge(spec);
  const BridgeLayout layout(spec);
  const OfflineDataset d = generate(bridge, {bridge_expert(bridge, layout, 0)}, {1.0}, 20, 50, 5);
  const std::size_t length = d.transitions.size() / 20;
  ASSERT_EQ(d.transitions.size(), 20 * length);
  for (std::size_t k = 0; k < d.transitions.size(); ++k) EXPECT_EQ(d.transitions[k], d.transitions[k % length]);
}

TEST(Generate, RewardsMatchTheModelAndSeedsReproduce) {
  Rng rng(12);
  const TabularMMDP m = testing::random_mmdp(rng, 4, {2, 2}, 0.9);
  const FactorizedPolicy pi = testing::random_policy(rng, 4, {2, 2});
  const OfflineDataset a = generate(m, {pi}, {1.0}, 30, 10, 77);
  const OfflineDataset b = generate(m, {pi}, {1.0}, 30, 10, 77);
  EXPECT_EQ(a, b);
  for (const auto& t : a.transitions) EXPECT_EQ(t.r, m.r(t.s, t.joint));
  EXPECT_NE(generate(m, {pi}, {1.0}, 30, 10, 78), a);
}

TEST(Generate, BridgeOptimalCoverageIsTheUnionOfBothModes) {
  const BridgeSpec spec;
  const TabularMMDP bridge = build_bridge(spec);
  const BridgeLayout layout(spec);
  std::set<int> expected;
  for (int first = 0; first < 2; ++first) {
    const JointPolicy expert = bridge_expert(bridge, layout, first);
    int s = layout.start_state();
    while (!bridge.is_terminal(s)) {
      expected.insert(s);
      int a = 0;
      while (expert.prob(s, a) == 0.0) ++a;
      int next = 0;
      while (bridge.P(s, a, next) == 0.0) ++next;
      s = next;
    }
  }
  const OfflineDataset d = bridge_optimal_dataset(bridge, layout, 500, 0);
  std::set<int> covered;
  for (const auto& t : d.transitions) covered.insert(t.s);
  EXPECT_EQ(covered, expected);
  EXPECT_EQ(d.initial_states.size(), 500u);
}

TEST(EmpiricalDistribution, CountsOnMatrixDatasets) {
  const auto c = empirical_distribution(matrix_dataset(penalty_xor(), 'c'));
  for (int a = 0; a < 3; ++a) EXPECT_NEAR(c(0, a), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(c(0, 3), 0.0);
  EXPECT_FALSE(c.supported(0, 3));
  const auto d = empirical_distribution(matrix_dataset(penalty_xor(), 'd'));
  for (int a = 0; a < 4; ++a) EXPECT_EQ(d(0, a), 0.25);
  const auto a = empirical_distribution(matrix_dataset(penalty_xor(), 'a'));
  EXPECT_EQ(a(0, 1), 1.0);
}

TEST(EmpiricalDistribution, MarginalsAreConsistent) {
  Rng rng(6);
  const TabularMMDP m = testing::random_mmdp(rng, 5, {2, 3}, 0.8);
  const auto dist = empirical_distribution(testing::random_dataset(m, rng, 40, 8));
  double total = 0.0;
  for (double v : dist.joint) total += v;
  EXPECT_NEAR(total, 1.0, 1e-12);
  const auto states = dist.state_marginal();
  for (int i = 0; i < 2; ++i) {
    const auto marginal = dist.agent_marginal(i);
    const int Ai = dist.space.agent_size(i);
    for (int s = 0; s < 5; ++s) {
      double row = 0.0;
      for (int ai = 0; ai < Ai; ++ai) row += marginal[s * Ai + ai];
      EXPECT_NEAR(row, states[s], 1e-12);
    }
  }
}

TEST(EmpiricalDistribution, EmptyDatasetIsRejected) {
  OfflineDataset d;
  d.n_states = 1;
  d.action_counts = {2, 2};
  EXPECT_THROW(empirical_distribution(d), ValidationError);
}

TEST(DataPolicies, DatasetCConditionals) {
  const DataPolicyTables data = fit_data_policies(matrix_dataset(penalty_xor(), 'c'));
  EXPECT_NEAR(data.own_prob(0, 0, 0), 2.0 / 3.0, 1e-15);
  EXPECT_NEAR(data.own_prob(0, 0, 1), 1.0 / 3.0, 1e-15);
  EXPECT_EQ(data.partner_prob(0, 0, 1), 0.5);  // a2 = B given a1 = A
  EXPECT_EQ(data.partner_prob(0, 0, 2), 1.0);  // a2 = A given a1 = B
  EXPECT_EQ(data.partner_prob(0, 0, 3), 0.0);  // BB never seen, row present
}

TEST(DataPolicies, UnseenRowsAreAbsentNotUniform) {
  const DataPolicyTables data = fit_data_policies(matrix_dataset(penalty_xor(), 'a'));
  EXPECT_FALSE(data.has_cell(0, 0, 1));
  EXPECT_FALSE(data.partner_prob(0, 0, 2).has_value());
  EXPECT_TRUE(data.partner_prob(0, 0, 1).has_value());
  EXPECT_EQ(*data.partner_prob(0, 0, 1), 1.0);  // single joint action: point masses
}

TEST(DataPolicies, ConditionalsFactorizeTheCounts) {
  Rng rng(21);
  const TabularMMDP m = testing::random_mmdp(rng, 4, {3, 2}, 0.7);
  const OfflineDataset d = testing::random_dataset(m, rng, 50, 6);
  const auto dist = empirical_distribution(d);
  const auto data = fit_data_policies(d);
  const auto space = d.space();
  for (int i = 0; i < 2; ++i) {
    const auto marginal = dist.agent_marginal(i);
    const int Ai = space.agent_size(i);
    for (int s = 0; s < 4; ++s)
      for (int a = 0; a < space.size(); ++a) {
        const int ai = space.component(a, i);
        const auto partner = data.partner_prob(i, s, a);
        if (!partner) {
          EXPECT_EQ(dist(s, a), 0.0);
          continue;
        }
        EXPECT_NEAR(*partner * marginal[s * Ai + ai], dist(s, a), 1e-12);
        if (dist(s, a) > 0.0) EXPECT_GT(*partner, 0.0);
      }
  }
}

// Sum of log pi_i^D(a_i|s) over records for a candidate table.
double log_likelihood(const OfflineDataset& d, int agent, const std::vector<double>& table) {
  const auto space = d.space();
  const int Ai = space.agent_size(agent);
  double out = 0.0;
  for (const auto& t : d.transitions) out += std::log(table[t.s * Ai + space.component(t.joint, agent)]);
  return out;
}

TEST(DataPolicies, TabularMleBeatsPerturbedTables) {
  Rng rng(55);
  const TabularMMDP m = testing::random_mmdp(rng, 3, {3, 3}, 0.5);
  const OfflineDataset d = testing::random_dataset(m, rng, 30, 5, 0.0);
  const auto data = fit_data_policies(d);
  for (int agent = 0; agent < 2; ++agent) {
    const double best = log_likelihood(d, agent, data.own[agent]);
    for (int k = 0; k < 50; ++k) {
      std::vector<double> perturbed = data.own[agent];
      for (int s = 0; s < 3; ++s) {
        double total = 0.0;
        for (int a = 0; a < 3; ++a) total += (perturbed[s * 3 + a] *= std::exp(0.3 * rng.normal()));
        for (int a = 0; a < 3; ++a) perturbed[s * 3 + a] /= total;
      }
      EXPECT_LE(log_likelihood(d, agent, perturbed), best + 1e-12);
    }
  }
}

TEST(EmpiricalModel, MatchesDeterministicDynamicsOnVisitedCells) {
  const BridgeSpec spec;
  const TabularMMDP bridge = build_bridge(spec);
  const OfflineDataset d = bridge_mix_dataset(bridge, BridgeLayout(spec), 30, 2);
  const TabularMMDP model = empirical_mmdp(d, bridge.gamma);
  for (int s = 0; s < bridge.n_states(); ++s) EXPECT_NEAR(model.p0[s], bridge.p0[s], 1e-12);
  for (const auto& t : d.transitions) {
    EXPECT_NEAR(model.P(t.s, t.joint, t.s_next), 1.0, 1e-12);
    EXPECT_NEAR(model.r(t.s, t.joint), bridge.r(t.s, t.joint), 1e-12);
    EXPECT_EQ(model.is_terminal(t.s_next), bridge.is_terminal(t.s_next));
  }
}

TEST(EmpiricalModel, FrequenciesAndUnvisitedCells) {
  OfflineDataset d;
  d.n_states = 2;
  d.action_counts = {1, 2};
  d.transitions = {{0, 0, 1.0, 0, false}, {0, 0, 3.0, 1, false}, {0, 0, 2.0, 1, false}};
  d.initial_states = {0, 0, 1, 0};
  const TabularMMDP m = empirical_mmdp(d, 0.5);
  EXPECT_DOUBLE_EQ(m.P(0, 0, 1), 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(m.r(0, 0), 2.0);
  EXPECT_EQ(m.P(0, 1, 0), 1.0);  // never tried: self-loop
  EXPECT_EQ(m.r(0, 1), 0.0);
  EXPECT_EQ(m.p0, (std::vector<double>{0.75, 0.25}));
}

TEST(Merge, ConcatenatesRecordsAndStarts) {
  const auto b = matrix_dataset(penalty_xor(), 'b');
  const auto c = matrix_dataset(penalty_xor(), 'c');
  const auto merged = merge(b, c);
  EXPECT_EQ(merged.transitions.size(), 5u);
  EXPECT_EQ(merged.initial_states.size(), b.initial_states.size() + c.initial_states.size());
}

}  // namespace
}  // namespace alberdice
