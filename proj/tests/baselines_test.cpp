#include "alberdice/baselines.hpp"
#include "alberdice/environments.hpp"
#include "alberdice/evaluation.hpp"
#include "alberdice/experiments.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace alberdice {
namespace {

const TabularMMDP& penalty_xor() {
  static const TabularMMDP game = build_matrix_game(penalty_xor_spec());
  return game;
}

TEST(BehaviorCloning, DatasetCMarginalsAndProduct) {
  const BaselineResult bc = bc_train(matrix_dataset(penalty_xor(), 'c'));
  for (int i = 0; i < 2; ++i) {
    EXPECT_NEAR(bc.policy.prob(i, 0, 0), 2.0 / 3.0, 1e-15);
    EXPECT_NEAR(bc.policy.prob(i, 0, 1), 1.0 / 3.0, 1e-15);
  }
  const auto joint = bc.policy.joint_table(penalty_xor().joint_space());
  const std::vector<double> expected{4.0 / 9.0, 2.0 / 9.0, 2.0 / 9.0, 1.0 / 9.0};
  for (int a = 0; a < 4; ++a) EXPECT_NEAR(joint[a], expected[a], 1e-15);
}

TEST(BehaviorCloning, StatesWithoutDataAreFlaggedAndUniform) {
  const BridgeSpec spec;
  const TabularMMDP bridge = build_bridge(spec);
  const BridgeLayout layout(spec);
  const OfflineDataset d = bridge_optimal_dataset(bridge, layout, 20, 0);
  const BaselineResult bc = bc_train(d);
  ASSERT_EQ(bc.undefined_states.size(), 2u);
  std::vector<bool> seen(bridge.n_states(), false);
  for (const auto& t : d.transitions) seen[t.s] = true;
  for (int i = 0; i < 2; ++i)
    for (int s = 0; s < bridge.n_states(); ++s) {
      EXPECT_EQ(bc.undefined_states[i][s], !seen[s]);
      if (!seen[s])
        for (double p : bc.policy.row(i, s)) EXPECT_DOUBLE_EQ(p, 0.2);
    }
}

TEST(OptiDice, DatasetCMarginalsAtUnitAlpha) {
  // w(s, a) proportional to exp(r / alpha): pi_1(A) = (1 + e) / (1 + 2e).
  const OptiDiceResult opti = optidice_train(matrix_dataset(penalty_xor(), 'c'), 0.0, 1.0);
  const double e = std::numbers::e;
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(opti.result.policy.prob(i, 0, 0), (1.0 + e) / (1.0 + 2.0 * e), 1e-8);
  EXPECT_EQ(opti.correction[3], 0.0);  // BB absent from the data
  EXPECT_NEAR(opti.correction[1] / opti.correction[0], e, 1e-8);
}

TEST(OptiDice, SmallAlphaConcentratesOnTheGoodPairsButMiscoordinates) {
  const OfflineDataset c = matrix_dataset(penalty_xor(), 'c');
  const OptiDiceResult opti = optidice_train(c, 0.0, 0.1);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(opti.result.policy.prob(i, 0, 0), 0.5, 1e-4);
  EXPECT_NEAR(ood_rate(opti.result.policy, empirical_distribution(c), OodMode::support_exact), 0.25, 1e-4);
}

TEST(OptiDice, PlainXorSplitsEvenlyAndMiscoordinates) {
  const TabularMMDP xor_game = build_matrix_game(xor_spec());
  const OptiDiceResult opti = optidice_train(matrix_dataset(xor_game, 'c'), 0.0, 0.1);
  const auto joint = opti.result.policy.joint_table(xor_game.joint_space());
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(opti.result.policy.prob(i, 0, 0), 0.5, 1e-4);
  EXPECT_GE(joint[0] + joint[3], 0.45);
}

TEST(OptiDice, CorrectionsAreNonnegative) {
  const BridgeSpec spec;
  const TabularMMDP bridge = build_bridge(spec);
  const OfflineDataset d = bridge_mix_dataset(bridge, BridgeLayout(spec), 50, 1);
  const OptiDiceResult opti = optidice_train(d, bridge.gamma, 0.1);
  const auto dist = empirical_distribution(d);
  for (std::size_t k = 0; k < opti.correction.size(); ++k) {
    EXPECT_GE(opti.correction[k], 0.0);
    if (dist.counts[k] == 0.0) EXPECT_EQ(opti.correction[k], 0.0);
  }
  opti.result.policy.validate();
}

TEST(OptiDice, RejectsNonPositiveAlpha) {
  EXPECT_THROW(optidice_train(matrix_dataset(penalty_xor(), 'c'), 0.0, 0.0), ValidationError);
}

}  // namespace
}  // namespace alberdice
