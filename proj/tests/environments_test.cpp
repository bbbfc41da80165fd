#include "alberdice/environments.hpp"
#include "alberdice/mmdp.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

namespace alberdice {
namespace {

TEST(MatrixGames, PenaltyXorPayoffs) {
  const TabularMMDP g = build_matrix_game(penalty_xor_spec());
  EXPECT_EQ(g.n_states(), 1);
  EXPECT_EQ(g.gamma, 0.0);
  EXPECT_EQ(g.horizon, 1);
  EXPECT_EQ(g.r(0, 0), 0.0);
  EXPECT_EQ(g.r(0, 1), 1.0);
  EXPECT_EQ(g.r(0, 2), 1.0);
  EXPECT_EQ(g.r(0, 3), -2.0);
}

TEST(MatrixGames, PlainXorPayoffs) {
  const TabularMMDP g = build_matrix_game(xor_spec());
  EXPECT_EQ(g.reward, (std::vector<double>{0.0, 1.0, 1.0, 0.0}));
}

TEST(MatrixGames, ZeroPayoffGivesZeroForEveryPolicy) {
  const TabularMMDP g = build_matrix_game(MatrixGameSpec{});
  FactorizedPolicy pi = FactorizedPolicy::uniform(g);
  EXPECT_EQ(evaluate_policy(g, pi).J, 0.0);
  pi.tables[0] = {0.3, 0.7};
  EXPECT_EQ(evaluate_policy(g, pi).J, 0.0);
}

TEST(Bridge, DefaultLayoutSize) {
  const BridgeLayout layout{BridgeSpec{}};
  EXPECT_EQ(layout.n_cells(), 11);
  EXPECT_EQ(layout.n_states(), 110);
  const TabularMMDP bridge = build_bridge(BridgeSpec{});
  EXPECT_EQ(bridge.n_states(), 110);
  EXPECT_EQ(bridge.n_joint(), 25);
  int terminals = 0;
  for (int s = 0; s < bridge.n_states(); ++s) terminals += bridge.is_terminal(s);
  EXPECT_EQ(terminals, 16);  // 4 * 4 goal pairs
}

TEST(Bridge, HardStartSitsAtTheBridgeEnds) {
  const BridgeLayout layout{BridgeSpec{}};
  const auto [c0, c1] = layout.cells_of(layout.start_state());
  EXPECT_EQ(layout.cell(c0), (std::pair{0, 2}));
  EXPECT_EQ(layout.cell(c1), (std::pair{0, 4}));
}

TEST(Bridge, OnlyCoordinatedMovesAreOptimalAtTheStart) {
  const BridgeSpec spec;
  const TabularMMDP bridge = build_bridge(spec);
  const BridgeLayout layout(spec);
  const JointOptimum optimum = joint_optimum(bridge);
  const auto space = bridge.joint_space();
  const std::vector<int> expected{space.encode(std::vector<int>{kLeft, kLeft}),
                                  space.encode(std::vector<int>{kRight, kRight})};
  EXPECT_EQ(optimum.optimal_actions(layout.start_state()), expected);
}

TEST(Bridge, OracleOptimalEpisodicReturn) {
  const TabularMMDP bridge = build_bridge(BridgeSpec{});
  const JointOptimum optimum = joint_optimum(bridge);
  // Nine steps: one agent backs off the bridge while the other crosses.
  EXPECT_NEAR(episodic_value(bridge, optimum.policy, 50), -0.9, 1e-12);
}

TEST(Bridge, GoalStatesAreWorthZero) {
  const BridgeSpec spec;
  TabularMMDP bridge = build_bridge(spec);
  const BridgeLayout layout(spec);
  int goal = -1;
  for (int s = 0; s < layout.n_states(); ++s)
    if (layout.is_goal(s)) goal = s;
  ASSERT_GE(goal, 0);
  std::fill(bridge.p0.begin(), bridge.p0.end(), 0.0);
  bridge.p0[goal] = 1.0;
  EXPECT_EQ(episodic_value(bridge, JointPolicy::from(FactorizedPolicy::uniform(bridge), bridge.joint_space()), 50),
            0.0);
}

TEST(Bridge, CellBlockForbidsSharingAndSwapping) {
  const BridgeSpec spec;
  const TabularMMDP bridge = build_bridge(spec);
  const BridgeLayout layout(spec);
  const auto space = bridge.joint_space();
  for (int s = 0; s < bridge.n_states(); ++s)
    for (int a = 0; a < space.size(); ++a)
      for (int sn = 0; sn < bridge.n_states(); ++sn) {
        if (bridge.P(s, a, sn) == 0.0) continue;
        EXPECT_EQ(bridge.P(s, a, sn), 1.0);
        const auto [c0, c1] = layout.cells_of(s);
        const auto [n0, n1] = layout.cells_of(sn);
        EXPECT_FALSE(n0 == c1 && n1 == c0) << bridge.state_names[s] << " swaps";
      }
}

TEST(Bridge, EveryOptimalDeterministicPolicyIsCollisionFree) {
  const BridgeSpec spec;
  const TabularMMDP bridge = build_bridge(spec);
  const BridgeLayout layout(spec);
  const JointOptimum optimum = joint_optimum(bridge);
  const auto space = bridge.joint_space();
  // Along the greedy optimal rollout no joint move is blocked by the other agent.
  for (int first = 0; first < 2; ++first) {
    const JointPolicy expert = bridge_expert(bridge, layout, first);
    int s = layout.start_state();
    for (int t = 0; t < 50 && !bridge.is_terminal(s); ++t) {
      int a = 0;
      while (expert.prob(s, a) == 0.0) ++a;
      const auto [c0, c1] = layout.cells_of(s);
      const auto parts = space.decode(a);
      int next = 0;
      while (bridge.P(s, a, next) == 0.0) ++next;
      const auto [n0, n1] = layout.cells_of(next);
      EXPECT_EQ(n0, layout.step(c0, parts[0]));
      EXPECT_EQ(n1, layout.step(c1, parts[1]));
      const auto best = optimum.optimal_actions(s);
      EXPECT_NE(std::find(best.begin(), best.end(), a), best.end());
      s = next;
    }
    EXPECT_TRUE(bridge.is_terminal(s));
  }
}

TEST(Bridge, ExpertsOpenInOppositeDirections) {
  const BridgeSpec spec;
  const TabularMMDP bridge = build_bridge(spec);
  const BridgeLayout layout(spec);
  const auto space = bridge.joint_space();
  const int s0 = layout.start_state();
  EXPECT_EQ(bridge_expert(bridge, layout, 0).prob(s0, space.encode(std::vector<int>{kRight, kRight})), 1.0);
  EXPECT_EQ(bridge_expert(bridge, layout, 1).prob(s0, space.encode(std::vector<int>{kLeft, kLeft})), 1.0);
}

TEST(Bridge, UnreachableGoalIsRejected) {
  BridgeSpec spec;
  spec.platform_size = 1;  // both agents must pass each other in a 1-wide corridor
  EXPECT_THROW(build_bridge(spec), ValidationError);
}

TEST(Bridge, OriginalStartIsSolvable) {
  const TabularMMDP bridge = make_builtin("bridge-original");
  EXPECT_LT(episodic_value(bridge, joint_optimum(bridge).policy, 50), 0.0);
}

TEST(Builtins, UnknownNameIsRejected) { EXPECT_THROW(make_builtin("nope"), ValidationError); }

TEST(MmdpFiles, PenaltyXorRoundTrips) {
  const TabularMMDP g = build_matrix_game(penalty_xor_spec());
  EXPECT_EQ(mmdp_from_json(mmdp_to_json(g)), g);
}

TEST(MmdpFiles, BridgeReloadKeepsTheOracleValue) {
  const TabularMMDP bridge = build_bridge(BridgeSpec{});
  const auto path = std::filesystem::temp_directory_path() / "alberdice_bridge_roundtrip.json";
  save_mmdp(bridge, path);
  const TabularMMDP loaded = load_mmdp(path);
  std::filesystem::remove(path);
  EXPECT_EQ(loaded, bridge);
  EXPECT_EQ(joint_optimum(loaded).value.J, joint_optimum(bridge).value.J);
}

TEST(MmdpFiles, SubStochasticRowIsRejected) {
  TabularMMDP g = build_matrix_game(penalty_xor_spec());
  const std::string good = mmdp_to_json(g);
  g.transition[0] = 0.9;  // saving does not validate, loading does
  EXPECT_THROW(mmdp_from_json(mmdp_to_json(g)), ValidationError);
  EXPECT_NO_THROW(mmdp_from_json(good));
}

TEST(MmdpFiles, MalformedDocumentsAreRejected) {
  EXPECT_THROW(mmdp_from_json("{"), ValidationError);
  EXPECT_THROW(mmdp_from_json("{\"states\": [\"s\"]}"), ValidationError);
}

}  // namespace
}  // namespace alberdice
