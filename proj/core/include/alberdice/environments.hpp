#pragma once

#include "alberdice/mmdp.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace alberdice {

struct MatrixGameSpec {
  std::string name = "matrix";
  std::array<std::array<double, 2>, 2> payoff{};  // payoff[a1][a2], actions A=0, B=1
};

MatrixGameSpec penalty_xor_spec();
MatrixGameSpec xor_spec();

// Single state, gamma = 0, horizon 1, self-loop.
TabularMMDP build_matrix_game(const MatrixGameSpec& spec);

enum class CollisionRule { cell_block, swap_block };
enum class BridgeStart { on_bridge_hard, platform_original };

struct BridgeSpec {
  int bridge_length = 3;
  int platform_size = 2;
  double step_reward = -0.1;
  CollisionRule collision_rule = CollisionRule::cell_block;
  int horizon = 50;
  BridgeStart start = BridgeStart::on_bridge_hard;
  double gamma = 0.99;
};

enum BridgeAction : int { kLeft = 0, kRight = 1, kUp = 2, kDown = 3, kStay = 4 };

// Two p x p platforms joined by a one-cell-wide corridor along row 0.
// Agent 0 starts west and must reach the east platform; agent 1 the reverse.
class BridgeLayout {
 public:
  explicit BridgeLayout(BridgeSpec spec);

  const BridgeSpec& spec() const { return spec_; }
  int rows() const { return spec_.platform_size; }
  int cols() const { return 2 * spec_.platform_size + spec_.bridge_length; }
  int n_cells() const { return static_cast<int>(cells_.size()); }
  std::pair<int, int> cell(int c) const { return cells_[c]; }
  int cell_at(int row, int col) const;  // -1 when off the grid
  bool on_west(int c) const { return cells_[c].second < spec_.platform_size; }
  bool on_east(int c) const { return cells_[c].second >= spec_.platform_size + spec_.bridge_length; }

  int n_states() const { return n_cells() * (n_cells() - 1); }
  int state(int c0, int c1) const;
  std::pair<int, int> cells_of(int s) const { return pairs_[s]; }
  bool is_goal(int s) const;
  int start_state() const;
  // Cell reached by one move ignoring the other agent.
  int step(int c, int action) const;

 private:
  BridgeSpec spec_;
  std::vector<std::pair<int, int>> cells_;
  std::vector<std::pair<int, int>> pairs_;
  std::vector<int> state_of_pair_;
};

TabularMMDP build_bridge(const BridgeSpec& spec);

// Hand-crafted optimal joint policy for one crossing order: `first` crosses
// while the other retreats. Greedy on the joint optimum, ties resolved toward
// the mode's opening move and then the lowest joint index.
JointPolicy bridge_expert(const TabularMMDP& bridge, const BridgeLayout& layout, int first);

std::vector<std::string> builtin_environments();
// "penalty-xor", "xor", "bridge" (default spec), "bridge-original".
TabularMMDP make_builtin(const std::string& name);

TabularMMDP load_mmdp(const std::filesystem::path& path);
void save_mmdp(const TabularMMDP& mmdp, const std::filesystem::path& path);
std::string mmdp_to_json(const TabularMMDP& mmdp);
TabularMMDP mmdp_from_json(const std::string& text);

}  // namespace alberdice
