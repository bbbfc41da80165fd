#include "alberdice/environments.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>

namespace alberdice {

MatrixGameSpec penalty_xor_spec() { return {"penalty-xor", {{{0.0, 1.0}, {1.0, -2.0}}}}; }

MatrixGameSpec xor_spec() { return {"xor", {{{0.0, 1.0}, {1.0, 0.0}}}}; }

TabularMMDP build_matrix_game(const MatrixGameSpec& spec) {
  for (const auto& row : spec.payoff)
    for (double v : row)
      if (!std::isfinite(v)) throw ValidationError("matrix game payoff must be finite");
  TabularMMDP g;
  g.state_names = {"s"};
  g.action_names = {{"A", "B"}, {"A", "B"}};
  g.transition.assign(4, 1.0);
  g.reward = {spec.payoff[0][0], spec.payoff[0][1], spec.payoff[1][0], spec.payoff[1][1]};
  g.gamma = 0.0;
  g.p0 = {1.0};
  g.horizon = 1;
  return g;
}

BridgeLayout::BridgeLayout(BridgeSpec spec) : spec_(spec) {
  if (spec_.bridge_length < 1) throw ValidationError("bridge_length must be >= 1");
  if (spec_.platform_size < 1) throw ValidationError("platform_size must be >= 1");
  if (spec_.horizon < 1) throw ValidationError("horizon must be >= 1");
  if (!std::isfinite(spec_.step_reward)) throw ValidationError("step_reward must be finite");
  if (!(spec_.gamma >= 0.0 && spec_.gamma < 1.0)) throw ValidationError("discount must lie in [0, 1)");
  const int p = spec_.platform_size;
  for (int col = 0; col < cols(); ++col)
    for (int row = 0; row < rows(); ++row) {
      const bool bridge = col >= p && col < p + spec_.bridge_length;
      if (!bridge || row == 0) cells_.emplace_back(row, col);
    }
  const int n = n_cells();
  state_of_pair_.assign(static_cast<std::size_t>(n) * n, -1);
  for (int c0 = 0; c0 < n; ++c0)
    for (int c1 = 0; c1 < n; ++c1)
      if (c0 != c1) {
        state_of_pair_[static_cast<std::size_t>(c0) * n + c1] = static_cast<int>(pairs_.size());
        pairs_.emplace_back(c0, c1);
      }
}

int BridgeLayout::cell_at(int row, int col) const {
  for (int c = 0; c < n_cells(); ++c)
    if (cells_[c] == std::pair{row, col}) return c;
  return -1;
}

int BridgeLayout::state(int c0, int c1) const {
  const int s = (c0 == c1) ? -1 : state_of_pair_[static_cast<std::size_t>(c0) * n_cells() + c1];
  if (s < 0) throw ValidationError("agents cannot share a cell");
  return s;
}

bool BridgeLayout::is_goal(int s) const {
  const auto [c0, c1] = pairs_[s];
  return on_east(c0) && on_west(c1);
}

int BridgeLayout::start_state() const {
  const int p = spec_.platform_size;
  if (spec_.start == BridgeStart::on_bridge_hard) {
    if (spec_.bridge_length < 2) throw ValidationError("the on-bridge start needs bridge_length >= 2");
    return state(cell_at(0, p), cell_at(0, p + spec_.bridge_length - 1));
  }
  // Each agent starts diagonal to the bridge mouth on its own platform.
  const int row = std::min(1, p - 1);
  return state(cell_at(row, p - 1), cell_at(row, p + spec_.bridge_length));
}

int BridgeLayout::step(int c, int action) const {
  auto [row, col] = cells_[c];
  switch (action) {
    case kLeft: --col; break;
    case kRight: ++col; break;
    case kUp: --row; break;
    case kDown: ++row; break;
    default: break;
  }
  const int next = cell_at(row, col);
  return next < 0 ? c : next;
}

namespace {

std::pair<int, int> resolve_moves(const BridgeLayout& layout, int c0, int c1, int a0, int a1) {
  int t0 = layout.step(c0, a0);
  int t1 = layout.step(c1, a1);
  if (layout.spec().collision_rule == CollisionRule::cell_block) {
    const bool blocked0 = t0 == c1;
    const bool blocked1 = t1 == c0;
    if (blocked0) t0 = c0;
    if (blocked1) t1 = c1;
    if (t0 == t1) return {c0, c1};
    return {t0, t1};
  }
  // swap-block: following into a vacated cell is allowed.
  if (t0 == t1) return {c0, c1};
  if (t0 == c1 && t1 == c0) return {c0, c1};
  if (t0 == c1 && t1 == c1) t0 = c0;
  if (t1 == c0 && t0 == c0) t1 = c1;
  if (t0 == t1) return {c0, c1};
  return {t0, t1};
}

std::string cell_name(const BridgeLayout& layout, int c) {
  const auto [row, col] = layout.cell(c);
  std::ostringstream os;
  os << 'r' << row << 'c' << col;
  return os.str();
}

}  // namespace

TabularMMDP build_bridge(const BridgeSpec& spec) {
  const BridgeLayout layout(spec);
  const int S = layout.n_states();
  const int A = 25;
  const char* names[] = {"Left", "Right", "Up", "Down", "Stay"};

  TabularMMDP g;
  g.action_names.assign(2, std::vector<std::string>(names, names + 5));
  g.gamma = spec.gamma;
  g.horizon = spec.horizon;
  g.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
  g.reward.assign(static_cast<std::size_t>(S) * A, 0.0);
  g.terminal.assign(S, false);
  g.p0.assign(S, 0.0);
  for (int s = 0; s < S; ++s) {
    const auto [c0, c1] = layout.cells_of(s);
    g.state_names.push_back(cell_name(layout, c0) + "|" + cell_name(layout, c1));
    const bool goal = layout.is_goal(s);
    g.terminal[s] = goal;
    for (int a = 0; a < A; ++a) {
      const auto row = (static_cast<std::size_t>(s) * A + a) * S;
      if (goal) {
        g.transition[row + s] = 1.0;
        continue;
      }
      const auto [n0, n1] = resolve_moves(layout, c0, c1, a / 5, a % 5);
      g.transition[row + layout.state(n0, n1)] = 1.0;
      g.reward[static_cast<std::size_t>(s) * A + a] = spec.step_reward;
    }
  }
  g.p0[layout.start_state()] = 1.0;

  // Some joint goal state must be reachable from the start.
  std::vector<bool> seen(S, false);
  std::queue<int> frontier;
  frontier.push(layout.start_state());
  seen[layout.start_state()] = true;
  bool reachable = false;
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop();
    if (layout.is_goal(s)) {
      reachable = true;
      break;
    }
    for (int a = 0; a < A; ++a)
      for (int sn = 0; sn < S; ++sn)
        if (g.P(s, a, sn) > 0.0 && !seen[sn]) {
          seen[sn] = true;
          frontier.push(sn);
        }
  }
  if (!reachable) throw ValidationError("bridge spec makes the goal unreachable (agents cannot pass each other)");
  return g;
}

JointPolicy bridge_expert(const TabularMMDP& bridge, const BridgeLayout& layout, int first) {
  if (first != 0 && first != 1) throw ValidationError("crossing order must name agent 0 or 1");
  const JointOptimum opt = joint_optimum(bridge);
  const int S = bridge.n_states();
  const int A = bridge.n_joint();
  // Agent 0 crossing first means both shift east at the start; agent 1 first, both west.
  const int opening = first == 0 ? kRight * 5 + kRight : kLeft * 5 + kLeft;
  JointPolicy pi{std::vector<double>(static_cast<std::size_t>(S) * A, 0.0), S, A};
  for (int s = 0; s < S; ++s) {
    const auto best = opt.optimal_actions(s, 1e-9);
    const bool has_opening = std::find(best.begin(), best.end(), opening) != best.end();
    // Among tied optima prefer moves the other agent does not block.
    auto unblocked = [&](int joint) {
      if (bridge.is_terminal(s)) return true;
      const auto [c0, c1] = layout.cells_of(s);
      const int n0 = layout.step(c0, joint / 5), n1 = layout.step(c1, joint % 5);
      if (n0 == n1 || (n0 == c1 && n1 == c0)) return false;
      return bridge.P(s, joint, layout.state(n0, n1)) == 1.0;
    };
    const auto clean = std::find_if(best.begin(), best.end(), unblocked);
    const int a = (s == layout.start_state() && has_opening) ? opening : (clean != best.end() ? *clean : best.front());
    pi.table[static_cast<std::size_t>(s) * A + a] = 1.0;
  }
  return pi;
}

std::vector<std::string> builtin_environments() { return {"penalty-xor", "xor", "bridge", "bridge-original"}; }

TabularMMDP make_builtin(const std::string& name) {
  if (name == "penalty-xor") return build_matrix_game(penalty_xor_spec());
  if (name == "xor") return build_matrix_game(xor_spec());
  if (name == "bridge") return build_bridge(BridgeSpec{});
  if (name == "bridge-original") {
    BridgeSpec spec;
    spec.start = BridgeStart::platform_original;
    return build_bridge(spec);
  }
  throw ValidationError("unknown environment '" + name + "'");
}

}  // namespace alberdice
