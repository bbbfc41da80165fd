#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace alberdice {

class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Row-major joint indexing: agent 0 is the most significant digit, so for two
// agents joint = a1 * |A2| + a2.
class JointActionSpace {
 public:
  JointActionSpace() = default;
  explicit JointActionSpace(std::vector<int> sizes);

  int n_agents() const { return static_cast<int>(sizes_.size()); }
  int size() const { return total_; }
  int agent_size(int agent) const { return sizes_[agent]; }
  const std::vector<int>& sizes() const { return sizes_; }

  int encode(std::span<const int> actions) const;
  std::vector<int> decode(int joint) const;
  int component(int joint, int agent) const { return (joint / strides_[agent]) % sizes_[agent]; }
  // Replaces agent's component of `joint` with `action`.
  int with_component(int joint, int agent, int action) const;

 private:
  std::vector<int> sizes_;
  std::vector<int> strides_;
  int total_ = 0;
};

struct TabularMMDP {
  std::vector<std::string> state_names;
  std::vector<std::vector<std::string>> action_names;  // per agent
  std::vector<double> transition;                      // [(s * A + a) * S + s']
  std::vector<double> reward;                          // [s * A + a]
  double gamma = 0.0;
  std::vector<double> p0;
  // Terminal states are exits: no reward accrues from them and occupancy
  // flowing into them leaves the system.
  std::vector<bool> terminal;
  std::optional<int> horizon;

  int n_states() const { return static_cast<int>(state_names.size()); }
  int n_agents() const { return static_cast<int>(action_names.size()); }
  JointActionSpace joint_space() const;
  int n_joint() const;

  double P(int s, int a, int s_next) const {
    return transition[(static_cast<std::size_t>(s) * n_joint() + a) * n_states() + s_next];
  }
  double r(int s, int a) const { return reward[static_cast<std::size_t>(s) * n_joint() + a]; }
  bool is_terminal(int s) const { return !terminal.empty() && terminal[s]; }

  // Throws ValidationError with a description of the first violated invariant.
  void validate() const;
};

bool operator==(const TabularMMDP& lhs, const TabularMMDP& rhs);

// Per-agent conditional tables pi_i(a_i|s), stored row-major [s * |A_i| + a_i].
struct FactorizedPolicy {
  std::vector<std::vector<double>> tables;
  std::vector<int> action_counts;
  int n_states = 0;

  static FactorizedPolicy uniform(int n_states, std::vector<int> action_counts);
  static FactorizedPolicy uniform(const TabularMMDP& mmdp);

  int n_agents() const { return static_cast<int>(tables.size()); }
  double prob(int agent, int s, int a) const {
    return tables[agent][static_cast<std::size_t>(s) * action_counts[agent] + a];
  }
  std::span<const double> row(int agent, int s) const;
  std::span<double> row(int agent, int s);

  double joint_prob(const JointActionSpace& space, int s, int joint) const;
  // Product over every agent except `agent`.
  double partner_prob(const JointActionSpace& space, int s, int joint, int agent) const;
  // Dense joint table [s * |A| + a], the product of the per-agent rows.
  std::vector<double> joint_table(const JointActionSpace& space) const;

  void validate(double tol = 1e-12) const;
};

bool operator==(const FactorizedPolicy& lhs, const FactorizedPolicy& rhs);

// Arbitrary (possibly correlated) joint policy pi(a|s), [s * |A| + a].
struct JointPolicy {
  std::vector<double> table;
  int n_states = 0;
  int n_joint = 0;

  static JointPolicy from(const FactorizedPolicy& policy, const JointActionSpace& space);
  double prob(int s, int a) const { return table[static_cast<std::size_t>(s) * n_joint + a]; }
};

struct OccupancyTable {
  std::vector<double> values;  // [s * n_actions + a]
  int n_states = 0;
  int n_actions = 0;
  double gamma = 0.0;

  double operator()(int s, int a) const { return values[static_cast<std::size_t>(s) * n_actions + a]; }
  std::vector<double> state_marginal() const;
  double total() const;
};

struct ValueTable {
  std::vector<double> V;
  std::vector<double> Q;  // [s * n_actions + a]
  double J = 0.0;         // E_{p0}[V]
};

OccupancyTable stationary_distribution(const TabularMMDP& mmdp, const JointPolicy& policy);
OccupancyTable stationary_distribution(const TabularMMDP& mmdp, const FactorizedPolicy& policy);

// inf-norm of the Bellman-flow residual of an occupancy over joint actions.
double flow_residual(const TabularMMDP& mmdp, const OccupancyTable& d);

ValueTable evaluate_policy(const TabularMMDP& mmdp, const JointPolicy& policy);
ValueTable evaluate_policy(const TabularMMDP& mmdp, const FactorizedPolicy& policy);

// Undiscounted finite-horizon backward induction, value at p0.
double episodic_value(const TabularMMDP& mmdp, const JointPolicy& policy, int horizon);

// Single-agent MDP seen by `agent` when every other agent follows `others`.
TabularMMDP reduced_mdp(const TabularMMDP& mmdp, const FactorizedPolicy& others, int agent);

struct BestResponse {
  ValueTable value;
  std::vector<double> policy;  // deterministic table [s * |A_i| + a_i]
};

// Exact best response by policy iteration on the reduced MDP.
BestResponse best_response_value(const TabularMMDP& mmdp, const FactorizedPolicy& others, int agent);

struct JointOptimum {
  ValueTable value;
  JointPolicy policy;  // deterministic, first maximizer
  // Joint actions within tol of the optimal Q at each state.
  std::vector<int> optimal_actions(int s, double tol = 1e-9) const;
};

// Centralized optimum over joint actions (the coordination upper bound).
JointOptimum joint_optimum(const TabularMMDP& mmdp);

}  // namespace alberdice
