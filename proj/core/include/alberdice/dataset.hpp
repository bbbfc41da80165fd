#pragma once

#include "alberdice/mmdp.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace alberdice {

struct Transition {
  int s = 0;
  int joint = 0;
  double r = 0.0;
  int s_next = 0;
  bool done = false;  // s_next is terminal

  bool operator==(const Transition&) const = default;
};

struct OfflineDataset {
  int n_states = 0;
  std::vector<int> action_counts;
  std::vector<Transition> transitions;
  std::vector<int> initial_states;  // multiset D0
  std::map<std::string, std::string> metadata;

  JointActionSpace space() const { return JointActionSpace(action_counts); }
  void validate() const;
  bool operator==(const OfflineDataset&) const = default;
};

using BehaviorPolicy = std::variant<FactorizedPolicy, JointPolicy>;

// Each trajectory picks a mixture component by weight, starts from p0 and
// runs until a terminal state or `horizon` steps.
OfflineDataset generate(const TabularMMDP& mmdp, const std::vector<BehaviorPolicy>& behaviors,
                        const std::vector<double>& weights, int n_trajectories, int horizon, std::uint64_t seed);

// Literal record lists of the matrix game: 'a' {AB}, 'b' {AB, BA},
// 'c' {AA, AB, BA}, 'd' {AA, AB, BA, BB}.
OfflineDataset matrix_dataset(const TabularMMDP& game, char recipe);

// Concatenation; D0 multisets are concatenated too.
OfflineDataset merge(const OfflineDataset& lhs, const OfflineDataset& rhs);

struct EmpiricalDistribution {
  int n_states = 0;
  JointActionSpace space;
  std::vector<double> counts;  // [s * |A| + a]
  std::vector<double> joint;   // normalized counts
  double n = 0.0;

  double operator()(int s, int a) const { return joint[static_cast<std::size_t>(s) * space.size() + a]; }
  std::vector<double> state_marginal() const;
  std::vector<double> agent_marginal(int agent) const;  // [s * |A_i| + a_i]
  bool supported(int s, int a) const { return counts[static_cast<std::size_t>(s) * space.size() + a] > 0.0; }
};

EmpiricalDistribution empirical_distribution(const OfflineDataset& dataset);

// Maximum-likelihood model behind the records: P-hat and mean rewards from
// counts, p0 from D0. Unvisited (s, a) self-loop with zero reward; states
// reached by a `done` record are terminal. Exact-mode training optimizes J_alpha
// under this model, which coincides with the true one on deterministic
// environments.
TabularMMDP empirical_mmdp(const OfflineDataset& dataset, double gamma);

// Count-based data policies. Rows never seen in data are marked absent
// instead of being filled with anything.
struct DataPolicyTables {
  int n_states = 0;
  JointActionSpace space;
  std::vector<std::vector<double>> own;            // pi_i^D, [s * |A_i| + a_i]
  std::vector<std::vector<bool>> state_present;    // [agent][s]
  std::vector<std::vector<double>> partner;        // pi_{-i}^D(a_{-i}|s,a_i), [s * |A| + joint]
  std::vector<std::vector<bool>> cell_present;     // [agent][s * |A_i| + a_i]

  double own_prob(int agent, int s, int ai) const {
    return own[agent][static_cast<std::size_t>(s) * space.agent_size(agent) + ai];
  }
  bool has_state(int agent, int s) const { return state_present[agent][s]; }
  bool has_cell(int agent, int s, int ai) const {
    return cell_present[agent][static_cast<std::size_t>(s) * space.agent_size(agent) + ai];
  }
  // nullopt is the absent marker: (s, a_i) never occurs in the data.
  std::optional<double> partner_prob(int agent, int s, int joint) const;
};

DataPolicyTables fit_data_policies(const OfflineDataset& dataset);

// JSON-lines records plus a sidecar "<path>.meta.json" holding D0, the action
// counts and metadata.
void write_dataset(const OfflineDataset& dataset, const std::filesystem::path& path);
OfflineDataset read_dataset(const std::filesystem::path& path);
std::filesystem::path sidecar_path(const std::filesystem::path& path);

}  // namespace alberdice
