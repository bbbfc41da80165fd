#pragma once

#include "alberdice/dataset.hpp"
#include "alberdice/environments.hpp"
#include "alberdice/evaluation.hpp"
#include "alberdice/nash.hpp"
#include "alberdice/solver.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace alberdice {

struct Verdict {
  std::string criterion;
  bool pass = false;
  std::string detail;
  bool informational = false;  // printed, never affects the exit status
};

std::string render_verdicts(const std::vector<Verdict>& verdicts);
bool all_pass(const std::vector<Verdict>& verdicts);

std::vector<std::string> joint_action_labels(const TabularMMDP& mmdp);

// "a".."d" for matrix games; "optimal", "mix" for Bridge layouts.
std::vector<std::string> dataset_recipes(const std::string& env);
OfflineDataset make_dataset(const std::string& env, const std::string& recipe, std::uint64_t seed,
                            int n_trajectories = 500);

// Two crossing orders, equally weighted, each a deterministic expert.
OfflineDataset bridge_optimal_dataset(const TabularMMDP& bridge, const BridgeLayout& layout, int n_trajectories,
                                      std::uint64_t seed);
// The optimal dataset plus as many uniform-random trajectories.
OfflineDataset bridge_mix_dataset(const TabularMMDP& bridge, const BridgeLayout& layout, int n_trajectories,
                                  std::uint64_t seed);

struct RunOutcome {
  RunRecord record;
  FactorizedPolicy policy;
  std::vector<double> gaps;  // regularized best-response gaps
  NashReport audit;          // AlberDICE runs only
  bool audited = false;
};

struct MatrixExperimentConfig {
  std::string env = "penalty-xor";
  double alpha = 1.0;
  Mode mode = Mode::exact;
  int K = 100000;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool parallel = true;
};

struct ExperimentResult {
  std::vector<RunOutcome> runs;
  EvalReport report;
  std::vector<Verdict> verdicts;
  double seconds = 0.0;
};

ExperimentResult run_matrix_experiment(const MatrixExperimentConfig& config);

struct BridgeExperimentConfig {
  BridgeSpec spec;
  double alpha = 0.01;
  Mode mode = Mode::exact;
  int K = 100000;
  int n_trajectories = 500;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  bool baselines = true;
  bool parallel = true;
};

struct BridgeExperimentResult : ExperimentResult {
  double oracle_return = 0.0;
  double oracle_value = 0.0;  // discounted
};

BridgeExperimentResult run_bridge_experiment(const BridgeExperimentConfig& config);

}  // namespace alberdice
