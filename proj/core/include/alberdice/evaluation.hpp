#pragma once

#include "alberdice/dataset.hpp"
#include "alberdice/environments.hpp"
#include "alberdice/mmdp.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace alberdice {

double episodic_return(const TabularMMDP& mmdp, const FactorizedPolicy& policy, int horizon);

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  int episodes = 0;
};

MonteCarloEstimate monte_carlo_return(const TabularMMDP& mmdp, const FactorizedPolicy& policy, int horizon,
                                      int episodes, std::uint64_t seed);

enum class OodMode { support_exact, sampled };

// Pr over s ~ d^D(s), a ~ prod_i pi_i(.|s) that (s, a) never occurs in D.
double ood_rate(const FactorizedPolicy& policy, const EmpiricalDistribution& dist, OodMode mode,
                int samples = 100000, std::uint64_t seed = 0);

struct RunRecord {
  std::string algorithm;
  std::string dataset;
  std::uint64_t seed = 0;
  double episodic_return = 0.0;
  double ood_rate = 0.0;
  double seconds = 0.0;
  std::vector<double> joint_at_start;  // joint policy at the first start state
};

struct ReportRow {
  std::string algorithm;
  std::string dataset;
  int runs = 0;
  double mean_return = 0.0;
  std::optional<double> se_return;  // null for a single run
  double mean_ood = 0.0;
  std::optional<double> se_ood;
  std::vector<double> mean_joint;
};

struct EvalReport {
  std::vector<ReportRow> rows;  // sorted by (dataset, algorithm)
  std::vector<std::string> action_labels;  // joint action labels for mean_joint
};

EvalReport make_report(const std::vector<RunRecord>& runs, std::vector<std::string> action_labels = {});

std::string render_table(const EvalReport& report);
std::string report_csv(const EvalReport& report);

// Bridge grid with the arrow agent `agent` prefers in every cell while the
// other agent sits at `other_cell` (marked with its number).
std::string render_bridge_policy(const BridgeLayout& layout, const FactorizedPolicy& policy, int agent, int other_cell);

}  // namespace alberdice
