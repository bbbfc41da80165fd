#pragma once

#include "alberdice/dataset.hpp"
#include "alberdice/mmdp.hpp"
#include "alberdice/solver.hpp"

#include <string>
#include <vector>

namespace alberdice {

// J_alpha(pi) = sum d^pi r - alpha KL(d^pi || d^D); -inf when d^pi leaves the
// support of d^D.
double regularized_objective(const TabularMMDP& mmdp, const JointPolicy& policy, const EmpiricalDistribution& dist,
                             double alpha);

// The same quantity assembled from agent i's view: its marginal occupancy
// d_i(s, a_i), the partner policy and the data conditionals.
double regularized_objective(const TabularMMDP& mmdp, const FactorizedPolicy& policy, const EmpiricalDistribution& dist,
                             double alpha, int agent);

struct ModifiedReward {
  int n_states = 0;
  int n_joint = 0;
  std::vector<double> values;  // [s * |A| + a]; r where d^pi(s,a) = 0

  double operator()(int s, int a) const { return values[static_cast<std::size_t>(s) * n_joint + a]; }
};

ModifiedReward modified_reward(const TabularMMDP& mmdp, const JointPolicy& policy, const EmpiricalDistribution& dist,
                               double alpha);

enum class OracleMethod { automatic, newton, closed_form };

struct OracleResult {
  double value = 0.0;              // max over d_i of J_alpha with pi_{-i} fixed
  std::vector<double> occupancy;   // d_i [s * |A_i| + a_i]
  std::vector<double> policy;      // pi_i [s * |A_i| + a_i], uniform where d_i(s) = 0
  std::vector<bool> kept_states;   // feasible region after support restriction
  int iterations = 0;
  double kkt_residual = 0.0;
  bool closed_form = false;
};

// Exact regularized best response of `agent` against the others in `policy`,
// solved in the primal over the Bellman-flow polytope of the true model.
OracleResult best_response_oracle(const TabularMMDP& mmdp, const FactorizedPolicy& policy,
                                  const EmpiricalDistribution& dist, double alpha, int agent,
                                  OracleMethod method = OracleMethod::automatic, double tolerance = 1e-10);

double best_response_gap(const TabularMMDP& mmdp, const FactorizedPolicy& policy, const EmpiricalDistribution& dist,
                         double alpha, int agent);

struct MonotonicityViolation {
  int index = 0;  // snapshot index whose objective dropped
  int agent = -1;
  double before = 0.0;
  double after = 0.0;
};

struct NashReport {
  std::vector<double> gaps;                // regularized, per agent
  std::vector<double> unregularized_gaps;  // plain return, per agent
  double objective = 0.0;
  std::vector<double> trajectory;          // J_alpha per snapshot
  std::vector<MonotonicityViolation> violations;
  double epsilon = 0.0;                    // max regularized gap
  double tolerance = 1e-6;
  bool monotone = true;
};

NashReport verify_policy(const TabularMMDP& mmdp, const FactorizedPolicy& policy, const EmpiricalDistribution& dist,
                         double alpha);

NashReport audit_training(const TrainReport& report, const TabularMMDP& mmdp, const EmpiricalDistribution& dist,
                          double alpha, double tolerance = 1e-6);

}  // namespace alberdice
