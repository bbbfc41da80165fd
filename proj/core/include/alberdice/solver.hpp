#pragma once

#include "alberdice/dataset.hpp"
#include "alberdice/mmdp.hpp"

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace alberdice {

enum class Mode { exact, resampled };

// per_sample: one exp term per record of D (or of D_rho).
// per_cell: records pooled per (s, a_i), i.e. L(nu, w*) with w a table.
enum class ObjectiveForm { per_sample, per_cell };

struct InnerConfig {
  double tolerance = 1e-8;  // gradient inf-norm
  int max_iterations = 500;
  double ridge = 1e-12;
  double armijo = 1e-4;
};

struct TrainConfig {
  double alpha = 1.0;
  Mode mode = Mode::exact;
  int K = 100000;
  InnerConfig inner;
  int max_sweeps = 1000;
  double stop_tolerance = 1e-8;     // objective improvement over a sweep
  double policy_tolerance = 1e-12;  // max table change over a sweep
  std::vector<int> agent_order;     // empty: 0..N-1
  bool shuffle_order = false;       // reshuffle every sweep from the seed
  bool incremental = false;         // one Newton step per agent update
  double init_noise = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ResampleResult {
  std::vector<int> indices;  // multiset D_rho, |indices| = K
  std::vector<double> rho;   // per record of D
  double rho_bar = 0.0;      // mean of rho over D
};

// Dual problem in nu: every term is e(nu) = base + sum coef * nu(state),
// weighted by exp(log_weight).
struct NuTerm {
  double log_weight = 0.0;
  double base = 0.0;
  std::vector<std::pair<int, double>> coef;
};

struct NuProblem {
  int n_states = 0;
  double alpha = 1.0;
  double gamma = 0.0;
  std::vector<double> p0;  // empirical D0 distribution over all states
  std::vector<NuTerm> terms;
  std::vector<int> active;  // states whose nu is optimized
  bool shift_invariant = true;

  double e(const NuTerm& term, const std::vector<double>& nu) const;
};

enum class NuForm { plain, log_sum_exp };

double nu_objective(const NuProblem& problem, const std::vector<double>& nu, NuForm form);

// L(nu, w) for an arbitrary w per term, the inner maximand.
double nu_lagrangian(const NuProblem& problem, const std::vector<double>& nu, const std::vector<double>& w);

struct NuSolution {
  std::vector<double> nu;  // size n_states; inactive entries untouched
  double objective = 0.0;  // plain form
  double gradient_norm = 0.0;
  int iterations = 0;
  NuForm form = NuForm::plain;
  bool converged = false;
};

// Damped Newton. The stable log-sum-exp form is minimized whenever it is
// shift invariant and its minimizer is then shifted onto the plain minimizer.
// Throws SolverError on non-convergence unless `single_step`.
NuSolution solve_nu(const NuProblem& problem, const InnerConfig& config, std::vector<double> warm_start = {},
                    bool single_step = false);

// C* = alpha / (1 - gamma) * log sum_g W_g exp(e_g / alpha).
double shift_constant(const NuProblem& problem, const std::vector<double>& nu);

double closed_form_w(double e_hat, double alpha);

double rho(const FactorizedPolicy& others, const DataPolicyTables& data, const Transition& x, int agent);

double advantage_hat(const std::vector<double>& nu, const Transition& x, double alpha, double gamma,
                     const FactorizedPolicy& others, const DataPolicyTables& data, int agent);

ResampleResult resample(std::vector<double> rho_values, int K, std::uint64_t seed);

// Everything agent i's update needs from (D, pi_{-i}): importance weights,
// out-of-data partner mass and the cells the policy may use.
struct AgentView {
  int agent = 0;
  int n_states = 0;
  int n_actions = 0;  // |A_i|
  double alpha = 1.0;
  double gamma = 0.0;
  std::vector<double> rho;          // per record
  std::vector<double> base;         // r - alpha log rho, per record (-inf when rho == 0)
  std::vector<double> ood_mass;     // [s * |A_i| + a_i], partner mass on joint actions absent from D
  std::vector<double> dead_mass;    // share of a cell's rho-mass flowing to non-viable states
  std::vector<bool> allowed;        // [s * |A_i| + a_i]
  std::vector<bool> kept;           // per record: enters the dual
  std::vector<bool> reachable;      // per state, from D0 through allowed cells
  std::vector<bool> has_data;       // per state
  bool exact_regime = true;         // every D0 state has a cell with no out-of-data mass
  std::vector<double> p0;           // empirical D0

  int cell(int s, int ai) const { return s * n_actions + ai; }
};

AgentView analyze_agent(const OfflineDataset& dataset, const DataPolicyTables& data, const FactorizedPolicy& others,
                        int agent, double alpha, double gamma);

// Record weights entering the dual: rho / N over D in exact mode, rho_bar / K
// per resampled copy otherwise.
std::vector<double> sample_weights(const AgentView& view, const ResampleResult* resampled);

NuProblem make_nu_problem(const AgentView& view, const OfflineDataset& dataset, const std::vector<double>& weights,
                          ObjectiveForm form);

struct ETable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> values;  // -inf where the policy must put no mass
  std::vector<bool> support;
  std::vector<bool> myopic;    // state outside the dual: e ignores nu

  double operator()(int s, int a) const { return values[static_cast<std::size_t>(s) * n_actions + a]; }
};

ETable build_e_table(const AgentView& view, const OfflineDataset& dataset, const std::vector<double>& weights,
                     const std::vector<double>& nu);

struct CorrectionTable {
  int n_states = 0;
  int n_actions = 0;
  std::vector<double> values;  // exp(e / alpha - 1), 0 off support
};

CorrectionTable corrections(const ETable& e, double alpha);

struct Extraction {
  std::vector<double> table;       // [s * |A_i| + a_i]
  std::vector<bool> undefined;     // per state: no data, uniform fallback
};

// pi_i(a|s) proportional to pi_i^D(a|s) exp(e(s,a) / alpha).
Extraction extract_policy(const ETable& e, const DataPolicyTables& data, int agent, double alpha);

struct AgentUpdate {
  int sweep = 0;
  int agent = -1;  // -1 for the initial snapshot
  double objective = -std::numeric_limits<double>::infinity();  // J_alpha after the update
  bool exact_regime = true;
  int inner_iterations = 0;
  double inner_gradient = 0.0;
  double seconds = 0.0;
};

struct TrainReport {
  std::string algorithm = "alberdice";
  std::vector<AgentUpdate> updates;
  std::vector<FactorizedPolicy> snapshots;  // aligned with updates
  std::vector<std::vector<bool>> undefined_states;  // per agent
  std::vector<double> final_gaps;          // regularized best-response gap per agent
  std::string stopping_reason;
  int sweeps = 0;
  double seconds = 0.0;
};

struct TrainResult {
  FactorizedPolicy policy;
  TrainReport report;
};

// The MMDP, when given, is used only to log J_alpha and final gaps.
TrainResult train(const OfflineDataset& dataset, double gamma, const TrainConfig& config,
                  const TabularMMDP* mmdp = nullptr);

// Seeded start: pi_i proportional to pi_i^D exp(noise * N(0, 1)).
FactorizedPolicy initial_policy(const DataPolicyTables& data, double noise, std::uint64_t seed,
                                std::vector<std::vector<bool>>* undefined = nullptr);

}  // namespace alberdice
