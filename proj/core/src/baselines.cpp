#include "alberdice/baselines.hpp"

#include <cmath>

namespace alberdice {

BaselineResult bc_train(const OfflineDataset& dataset) {
  const DataPolicyTables data = fit_data_policies(dataset);
  BaselineResult out;
  out.policy = initial_policy(data, 0.0, 0, &out.undefined_states);
  return out;
}

OptiDiceResult optidice_train(const OfflineDataset& dataset, double gamma, double alpha, const InnerConfig& inner) {
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
  const JointActionSpace space = dataset.space();
  const int S = dataset.n_states;
  const int A = space.size();

  // The joint action seen as one agent's action: no partners, so rho == 1.
  OfflineDataset joint = dataset;
  joint.action_counts = {A};
  const DataPolicyTables joint_data = fit_data_policies(joint);
  const FactorizedPolicy nobody = FactorizedPolicy::uniform(S, {A});
  const AgentView view = analyze_agent(joint, joint_data, nobody, 0, alpha, gamma);
  const auto weights = sample_weights(view, nullptr);
  const NuProblem problem = make_nu_problem(view, joint, weights, ObjectiveForm::per_cell);
  const NuSolution sol = solve_nu(problem, inner);
  const ETable e = build_e_table(view, joint, weights, sol.nu);

  OptiDiceResult out;
  out.nu = sol.nu;
  out.correction = corrections(e, alpha).values;

  const EmpiricalDistribution dist = empirical_distribution(dataset);
  const DataPolicyTables data = fit_data_policies(dataset);
  out.result.policy = FactorizedPolicy::uniform(S, space.sizes());
  out.result.undefined_states.assign(space.n_agents(), std::vector<bool>(S, false));
  for (int i = 0; i < space.n_agents(); ++i) {
    for (int s = 0; s < S; ++s) {
      if (!data.has_state(i, s)) {
        out.result.undefined_states[i][s] = true;
        continue;
      }
      // w is rescaled per state by its largest entry; the factor cancels.
      double top = -std::numeric_limits<double>::infinity();
      for (int a = 0; a < A; ++a)
        if (e.support[s * A + a]) top = std::max(top, e(s, a));
      auto row = out.result.policy.row(i, s);
      std::fill(row.begin(), row.end(), 0.0);
      double total = 0.0;
      for (int a = 0; a < A; ++a) {
        if (!e.support[s * A + a]) continue;
        const double mass = std::exp((e(s, a) - top) / alpha) * dist.counts[static_cast<std::size_t>(s) * A + a];
        row[space.component(a, i)] += mass;
        total += mass;
      }
      if (total > 0.0) {
        for (double& p : row) p /= total;
      } else {
        for (int ai = 0; ai < space.agent_size(i); ++ai) row[ai] = data.own_prob(i, s, ai);
      }
    }
  }
  return out;
}

}  // namespace alberdice
