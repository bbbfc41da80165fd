#include "alberdice/dataset.hpp"

#include "alberdice/random.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace alberdice {

void OfflineDataset::validate() const {
  if (n_states < 1) throw ValidationError("dataset has no states");
  const JointActionSpace sp = space();
  for (const auto& t : transitions) {
    if (t.s < 0 || t.s >= n_states || t.s_next < 0 || t.s_next >= n_states)
      throw ValidationError("dataset record has a state index out of range");
    if (t.joint < 0 || t.joint >= sp.size()) throw ValidationError("dataset record has a joint action out of range");
    if (!std::isfinite(t.r)) throw ValidationError("dataset record has a non-finite reward");
  }
  for (int s : initial_states)
    if (s < 0 || s >= n_states) throw ValidationError("initial state index out of range");
}

namespace {

int sample_joint(const BehaviorPolicy& behavior, const JointActionSpace& space, int s, Rng& rng) {
  if (const auto* pi = std::get_if<FactorizedPolicy>(&behavior)) {
    std::vector<int> actions(space.n_agents());
    for (int i = 0; i < space.n_agents(); ++i) actions[i] = rng.categorical(pi->row(i, s));
    return space.encode(actions);
  }
  const auto& joint = std::get<JointPolicy>(behavior);
  const auto row = std::span<const double>(joint.table).subspan(static_cast<std::size_t>(s) * joint.n_joint, joint.n_joint);
  return rng.categorical(row);
}

}  // namespace

OfflineDataset generate(const TabularMMDP& mmdp, const std::vector<BehaviorPolicy>& behaviors,
                        const std::vector<double>& weights, int n_trajectories, int horizon, std::uint64_t seed) {
  if (behaviors.empty()) throw ValidationError("behavior mixture is empty");
  if (weights.size() != behaviors.size()) throw ValidationError("one mixture weight per behavior policy is required");
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ValidationError("mixture weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("mixture weights must sum to 1");
  if (n_trajectories < 0 || horizon < 1) throw ValidationError("need n_trajectories >= 0 and horizon >= 1");

  const JointActionSpace space = mmdp.joint_space();
  const int S = mmdp.n_states();
  OfflineDataset data;
  data.n_states = S;
  data.action_counts = space.sizes();
  data.metadata["seed"] = std::to_string(seed);
  data.metadata["n_trajectories"] = std::to_string(n_trajectories);
  data.metadata["horizon"] = std::to_string(horizon);

  Rng rng(seed);
  std::vector<double> next_row(S);
  for (int k = 0; k < n_trajectories; ++k) {
    const auto& behavior = behaviors[rng.categorical(weights)];
    int s = rng.categorical(mmdp.p0);
    data.initial_states.push_back(s);
    for (int t = 0; t < horizon && !mmdp.is_terminal(s); ++t) {
      const int a = sample_joint(behavior, space, s, rng);
      for (int sn = 0; sn < S; ++sn) next_row[sn] = mmdp.P(s, a, sn);
      const int sn = rng.categorical(next_row);
      data.transitions.push_back({s, a, mmdp.r(s, a), sn, mmdp.is_terminal(sn)});
      s = sn;
    }
  }
  return data;
}

OfflineDataset matrix_dataset(const TabularMMDP& game, char recipe) {
  if (game.n_states() != 1 || game.n_agents() != 2 || game.n_joint() != 4)
    throw ValidationError("matrix datasets need a single-state two-agent 2x2 game");
  std::vector<int> joints;
  switch (recipe) {
    case 'a': joints = {1}; break;
    case 'b': joints = {1, 2}; break;
    case 'c': joints = {0, 1, 2}; break;
    case 'd': joints = {0, 1, 2, 3}; break;
    default: throw ValidationError(std::string("unknown matrix dataset recipe '") + recipe + "'");
  }
  OfflineDataset data;
  data.n_states = 1;
  data.action_counts = {2, 2};
  for (int a : joints) {
    data.transitions.push_back({0, a, game.r(0, a), 0, false});
    data.initial_states.push_back(0);
  }
  data.metadata["recipe"] = std::string(1, recipe);
  return data;
}

OfflineDataset merge(const OfflineDataset& lhs, const OfflineDataset& rhs) {
  if (lhs.n_states != rhs.n_states || lhs.action_counts != rhs.action_counts)
    throw ValidationError("cannot merge datasets over different MMDPs");
  OfflineDataset out = lhs;
  out.transitions.insert(out.transitions.end(), rhs.transitions.begin(), rhs.transitions.end());
  out.initial_states.insert(out.initial_states.end(), rhs.initial_states.begin(), rhs.initial_states.end());
  for (const auto& [k, v] : rhs.metadata) out.metadata.try_emplace(k, v);
  return out;
}

std::vector<double> EmpiricalDistribution::state_marginal() const {
  const int A = space.size();
  std::vector<double> out(n_states, 0.0);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < A; ++a) out[s] += (*this)(s, a);
  return out;
}

std::vector<double> EmpiricalDistribution::agent_marginal(int agent) const {
  const int A = space.size();
  const int Ai = space.agent_size(agent);
  std::vector<double> out(static_cast<std::size_t>(n_states) * Ai, 0.0);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < A; ++a) out[static_cast<std::size_t>(s) * Ai + space.component(a, agent)] += (*this)(s, a);
  return out;
}

EmpiricalDistribution empirical_distribution(const OfflineDataset& dataset) {
  if (dataset.transitions.empty()) throw ValidationError("dataset is empty");
  dataset.validate();
  EmpiricalDistribution d;
  d.n_states = dataset.n_states;
  d.space = dataset.space();
  const int A = d.space.size();
  d.counts.assign(static_cast<std::size_t>(d.n_states) * A, 0.0);
  for (const auto& t : dataset.transitions) d.counts[static_cast<std::size_t>(t.s) * A + t.joint] += 1.0;
  d.n = static_cast<double>(dataset.transitions.size());
  d.joint.resize(d.counts.size());
  for (std::size_t k = 0; k < d.counts.size(); ++k) d.joint[k] = d.counts[k] / d.n;
  return d;
}

TabularMMDP empirical_mmdp(const OfflineDataset& dataset, double gamma) {
  dataset.validate();
  const JointActionSpace space = dataset.space();
  const int S = dataset.n_states;
  const int A = space.size();
  TabularMMDP m;
  for (int s = 0; s < S; ++s) m.state_names.push_back(std::to_string(s));
  for (int count : dataset.action_counts) {
    std::vector<std::string> names;
    for (int a = 0; a < count; ++a) names.push_back(std::to_string(a));
    m.action_names.push_back(std::move(names));
  }
  m.gamma = gamma;
  m.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
  m.reward.assign(static_cast<std::size_t>(S) * A, 0.0);
  m.terminal.assign(S, false);
  std::vector<double> visits(static_cast<std::size_t>(S) * A, 0.0);
  for (const auto& t : dataset.transitions) {
    const auto cell = static_cast<std::size_t>(t.s) * A + t.joint;
    visits[cell] += 1.0;
    m.reward[cell] += t.r;
    m.transition[cell * S + t.s_next] += 1.0;
    if (t.done) m.terminal[t.s_next] = true;
  }
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const auto cell = static_cast<std::size_t>(s) * A + a;
      double* row = &m.transition[cell * S];
      if (m.terminal[s] || visits[cell] == 0.0) {
        std::fill(row, row + S, 0.0);
        row[s] = 1.0;
        m.reward[cell] = 0.0;
        continue;
      }
      m.reward[cell] /= visits[cell];
      for (int sn = 0; sn < S; ++sn) row[sn] /= visits[cell];
    }
  m.p0.assign(S, 0.0);
  for (int s : dataset.initial_states) m.p0[s] += 1.0 / static_cast<double>(dataset.initial_states.size());
  m.validate();
  return m;
}

std::optional<double> DataPolicyTables::partner_prob(int agent, int s, int joint) const {
  if (!has_cell(agent, s, space.component(joint, agent))) return std::nullopt;
  return partner[agent][static_cast<std::size_t>(s) * space.size() + joint];
}

DataPolicyTables fit_data_policies(const OfflineDataset& dataset) {
  const EmpiricalDistribution d = empirical_distribution(dataset);
  const int S = d.n_states;
  const int A = d.space.size();
  DataPolicyTables t;
  t.n_states = S;
  t.space = d.space;
  for (int i = 0; i < d.space.n_agents(); ++i) {
    const int Ai = d.space.agent_size(i);
    std::vector<double> cell_counts(static_cast<std::size_t>(S) * Ai, 0.0);
    std::vector<double> state_counts(S, 0.0);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < A; ++a) {
        const double c = d.counts[static_cast<std::size_t>(s) * A + a];
        cell_counts[static_cast<std::size_t>(s) * Ai + d.space.component(a, i)] += c;
        state_counts[s] += c;
      }
    std::vector<double> own(cell_counts.size(), 0.0);
    std::vector<bool> state_present(S, false);
    std::vector<bool> cell_present(cell_counts.size(), false);
    std::vector<double> partner(static_cast<std::size_t>(S) * A, 0.0);
    for (int s = 0; s < S; ++s) {
      state_present[s] = state_counts[s] > 0.0;
      for (int ai = 0; ai < Ai; ++ai) {
        const auto cell = static_cast<std::size_t>(s) * Ai + ai;
        cell_present[cell] = cell_counts[cell] > 0.0;
        if (state_present[s]) own[cell] = cell_counts[cell] / state_counts[s];
      }
      for (int a = 0; a < A; ++a) {
        const auto cell = static_cast<std::size_t>(s) * Ai + d.space.component(a, i);
        if (cell_present[cell]) partner[static_cast<std::size_t>(s) * A + a] = d.counts[static_cast<std::size_t>(s) * A + a] / cell_counts[cell];
      }
    }
    t.own.push_back(std::move(own));
    t.state_present.push_back(std::move(state_present));
    t.partner.push_back(std::move(partner));
    t.cell_present.push_back(std::move(cell_present));
  }
  return t;
}

std::filesystem::path sidecar_path(const std::filesystem::path& path) {
  auto out = path;
  out += ".meta.json";
  return out;
}

}  // namespace alberdice
