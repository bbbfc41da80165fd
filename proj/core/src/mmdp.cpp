#include "alberdice/mmdp.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace alberdice {

namespace {

std::string describe(const std::string& what, int s, int a) {
  std::ostringstream os;
  os << what << " (state " << s << ", joint action " << a << ")";
  return os.str();
}

// Policy-averaged transition matrix and reward vector over non-terminal
// states; transitions into terminal states are dropped (exits).
struct Chain {
  std::vector<int> live;       // live index -> state
  std::vector<int> index;      // state -> live index or -1
  Eigen::MatrixXd P;           // live x live
  Eigen::VectorXd r;
};

Chain policy_chain(const TabularMMDP& mmdp, const JointPolicy& pi) {
  const int S = mmdp.n_states();
  const int A = mmdp.n_joint();
  Chain c;
  c.index.assign(S, -1);
  for (int s = 0; s < S; ++s) {
    if (!mmdp.is_terminal(s)) {
      c.index[s] = static_cast<int>(c.live.size());
      c.live.push_back(s);
    }
  }
  const int n = static_cast<int>(c.live.size());
  c.P = Eigen::MatrixXd::Zero(n, n);
  c.r = Eigen::VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    const int s = c.live[i];
    for (int a = 0; a < A; ++a) {
      const double p = pi.prob(s, a);
      if (p == 0.0) continue;
      c.r[i] += p * mmdp.r(s, a);
      for (int sn = 0; sn < S; ++sn) {
        const int j = c.index[sn];
        if (j >= 0) c.P(i, j) += p * mmdp.P(s, a, sn);
      }
    }
  }
  return c;
}

void check_policy_shape(const TabularMMDP& mmdp, const JointPolicy& pi) {
  if (pi.n_states != mmdp.n_states() || pi.n_joint != mmdp.n_joint() ||
      pi.table.size() != static_cast<std::size_t>(mmdp.n_states()) * mmdp.n_joint())
    throw ValidationError("policy shape does not match the MMDP");
}

}  // namespace

JointActionSpace::JointActionSpace(std::vector<int> sizes) : sizes_(std::move(sizes)) {
  if (sizes_.empty()) throw ValidationError("joint action space needs at least one agent");
  strides_.assign(sizes_.size(), 1);
  total_ = 1;
  for (int i = n_agents() - 1; i >= 0; --i) {
    if (sizes_[i] < 1) throw ValidationError("every agent needs at least one action");
    strides_[i] = total_;
    total_ *= sizes_[i];
  }
}

int JointActionSpace::encode(std::span<const int> actions) const {
  if (static_cast<int>(actions.size()) != n_agents()) throw ValidationError("joint action arity mismatch");
  int joint = 0;
  for (int i = 0; i < n_agents(); ++i) {
    if (actions[i] < 0 || actions[i] >= sizes_[i]) throw ValidationError("action index out of range");
    joint += actions[i] * strides_[i];
  }
  return joint;
}

std::vector<int> JointActionSpace::decode(int joint) const {
  std::vector<int> out(sizes_.size());
  for (int i = 0; i < n_agents(); ++i) out[i] = component(joint, i);
  return out;
}

int JointActionSpace::with_component(int joint, int agent, int action) const {
  return joint + (action - component(joint, agent)) * strides_[agent];
}

JointActionSpace TabularMMDP::joint_space() const {
  std::vector<int> sizes;
  for (const auto& names : action_names) sizes.push_back(static_cast<int>(names.size()));
  return JointActionSpace(std::move(sizes));
}

int TabularMMDP::n_joint() const {
  int total = 1;
  for (const auto& names : action_names) total *= static_cast<int>(names.size());
  return total;
}

void TabularMMDP::validate() const {
  const int S = n_states();
  if (S < 1) throw ValidationError("MMDP has no states");
  if (n_agents() < 1) throw ValidationError("MMDP has no agents");
  for (const auto& names : action_names)
    if (names.empty()) throw ValidationError("agent with an empty action set");
  const int A = n_joint();
  const auto SA = static_cast<std::size_t>(S) * A;
  if (transition.size() != SA * S) throw ValidationError("transition table has the wrong size");
  if (reward.size() != SA) throw ValidationError("reward table has the wrong size");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("discount must lie in [0, 1)");
  if (p0.size() != static_cast<std::size_t>(S)) throw ValidationError("p0 has the wrong size");
  if (!terminal.empty() && terminal.size() != static_cast<std::size_t>(S))
    throw ValidationError("terminal flags have the wrong size");
  if (horizon && *horizon < 1) throw ValidationError("horizon must be positive");

  double p0_sum = 0.0;
  for (double p : p0) {
    if (!(p >= 0.0) || !std::isfinite(p)) throw ValidationError("p0 has a negative or non-finite entry");
    p0_sum += p;
  }
  if (std::abs(p0_sum - 1.0) > 1e-12) throw ValidationError("p0 does not sum to 1");

  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      if (!std::isfinite(r(s, a))) throw ValidationError(describe("non-finite reward", s, a));
      double row = 0.0;
      for (int sn = 0; sn < S; ++sn) {
        const double p = P(s, a, sn);
        if (!(p >= 0.0) || !std::isfinite(p))
          throw ValidationError(describe("negative or non-finite transition probability", s, a));
        row += p;
      }
      if (std::abs(row - 1.0) > 1e-12) {
        std::ostringstream os;
        os << "transition row sums to " << row;
        throw ValidationError(describe(os.str(), s, a));
      }
    }
  }
}

bool operator==(const TabularMMDP& lhs, const TabularMMDP& rhs) {
  return lhs.state_names == rhs.state_names && lhs.action_names == rhs.action_names &&
         lhs.transition == rhs.transition && lhs.reward == rhs.reward && lhs.gamma == rhs.gamma &&
         lhs.p0 == rhs.p0 && lhs.terminal == rhs.terminal && lhs.horizon == rhs.horizon;
}

FactorizedPolicy FactorizedPolicy::uniform(int n_states, std::vector<int> action_counts) {
  FactorizedPolicy pi;
  pi.n_states = n_states;
  pi.action_counts = std::move(action_counts);
  for (int n : pi.action_counts)
    pi.tables.emplace_back(static_cast<std::size_t>(n_states) * n, 1.0 / n);
  return pi;
}

FactorizedPolicy FactorizedPolicy::uniform(const TabularMMDP& mmdp) {
  return uniform(mmdp.n_states(), mmdp.joint_space().sizes());
}

std::span<const double> FactorizedPolicy::row(int agent, int s) const {
  const auto n = static_cast<std::size_t>(action_counts[agent]);
  return std::span<const double>(tables[agent]).subspan(s * n, n);
}

std::span<double> FactorizedPolicy::row(int agent, int s) {
  const auto n = static_cast<std::size_t>(action_counts[agent]);
  return std::span<double>(tables[agent]).subspan(s * n, n);
}

double FactorizedPolicy::joint_prob(const JointActionSpace& space, int s, int joint) const {
  double p = 1.0;
  for (int i = 0; i < n_agents(); ++i) p *= prob(i, s, space.component(joint, i));
  return p;
}

double FactorizedPolicy::partner_prob(const JointActionSpace& space, int s, int joint, int agent) const {
  double p = 1.0;
  for (int j = 0; j < n_agents(); ++j)
    if (j != agent) p *= prob(j, s, space.component(joint, j));
  return p;
}

std::vector<double> FactorizedPolicy::joint_table(const JointActionSpace& space) const {
  std::vector<double> out(static_cast<std::size_t>(n_states) * space.size());
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < space.size(); ++a) out[static_cast<std::size_t>(s) * space.size() + a] = joint_prob(space, s, a);
  return out;
}

void FactorizedPolicy::validate(double tol) const {
  if (tables.size() != action_counts.size()) throw ValidationError("policy agent count mismatch");
  for (int i = 0; i < n_agents(); ++i) {
    if (tables[i].size() != static_cast<std::size_t>(n_states) * action_counts[i])
      throw ValidationError("policy table has the wrong size");
    for (int s = 0; s < n_states; ++s) {
      double sum = 0.0;
      for (double p : row(i, s)) {
        if (!(p >= 0.0)) throw ValidationError("policy has a negative entry");
        sum += p;
      }
      if (std::abs(sum - 1.0) > tol) {
        std::ostringstream os;
        os << "policy row (agent " << i << ", state " << s << ") sums to " << sum;
        throw ValidationError(os.str());
      }
    }
  }
}

bool operator==(const FactorizedPolicy& lhs, const FactorizedPolicy& rhs) {
  return lhs.n_states == rhs.n_states && lhs.action_counts == rhs.action_counts && lhs.tables == rhs.tables;
}

JointPolicy JointPolicy::from(const FactorizedPolicy& policy, const JointActionSpace& space) {
  return JointPolicy{policy.joint_table(space), policy.n_states, space.size()};
}

std::vector<double> OccupancyTable::state_marginal() const {
  std::vector<double> out(n_states, 0.0);
  for (int s = 0; s < n_states; ++s)
    for (int a = 0; a < n_actions; ++a) out[s] += (*this)(s, a);
  return out;
}

double OccupancyTable::total() const { return std::accumulate(values.begin(), values.end(), 0.0); }

OccupancyTable stationary_distribution(const TabularMMDP& mmdp, const JointPolicy& policy) {
  check_policy_shape(mmdp, policy);
  if (!(mmdp.gamma >= 0.0 && mmdp.gamma < 1.0)) throw ValidationError("discount must lie in [0, 1)");
  const Chain c = policy_chain(mmdp, policy);
  const int n = static_cast<int>(c.live.size());
  Eigen::VectorXd rhs(n);
  for (int i = 0; i < n; ++i) rhs[i] = (1.0 - mmdp.gamma) * mmdp.p0[c.live[i]];
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - mmdp.gamma * c.P.transpose();
  const Eigen::VectorXd ds = M.partialPivLu().solve(rhs);

  OccupancyTable d;
  d.n_states = mmdp.n_states();
  d.n_actions = mmdp.n_joint();
  d.gamma = mmdp.gamma;
  d.values.assign(static_cast<std::size_t>(d.n_states) * d.n_actions, 0.0);
  for (int i = 0; i < n; ++i) {
    const int s = c.live[i];
    const double mass = std::max(ds[i], 0.0);
    for (int a = 0; a < d.n_actions; ++a) d.values[static_cast<std::size_t>(s) * d.n_actions + a] = mass * policy.prob(s, a);
  }
  return d;
}

OccupancyTable stationary_distribution(const TabularMMDP& mmdp, const FactorizedPolicy& policy) {
  return stationary_distribution(mmdp, JointPolicy::from(policy, mmdp.joint_space()));
}

double flow_residual(const TabularMMDP& mmdp, const OccupancyTable& d) {
  const int S = mmdp.n_states();
  const int A = mmdp.n_joint();
  std::vector<double> inflow(S, 0.0);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const double mass = d(s, a);
      if (mass == 0.0) continue;
      for (int sn = 0; sn < S; ++sn) inflow[sn] += mass * mmdp.P(s, a, sn);
    }
  const auto marginal = d.state_marginal();
  double worst = 0.0;
  for (int s = 0; s < S; ++s) {
    const double expected = mmdp.is_terminal(s) ? 0.0 : (1.0 - mmdp.gamma) * mmdp.p0[s] + mmdp.gamma * inflow[s];
    worst = std::max(worst, std::abs(marginal[s] - expected));
  }
  return worst;
}

ValueTable evaluate_policy(const TabularMMDP& mmdp, const JointPolicy& policy) {
  check_policy_shape(mmdp, policy);
  const int S = mmdp.n_states();
  const int A = mmdp.n_joint();
  const Chain c = policy_chain(mmdp, policy);
  const int n = static_cast<int>(c.live.size());
  const Eigen::MatrixXd M = Eigen::MatrixXd::Identity(n, n) - mmdp.gamma * c.P;
  const Eigen::VectorXd v = M.partialPivLu().solve(c.r);

  ValueTable out;
  out.V.assign(S, 0.0);
  for (int i = 0; i < n; ++i) out.V[c.live[i]] = v[i];
  out.Q.assign(static_cast<std::size_t>(S) * A, 0.0);
  for (int s = 0; s < S; ++s) {
    if (mmdp.is_terminal(s)) continue;
    for (int a = 0; a < A; ++a) {
      double q = mmdp.r(s, a);
      for (int sn = 0; sn < S; ++sn) q += mmdp.gamma * mmdp.P(s, a, sn) * out.V[sn];
      out.Q[static_cast<std::size_t>(s) * A + a] = q;
    }
  }
  for (int s = 0; s < S; ++s) out.J += mmdp.p0[s] * out.V[s];
  return out;
}

ValueTable evaluate_policy(const TabularMMDP& mmdp, const FactorizedPolicy& policy) {
  return evaluate_policy(mmdp, JointPolicy::from(policy, mmdp.joint_space()));
}

double episodic_value(const TabularMMDP& mmdp, const JointPolicy& policy, int horizon) {
  check_policy_shape(mmdp, policy);
  if (horizon < 1) throw ValidationError("horizon must be positive");
  const int S = mmdp.n_states();
  const int A = mmdp.n_joint();
  std::vector<double> V(S, 0.0), next(S, 0.0);
  for (int h = 0; h < horizon; ++h) {
    for (int s = 0; s < S; ++s) {
      if (mmdp.is_terminal(s)) {
        next[s] = 0.0;
        continue;
      }
      double v = 0.0;
      for (int a = 0; a < A; ++a) {
        const double p = policy.prob(s, a);
        if (p == 0.0) continue;
        double q = mmdp.r(s, a);
        for (int sn = 0; sn < S; ++sn) q += mmdp.P(s, a, sn) * V[sn];
        v += p * q;
      }
      next[s] = v;
    }
    std::swap(V, next);
  }
  double out = 0.0;
  for (int s = 0; s < S; ++s) out += mmdp.p0[s] * V[s];
  return out;
}

TabularMMDP reduced_mdp(const TabularMMDP& mmdp, const FactorizedPolicy& others, int agent) {
  const auto space = mmdp.joint_space();
  if (agent < 0 || agent >= space.n_agents()) throw ValidationError("agent index out of range");
  if (others.n_agents() != space.n_agents() || others.n_states != mmdp.n_states())
    throw ValidationError("partner policy does not match the MMDP");
  const int S = mmdp.n_states();
  const int A = space.size();
  const int Ai = space.agent_size(agent);

  TabularMMDP out;
  out.state_names = mmdp.state_names;
  out.action_names = {mmdp.action_names[agent]};
  out.gamma = mmdp.gamma;
  out.p0 = mmdp.p0;
  out.terminal = mmdp.terminal;
  out.horizon = mmdp.horizon;
  out.transition.assign(static_cast<std::size_t>(S) * Ai * S, 0.0);
  out.reward.assign(static_cast<std::size_t>(S) * Ai, 0.0);
  for (int s = 0; s < S; ++s) {
    for (int a = 0; a < A; ++a) {
      const double w = others.partner_prob(space, s, a, agent);
      if (w == 0.0) continue;
      const int ai = space.component(a, agent);
      const auto cell = static_cast<std::size_t>(s) * Ai + ai;
      out.reward[cell] += w * mmdp.r(s, a);
      for (int sn = 0; sn < S; ++sn) out.transition[cell * S + sn] += w * mmdp.P(s, a, sn);
    }
  }
  return out;
}

namespace {

// Policy iteration on a single-agent tabular MDP. Exact: terminates at a
// policy whose greedy improvement is itself.
BestResponse policy_iteration(const TabularMMDP& mdp) {
  const int S = mdp.n_states();
  const int A = mdp.n_joint();
  JointPolicy pi{std::vector<double>(static_cast<std::size_t>(S) * A, 0.0), S, A};
  for (int s = 0; s < S; ++s) pi.table[static_cast<std::size_t>(s) * A] = 1.0;
  ValueTable v;
  for (int iter = 0; iter < 10000; ++iter) {
    v = evaluate_policy(mdp, pi);
    bool changed = false;
    for (int s = 0; s < S; ++s) {
      const auto base = static_cast<std::size_t>(s) * A;
      int current = 0;
      while (pi.table[base + current] == 0.0) ++current;
      int best = current;
      for (int a = 0; a < A; ++a)
        if (v.Q[base + a] > v.Q[base + best] + 1e-12 * (1.0 + std::abs(v.Q[base + best]))) best = a;
      if (best != current) {
        pi.table[base + current] = 0.0;
        pi.table[base + best] = 1.0;
        changed = true;
      }
    }
    if (!changed) return BestResponse{std::move(v), std::move(pi.table)};
  }
  throw SolverError("policy iteration did not terminate");
}

}  // namespace

BestResponse best_response_value(const TabularMMDP& mmdp, const FactorizedPolicy& others, int agent) {
  return policy_iteration(reduced_mdp(mmdp, others, agent));
}

std::vector<int> JointOptimum::optimal_actions(int s, double tol) const {
  const int A = policy.n_joint;
  const auto base = static_cast<std::size_t>(s) * A;
  const double best = *std::max_element(value.Q.begin() + base, value.Q.begin() + base + A);
  std::vector<int> out;
  for (int a = 0; a < A; ++a)
    if (value.Q[base + a] >= best - tol) out.push_back(a);
  return out;
}

JointOptimum joint_optimum(const TabularMMDP& mmdp) {
  TabularMMDP centralized = mmdp;
  centralized.action_names = {std::vector<std::string>(mmdp.n_joint())};
  auto br = policy_iteration(centralized);
  return JointOptimum{std::move(br.value), JointPolicy{std::move(br.policy), mmdp.n_states(), mmdp.n_joint()}};
}

}  // namespace alberdice
