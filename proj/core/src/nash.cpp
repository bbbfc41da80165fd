#include "alberdice/nash.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <queue>

namespace alberdice {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_dims(const TabularMMDP& mmdp, const EmpiricalDistribution& dist) {
  if (dist.n_states != mmdp.n_states() || dist.space.size() != mmdp.n_joint())
    throw ValidationError("dataset distribution does not match the MMDP");
}

}  // namespace

double regularized_objective(const TabularMMDP& mmdp, const JointPolicy& policy, const EmpiricalDistribution& dist,
                             double alpha) {
  check_dims(mmdp, dist);
  const OccupancyTable d = stationary_distribution(mmdp, policy);
  double out = 0.0;
  for (int s = 0; s < d.n_states; ++s)
    for (int a = 0; a < d.n_actions; ++a) {
      const double mass = d(s, a);
      if (mass <= 0.0) continue;
      out += mass * mmdp.r(s, a);
      if (alpha == 0.0) continue;
      if (dist(s, a) == 0.0) return -kInf;
      out -= alpha * mass * std::log(mass / dist(s, a));
    }
  return out;
}

double regularized_objective(const TabularMMDP& mmdp, const FactorizedPolicy& policy, const EmpiricalDistribution& dist,
                             double alpha, int agent) {
  check_dims(mmdp, dist);
  const JointActionSpace space = mmdp.joint_space();
  const int Ai = space.agent_size(agent);
  const OccupancyTable d = stationary_distribution(mmdp, policy);
  const auto data_marginal = dist.agent_marginal(agent);
  double out = 0.0;
  for (int s = 0; s < d.n_states; ++s) {
    std::vector<double> own(Ai, 0.0), reward(Ai, 0.0), partner_kl(Ai, 0.0);
    for (int a = 0; a < space.size(); ++a) own[space.component(a, agent)] += d(s, a);
    for (int ai = 0; ai < Ai; ++ai) {
      const double di = own[ai];
      if (di <= 0.0) continue;
      const double dDi = data_marginal[static_cast<std::size_t>(s) * Ai + ai];
      if (alpha != 0.0 && dDi == 0.0) return -kInf;
      double term = 0.0;
      for (int a = 0; a < space.size(); ++a) {
        if (space.component(a, agent) != ai) continue;
        const double q = policy.partner_prob(space, s, a, agent);
        if (q <= 0.0) continue;
        term += q * mmdp.r(s, a);
        if (alpha == 0.0) continue;
        const double conditional = dist(s, a) / dDi;
        if (conditional == 0.0) return -kInf;
        term -= alpha * q * std::log(q / conditional);
      }
      out += di * term;
      if (alpha != 0.0) out -= alpha * di * std::log(di / dDi);
    }
  }
  return out;
}

ModifiedReward modified_reward(const TabularMMDP& mmdp, const JointPolicy& policy, const EmpiricalDistribution& dist,
                               double alpha) {
  check_dims(mmdp, dist);
  const OccupancyTable d = stationary_distribution(mmdp, policy);
  ModifiedReward out{mmdp.n_states(), mmdp.n_joint(), mmdp.reward};
  for (int s = 0; s < out.n_states; ++s)
    for (int a = 0; a < out.n_joint; ++a) {
      const double mass = d(s, a);
      if (mass <= 0.0 || alpha == 0.0) continue;
      auto& v = out.values[static_cast<std::size_t>(s) * out.n_joint + a];
      v = dist(s, a) == 0.0 ? -kInf : v - alpha * std::log(mass / dist(s, a));
    }
  return out;
}

namespace {

// Agent i's regularized LP: maximize sum_c d_c k_c - alpha sum_c d_c log d_c
// over the flow polytope of the reduced MDP, restricted to cells whose
// partner mass stays inside the data.
struct Region {
  std::vector<int> cells;   // flat cell ids s * |A_i| + a_i
  std::vector<int> states;  // constrained states
  std::vector<int> row_of;  // state -> row or -1
  std::vector<double> k;    // per cell
  bool feasible = true;
};

Region support_region(const TabularMMDP& mmdp, const TabularMMDP& reduced, const FactorizedPolicy& policy,
                      const EmpiricalDistribution& dist, double alpha, int agent) {
  const JointActionSpace space = mmdp.joint_space();
  const int S = mmdp.n_states();
  const int Ai = space.agent_size(agent);
  const auto data_marginal = dist.agent_marginal(agent);

  std::vector<bool> allowed(static_cast<std::size_t>(S) * Ai, false);
  std::vector<double> k(static_cast<std::size_t>(S) * Ai, -kInf);
  for (int s = 0; s < S; ++s) {
    if (mmdp.is_terminal(s)) continue;
    for (int ai = 0; ai < Ai; ++ai) {
      const int c = s * Ai + ai;
      if (data_marginal[c] <= 0.0) continue;
      bool inside = true;
      double value = 0.0;
      for (int a = 0; a < space.size() && inside; ++a) {
        if (space.component(a, agent) != ai) continue;
        const double q = policy.partner_prob(space, s, a, agent);
        if (q <= 0.0) continue;
        if (dist(s, a) == 0.0) inside = false;
        else value += q * (mmdp.r(s, a) - alpha * std::log(q / dist(s, a)));
      }
      allowed[c] = inside;
      if (inside) k[c] = value;
    }
  }

  std::vector<bool> kept(S, false);
  for (bool changed = true; changed;) {
    changed = false;
    for (int s = 0; s < S; ++s) {
      bool any = false;
      for (int ai = 0; ai < Ai; ++ai) any = any || allowed[s * Ai + ai];
      kept[s] = any;
    }
    for (int c = 0; c < S * Ai; ++c) {
      if (!allowed[c]) continue;
      for (int sn = 0; sn < S; ++sn)
        if (reduced.P(c / Ai, c % Ai, sn) > 0.0 && !mmdp.is_terminal(sn) && !kept[sn]) {
          allowed[c] = false;
          changed = true;
          break;
        }
    }
  }

  Region region;
  region.row_of.assign(S, -1);
  std::vector<bool> reached(S, false);
  std::queue<int> frontier;
  for (int s = 0; s < S; ++s) {
    if (mmdp.p0[s] <= 0.0 || mmdp.is_terminal(s)) continue;
    if (!kept[s]) region.feasible = false;
    reached[s] = true;
    frontier.push(s);
  }
  if (!region.feasible) return region;
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop();
    for (int ai = 0; ai < Ai; ++ai) {
      if (!allowed[s * Ai + ai]) continue;
      for (int sn = 0; sn < S; ++sn)
        if (reduced.P(s, ai, sn) > 0.0 && !mmdp.is_terminal(sn) && !reached[sn]) {
          reached[sn] = true;
          frontier.push(sn);
        }
    }
  }
  for (int s = 0; s < S; ++s) {
    if (!reached[s]) continue;
    region.row_of[s] = static_cast<int>(region.states.size());
    region.states.push_back(s);
    for (int ai = 0; ai < Ai; ++ai)
      if (allowed[s * Ai + ai]) {
        region.cells.push_back(s * Ai + ai);
        region.k.push_back(k[s * Ai + ai]);
      }
  }
  return region;
}

double primal_value(const Region& region, const Eigen::VectorXd& d, double alpha) {
  double out = 0.0;
  for (int j = 0; j < d.size(); ++j)
    if (d[j] > 0.0) out += d[j] * (region.k[j] - alpha * std::log(d[j]));
  return out;
}

}  // namespace

OracleResult best_response_oracle(const TabularMMDP& mmdp, const FactorizedPolicy& policy,
                                  const EmpiricalDistribution& dist, double alpha, int agent, OracleMethod method,
                                  double tolerance) {
  check_dims(mmdp, dist);
  if (alpha < 0.0) throw ValidationError("alpha must be nonnegative");
  const JointActionSpace space = mmdp.joint_space();
  const int S = mmdp.n_states();
  const int Ai = space.agent_size(agent);
  const TabularMMDP reduced = reduced_mdp(mmdp, policy, agent);

  OracleResult out;
  out.occupancy.assign(static_cast<std::size_t>(S) * Ai, 0.0);
  out.policy.assign(static_cast<std::size_t>(S) * Ai, 1.0 / Ai);
  out.kept_states.assign(S, false);

  if (alpha == 0.0) {
    // No regularizer: plain best response on the reduced MDP.
    const BestResponse br = best_response_value(mmdp, policy, agent);
    out.value = (1.0 - mmdp.gamma) * br.value.J;
    out.policy = br.policy;
    FactorizedPolicy deviated = policy;
    deviated.tables[agent] = br.policy;
    const OccupancyTable d = stationary_distribution(mmdp, deviated);
    for (int s = 0; s < S; ++s)
      for (int a = 0; a < space.size(); ++a) out.occupancy[static_cast<std::size_t>(s) * Ai + space.component(a, agent)] += d(s, a);
    std::fill(out.kept_states.begin(), out.kept_states.end(), true);
    return out;
  }

  const Region region = support_region(mmdp, reduced, policy, dist, alpha, agent);
  if (!region.feasible) {
    out.value = -kInf;
    return out;
  }
  for (int s : region.states) out.kept_states[s] = true;
  const int n = static_cast<int>(region.cells.size());
  const int m = static_cast<int>(region.states.size());
  if (n == 0) {
    // Every start state is terminal.
    out.value = 0.0;
    return out;
  }

  Eigen::VectorXd d(n);
  const bool single_step_game = S == 1 && mmdp.gamma == 0.0;
  if (method == OracleMethod::closed_form && !single_step_game)
    throw ValidationError("the closed-form oracle needs a single-state game with gamma = 0");

  if (method != OracleMethod::newton && single_step_game) {
    // d*(a_i) proportional to exp(k / alpha).
    const double top = *std::max_element(region.k.begin(), region.k.end());
    double z = 0.0;
    for (int j = 0; j < n; ++j) z += std::exp((region.k[j] - top) / alpha);
    for (int j = 0; j < n; ++j) d[j] = std::exp((region.k[j] - top) / alpha) / z;
    out.value = top + alpha * std::log(z);
    out.closed_form = true;
  } else {
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(m, n);
    Eigen::VectorXd b(m);
    for (int r = 0; r < m; ++r) b[r] = (1.0 - mmdp.gamma) * mmdp.p0[region.states[r]];
    for (int j = 0; j < n; ++j) {
      const int s = region.cells[j] / Ai;
      const int ai = region.cells[j] % Ai;
      A(region.row_of[s], j) += 1.0;
      for (int r = 0; r < m; ++r) A(r, j) -= mmdp.gamma * reduced.P(s, ai, region.states[r]);
    }

    // Start from the occupancy of the uniform policy over allowed cells.
    {
      std::vector<int> count(m, 0);
      for (int j = 0; j < n; ++j) ++count[region.row_of[region.cells[j] / Ai]];
      Eigen::MatrixXd U = Eigen::MatrixXd::Zero(m, n);
      for (int j = 0; j < n; ++j) U(region.row_of[region.cells[j] / Ai], j) = 1.0 / count[region.row_of[region.cells[j] / Ai]];
      // d = U^T x with A U^T x = b.
      const Eigen::VectorXd x = (A * U.transpose()).partialPivLu().solve(b);
      d = U.transpose() * x;
      for (int j = 0; j < n; ++j) d[j] = std::max(d[j], 1e-300);
    }

    const Eigen::Map<const Eigen::VectorXd> k(region.k.data(), n);
    auto objective = [&](const Eigen::VectorXd& x) {  // G = -F
      return -primal_value(region, x, alpha);
    };
    double G = objective(d);
    for (out.iterations = 0; out.iterations < 500; ++out.iterations) {
      const Eigen::VectorXd grad = -k + alpha * (d.array().log() + 1.0).matrix();
      const Eigen::VectorXd minv = d / alpha;
      const Eigen::MatrixXd AM = A * minv.asDiagonal();
      const Eigen::MatrixXd schur = AM * A.transpose();
      const Eigen::VectorXd rhs = (A * d - b) - AM * grad;
      const Eigen::VectorXd lambda = schur.ldlt().solve(rhs);
      const Eigen::VectorXd reduced_grad = grad + A.transpose() * lambda;
      const Eigen::VectorXd step = -minv.cwiseProduct(reduced_grad);
      out.kkt_residual = std::max(reduced_grad.lpNorm<Eigen::Infinity>() / alpha, (A * d - b).lpNorm<Eigen::Infinity>());
      if (out.kkt_residual <= tolerance) break;

      double t = 1.0;
      for (int j = 0; j < n; ++j)
        if (step[j] < 0.0) t = std::min(t, -0.99 * d[j] / step[j]);
      const double slope = grad.dot(step);
      bool accepted = false;
      for (int tries = 0; tries < 80; ++tries, t *= 0.5) {
        const Eigen::VectorXd candidate = d + t * step;
        const double Gc = objective(candidate);
        const bool rounding = std::abs(Gc - G) <= 1e-14 * std::max(1.0, std::abs(G));
        if (Gc <= G + 1e-4 * t * slope || rounding) {
          d = candidate;
          G = Gc;
          accepted = true;
          break;
        }
      }
      if (!accepted) break;
    }
    if (out.kkt_residual > std::max(tolerance, 1e-8))
      throw SolverError("best-response oracle did not reach the KKT tolerance (residual " +
                        std::to_string(out.kkt_residual) + ")");
    out.value = -G;
  }

  for (int j = 0; j < n; ++j) out.occupancy[region.cells[j]] = d[j];
  for (int s : region.states) {
    double total = 0.0;
    for (int ai = 0; ai < Ai; ++ai) total += out.occupancy[static_cast<std::size_t>(s) * Ai + ai];
    if (total <= 0.0) continue;
    for (int ai = 0; ai < Ai; ++ai)
      out.policy[static_cast<std::size_t>(s) * Ai + ai] = out.occupancy[static_cast<std::size_t>(s) * Ai + ai] / total;
  }
  return out;
}

double best_response_gap(const TabularMMDP& mmdp, const FactorizedPolicy& policy, const EmpiricalDistribution& dist,
                         double alpha, int agent) {
  const double best = best_response_oracle(mmdp, policy, dist, alpha, agent).value;
  const double current = regularized_objective(mmdp, JointPolicy::from(policy, mmdp.joint_space()), dist, alpha);
  if (best == -kInf) return 0.0;  // no deviation is finite either
  if (current == -kInf) return kInf;
  return best - current;
}

NashReport verify_policy(const TabularMMDP& mmdp, const FactorizedPolicy& policy, const EmpiricalDistribution& dist,
                         double alpha) {
  NashReport report;
  report.objective = regularized_objective(mmdp, JointPolicy::from(policy, mmdp.joint_space()), dist, alpha);
  const double plain = evaluate_policy(mmdp, policy).J;
  for (int i = 0; i < policy.n_agents(); ++i) {
    report.gaps.push_back(best_response_gap(mmdp, policy, dist, alpha, i));
    report.unregularized_gaps.push_back(best_response_value(mmdp, policy, i).value.J - plain);
    report.epsilon = std::max(report.epsilon, report.gaps.back());
  }
  return report;
}

NashReport audit_training(const TrainReport& train_report, const TabularMMDP& mmdp, const EmpiricalDistribution& dist,
                          double alpha, double tolerance) {
  if (train_report.snapshots.empty()) throw ValidationError("training report carries no policy snapshots");
  NashReport report = verify_policy(mmdp, train_report.snapshots.back(), dist, alpha);
  report.tolerance = tolerance;
  const JointActionSpace space = mmdp.joint_space();
  for (std::size_t k = 0; k < train_report.snapshots.size(); ++k) {
    report.trajectory.push_back(regularized_objective(mmdp, JointPolicy::from(train_report.snapshots[k], space), dist, alpha));
    if (k == 0) continue;
    const double before = report.trajectory[k - 1];
    const double after = report.trajectory[k];
    if (before == -kInf) continue;
    if (after < before - tolerance) {
      const int agent = k < train_report.updates.size() ? train_report.updates[k].agent : -1;
      report.violations.push_back({static_cast<int>(k), agent, before, after});
    }
  }
  report.monotone = report.violations.empty();
  return report;
}

}  // namespace alberdice
