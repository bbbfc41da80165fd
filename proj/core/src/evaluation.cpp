#include "alberdice/evaluation.hpp"

#include "alberdice/random.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <sstream>

namespace alberdice {

double episodic_return(const TabularMMDP& mmdp, const FactorizedPolicy& policy, int horizon) {
  return episodic_value(mmdp, JointPolicy::from(policy, mmdp.joint_space()), horizon);
}

MonteCarloEstimate monte_carlo_return(const TabularMMDP& mmdp, const FactorizedPolicy& policy, int horizon,
                                      int episodes, std::uint64_t seed) {
  if (episodes < 1 || horizon < 1) throw ValidationError("need episodes >= 1 and horizon >= 1");
  const JointActionSpace space = mmdp.joint_space();
  const int S = mmdp.n_states();
  Rng rng(seed);
  std::vector<double> next(S);
  std::vector<int> actions(space.n_agents());
  double sum = 0.0, sum_sq = 0.0;
  for (int k = 0; k < episodes; ++k) {
    int s = rng.categorical(mmdp.p0);
    double ret = 0.0;
    for (int t = 0; t < horizon && !mmdp.is_terminal(s); ++t) {
      for (int i = 0; i < space.n_agents(); ++i) actions[i] = rng.categorical(policy.row(i, s));
      const int a = space.encode(actions);
      ret += mmdp.r(s, a);
      for (int sn = 0; sn < S; ++sn) next[sn] = mmdp.P(s, a, sn);
      s = rng.categorical(next);
    }
    sum += ret;
    sum_sq += ret * ret;
  }
  MonteCarloEstimate out;
  out.episodes = episodes;
  out.mean = sum / episodes;
  const double var = episodes > 1 ? std::max(0.0, (sum_sq - episodes * out.mean * out.mean) / (episodes - 1)) : 0.0;
  out.standard_error = std::sqrt(var / episodes);
  return out;
}

double ood_rate(const FactorizedPolicy& policy, const EmpiricalDistribution& dist, OodMode mode, int samples,
                std::uint64_t seed) {
  const JointActionSpace& space = dist.space;
  const auto state_mass = dist.state_marginal();
  if (mode == OodMode::support_exact) {
    double out = 0.0;
    for (int s = 0; s < dist.n_states; ++s) {
      if (state_mass[s] == 0.0) continue;
      double off = 0.0;
      for (int a = 0; a < space.size(); ++a)
        if (!dist.supported(s, a)) off += policy.joint_prob(space, s, a);
      out += state_mass[s] * off;
    }
    return out;
  }
  if (samples < 1) throw ValidationError("need at least one sample");
  Rng rng(seed);
  std::vector<int> actions(space.n_agents());
  int hits = 0;
  for (int k = 0; k < samples; ++k) {
    const int s = rng.categorical(state_mass);
    for (int i = 0; i < space.n_agents(); ++i) actions[i] = rng.categorical(policy.row(i, s));
    if (!dist.supported(s, space.encode(actions))) ++hits;
  }
  return static_cast<double>(hits) / samples;
}

namespace {

std::pair<double, std::optional<double>> mean_se(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, std::nullopt};
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size() - 1);
  return {mean, std::sqrt(var / static_cast<double>(xs.size()))};
}

}  // namespace

EvalReport make_report(const std::vector<RunRecord>& runs, std::vector<std::string> action_labels) {
  std::map<std::pair<std::string, std::string>, std::vector<const RunRecord*>> groups;
  for (const auto& run : runs) groups[{run.dataset, run.algorithm}].push_back(&run);
  EvalReport report;
  report.action_labels = std::move(action_labels);
  for (const auto& [key, members] : groups) {
    ReportRow row;
    row.dataset = key.first;
    row.algorithm = key.second;
    row.runs = static_cast<int>(members.size());
    std::vector<double> returns, oods;
    for (const auto* run : members) {
      returns.push_back(run->episodic_return);
      oods.push_back(run->ood_rate);
      if (row.mean_joint.empty()) row.mean_joint.assign(run->joint_at_start.size(), 0.0);
      for (std::size_t a = 0; a < run->joint_at_start.size() && a < row.mean_joint.size(); ++a)
        row.mean_joint[a] += run->joint_at_start[a] / row.runs;
    }
    std::tie(row.mean_return, row.se_return) = mean_se(returns);
    std::tie(row.mean_ood, row.se_ood) = mean_se(oods);
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string render_table(const EvalReport& report) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << std::left << std::setw(10) << "dataset" << std::setw(11) << "algorithm" << std::right << std::setw(5) << "runs"
     << std::setw(18) << "return" << std::setw(16) << "ood";
  const bool joint = !report.action_labels.empty();
  if (joint)
    for (const auto& label : report.action_labels) os << std::setw(8) << label;
  os << '\n';
  for (const auto& row : report.rows) {
    std::ostringstream ret, ood;
    ret << std::fixed << std::setprecision(3) << row.mean_return;
    if (row.se_return) ret << " +- " << *row.se_return;
    ood << std::fixed << std::setprecision(3) << row.mean_ood;
    if (row.se_ood) ood << " +- " << *row.se_ood;
    os << std::left << std::setw(10) << row.dataset << std::setw(11) << row.algorithm << std::right << std::setw(5)
       << row.runs << std::setw(18) << ret.str() << std::setw(16) << ood.str();
    if (joint)
      for (double p : row.mean_joint) os << std::setw(8) << p;
    os << '\n';
  }
  return os.str();
}

std::string report_csv(const EvalReport& report) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "dataset,algorithm,runs,mean_return,se_return,mean_ood,se_ood";
  for (const auto& label : report.action_labels) os << ",p_" << label;
  os << '\n';
  for (const auto& row : report.rows) {
    os << row.dataset << ',' << row.algorithm << ',' << row.runs << ',' << row.mean_return << ',';
    if (row.se_return) os << *row.se_return;
    os << ',' << row.mean_ood << ',';
    if (row.se_ood) os << *row.se_ood;
    for (std::size_t a = 0; a < report.action_labels.size(); ++a)
      os << ',' << (a < row.mean_joint.size() ? row.mean_joint[a] : 0.0);
    os << '\n';
  }
  return os.str();
}

std::string render_bridge_policy(const BridgeLayout& layout, const FactorizedPolicy& policy, int agent, int other_cell) {
  static const char* arrows[] = {"<", ">", "^", "v", "o"};
  std::ostringstream os;
  os << "agent " << agent + 1 << " (agent " << 2 - agent << " at " << layout.cell(other_cell).first << ","
     << layout.cell(other_cell).second << ")\n";
  for (int row = 0; row < layout.rows(); ++row) {
    for (int col = 0; col < layout.cols(); ++col) {
      const int c = layout.cell_at(row, col);
      if (c < 0) {
        os << "      ";
        continue;
      }
      if (c == other_cell) {
        os << "  [" << 2 - agent << "] ";
        continue;
      }
      const int s = agent == 0 ? layout.state(c, other_cell) : layout.state(other_cell, c);
      const auto probs = policy.row(agent, s);
      const auto best = std::max_element(probs.begin(), probs.end()) - probs.begin();
      std::ostringstream cell;
      cell << arrows[best] << std::fixed << std::setprecision(2) << probs[best];
      os << ' ' << std::setw(5) << cell.str();
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace alberdice
