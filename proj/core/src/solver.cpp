#include "alberdice/solver.hpp"

#include "alberdice/nash.hpp"
#include "alberdice/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <numeric>
#include <queue>
#include <tuple>

namespace alberdice {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

}  // namespace

void TrainConfig::validate() const {
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
  if (K < 1) throw ValidationError("resample size K must be >= 1");
  if (!(inner.tolerance > 0.0) || inner.max_iterations < 1) throw ValidationError("inner solver settings must be positive");
  if (!(stop_tolerance > 0.0) || !(policy_tolerance > 0.0)) throw ValidationError("stopping tolerances must be positive");
  if (max_sweeps < 1) throw ValidationError("max_sweeps must be >= 1");
  if (!(init_noise >= 0.0)) throw ValidationError("init_noise must be nonnegative");
}

double rho(const FactorizedPolicy& others, const DataPolicyTables& data, const Transition& x, int agent) {
  const auto behavior = data.partner_prob(agent, x.s, x.joint);
  if (!behavior || !(*behavior > 0.0))
    throw ValidationError("data-policy conditional is absent for a dataset record (corrupted tables)");
  return others.partner_prob(data.space, x.s, x.joint, agent) / *behavior;
}

double advantage_hat(const std::vector<double>& nu, const Transition& x, double alpha, double gamma,
                     const FactorizedPolicy& others, const DataPolicyTables& data, int agent) {
  const double weight = rho(others, data, x, agent);
  if (weight == 0.0) return -kInf;
  const double next = x.done ? 0.0 : gamma * nu[x.s_next];
  return x.r - alpha * std::log(weight) + next - nu[x.s];
}

ResampleResult resample(std::vector<double> rho_values, int K, std::uint64_t seed) {
  if (K < 1) throw ValidationError("resample size K must be >= 1");
  if (rho_values.empty()) throw ValidationError("cannot resample an empty dataset");
  std::vector<double> cumulative(rho_values.size());
  double total = 0.0;
  int last_positive = -1;
  for (std::size_t k = 0; k < rho_values.size(); ++k) {
    if (!(rho_values[k] >= 0.0) || !std::isfinite(rho_values[k])) throw ValidationError("importance weights must be finite and >= 0");
    total += rho_values[k];
    cumulative[k] = total;
    if (rho_values[k] > 0.0) last_positive = static_cast<int>(k);
  }
  if (!(total > 0.0)) throw SolverError("current pi_{-i} has no dataset support");

  ResampleResult out;
  out.rho_bar = total / static_cast<double>(rho_values.size());
  out.indices.reserve(K);
  Rng rng(seed);
  for (int k = 0; k < K; ++k) {
    const double u = rng.uniform() * total;
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    out.indices.push_back(it == cumulative.end() ? last_positive : static_cast<int>(it - cumulative.begin()));
  }
  out.rho = std::move(rho_values);
  return out;
}

AgentView analyze_agent(const OfflineDataset& dataset, const DataPolicyTables& data, const FactorizedPolicy& others,
                        int agent, double alpha, double gamma) {
  const JointActionSpace& space = data.space;
  const int S = data.n_states;
  const int A = space.size();
  const int Ai = space.agent_size(agent);
  const auto& records = dataset.transitions;
  const int N = static_cast<int>(records.size());

  AgentView v;
  v.agent = agent;
  v.n_states = S;
  v.n_actions = Ai;
  v.alpha = alpha;
  v.gamma = gamma;
  v.rho.resize(N);
  v.base.resize(N);
  v.has_data.assign(S, false);
  std::vector<std::vector<int>> by_cell(static_cast<std::size_t>(S) * Ai);
  for (int t = 0; t < N; ++t) {
    const auto& x = records[t];
    v.rho[t] = rho(others, data, x, agent);
    v.base[t] = v.rho[t] > 0.0 ? x.r - alpha * std::log(v.rho[t]) : -kInf;
    v.has_data[x.s] = true;
    by_cell[v.cell(x.s, space.component(x.joint, agent))].push_back(t);
  }

  // Partner mass on joint actions that never occur in D, summed explicitly so
  // that an exactly in-data partner policy gives exactly zero.
  v.ood_mass.assign(static_cast<std::size_t>(S) * Ai, 0.0);
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      const auto behavior = data.partner_prob(agent, s, a);
      if (!behavior || *behavior == 0.0) v.ood_mass[v.cell(s, space.component(a, agent))] += others.partner_prob(space, s, a, agent);
    }

  v.p0.assign(S, 0.0);
  for (int s : dataset.initial_states) v.p0[s] += 1.0 / static_cast<double>(dataset.initial_states.size());

  auto dead_share = [&](int c, const std::vector<bool>& viable) {
    double mass = 0.0, dead = 0.0;
    for (int t : by_cell[c]) {
      mass += v.rho[t];
      if (v.rho[t] > 0.0 && !records[t].done && !viable[records[t].s_next]) dead += v.rho[t];
    }
    return mass > 0.0 ? dead / mass : 1.0;
  };

  // Exact regime: cells with no out-of-data partner mass whose successors can
  // themselves continue inside the data.
  std::vector<bool> viable = v.has_data;
  std::vector<bool> clean(static_cast<std::size_t>(S) * Ai, false);
  for (bool changed = true; changed;) {
    changed = false;
    for (int s = 0; s < S; ++s) {
      bool any = false;
      for (int ai = 0; ai < Ai; ++ai) {
        const int c = v.cell(s, ai);
        clean[c] = viable[s] && !by_cell[c].empty() && v.ood_mass[c] == 0.0 && dead_share(c, viable) == 0.0;
        any = any || clean[c];
      }
      if (viable[s] && !any) {
        viable[s] = false;
        changed = true;
      }
    }
  }
  v.exact_regime = true;
  for (int s = 0; s < S; ++s)
    if (v.p0[s] > 0.0 && !viable[s]) v.exact_regime = false;

  v.allowed.assign(static_cast<std::size_t>(S) * Ai, false);
  v.dead_mass.assign(static_cast<std::size_t>(S) * Ai, 0.0);
  if (v.exact_regime) {
    v.allowed = clean;
  } else {
    // Lexicographic limit: at each state keep the cells with the least
    // partner mass leaving the data, then drop the offending records.
    viable = v.has_data;
    for (bool changed = true; changed;) {
      changed = false;
      for (int s = 0; s < S; ++s) {
        if (!viable[s]) continue;
        double least = kInf;
        std::vector<double> bad(Ai, 1.0);
        for (int ai = 0; ai < Ai; ++ai) {
          const int c = v.cell(s, ai);
          if (by_cell[c].empty()) continue;
          const double m = v.ood_mass[c];
          bad[ai] = std::min(1.0, m + (1.0 - m) * dead_share(c, viable));
          least = std::min(least, bad[ai]);
        }
        bool any = false;
        for (int ai = 0; ai < Ai; ++ai) {
          const int c = v.cell(s, ai);
          v.allowed[c] = !by_cell[c].empty() && bad[ai] < 1.0 && bad[ai] <= least + 1e-12;
          any = any || v.allowed[c];
        }
        if (!any) {
          viable[s] = false;
          changed = true;
        }
      }
    }
    for (int s = 0; s < S; ++s)
      if (!viable[s])
        for (int ai = 0; ai < Ai; ++ai) v.allowed[v.cell(s, ai)] = false;
  }

  for (int c = 0; c < S * Ai; ++c)
    if (!by_cell[c].empty()) v.dead_mass[c] = dead_share(c, viable);

  v.kept.assign(N, false);
  for (int t = 0; t < N; ++t) {
    const auto& x = records[t];
    v.kept[t] = v.allowed[v.cell(x.s, space.component(x.joint, agent))] && v.rho[t] > 0.0 &&
                (x.done || viable[x.s_next]);
  }

  // States with data but no usable cell still need a policy row: fall back to
  // the least out-of-data cells there (only myopic e is available).
  for (int s = 0; s < S; ++s) {
    if (!v.has_data[s] || viable[s]) continue;
    double least = kInf;
    for (int ai = 0; ai < Ai; ++ai)
      if (!by_cell[v.cell(s, ai)].empty()) least = std::min(least, v.ood_mass[v.cell(s, ai)]);
    for (int ai = 0; ai < Ai; ++ai) {
      const int c = v.cell(s, ai);
      v.allowed[c] = !by_cell[c].empty() && v.ood_mass[c] <= least + 1e-12;
    }
  }

  v.reachable.assign(S, false);
  std::vector<std::vector<int>> by_state(S);
  for (int t = 0; t < N; ++t) by_state[records[t].s].push_back(t);
  std::queue<int> frontier;
  for (int s = 0; s < S; ++s)
    if (v.p0[s] > 0.0 && viable[s]) {
      v.reachable[s] = true;
      frontier.push(s);
    }
  while (!frontier.empty()) {
    const int s = frontier.front();
    frontier.pop();
    for (int t : by_state[s]) {
      if (!v.kept[t] || records[t].done) continue;
      const int sn = records[t].s_next;
      if (!v.reachable[sn]) {
        v.reachable[sn] = true;
        frontier.push(sn);
      }
    }
  }
  return v;
}

std::vector<double> sample_weights(const AgentView& view, const ResampleResult* resampled) {
  const auto N = view.rho.size();
  std::vector<double> w(N, 0.0);
  if (resampled == nullptr) {
    for (std::size_t t = 0; t < N; ++t)
      if (view.kept[t]) w[t] = view.rho[t] / static_cast<double>(N);
    return w;
  }
  const double unit = resampled->rho_bar / static_cast<double>(resampled->indices.size());
  for (int t : resampled->indices)
    if (view.kept[t]) w[t] += unit;
  return w;
}

NuProblem make_nu_problem(const AgentView& view, const OfflineDataset& dataset, const std::vector<double>& weights,
                          ObjectiveForm form) {
  const auto& records = dataset.transitions;
  const JointActionSpace space = dataset.space();
  NuProblem p;
  p.n_states = view.n_states;
  p.alpha = view.alpha;
  p.gamma = view.gamma;
  p.p0 = view.p0;

  auto add_coef = [](std::vector<std::pair<int, double>>& coef, int s, double c) {
    for (auto& [state, value] : coef)
      if (state == s) {
        value += c;
        return;
      }
    coef.emplace_back(s, c);
  };

  if (form == ObjectiveForm::per_sample) {
    // Identical records collapse into one term with the pooled weight.
    std::map<std::tuple<int, int, int, bool, double>, std::size_t> slot;
    std::vector<double> pooled;
    for (std::size_t t = 0; t < records.size(); ++t) {
      const auto& x = records[t];
      if (weights[t] <= 0.0 || !view.reachable[x.s]) continue;
      const auto key = std::make_tuple(x.s, x.joint, x.s_next, x.done, x.r);
      const auto [it, fresh] = slot.try_emplace(key, p.terms.size());
      if (fresh) {
        NuTerm term;
        term.base = view.base[t];
        add_coef(term.coef, x.s, -1.0);
        if (!x.done && p.gamma != 0.0) add_coef(term.coef, x.s_next, p.gamma);
        p.terms.push_back(std::move(term));
        pooled.push_back(0.0);
      }
      pooled[it->second] += weights[t];
    }
    for (std::size_t k = 0; k < p.terms.size(); ++k) p.terms[k].log_weight = std::log(pooled[k]);
  } else {
    std::map<int, std::size_t> slot;
    std::vector<int> source;
    std::vector<double> pooled, weighted_base;
    std::vector<std::map<int, double>> successors;
    for (std::size_t t = 0; t < records.size(); ++t) {
      const auto& x = records[t];
      if (weights[t] <= 0.0 || !view.reachable[x.s]) continue;
      const int c = view.cell(x.s, space.component(x.joint, view.agent));
      const auto [it, fresh] = slot.try_emplace(c, source.size());
      if (fresh) {
        source.push_back(x.s);
        pooled.push_back(0.0);
        weighted_base.push_back(0.0);
        successors.emplace_back();
      }
      const std::size_t k = it->second;
      pooled[k] += weights[t];
      weighted_base[k] += weights[t] * view.base[t];
      if (!x.done && p.gamma != 0.0) successors[k][x.s_next] += weights[t];
    }
    for (std::size_t k = 0; k < source.size(); ++k) {
      NuTerm term;
      term.log_weight = std::log(pooled[k]);
      term.base = weighted_base[k] / pooled[k];
      add_coef(term.coef, source[k], -1.0);
      for (const auto& [sn, w] : successors[k]) add_coef(term.coef, sn, p.gamma * w / pooled[k]);
      p.terms.push_back(std::move(term));
    }
  }

  for (int s = 0; s < p.n_states; ++s)
    if (view.reachable[s]) p.active.push_back(s);

  double p0_active = 0.0;
  for (int s : p.active) p0_active += p.p0[s];
  p.shift_invariant = std::abs(p0_active - 1.0) < 1e-12;
  for (const auto& term : p.terms) {
    double sum = 0.0;
    for (const auto& [s, c] : term.coef) sum += c;
    if (std::abs(sum + (1.0 - p.gamma)) > 1e-12) p.shift_invariant = false;
  }
  return p;
}

ETable build_e_table(const AgentView& view, const OfflineDataset& dataset, const std::vector<double>& weights,
                     const std::vector<double>& nu) {
  const auto& records = dataset.transitions;
  const JointActionSpace space = dataset.space();
  const int S = view.n_states;
  const int Ai = view.n_actions;
  ETable e;
  e.n_states = S;
  e.n_actions = Ai;
  e.values.assign(static_cast<std::size_t>(S) * Ai, -kInf);
  e.support.assign(static_cast<std::size_t>(S) * Ai, false);
  e.myopic.assign(S, false);

  std::vector<double> mass(static_cast<std::size_t>(S) * Ai, 0.0), sum(static_cast<std::size_t>(S) * Ai, 0.0);
  for (std::size_t t = 0; t < records.size(); ++t) {
    const auto& x = records[t];
    const int c = view.cell(x.s, space.component(x.joint, view.agent));
    if (!view.allowed[c]) continue;
    if (view.reachable[x.s]) {
      if (weights[t] <= 0.0) continue;
      const double next = x.done ? 0.0 : view.gamma * nu[x.s_next];
      mass[c] += weights[t];
      sum[c] += weights[t] * (view.base[t] + next - nu[x.s]);
    } else if (view.rho[t] > 0.0) {
      mass[c] += view.rho[t];
      sum[c] += view.rho[t] * view.base[t];
    }
  }
  for (int s = 0; s < S; ++s) {
    e.myopic[s] = view.has_data[s] && !view.reachable[s];
    bool any = false;
    for (int ai = 0; ai < Ai; ++ai) {
      const int c = view.cell(s, ai);
      if (mass[c] > 0.0) {
        e.values[c] = sum[c] / mass[c];
        e.support[c] = true;
        any = true;
      }
    }
    // Allowed cells whose partner mass sits entirely on zero-weight records.
    if (!any && e.myopic[s])
      for (int ai = 0; ai < Ai; ++ai)
        if (view.allowed[view.cell(s, ai)]) {
          e.values[view.cell(s, ai)] = 0.0;
          e.support[view.cell(s, ai)] = true;
        }
  }
  return e;
}

CorrectionTable corrections(const ETable& e, double alpha) {
  CorrectionTable w{e.n_states, e.n_actions, std::vector<double>(e.values.size(), 0.0)};
  for (std::size_t c = 0; c < e.values.size(); ++c)
    if (e.support[c]) w.values[c] = closed_form_w(e.values[c], alpha);
  return w;
}

Extraction extract_policy(const ETable& e, const DataPolicyTables& data, int agent, double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
  const int S = e.n_states;
  const int Ai = e.n_actions;
  Extraction out;
  out.table.assign(static_cast<std::size_t>(S) * Ai, 0.0);
  out.undefined.assign(S, false);
  std::vector<double> logits(Ai);
  for (int s = 0; s < S; ++s) {
    const auto row = static_cast<std::size_t>(s) * Ai;
    if (!data.has_state(agent, s)) {
      out.undefined[s] = true;
      std::fill_n(out.table.begin() + row, Ai, 1.0 / Ai);
      continue;
    }
    double top = -kInf;
    for (int a = 0; a < Ai; ++a) {
      const double prior = data.own_prob(agent, s, a);
      logits[a] = (prior > 0.0 && e.support[row + a]) ? std::log(prior) + e.values[row + a] / alpha : -kInf;
      top = std::max(top, logits[a]);
    }
    if (top == -kInf) {
      for (int a = 0; a < Ai; ++a) out.table[row + a] = data.own_prob(agent, s, a);
      continue;
    }
    double z = 0.0;
    for (int a = 0; a < Ai; ++a) z += logits[a] == -kInf ? 0.0 : std::exp(logits[a] - top);
    for (int a = 0; a < Ai; ++a) out.table[row + a] = logits[a] == -kInf ? 0.0 : std::exp(logits[a] - top) / z;
  }
  return out;
}

FactorizedPolicy initial_policy(const DataPolicyTables& data, double noise, std::uint64_t seed,
                                std::vector<std::vector<bool>>* undefined) {
  const int S = data.n_states;
  FactorizedPolicy pi = FactorizedPolicy::uniform(S, data.space.sizes());
  if (undefined) undefined->assign(pi.n_agents(), std::vector<bool>(S, false));
  Rng rng(seed);
  for (int i = 0; i < pi.n_agents(); ++i) {
    const int Ai = pi.action_counts[i];
    std::vector<double> g(Ai);
    for (int s = 0; s < S; ++s) {
      for (double& v : g) v = rng.normal();
      if (!data.has_state(i, s)) {
        if (undefined) (*undefined)[i][s] = true;
        continue;
      }
      auto row = pi.row(i, s);
      double z = 0.0;
      for (int a = 0; a < Ai; ++a) {
        row[a] = data.own_prob(i, s, a) * std::exp(noise * g[a]);
        z += row[a];
      }
      for (double& p : row) p /= z;
    }
  }
  return pi;
}

TrainResult train(const OfflineDataset& dataset, double gamma, const TrainConfig& config, const TabularMMDP* mmdp) {
  config.validate();
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ValidationError("discount must lie in [0, 1)");
  if (dataset.initial_states.empty()) throw ValidationError("dataset has no initial states");
  const auto start = Clock::now();
  const DataPolicyTables data = fit_data_policies(dataset);
  const EmpiricalDistribution dist = empirical_distribution(dataset);
  const int N = data.space.n_agents();

  std::vector<int> order = config.agent_order;
  if (order.empty()) {
    order.resize(N);
    std::iota(order.begin(), order.end(), 0);
  }
  for (int i : order)
    if (i < 0 || i >= N) throw ValidationError("agent order names an unknown agent");

  TrainResult result;
  auto& report = result.report;
  FactorizedPolicy& pi = result.policy;
  pi = initial_policy(data, config.init_noise, mix_seed(config.seed, 0), &report.undefined_states);

  auto objective = [&](const FactorizedPolicy& policy) {
    return mmdp ? regularized_objective(*mmdp, policy, dist, config.alpha, 0) : -kInf;
  };
  report.updates.push_back({0, -1, objective(pi), true, 0, 0.0, 0.0});
  report.snapshots.push_back(pi);

  std::vector<std::vector<double>> nu(N, std::vector<double>(dataset.n_states, 0.0));
  Rng order_rng(mix_seed(config.seed, 1));
  report.stopping_reason = "max-sweeps";
  for (int sweep = 1; sweep <= config.max_sweeps; ++sweep) {
    report.sweeps = sweep;
    if (config.shuffle_order)
      for (int k = static_cast<int>(order.size()) - 1; k > 0; --k) std::swap(order[k], order[order_rng.below(k + 1)]);
    const FactorizedPolicy before = pi;
    const double j_before = report.updates.back().objective;

    for (int agent : order) {
      const auto t0 = Clock::now();
      const AgentView view = analyze_agent(dataset, data, pi, agent, config.alpha, gamma);
      std::vector<double> weights;
      ObjectiveForm form = ObjectiveForm::per_cell;
      if (config.mode == Mode::resampled) {
        const auto rr = resample(view.rho, config.K, mix_seed(config.seed, 2 + static_cast<std::uint64_t>(sweep) * N + agent));
        weights = sample_weights(view, &rr);
        form = ObjectiveForm::per_sample;
      } else {
        weights = sample_weights(view, nullptr);
      }
      const NuProblem problem = make_nu_problem(view, dataset, weights, form);
      const NuSolution sol = solve_nu(problem, config.inner, nu[agent], config.incremental);
      nu[agent] = sol.nu;
      const ETable e = build_e_table(view, dataset, weights, sol.nu);
      const Extraction ext = extract_policy(e, data, agent, config.alpha);
      pi.tables[agent] = ext.table;

      report.updates.push_back({sweep, agent, objective(pi), view.exact_regime, sol.iterations, sol.gradient_norm,
                                seconds_since(t0)});
      report.snapshots.push_back(pi);
    }

    double change = 0.0;
    for (int i = 0; i < N; ++i)
      for (std::size_t k = 0; k < pi.tables[i].size(); ++k)
        change = std::max(change, std::abs(pi.tables[i][k] - before.tables[i][k]));
    const double j_after = report.updates.back().objective;
    if (change <= config.policy_tolerance) {
      report.stopping_reason = "policy-fixed-point";
      break;
    }
    if (std::isfinite(j_before) && std::isfinite(j_after) && j_after - j_before < config.stop_tolerance) {
      report.stopping_reason = "objective-converged";
      break;
    }
  }

  if (mmdp)
    for (int i = 0; i < N; ++i) report.final_gaps.push_back(best_response_gap(*mmdp, pi, dist, config.alpha, i));
  report.seconds = seconds_since(start);
  return result;
}

}  // namespace alberdice
