#include "alberdice/experiments.hpp"

#include "alberdice/baselines.hpp"
#include "alberdice/random.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <future>
#include <iomanip>
#include <sstream>

namespace alberdice {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

bool is_matrix(const std::string& env) { return env == "penalty-xor" || env == "xor"; }
bool is_bridge(const std::string& env) { return env == "bridge" || env == "bridge-original"; }

BridgeSpec bridge_spec_for(const std::string& env) {
  BridgeSpec spec;
  if (env == "bridge-original") spec.start = BridgeStart::platform_original;
  return spec;
}

std::string fmt(double v, int precision = 4) {
  std::ostringstream os;
  os << std::setprecision(precision) << v;
  return os.str();
}

// Runs fn(k) for k in [0, n), on separate threads when asked; results keep
// their index so the outcome never depends on scheduling.
template <typename T>
std::vector<T> fan_out(std::size_t n, bool parallel, const std::function<T(std::size_t)>& fn) {
  std::vector<T> out;
  out.reserve(n);
  if (!parallel) {
    for (std::size_t k = 0; k < n; ++k) out.push_back(fn(k));
    return out;
  }
  std::vector<std::future<T>> pending;
  for (std::size_t k = 0; k < n; ++k) pending.push_back(std::async(std::launch::async, fn, k));
  for (auto& f : pending) out.push_back(f.get());
  return out;
}

struct RunSpec {
  std::string algorithm;
  std::string dataset_name;
  const OfflineDataset* dataset = nullptr;
  std::uint64_t seed = 0;
};

RunOutcome run_one(const TabularMMDP& mmdp, const RunSpec& spec, double alpha, Mode mode, int K, int horizon,
                   bool with_gaps) {
  const auto t0 = Clock::now();
  const EmpiricalDistribution dist = empirical_distribution(*spec.dataset);
  RunOutcome out;
  if (spec.algorithm == "alberdice") {
    TrainConfig config;
    config.alpha = alpha;
    config.mode = mode;
    config.K = K;
    config.seed = spec.seed;
    TrainResult trained = train(*spec.dataset, mmdp.gamma, config, with_gaps ? &mmdp : nullptr);
    out.policy = std::move(trained.policy);
    out.record.seconds = seconds_since(t0);
    out.gaps = trained.report.final_gaps;
    if (with_gaps) {
      out.audit = audit_training(trained.report, mmdp, dist, alpha);
      out.audited = true;
    }
  } else {
    out.policy = spec.algorithm == "bc" ? bc_train(*spec.dataset).policy
                                        : optidice_train(*spec.dataset, mmdp.gamma, alpha).result.policy;
    out.record.seconds = seconds_since(t0);
    if (with_gaps)
      for (int i = 0; i < mmdp.n_agents(); ++i) out.gaps.push_back(best_response_gap(mmdp, out.policy, dist, alpha, i));
  }
  out.record.algorithm = spec.algorithm;
  out.record.dataset = spec.dataset_name;
  out.record.seed = spec.seed;
  out.record.episodic_return = episodic_return(mmdp, out.policy, horizon);
  out.record.ood_rate = ood_rate(out.policy, dist, OodMode::support_exact);
  return out;
}

int start_state(const TabularMMDP& mmdp) {
  return static_cast<int>(std::max_element(mmdp.p0.begin(), mmdp.p0.end()) - mmdp.p0.begin());
}

double max_gap(const RunOutcome& run) {
  double g = 0.0;
  for (double x : run.gaps) g = std::max(g, x);
  return g;
}

}  // namespace

std::string render_verdicts(const std::vector<Verdict>& verdicts) {
  std::ostringstream os;
  for (const auto& v : verdicts) {
    os << (v.informational ? "INFO " : (v.pass ? "PASS " : "FAIL ")) << v.criterion;
    if (!v.detail.empty()) os << " :: " << v.detail;
    os << '\n';
  }
  return os.str();
}

bool all_pass(const std::vector<Verdict>& verdicts) {
  return std::all_of(verdicts.begin(), verdicts.end(), [](const Verdict& v) { return v.informational || v.pass; });
}

std::vector<std::string> joint_action_labels(const TabularMMDP& mmdp) {
  const JointActionSpace space = mmdp.joint_space();
  std::vector<std::string> labels;
  for (int a = 0; a < space.size(); ++a) {
    std::string label;
    const auto parts = space.decode(a);
    for (int i = 0; i < space.n_agents(); ++i) label += mmdp.action_names[i][parts[i]];
    labels.push_back(label);
  }
  return labels;
}

std::vector<std::string> dataset_recipes(const std::string& env) {
  if (is_matrix(env)) return {"a", "b", "c", "d"};
  if (is_bridge(env)) return {"optimal", "mix"};
  throw ValidationError("unknown environment '" + env + "'");
}

OfflineDataset bridge_optimal_dataset(const TabularMMDP& bridge, const BridgeLayout& layout, int n_trajectories,
                                      std::uint64_t seed) {
  const std::vector<BehaviorPolicy> experts{bridge_expert(bridge, layout, 0), bridge_expert(bridge, layout, 1)};
  OfflineDataset d = generate(bridge, experts, {0.5, 0.5}, n_trajectories, layout.spec().horizon, seed);
  d.metadata["recipe"] = "optimal";
  return d;
}

OfflineDataset bridge_mix_dataset(const TabularMMDP& bridge, const BridgeLayout& layout, int n_trajectories,
                                  std::uint64_t seed) {
  const OfflineDataset optimal = bridge_optimal_dataset(bridge, layout, n_trajectories, seed);
  const OfflineDataset random = generate(bridge, {FactorizedPolicy::uniform(bridge)}, {1.0}, n_trajectories,
                                         layout.spec().horizon, mix_seed(seed, 1));
  OfflineDataset d = merge(optimal, random);
  d.metadata["recipe"] = "mix";
  return d;
}

OfflineDataset make_dataset(const std::string& env, const std::string& recipe, std::uint64_t seed,
                            int n_trajectories) {
  const auto recipes = dataset_recipes(env);
  if (std::find(recipes.begin(), recipes.end(), recipe) == recipes.end())
    throw ValidationError("unknown recipe '" + recipe + "' for environment '" + env + "'");
  OfflineDataset d;
  if (is_matrix(env)) {
    d = matrix_dataset(make_builtin(env), recipe[0]);
  } else {
    const BridgeSpec spec = bridge_spec_for(env);
    const TabularMMDP bridge = build_bridge(spec);
    const BridgeLayout layout(spec);
    d = recipe == "optimal" ? bridge_optimal_dataset(bridge, layout, n_trajectories, seed)
                            : bridge_mix_dataset(bridge, layout, n_trajectories, seed);
  }
  d.metadata["env"] = env;
  d.metadata["recipe"] = recipe;
  return d;
}

ExperimentResult run_matrix_experiment(const MatrixExperimentConfig& config) {
  if (!is_matrix(config.env)) throw ValidationError("matrix experiment needs a matrix game");
  if (config.seeds.empty()) throw ValidationError("need at least one seed");
  const auto t0 = Clock::now();
  const TabularMMDP game = make_builtin(config.env);
  const auto recipes = dataset_recipes(config.env);
  std::vector<OfflineDataset> datasets;
  for (const auto& r : recipes) datasets.push_back(make_dataset(config.env, r, 0));

  std::vector<RunSpec> specs;
  for (std::size_t k = 0; k < recipes.size(); ++k)
    for (const char* algo : {"bc", "optidice", "alberdice"})
      for (std::uint64_t seed : config.seeds) specs.push_back({algo, recipes[k], &datasets[k], seed});

  ExperimentResult result;
  result.runs = fan_out<RunOutcome>(specs.size(), config.parallel, [&](std::size_t k) {
    RunOutcome run = run_one(game, specs[k], config.alpha, config.mode, config.K, 1, true);
    run.record.joint_at_start.clear();
    const JointActionSpace space = game.joint_space();
    for (int a = 0; a < space.size(); ++a) run.record.joint_at_start.push_back(run.policy.joint_prob(space, 0, a));
    return run;
  });
  std::vector<RunRecord> records;
  for (const auto& run : result.runs) records.push_back(run.record);
  result.report = make_report(records, joint_action_labels(game));

  const JointActionSpace space = game.joint_space();
  const JointOptimum optimum = joint_optimum(game);
  const auto optimal = optimum.optimal_actions(0);
  const int AB = space.encode(std::vector<int>{0, 1});
  const std::string tag = "matrix " + config.env + " alpha=" + fmt(config.alpha) + ": ";
  auto runs_of = [&](const std::string& algo, const std::string& recipe) {
    std::vector<const RunOutcome*> out;
    for (const auto& run : result.runs)
      if (run.record.algorithm == algo && run.record.dataset == recipe) out.push_back(&run);
    return out;
  };
  auto& verdicts = result.verdicts;

  for (const auto& recipe : recipes) {
    bool pass = true;
    double worst_mass = 1.0, slowest = 0.0;
    std::string picked;
    for (const auto* run : runs_of("alberdice", recipe)) {
      const auto& joint = run->record.joint_at_start;
      const int best = static_cast<int>(std::max_element(joint.begin(), joint.end()) - joint.begin());
      const bool on_optimum = std::find(optimal.begin(), optimal.end(), best) != optimal.end();
      pass = pass && joint[best] >= 0.99 && on_optimum && (recipe != "a" || best == AB) && run->record.seconds < 5.0;
      worst_mass = std::min(worst_mass, joint[best]);
      slowest = std::max(slowest, run->record.seconds);
      picked += (picked.empty() ? "" : ",") + result.report.action_labels[best];
    }
    verdicts.push_back({tag + "alberdice (" + recipe + ") deterministic on an optimal joint action" +
                            (recipe == "a" ? " (AB)" : "") + ", < 5 s per run",
                        pass,
                        "min top mass " + fmt(worst_mass, 6) + ", picks " + picked + ", slowest " + fmt(slowest, 3) +
                            " s"});
  }

  if (std::find(recipes.begin(), recipes.end(), "c") != recipes.end()) {
    const std::vector<double> bc_target{4.0 / 9, 2.0 / 9, 2.0 / 9, 1.0 / 9};
    double bc_err = 0.0;
    for (const auto* run : runs_of("bc", "c"))
      for (int a = 0; a < 4; ++a) bc_err = std::max(bc_err, std::abs(run->record.joint_at_start[a] - bc_target[a]));
    verdicts.push_back({tag + "bc (c) joint within 0.03 of (4/9, 2/9, 2/9, 1/9)", bc_err <= 0.03,
                        "Linf error " + fmt(bc_err)});

    double marginal_err = 0.0, joint_err = 0.0;
    std::string marginals;
    for (const auto* run : runs_of("optidice", "c")) {
      for (int i = 0; i < 2; ++i) marginal_err = std::max(marginal_err, std::abs(run->policy.prob(i, 0, 0) - 0.5));
      for (double p : run->record.joint_at_start) joint_err = std::max(joint_err, std::abs(p - 0.25));
      marginals = fmt(run->policy.prob(0, 0, 0), 6) + "/" + fmt(run->policy.prob(1, 0, 0), 6);
    }
    verdicts.push_back({tag + "optidice (c) marginals within 0.05 of (0.5, 0.5), joint within 0.05 of uniform",
                        marginal_err <= 0.05 && joint_err <= 0.05,
                        "P(A) per agent " + marginals + ", marginal err " + fmt(marginal_err) + ", joint err " +
                            fmt(joint_err)});
  }

  {
    double worst = 0.0;
    for (const auto& recipe : {"b", "c", "d"})
      for (const auto* run : runs_of("alberdice", recipe)) worst = std::max(worst, run->record.ood_rate);
    verdicts.push_back({tag + "alberdice OOD rate 0 on (b)-(d)", worst <= 1e-12, "max " + fmt(worst)});
  }
  {
    const EmpiricalDistribution dist_b = empirical_distribution(datasets[1]);
    double exact_err = 0.0, sampled_err = 0.0;
    std::string sampled;
    for (const auto* run : runs_of("bc", "b")) {
      const double s = ood_rate(run->policy, dist_b, OodMode::sampled, 100000, mix_seed(run->record.seed, 7));
      exact_err = std::max(exact_err, std::abs(run->record.ood_rate - 0.5));
      sampled_err = std::max(sampled_err, std::abs(s - 0.5));
      sampled = fmt(s, 5);
    }
    verdicts.push_back({tag + "bc (b) OOD rate 0.5 (support-exact) and 0.5 +- 0.02 (10^5 draws)",
                        exact_err <= 1e-12 && sampled_err <= 0.02,
                        "exact err " + fmt(exact_err) + ", sampled " + sampled});
  }
  {
    double err = 0.0, value = 0.0;
    for (const auto* run : runs_of("optidice", "c")) {
      err = std::max(err, std::abs(run->record.ood_rate - 0.25));
      value = run->record.ood_rate;
    }
    verdicts.push_back({tag + "optidice (c) OOD rate 0.25", err <= 1e-4, "rate " + fmt(value, 8)});
  }
  {
    int violations = 0;
    double gap = 0.0;
    for (const auto& run : result.runs) {
      if (!run.audited) continue;
      violations += static_cast<int>(run.audit.violations.size());
      gap = std::max(gap, max_gap(run));
    }
    verdicts.push_back({tag + "alberdice J_alpha monotone (1e-6) in every run", violations == 0,
                        std::to_string(violations) + " violations"});
    verdicts.push_back({tag + "alberdice final best-response gaps <= 1e-4", gap <= 1e-4, "max gap " + fmt(gap)});
  }
  result.seconds = seconds_since(t0);
  return result;
}

BridgeExperimentResult run_bridge_experiment(const BridgeExperimentConfig& config) {
  if (config.seeds.empty()) throw ValidationError("need at least one seed");
  const auto t0 = Clock::now();
  const TabularMMDP bridge = build_bridge(config.spec);
  const BridgeLayout layout(config.spec);
  const int horizon = config.spec.horizon;
  const JointActionSpace space = bridge.joint_space();
  const int LL = space.encode(std::vector<int>{kLeft, kLeft});
  const int RR = space.encode(std::vector<int>{kRight, kRight});

  BridgeExperimentResult result;
  const JointOptimum optimum = joint_optimum(bridge);
  result.oracle_value = optimum.value.J;
  result.oracle_return = episodic_value(bridge, optimum.policy, horizon);

  std::vector<std::string> names{"optimal", "mix"};
  std::vector<OfflineDataset> datasets;  // [recipe * seeds + k]
  for (const auto& name : names)
    for (std::uint64_t seed : config.seeds)
      datasets.push_back(name == "optimal" ? bridge_optimal_dataset(bridge, layout, config.n_trajectories, seed)
                                           : bridge_mix_dataset(bridge, layout, config.n_trajectories, seed));

  std::vector<RunSpec> specs;
  std::vector<std::string> algos{"alberdice"};
  if (config.baselines) algos = {"bc", "optidice", "alberdice"};
  for (std::size_t r = 0; r < names.size(); ++r)
    for (const auto& algo : algos)
      for (std::size_t k = 0; k < config.seeds.size(); ++k)
        specs.push_back({algo, names[r], &datasets[r * config.seeds.size() + k], config.seeds[k]});

  const int s0 = start_state(bridge);
  result.runs = fan_out<RunOutcome>(specs.size(), config.parallel, [&](std::size_t k) {
    RunOutcome run = run_one(bridge, specs[k], config.alpha, config.mode, config.K, horizon,
                             specs[k].algorithm == "alberdice");
    run.record.joint_at_start = {run.policy.joint_prob(space, s0, LL), run.policy.joint_prob(space, s0, RR)};
    return run;
  });
  std::vector<RunRecord> records;
  for (const auto& run : result.runs) records.push_back(run.record);
  result.report = make_report(records, {"LL", "RR"});

  const std::string tag = "bridge alpha=" + fmt(config.alpha) + ": ";
  const double oracle = result.oracle_return;
  auto& verdicts = result.verdicts;
  for (const auto& [name, tolerance] : {std::pair{std::string("optimal"), 0.02}, std::pair{std::string("mix"), 0.05}}) {
    double worst = 0.0;
    std::string returns;
    for (const auto& run : result.runs) {
      if (run.record.algorithm != "alberdice" || run.record.dataset != name) continue;
      worst = std::max(worst, std::abs(run.record.episodic_return - oracle) / std::abs(oracle));
      returns += (returns.empty() ? "" : ",") + fmt(run.record.episodic_return, 6);
    }
    verdicts.push_back({tag + "alberdice " + name + " return within " + fmt(100 * tolerance) + "% of oracle " +
                            fmt(oracle, 6),
                        worst <= tolerance, "returns " + returns + ", worst rel err " + fmt(worst)});
  }
  {
    bool pass = true;
    std::string picks;
    for (const auto& run : result.runs) {
      if (run.record.algorithm != "alberdice" || run.record.dataset != "optimal") continue;
      const double ll = run.record.joint_at_start[0], rr = run.record.joint_at_start[1];
      pass = pass && std::max(ll, rr) >= 0.99;
      picks += (picks.empty() ? "" : ",") + std::string(ll >= rr ? "LL " : "RR ") + fmt(std::max(ll, rr), 6);
    }
    verdicts.push_back({tag + "alberdice optimal start action deterministic (>= 0.99) on (L,L) or (R,R)", pass,
                        picks});
  }
  {
    int violations = 0;
    double gap = 0.0;
    for (const auto& run : result.runs) {
      if (!run.audited) continue;
      violations += static_cast<int>(run.audit.violations.size());
      gap = std::max(gap, max_gap(run));
    }
    verdicts.push_back({tag + "alberdice J_alpha monotone (1e-6) in every run", violations == 0,
                        std::to_string(violations) + " violations"});
    verdicts.push_back({tag + "alberdice final best-response gaps <= 1e-3", gap <= 1e-3, "max gap " + fmt(gap)});
  }
  result.seconds = seconds_since(t0);
  return result;
}

}  // namespace alberdice
