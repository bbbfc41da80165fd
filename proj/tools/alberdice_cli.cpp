#include "alberdice/baselines.hpp"
#include "alberdice/dataset.hpp"
#include "alberdice/environments.hpp"
#include "alberdice/evaluation.hpp"
#include "alberdice/experiments.hpp"
#include "alberdice/io.hpp"
#include "alberdice/nash.hpp"
#include "alberdice/solver.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numeric>
#include <optional>

namespace fs = std::filesystem;
using namespace alberdice;
using json = nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kValidation = 1;
constexpr int kSolver = 2;
constexpr int kAcceptance = 3;

using Clock = std::chrono::steady_clock;

// Flags shared by train and reproduce; each one overrides the config file
// only when it was given on the command line.
struct TrainFlags {
  std::string config_path;
  double alpha = 1.0;
  std::string mode = "exact";
  int K = 100000;
  CLI::Option* alpha_opt = nullptr;
  CLI::Option* mode_opt = nullptr;
  CLI::Option* K_opt = nullptr;

  void attach(CLI::App& cmd) {
    cmd.add_option("--config", config_path, "TrainConfig JSON; explicit flags take precedence")
        ->check(CLI::ExistingFile);
    alpha_opt = cmd.add_option("--alpha", alpha, "KL regularization strength")->check(CLI::PositiveNumber);
    mode_opt = cmd.add_option("--mode", mode, "inner expectation: exact or resampled")
                   ->check(CLI::IsMember({"exact", "resampled"}));
    K_opt = cmd.add_option("--K", K, "resampled dataset size")->check(CLI::PositiveNumber);
  }

  TrainConfig resolve(TrainConfig base) const {
    if (!config_path.empty()) base = config_from_json(read_text(config_path), base);
    if (alpha_opt->count()) base.alpha = alpha;
    if (mode_opt->count()) base.mode = mode == "exact" ? Mode::exact : Mode::resampled;
    if (K_opt->count()) base.K = K;
    base.validate();
    return base;
  }
};

struct EnvFlags {
  std::string env;
  std::string mmdp_path;

  void attach(CLI::App& cmd) {
    cmd.add_option("--env", env, "built-in environment")->check(CLI::IsMember(builtin_environments()));
    cmd.add_option("--mmdp", mmdp_path, "MMDP JSON file")->check(CLI::ExistingFile);
  }

  // Falls back to the environment recorded in the dataset sidecar.
  std::optional<TabularMMDP> load(const OfflineDataset* dataset = nullptr) const {
    if (!mmdp_path.empty()) return load_mmdp(mmdp_path);
    if (!env.empty()) return make_builtin(env);
    if (dataset) {
      const auto it = dataset->metadata.find("env");
      if (it != dataset->metadata.end()) return make_builtin(it->second);
    }
    return std::nullopt;
  }

  TabularMMDP require(const OfflineDataset* dataset = nullptr) const {
    auto mmdp = load(dataset);
    if (!mmdp) throw ValidationError("no environment: pass --env or --mmdp");
    return *mmdp;
  }
};

RunManifest make_manifest(const std::string& command, const json& canonical, std::uint64_t seed,
                          std::vector<std::string> inputs, std::vector<std::string> outputs) {
  RunManifest m;
  m.command = command;
  m.config_hash = fnv1a_hex(canonical.dump());
  m.seed = seed;
  m.inputs = std::move(inputs);
  m.outputs = std::move(outputs);
  return m;
}

void write_manifest(const fs::path& dir, RunManifest m, Clock::time_point t0) {
  m.wall_clock_seconds = std::chrono::duration<double>(Clock::now() - t0).count();
  write_text(dir / "manifest.json", manifest_to_json(m) + "\n");
}

std::vector<std::uint64_t> seed_range(int n) {
  if (n < 1) throw ValidationError("--seeds must be at least 1");
  std::vector<std::uint64_t> seeds(n);
  std::iota(seeds.begin(), seeds.end(), 0);
  return seeds;
}

int cmd_envs() {
  for (const auto& name : builtin_environments()) {
    const TabularMMDP mmdp = make_builtin(name);
    std::cout << name << ": " << mmdp.n_states() << " states, " << mmdp.n_agents() << " agents, " << mmdp.n_joint()
              << " joint actions, gamma " << mmdp.gamma;
    if (mmdp.horizon) std::cout << ", horizon " << *mmdp.horizon;
    std::cout << ", recipes:";
    for (const auto& r : dataset_recipes(name)) std::cout << ' ' << r;
    std::cout << '\n';
  }
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tabular offline multi-agent RL: AlberDICE, BC and OptiDICE"};
  app.require_subcommand(1);
  std::function<int()> run;

  auto* envs = app.add_subcommand("envs", "list built-in environments");
  envs->callback([&] { run = cmd_envs; });

  // gen-data ------------------------------------------------------------------
  auto* gen = app.add_subcommand("gen-data", "write a built-in offline dataset (JSONL plus sidecar)");
  std::string gen_env, gen_recipe, gen_out;
  std::uint64_t gen_seed = 0;
  int gen_trajectories = 500;
  gen->add_option("--env", gen_env, "built-in environment")->required()->check(CLI::IsMember(builtin_environments()));
  gen->add_option("--recipe", gen_recipe, "a-d for matrix games, optimal or mix for bridge")->required();
  gen->add_option("--seed", gen_seed, "sampling seed");
  gen->add_option("--trajectories", gen_trajectories, "trajectories per behavior component")
      ->check(CLI::PositiveNumber);
  gen->add_option("--out", gen_out, "dataset path (default <env>-<recipe>.jsonl)");
  gen->callback([&] {
    run = [&] {
      OfflineDataset d = make_dataset(gen_env, gen_recipe, gen_seed, gen_trajectories);
      const fs::path out = gen_out.empty() ? fs::path(gen_env + "-" + gen_recipe + ".jsonl") : fs::path(gen_out);
      const json canonical = {{"command", "gen-data"}, {"env", gen_env}, {"recipe", gen_recipe},
                              {"seed", gen_seed}, {"trajectories", gen_trajectories}};
      RunManifest m = make_manifest("gen-data", canonical, gen_seed, {}, {out.string(), sidecar_path(out).string()});
      d.metadata["manifest"] = json::parse(manifest_to_json(m, false)).dump();
      write_dataset(d, out);
      std::cout << "wrote " << d.transitions.size() << " records, " << d.initial_states.size() << " initial states to "
                << out.string() << " (config " << m.config_hash << ")\n";
      return kOk;
    };
  });

  // train ---------------------------------------------------------------------
  auto* tr = app.add_subcommand("train", "train a policy on an offline dataset");
  std::string tr_algo = "alberdice", tr_dataset, tr_out = "run";
  std::uint64_t tr_seed = 0;
  double tr_gamma = -1.0;
  TrainFlags tr_flags;
  EnvFlags tr_env;
  tr->add_option("--algo", tr_algo, "bc, optidice or alberdice")->check(CLI::IsMember({"bc", "optidice", "alberdice"}));
  tr->add_option("--dataset", tr_dataset, "dataset JSONL")->required()->check(CLI::ExistingFile);
  auto* tr_seed_opt = tr->add_option("--seed", tr_seed, "initialization and resampling seed");
  tr->add_option("--gamma", tr_gamma, "discount when no environment is known")->check(CLI::Range(0.0, 0.999999999));
  tr->add_option("--out", tr_out, "output directory");
  tr_flags.attach(*tr);
  tr_env.attach(*tr);
  tr->callback([&] {
    run = [&] {
      const auto t0 = Clock::now();
      const OfflineDataset dataset = read_dataset(tr_dataset);
      const auto mmdp = tr_env.load(&dataset);
      if (!mmdp && tr_gamma < 0.0) throw ValidationError("no environment: pass --env, --mmdp or --gamma");
      const double gamma = mmdp ? mmdp->gamma : tr_gamma;
      TrainConfig config = tr_flags.resolve({});
      if (tr_seed_opt->count()) config.seed = tr_seed;

      const fs::path out(tr_out);
      fs::create_directories(out);
      json canonical = {{"command", "train"}, {"algo", tr_algo}, {"dataset", tr_dataset}, {"gamma", gamma},
                        {"config", json::parse(config_to_json(config))}};
      if (mmdp) canonical["mmdp"] = json::parse(mmdp_to_json(*mmdp));
      std::vector<std::string> outputs{(out / "policy.json").string()};
      if (tr_algo == "alberdice") outputs.push_back((out / "train_report.json").string());
      RunManifest m = make_manifest("train", canonical, config.seed, {tr_dataset}, outputs);

      FactorizedPolicy policy;
      try {
        if (tr_algo == "bc") {
          policy = bc_train(dataset).policy;
        } else if (tr_algo == "optidice") {
          policy = optidice_train(dataset, gamma, config.alpha, config.inner).result.policy;
        } else {
          TrainResult result = train(dataset, gamma, config, mmdp ? &*mmdp : nullptr);
          policy = std::move(result.policy);
          write_text(out / "train_report.json",
                     embed_manifest(m, "report", train_report_to_json(result.report, false)) + "\n");
          std::cout << "stopped: " << result.report.stopping_reason << " after " << result.report.sweeps
                    << " sweeps, " << result.report.seconds << " s\n";
          for (std::size_t i = 0; i < result.report.final_gaps.size(); ++i)
            std::cout << "agent " << i + 1 << " best-response gap " << result.report.final_gaps[i] << '\n';
        }
      } catch (const SolverError& e) {
        write_text(out / "error.json",
                   json{{"error", "solver"}, {"message", e.what()}, {"manifest", json::parse(manifest_to_json(m, false))}}
                           .dump(1) +
                       "\n");
        throw;
      }
      write_text(out / "policy.json",
                 embed_manifest(m, "policy", policy_to_json(policy, mmdp ? &*mmdp : nullptr)) + "\n");
      write_manifest(out, m, t0);
      std::cout << "wrote " << (out / "policy.json").string() << '\n';
      return kOk;
    };
  });

  // verify-nash ---------------------------------------------------------------
  auto* vn = app.add_subcommand("verify-nash", "regularized best-response gaps of a policy");
  std::string vn_policy, vn_dataset, vn_out;
  double vn_alpha = 1.0;
  EnvFlags vn_env;
  vn->add_option("--policy", vn_policy, "policy JSON")->required()->check(CLI::ExistingFile);
  vn->add_option("--dataset", vn_dataset, "dataset JSONL defining d^D")->required()->check(CLI::ExistingFile);
  vn->add_option("--alpha", vn_alpha, "KL regularization strength")->check(CLI::NonNegativeNumber);
  vn->add_option("--out", vn_out, "write the report JSON here");
  vn_env.attach(*vn);
  vn->callback([&] {
    run = [&] {
      const OfflineDataset dataset = read_dataset(vn_dataset);
      const TabularMMDP mmdp = vn_env.require(&dataset);
      const FactorizedPolicy policy = policy_from_json(json::parse(read_text(vn_policy)).value("policy", json()).dump());
      const NashReport report = verify_policy(mmdp, policy, empirical_distribution(dataset), vn_alpha);
      std::cout << "J_alpha " << report.objective << "\n";
      for (std::size_t i = 0; i < report.gaps.size(); ++i)
        std::cout << "agent " << i + 1 << ": regularized gap " << report.gaps[i] << ", unregularized gap "
                  << report.unregularized_gaps[i] << '\n';
      std::cout << "epsilon " << report.epsilon << '\n';
      if (!vn_out.empty()) {
        const json canonical = {{"command", "verify-nash"}, {"policy", vn_policy}, {"dataset", vn_dataset},
                                {"alpha", vn_alpha}};
        const RunManifest m = make_manifest("verify-nash", canonical, 0, {vn_policy, vn_dataset}, {vn_out});
        write_text(vn_out, embed_manifest(m, "nash", nash_report_to_json(report)) + "\n");
      }
      return kOk;
    };
  });

  // evaluate ------------------------------------------------------------------
  auto* ev = app.add_subcommand("evaluate", "episodic return and OOD rate of a policy");
  std::string ev_policy, ev_dataset;
  int ev_horizon = 0, ev_episodes = 0, ev_samples = 100000;
  std::uint64_t ev_seed = 0;
  EnvFlags ev_env;
  ev->add_option("--policy", ev_policy, "policy JSON")->required()->check(CLI::ExistingFile);
  ev->add_option("--dataset", ev_dataset, "dataset JSONL for OOD rates")->check(CLI::ExistingFile);
  ev->add_option("--horizon", ev_horizon, "episode length (default: the environment's)")->check(CLI::PositiveNumber);
  ev->add_option("--episodes", ev_episodes, "Monte-Carlo episodes on top of the exact return")
      ->check(CLI::NonNegativeNumber);
  ev->add_option("--samples", ev_samples, "draws for the sampled OOD rate")->check(CLI::PositiveNumber);
  ev->add_option("--seed", ev_seed, "Monte-Carlo seed");
  ev_env.attach(*ev);
  ev->callback([&] {
    run = [&] {
      std::optional<OfflineDataset> dataset;
      if (!ev_dataset.empty()) dataset = read_dataset(ev_dataset);
      const TabularMMDP mmdp = ev_env.require(dataset ? &*dataset : nullptr);
      const FactorizedPolicy policy = policy_from_json(json::parse(read_text(ev_policy)).value("policy", json()).dump());
      const int horizon = ev_horizon > 0 ? ev_horizon : mmdp.horizon.value_or(100);
      json out = {{"episodic_return", episodic_return(mmdp, policy, horizon)}, {"horizon", horizon}};
      if (ev_episodes > 0) {
        const auto mc = monte_carlo_return(mmdp, policy, horizon, ev_episodes, ev_seed);
        out["monte_carlo"] = {{"mean", mc.mean}, {"standard_error", mc.standard_error}, {"episodes", mc.episodes}};
      }
      if (dataset) {
        const EmpiricalDistribution dist = empirical_distribution(*dataset);
        out["ood_rate"] = ood_rate(policy, dist, OodMode::support_exact);
        out["ood_rate_sampled"] = ood_rate(policy, dist, OodMode::sampled, ev_samples, ev_seed);
      }
      std::cout << out.dump(1) << '\n';
      return kOk;
    };
  });

  // reproduce -----------------------------------------------------------------
  auto* rp = app.add_subcommand("reproduce", "run a full experiment grid and print PASS/FAIL verdicts");
  std::string rp_target, rp_env = "penalty-xor", rp_out;
  int rp_seeds = 5;
  bool rp_sequential = false;
  TrainFlags rp_flags;
  rp->add_option("target", rp_target, "matrix or bridge")->required()->check(CLI::IsMember({"matrix", "bridge"}));
  rp->add_option("--env", rp_env, "matrix game")->check(CLI::IsMember({"penalty-xor", "xor"}));
  rp->add_option("--seeds", rp_seeds, "number of seeds, 0..n-1")->check(CLI::PositiveNumber);
  rp->add_option("--out", rp_out, "directory for report.json, report.csv and verdicts.txt");
  rp->add_flag("--sequential", rp_sequential, "run seeds one after another");
  rp_flags.attach(*rp);
  rp->callback([&] {
    run = [&] {
      const auto t0 = Clock::now();
      TrainConfig defaults;
      defaults.alpha = rp_target == "matrix" ? 1.0 : 0.01;
      const TrainConfig config = rp_flags.resolve(defaults);
      const auto seeds = seed_range(rp_seeds);
      ExperimentResult result;
      std::string extra;
      if (rp_target == "matrix") {
        MatrixExperimentConfig mc;
        mc.env = rp_env;
        mc.alpha = config.alpha;
        mc.mode = config.mode;
        mc.K = config.K;
        mc.seeds = seeds;
        mc.parallel = !rp_sequential;
        result = run_matrix_experiment(mc);
      } else {
        BridgeExperimentConfig bc;
        bc.alpha = config.alpha;
        bc.mode = config.mode;
        bc.K = config.K;
        bc.seeds = seeds;
        bc.parallel = !rp_sequential;
        BridgeExperimentResult br = run_bridge_experiment(bc);
        extra = "oracle episodic return " + std::to_string(br.oracle_return) + "\n";
        const BridgeLayout layout(bc.spec);
        const auto [c0, c1] = layout.cells_of(layout.start_state());
        for (const auto& outcome : br.runs)
          if (outcome.record.algorithm == "alberdice" && outcome.record.dataset == "optimal") {
            extra += "alberdice, optimal dataset, seed " + std::to_string(outcome.record.seed) + ":\n" +
                     render_bridge_policy(layout, outcome.policy, 0, c1) + render_bridge_policy(layout, outcome.policy, 1, c0);
            break;
          }
        result = std::move(br);
      }
      const std::string table = render_table(result.report);
      const std::string verdicts = render_verdicts(result.verdicts);
      std::cout << table << extra << verdicts;
      if (!rp_out.empty()) {
        const fs::path out(rp_out);
        fs::create_directories(out);
        const json canonical = {{"command", "reproduce"}, {"target", rp_target}, {"env", rp_env},
                                {"seeds", rp_seeds}, {"config", json::parse(config_to_json(config))}};
        const RunManifest m = make_manifest(
            "reproduce " + rp_target, canonical, 0, {},
            {(out / "report.json").string(), (out / "report.csv").string(), (out / "verdicts.txt").string()});
        write_text(out / "report.json", embed_manifest(m, "report", eval_report_to_json(result.report)) + "\n");
        write_text(out / "report.csv", report_csv(result.report));
        write_text(out / "verdicts.txt", verdicts);
        write_manifest(out, m, t0);
      }
      return all_pass(result.verdicts) ? kOk : kAcceptance;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kValidation;
  }
  try {
    return run();
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidation;
  } catch (const SolverError& e) {
    std::cerr << "solver error: " << e.what() << '\n';
    return kSolver;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kValidation;
  }
}
