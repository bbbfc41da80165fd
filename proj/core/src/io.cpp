#include "alberdice/io.hpp"

#include "alberdice/dataset.hpp"
#include "alberdice/environments.hpp"

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace alberdice {

using json = nlohmann::json;

namespace {

json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

json numbers(const std::vector<double>& vs) {
  json out = json::array();
  for (double v : vs) out.push_back(number(v));
  return out;
}

template <typename T>
T field(const json& j, const char* key) {
  if (!j.contains(key)) throw ValidationError(std::string("missing key '") + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad value for '") + key + "': " + e.what());
  }
}

json parse(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("malformed JSON: ") + e.what());
  }
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write " + path.string());
  out << text;
}

// MMDP documents ------------------------------------------------------------

std::string mmdp_to_json(const TabularMMDP& mmdp) {
  const int S = mmdp.n_states();
  const int A = mmdp.n_joint();
  json j;
  j["n_agents"] = mmdp.n_agents();
  j["states"] = mmdp.state_names;
  j["actions"] = mmdp.action_names;
  json transition = json::array(), reward = json::array();
  for (int s = 0; s < S; ++s)
    for (int a = 0; a < A; ++a) {
      if (mmdp.r(s, a) != 0.0) reward.push_back({s, a, mmdp.r(s, a)});
      for (int sn = 0; sn < S; ++sn)
        if (mmdp.P(s, a, sn) != 0.0) transition.push_back({s, a, sn, mmdp.P(s, a, sn)});
    }
  j["transition"] = std::move(transition);
  j["reward"] = std::move(reward);
  j["gamma"] = mmdp.gamma;
  j["p0"] = mmdp.p0;
  if (!mmdp.terminal.empty()) {
    json terminals = json::array();
    for (int s = 0; s < S; ++s)
      if (mmdp.terminal[s]) terminals.push_back(s);
    j["terminals"] = std::move(terminals);
  }
  if (mmdp.horizon) j["horizon"] = *mmdp.horizon;
  return j.dump(1);
}

TabularMMDP mmdp_from_json(const std::string& text) {
  const json j = parse(text);
  TabularMMDP g;
  g.state_names = field<std::vector<std::string>>(j, "states");
  g.action_names = field<std::vector<std::vector<std::string>>>(j, "actions");
  if (field<int>(j, "n_agents") != g.n_agents()) throw ValidationError("n_agents disagrees with the action lists");
  if (g.n_states() < 1 || g.n_agents() < 1) throw ValidationError("MMDP needs states and agents");
  for (const auto& names : g.action_names)
    if (names.empty()) throw ValidationError("agent with an empty action set");
  const int S = g.n_states();
  const int A = g.n_joint();
  g.transition.assign(static_cast<std::size_t>(S) * A * S, 0.0);
  g.reward.assign(static_cast<std::size_t>(S) * A, 0.0);
  auto index = [&](const json& v, int bound, const char* what) {
    const int k = v.get<int>();
    if (k < 0 || k >= bound) throw ValidationError(std::string(what) + " index out of range");
    return k;
  };
  try {
    for (const auto& t : field<json>(j, "transition")) {
      if (!t.is_array() || t.size() != 4) throw ValidationError("transition triplets are [s, joint_a, s', p]");
      const int s = index(t[0], S, "state"), a = index(t[1], A, "joint action"), sn = index(t[2], S, "state");
      g.transition[(static_cast<std::size_t>(s) * A + a) * S + sn] = t[3].get<double>();
    }
    for (const auto& t : field<json>(j, "reward")) {
      if (!t.is_array() || t.size() != 3) throw ValidationError("reward triplets are [s, joint_a, r]");
      const int s = index(t[0], S, "state"), a = index(t[1], A, "joint action");
      g.reward[static_cast<std::size_t>(s) * A + a] = t[2].get<double>();
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad sparse triplet: ") + e.what());
  }
  g.gamma = field<double>(j, "gamma");
  g.p0 = field<std::vector<double>>(j, "p0");
  if (j.contains("terminals")) {
    g.terminal.assign(S, false);
    for (const auto& s : j["terminals"]) g.terminal[index(s, S, "terminal state")] = true;
  }
  if (j.contains("horizon")) g.horizon = field<int>(j, "horizon");
  g.validate();
  return g;
}

TabularMMDP load_mmdp(const std::filesystem::path& path) { return mmdp_from_json(read_text(path)); }

void save_mmdp(const TabularMMDP& mmdp, const std::filesystem::path& path) { write_text(path, mmdp_to_json(mmdp)); }

// Datasets ------------------------------------------------------------------

void write_dataset(const OfflineDataset& dataset, const std::filesystem::path& path) {
  const JointActionSpace space = dataset.space();
  std::ostringstream os;
  for (const auto& t : dataset.transitions) {
    json line;
    line["s"] = t.s;
    line["a"] = space.decode(t.joint);
    line["r"] = t.r;
    line["s_next"] = t.s_next;
    line["done"] = t.done;
    os << line.dump() << '\n';
  }
  write_text(path, os.str());
  json meta;
  meta["n_states"] = dataset.n_states;
  meta["action_counts"] = dataset.action_counts;
  meta["initial_states"] = dataset.initial_states;
  meta["metadata"] = dataset.metadata;
  write_text(sidecar_path(path), meta.dump(1));
}

OfflineDataset read_dataset(const std::filesystem::path& path) {
  const json meta = parse(read_text(sidecar_path(path)));
  OfflineDataset d;
  d.n_states = field<int>(meta, "n_states");
  d.action_counts = field<std::vector<int>>(meta, "action_counts");
  d.initial_states = field<std::vector<int>>(meta, "initial_states");
  if (meta.contains("metadata")) d.metadata = field<std::map<std::string, std::string>>(meta, "metadata");
  const JointActionSpace space = d.space();
  std::istringstream lines(read_text(path));
  std::string line;
  int number = 0;
  while (std::getline(lines, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      const json j = parse(line);
      d.transitions.push_back({field<int>(j, "s"), space.encode(field<std::vector<int>>(j, "a")), field<double>(j, "r"),
                               field<int>(j, "s_next"), field<bool>(j, "done")});
    } catch (const ValidationError& e) {
      throw ValidationError("dataset line " + std::to_string(number) + ": " + e.what());
    }
  }
  d.validate();
  return d;
}

// Policies ------------------------------------------------------------------

std::string policy_to_json(const FactorizedPolicy& policy, const TabularMMDP* names) {
  json j;
  json states = json::array();
  for (int s = 0; s < policy.n_states; ++s)
    states.push_back(names ? names->state_names[s] : std::to_string(s));
  j["states"] = states;
  json agents = json::array();
  for (int i = 0; i < policy.n_agents(); ++i) {
    json agent;
    json actions = json::array();
    for (int a = 0; a < policy.action_counts[i]; ++a)
      actions.push_back(names ? names->action_names[i][a] : std::to_string(a));
    agent["name"] = "agent" + std::to_string(i + 1);
    agent["actions"] = actions;
    json table = json::object();
    for (int s = 0; s < policy.n_states; ++s) {
      json row = json::object();
      for (int a = 0; a < policy.action_counts[i]; ++a) row[actions[a].get<std::string>()] = policy.prob(i, s, a);
      table[states[s].get<std::string>()] = std::move(row);
    }
    agent["policy"] = std::move(table);
    agents.push_back(std::move(agent));
  }
  j["agents"] = std::move(agents);
  return j.dump(1);
}

FactorizedPolicy policy_from_json(const std::string& text) {
  const json j = parse(text);
  const auto states = field<std::vector<std::string>>(j, "states");
  if (std::set<std::string>(states.begin(), states.end()).size() != states.size())
    throw ValidationError("policy state names must be unique");
  FactorizedPolicy pi;
  pi.n_states = static_cast<int>(states.size());
  for (const auto& agent : field<json>(j, "agents")) {
    const auto actions = field<std::vector<std::string>>(agent, "actions");
    const json table = field<json>(agent, "policy");
    std::vector<double> rows(states.size() * actions.size());
    for (std::size_t s = 0; s < states.size(); ++s) {
      const json row = field<json>(table, states[s].c_str());
      for (std::size_t a = 0; a < actions.size(); ++a) rows[s * actions.size() + a] = field<double>(row, actions[a].c_str());
    }
    pi.action_counts.push_back(static_cast<int>(actions.size()));
    pi.tables.push_back(std::move(rows));
  }
  pi.validate(1e-9);
  return pi;
}

// Configs -------------------------------------------------------------------

std::string config_to_json(const TrainConfig& c) {
  json j;
  j["alpha"] = c.alpha;
  j["mode"] = c.mode == Mode::exact ? "exact" : "resampled";
  j["K"] = c.K;
  j["inner"] = {{"tolerance", c.inner.tolerance},
                {"max_iterations", c.inner.max_iterations},
                {"ridge", c.inner.ridge},
                {"armijo", c.inner.armijo}};
  j["max_sweeps"] = c.max_sweeps;
  j["stop_tolerance"] = c.stop_tolerance;
  j["policy_tolerance"] = c.policy_tolerance;
  j["agent_order"] = c.agent_order;
  j["shuffle_order"] = c.shuffle_order;
  j["incremental"] = c.incremental;
  j["init_noise"] = c.init_noise;
  j["seed"] = c.seed;
  return j.dump(1);
}

TrainConfig config_from_json(const std::string& text, TrainConfig c) {
  const json j = parse(text);
  static const std::set<std::string> known = {"alpha", "mode", "K", "inner", "max_sweeps", "stop_tolerance",
                                              "policy_tolerance", "agent_order", "shuffle_order", "incremental",
                                              "init_noise", "seed"};
  for (const auto& [key, value] : j.items())
    if (!known.contains(key)) throw ValidationError("unknown config key '" + key + "'");
  if (j.contains("alpha")) c.alpha = field<double>(j, "alpha");
  if (j.contains("mode")) {
    const auto mode = field<std::string>(j, "mode");
    if (mode == "exact") c.mode = Mode::exact;
    else if (mode == "resampled") c.mode = Mode::resampled;
    else throw ValidationError("mode must be 'exact' or 'resampled'");
  }
  if (j.contains("K")) c.K = field<int>(j, "K");
  if (j.contains("inner")) {
    const json& in = j["inner"];
    if (in.contains("tolerance")) c.inner.tolerance = field<double>(in, "tolerance");
    if (in.contains("max_iterations")) c.inner.max_iterations = field<int>(in, "max_iterations");
    if (in.contains("ridge")) c.inner.ridge = field<double>(in, "ridge");
    if (in.contains("armijo")) c.inner.armijo = field<double>(in, "armijo");
  }
  if (j.contains("max_sweeps")) c.max_sweeps = field<int>(j, "max_sweeps");
  if (j.contains("stop_tolerance")) c.stop_tolerance = field<double>(j, "stop_tolerance");
  if (j.contains("policy_tolerance")) c.policy_tolerance = field<double>(j, "policy_tolerance");
  if (j.contains("agent_order")) c.agent_order = field<std::vector<int>>(j, "agent_order");
  if (j.contains("shuffle_order")) c.shuffle_order = field<bool>(j, "shuffle_order");
  if (j.contains("incremental")) c.incremental = field<bool>(j, "incremental");
  if (j.contains("init_noise")) c.init_noise = field<double>(j, "init_noise");
  if (j.contains("seed")) c.seed = field<std::uint64_t>(j, "seed");
  c.validate();
  return c;
}

// Reports -------------------------------------------------------------------

std::string train_report_to_json(const TrainReport& r, bool include_timings) {
  json j;
  j["algorithm"] = r.algorithm;
  j["stopping_reason"] = r.stopping_reason;
  j["sweeps"] = r.sweeps;
  if (include_timings) j["seconds"] = r.seconds;
  json updates = json::array();
  for (const auto& u : r.updates) {
    json entry = {{"sweep", u.sweep},
                  {"agent", u.agent},
                  {"objective", number(u.objective)},
                  {"exact_regime", u.exact_regime},
                  {"inner_iterations", u.inner_iterations},
                  {"inner_gradient", number(u.inner_gradient)}};
    if (include_timings) entry["seconds"] = u.seconds;
    updates.push_back(std::move(entry));
  }
  j["updates"] = std::move(updates);
  j["final_gaps"] = numbers(r.final_gaps);
  json undefined = json::array();
  for (const auto& flags : r.undefined_states) {
    json states = json::array();
    for (std::size_t s = 0; s < flags.size(); ++s)
      if (flags[s]) states.push_back(s);
    undefined.push_back(std::move(states));
  }
  j["undefined_states"] = std::move(undefined);
  return j.dump(1);
}

std::string nash_report_to_json(const NashReport& r) {
  json j;
  j["gaps"] = numbers(r.gaps);
  j["unregularized_gaps"] = numbers(r.unregularized_gaps);
  j["objective"] = number(r.objective);
  j["epsilon"] = number(r.epsilon);
  j["tolerance"] = r.tolerance;
  j["monotone"] = r.monotone;
  j["trajectory"] = numbers(r.trajectory);
  json violations = json::array();
  for (const auto& v : r.violations)
    violations.push_back({{"index", v.index}, {"agent", v.agent}, {"before", number(v.before)}, {"after", number(v.after)}});
  j["violations"] = std::move(violations);
  return j.dump(1);
}

std::string eval_report_to_json(const EvalReport& r) {
  json j;
  j["action_labels"] = r.action_labels;
  json rows = json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"dataset", row.dataset},
                    {"algorithm", row.algorithm},
                    {"runs", row.runs},
                    {"mean_return", number(row.mean_return)},
                    {"se_return", row.se_return ? number(*row.se_return) : json(nullptr)},
                    {"mean_ood", number(row.mean_ood)},
                    {"se_ood", row.se_ood ? number(*row.se_ood) : json(nullptr)},
                    {"mean_joint", numbers(row.mean_joint)}});
  j["rows"] = std::move(rows);
  return j.dump(1);
}

// Manifests -----------------------------------------------------------------

namespace {

json manifest_json(const RunManifest& m, bool include_wall_clock) {
  json j;
  j["command"] = m.command;
  j["config_hash"] = m.config_hash;
  j["seed"] = m.seed;
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["version"] = m.version;
  if (include_wall_clock) j["wall_clock_seconds"] = m.wall_clock_seconds;
  return j;
}

}  // namespace

std::string manifest_to_json(const RunManifest& m, bool include_wall_clock) {
  return manifest_json(m, include_wall_clock).dump(1);
}

RunManifest manifest_from_json(const std::string& text) {
  const json j = parse(text);
  RunManifest m;
  m.command = field<std::string>(j, "command");
  m.config_hash = field<std::string>(j, "config_hash");
  m.seed = field<std::uint64_t>(j, "seed");
  m.inputs = field<std::vector<std::string>>(j, "inputs");
  m.outputs = field<std::vector<std::string>>(j, "outputs");
  m.version = field<std::string>(j, "version");
  if (j.contains("wall_clock_seconds")) m.wall_clock_seconds = field<double>(j, "wall_clock_seconds");
  return m;
}

std::string embed_manifest(const RunManifest& manifest, const std::string& key, const std::string& artifact_json) {
  json j;
  j["manifest"] = manifest_json(manifest, false);
  j[key] = parse(artifact_json);
  return j.dump(1);
}

std::string fnv1a_hex(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace alberdice
