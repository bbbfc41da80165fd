#pragma once

#include "alberdice/evaluation.hpp"
#include "alberdice/mmdp.hpp"
#include "alberdice/nash.hpp"
#include "alberdice/solver.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace alberdice {

inline constexpr std::string_view kToolkitVersion = "0.1.0";

std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, std::string_view text);

// Policy tables keyed by agent, state and action names; names come from the
// MMDP when given, otherwise indices are used.
std::string policy_to_json(const FactorizedPolicy& policy, const TabularMMDP* names = nullptr);
FactorizedPolicy policy_from_json(const std::string& text);

std::string config_to_json(const TrainConfig& config);
// Keys present in `text` override `base`; unknown keys are rejected.
TrainConfig config_from_json(const std::string& text, TrainConfig base = {});

// Non-finite numbers are written as null.
// Timings are optional so reruns can be compared byte for byte.
std::string train_report_to_json(const TrainReport& report, bool include_timings = true);
std::string nash_report_to_json(const NashReport& report);
std::string eval_report_to_json(const EvalReport& report);

struct RunManifest {
  std::string command;
  std::string config_hash;
  std::uint64_t seed = 0;
  std::vector<std::string> inputs;
  std::vector<std::string> outputs;
  std::string version{kToolkitVersion};
  double wall_clock_seconds = 0.0;

  bool operator==(const RunManifest&) const = default;
};

std::string manifest_to_json(const RunManifest& manifest, bool include_wall_clock = true);
RunManifest manifest_from_json(const std::string& text);

// Wraps an artifact document as {"manifest": ..., "<key>": ...}; the embedded
// manifest omits wall-clock so reruns are byte-identical.
std::string embed_manifest(const RunManifest& manifest, const std::string& key, const std::string& artifact_json);

std::string fnv1a_hex(std::string_view text);

}  // namespace alberdice
