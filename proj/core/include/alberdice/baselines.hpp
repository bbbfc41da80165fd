#pragma once

#include "alberdice/dataset.hpp"
#include "alberdice/mmdp.hpp"
#include "alberdice/solver.hpp"

#include <vector>

namespace alberdice {

struct BaselineResult {
  FactorizedPolicy policy;
  std::vector<std::vector<bool>> undefined_states;  // per agent: no data, uniform fallback
};

// Per-agent tabular MLE, i.e. pi_i^D.
BaselineResult bc_train(const OfflineDataset& dataset);

struct OptiDiceResult {
  BaselineResult result;
  std::vector<double> nu;          // joint nu(s)
  std::vector<double> correction;  // w(s, a) over joint cells, [s * |A| + a]
};

// One nu over joint actions (no partner ratio), closed-form w and weighted
// behavior cloning: pi_i(a_i|s) proportional to sum_{a_-i} w(s, a) n(s, a).
OptiDiceResult optidice_train(const OfflineDataset& dataset, double gamma, double alpha, const InnerConfig& inner = {});

}  // namespace alberdice
