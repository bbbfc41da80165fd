#include "alberdice/environments.hpp"
#include "alberdice/solver.hpp"
#include "support/instances.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

namespace alberdice {
namespace {

TEST(ClosedFormW, MatchesGridSearchInnerMax) {
  Rng rng(1);
  for (int trial = 0; trial < 1000; ++trial) {
    const double alpha = 0.2 + 1.8 * rng.uniform();
    const double e = 4.0 * rng.uniform() - 2.0;
    auto inner = [&](double w) { return w > 0.0 ? w * (e - alpha * std::log(w)) : 0.0; };
    // Coarse grid, then two rounds of refinement around the best point.
    double lo = 0.0, hi = 2.0 * std::exp(e / alpha), best = 0.0;
    for (int round = 0; round < 3; ++round) {
      const int n = 2000;
      const double step = (hi - lo) / n;
      double best_value = -1e300;
      for (int k = 0; k <= n; ++k) {
        const double w = lo + k * step;
        if (inner(w) > best_value) {
          best_value = inner(w);
          best = w;
        }
      }
      lo = std::max(0.0, best - step);
      hi = best + step;
    }
    const double closed = closed_form_w(e, alpha);
    EXPECT_LE(std::abs(best - closed), 1e-4 * std::max(1.0, closed)) << "e=" << e << " alpha=" << alpha;
  }
}

TEST(ClosedFormW, RejectsNonPositiveAlpha) { EXPECT_THROW(closed_form_w(1.0, 0.0), ValidationError); }

TEST(NuObjective, MidpointConvexity) {
  Rng rng(2);
  for (int trial = 0; trial < 100; ++trial) {
    const NuProblem p = testing::random_nu_problem(rng);
    const auto a = testing::random_nu(rng, p.n_states), b = testing::random_nu(rng, p.n_states);
    std::vector<double> mid(p.n_states);
    for (int s = 0; s < p.n_states; ++s) mid[s] = 0.5 * (a[s] + b[s]);
    for (NuForm form : {NuForm::plain, NuForm::log_sum_exp}) {
      const double lhs = nu_objective(p, mid, form);
      const double rhs = 0.5 * (nu_objective(p, a, form) + nu_objective(p, b, form));
      EXPECT_LE(lhs, rhs + 1e-12 * std::max(1.0, std::abs(rhs)));
    }
  }
}

TEST(NuObjective, LagrangianIsMaximizedByClosedFormW) {
  Rng rng(3);
  for (int trial = 0; trial < 100; ++trial) {
    const NuProblem p = testing::random_nu_problem(rng);
    const auto nu = testing::random_nu(rng, p.n_states);
    std::vector<double> w;
    for (const auto& term : p.terms) w.push_back(closed_form_w(p.e(term, nu), p.alpha));
    const double at_closed = nu_lagrangian(p, nu, w);
    EXPECT_NEAR(at_closed, nu_objective(p, nu, NuForm::plain), 1e-10 * std::max(1.0, std::abs(at_closed)));
    for (double& v : w) v *= std::exp(0.5 * rng.normal());
    EXPECT_LE(nu_lagrangian(p, nu, w), at_closed + 1e-12);
  }
}

TEST(NuObjective, PlainDominatesLogSumExp) {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const NuProblem p = testing::random_nu_problem(rng);
    const auto nu = testing::random_nu(rng, p.n_states);
    EXPECT_GE(nu_objective(p, nu, NuForm::plain), nu_objective(p, nu, NuForm::log_sum_exp) - 1e-12);
  }
}

TEST(NuObjective, LogSumExpIsShiftInvariant) {
  Rng rng(5);
  for (int trial = 0; trial < 100; ++trial) {
    const NuProblem p = testing::random_nu_problem(rng);
    auto nu = testing::random_nu(rng, p.n_states);
    const double before = nu_objective(p, nu, NuForm::log_sum_exp);
    const double c = 10.0 * rng.normal();
    for (double& v : nu) v += c;
    EXPECT_NEAR(nu_objective(p, nu, NuForm::log_sum_exp), before, 1e-10);
  }
}

TEST(SolveNu, ShiftedLogSumExpMinimizerRecoversThePlainMinimum) {
  Rng rng(6);
  for (int trial = 0; trial < 50; ++trial) {
    NuProblem p = testing::random_nu_problem(rng);
    const NuSolution shifted = solve_nu(p, {});
    EXPECT_EQ(shifted.form, NuForm::log_sum_exp);
    p.shift_invariant = false;  // forces the plain form
    const NuSolution plain = solve_nu(p, {});
    EXPECT_EQ(plain.form, NuForm::plain);
    EXPECT_LE(std::abs(shifted.objective - plain.objective), 1e-6);
  }
}

TEST(SolveNu, LiteralShiftMissesThePlainMinimumByAlphaOverE) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    const NuProblem p = testing::random_nu_problem(rng);
    const NuSolution sol = solve_nu(p, {});
    // Undo the corrected shift and apply alpha/(1-gamma) log sum W exp(e/alpha) instead.
    auto literal = sol.nu;
    const double offset = p.alpha / (1.0 - p.gamma);
    for (double& v : literal) v += offset;
    EXPECT_NEAR(nu_objective(p, literal, NuForm::plain) - sol.objective, p.alpha / std::numbers::e, 1e-8);
  }
}

TEST(SolveNu, SingleSampleByHand) {
  // L = alpha exp((b - nu)/alpha - 1) + nu is minimized at nu = b - alpha.
  NuProblem p;
  p.n_states = 1;
  p.alpha = 0.7;
  p.gamma = 0.0;
  p.p0 = {1.0};
  p.active = {0};
  p.terms = {NuTerm{0.0, 0.4, {{0, -1.0}}}};
  const NuSolution sol = solve_nu(p, {});
  EXPECT_NEAR(sol.nu[0], 0.4 - 0.7, 1e-12);
  EXPECT_NEAR(sol.objective, 0.7 + (0.4 - 0.7), 1e-12);
}

TEST(SolveNu, UnboundedDualIsASolverError) {
  NuProblem p;
  p.n_states = 1;
  p.alpha = 1.0;
  p.p0 = {1.0};
  p.active = {0};
  p.terms = {NuTerm{0.0, 0.0, {{0, 1.0}}}};
  p.shift_invariant = false;
  EXPECT_THROW(solve_nu(p, {}), SolverError);
}

TEST(SolveNu, AgreesWithGradientCondition) {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const NuProblem p = testing::random_nu_problem(rng);
    const NuSolution sol = solve_nu(p, {});
    // Central differences of the plain objective vanish at the shifted minimizer.
    for (int s = 0; s < p.n_states; ++s) {
      auto up = sol.nu, down = sol.nu;
      up[s] += 1e-5;
      down[s] -= 1e-5;
      EXPECT_NEAR((nu_objective(p, up, NuForm::plain) - nu_objective(p, down, NuForm::plain)) / 2e-5, 0.0, 1e-6);
    }
  }
}

// Stochastic partner on a random MMDP, so per-cell pooling and per-sample
// terms differ.
struct AgentInstance {
  TabularMMDP mmdp;
  OfflineDataset dataset;
  DataPolicyTables data;
  FactorizedPolicy policy;
};

AgentInstance random_agent_instance(Rng& rng) {
  AgentInstance out;
  out.mmdp = testing::random_mmdp(rng, 3 + rng.below(3), {2, 3}, 0.9 * rng.uniform());
  out.dataset = testing::random_dataset(out.mmdp, rng, 60, 6, 0.0);
  out.data = fit_data_policies(out.dataset);
  out.policy = testing::random_policy(rng, out.mmdp.n_states(), {2, 3});
  return out;
}

TEST(NuObjective, PerCellFormIsBelowPerSampleForm) {
  Rng rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const AgentInstance inst = random_agent_instance(rng);
    const AgentView view = analyze_agent(inst.dataset, inst.data, inst.policy, 0, 0.5, inst.mmdp.gamma);
    const auto weights = sample_weights(view, nullptr);
    const NuProblem cell = make_nu_problem(view, inst.dataset, weights, ObjectiveForm::per_cell);
    const NuProblem sample = make_nu_problem(view, inst.dataset, weights, ObjectiveForm::per_sample);
    for (int k = 0; k < 10; ++k) {
      const auto nu = testing::random_nu(rng, inst.mmdp.n_states());
      EXPECT_LE(nu_objective(cell, nu, NuForm::plain), nu_objective(sample, nu, NuForm::plain) + 1e-12);
    }
  }
}

TEST(ImportanceWeights, DatasetCByHand) {
  const TabularMMDP game = build_matrix_game(penalty_xor_spec());
  const OfflineDataset c = matrix_dataset(game, 'c');
  const DataPolicyTables data = fit_data_policies(c);
  const FactorizedPolicy uniform = FactorizedPolicy::uniform(game);
  // pi_2(a2) / pi^D(a2 | a1): AA 0.5/0.5, AB 0.5/0.5, BA 0.5/1.
  EXPECT_DOUBLE_EQ(rho(uniform, data, c.transitions[0], 0), 1.0);
  EXPECT_DOUBLE_EQ(rho(uniform, data, c.transitions[1], 0), 1.0);
  EXPECT_DOUBLE_EQ(rho(uniform, data, c.transitions[2], 0), 0.5);
}

TEST(ImportanceWeights, AdvantageIsMinusInfinityWithoutPartnerMass) {
  const TabularMMDP game = build_matrix_game(penalty_xor_spec());
  const OfflineDataset c = matrix_dataset(game, 'c');
  const DataPolicyTables data = fit_data_policies(c);
  FactorizedPolicy pi = FactorizedPolicy::uniform(game);
  pi.tables[1] = {0.0, 1.0};
  const std::vector<double> nu{0.25};
  EXPECT_EQ(advantage_hat(nu, c.transitions[0], 1.0, 0.0, pi, data, 0), -std::numeric_limits<double>::infinity());
  // AB: rho = 1 / 0.5 = 2, so e = 1 - log 2 - nu.
  EXPECT_NEAR(advantage_hat(nu, c.transitions[1], 1.0, 0.0, pi, data, 0), 1.0 - std::log(2.0) - 0.25, 1e-15);
}

TEST(Resample, RejectsAllZeroWeights) { EXPECT_THROW(resample({0.0, 0.0}, 10, 0), SolverError); }

TEST(Resample, MeanCorrectedEstimateIsUnbiased) {
  Rng rng(10);
  const int N = 40;
  std::vector<double> rho_values(N), f(N);
  for (int k = 0; k < N; ++k) {
    rho_values[k] = rng.uniform() < 0.2 ? 0.0 : 3.0 * rng.uniform();
    f[k] = rng.normal();
  }
  double exact = 0.0;
  for (int k = 0; k < N; ++k) exact += rho_values[k] * f[k] / N;
  std::vector<double> estimates;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const ResampleResult r = resample(rho_values, 50, seed);
    ASSERT_EQ(r.indices.size(), 50u);
    double mean = 0.0;
    for (int idx : r.indices) {
      EXPECT_GT(rho_values[idx], 0.0);
      mean += f[idx];
    }
    estimates.push_back(r.rho_bar * mean / 50.0);
  }
  double mean = 0.0, var = 0.0;
  for (double e : estimates) mean += e / estimates.size();
  for (double e : estimates) var += (e - mean) * (e - mean) / (estimates.size() - 1);
  EXPECT_LE(std::abs(mean - exact), 3.0 * std::sqrt(var / estimates.size()));
}

}  // namespace
}  // namespace alberdice
