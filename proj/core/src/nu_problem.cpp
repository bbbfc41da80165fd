#include "alberdice/solver.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace alberdice {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Evaluation {
  double f = 0.0;
  Eigen::VectorXd g;
  Eigen::MatrixXd H;
};

class Newton {
 public:
  explicit Newton(const NuProblem& problem) : p_(problem), pos_(problem.n_states, -1) {
    for (std::size_t k = 0; k < p_.active.size(); ++k) pos_[p_.active[k]] = static_cast<int>(k);
  }

  int n() const { return static_cast<int>(p_.active.size()); }

  double linear(const std::vector<double>& nu) const {
    double out = 0.0;
    for (int s = 0; s < p_.n_states; ++s)
      if (p_.p0[s] != 0.0) out += (1.0 - p_.gamma) * p_.p0[s] * nu[s];
    return out;
  }

  Evaluation evaluate(const std::vector<double>& nu, NuForm form, bool derivatives) const {
    const double alpha = p_.alpha;
    Evaluation ev;
    std::vector<double> z(p_.terms.size());
    for (std::size_t t = 0; t < p_.terms.size(); ++t) z[t] = p_.terms[t].log_weight + p_.e(p_.terms[t], nu) / alpha;

    std::vector<double> weight(z.size());
    if (form == NuForm::plain) {
      double sum = 0.0;
      for (std::size_t t = 0; t < z.size(); ++t) {
        weight[t] = std::exp(z[t] - 1.0);
        sum += weight[t];
      }
      ev.f = alpha * sum + linear(nu);
    } else {
      const double top = z.empty() ? 0.0 : *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (std::size_t t = 0; t < z.size(); ++t) {
        weight[t] = std::exp(z[t] - top);
        sum += weight[t];
      }
      for (double& w : weight) w /= sum;
      ev.f = alpha * (top + std::log(sum)) + linear(nu);
    }
    if (!derivatives || !std::isfinite(ev.f)) return ev;

    const int m = n();
    ev.g = Eigen::VectorXd::Zero(m);
    ev.H = Eigen::MatrixXd::Zero(m, m);
    for (int k = 0; k < m; ++k) ev.g[k] = (1.0 - p_.gamma) * p_.p0[p_.active[k]];
    Eigen::VectorXd mean = Eigen::VectorXd::Zero(m);
    for (std::size_t t = 0; t < z.size(); ++t) {
      const double w = weight[t];
      if (w == 0.0) continue;
      const auto& coef = p_.terms[t].coef;
      for (const auto& [s, c] : coef) {
        const int i = pos_[s];
        if (i < 0) continue;
        mean[i] += w * c;
        for (const auto& [s2, c2] : coef) {
          const int j = pos_[s2];
          if (j >= 0) ev.H(i, j) += w * c * c2 / alpha;
        }
      }
    }
    ev.g += mean;
    if (form == NuForm::log_sum_exp) ev.H -= mean * mean.transpose() / alpha;
    return ev;
  }

  std::vector<double> moved(const std::vector<double>& nu, const Eigen::VectorXd& step, double t) const {
    std::vector<double> out = nu;
    for (int k = 0; k < n(); ++k) out[p_.active[k]] += t * step[k];
    return out;
  }

 private:
  const NuProblem& p_;
  std::vector<int> pos_;
};

}  // namespace

double NuProblem::e(const NuTerm& term, const std::vector<double>& nu) const {
  double out = term.base;
  for (const auto& [s, c] : term.coef) out += c * nu[s];
  return out;
}

double nu_objective(const NuProblem& problem, const std::vector<double>& nu, NuForm form) {
  return Newton(problem).evaluate(nu, form, false).f;
}

double nu_lagrangian(const NuProblem& problem, const std::vector<double>& nu, const std::vector<double>& w) {
  if (w.size() != problem.terms.size()) throw ValidationError("one correction per dual term is required");
  double out = 0.0;
  for (int s = 0; s < problem.n_states; ++s) out += (1.0 - problem.gamma) * problem.p0[s] * nu[s];
  for (std::size_t t = 0; t < w.size(); ++t) {
    if (w[t] < 0.0) throw ValidationError("corrections must be nonnegative");
    if (w[t] == 0.0) continue;
    const double e = problem.e(problem.terms[t], nu);
    out += std::exp(problem.terms[t].log_weight) * w[t] * (e - problem.alpha * std::log(w[t]));
  }
  return out;
}

double shift_constant(const NuProblem& problem, const std::vector<double>& nu) {
  double top = -kInf;
  std::vector<double> z;
  z.reserve(problem.terms.size());
  for (const auto& term : problem.terms) {
    z.push_back(term.log_weight + problem.e(term, nu) / problem.alpha);
    top = std::max(top, z.back());
  }
  double sum = 0.0;
  for (double v : z) sum += std::exp(v - top);
  return problem.alpha / (1.0 - problem.gamma) * (top + std::log(sum) - 1.0);
}

double closed_form_w(double e_hat, double alpha) {
  if (!(alpha > 0.0)) throw ValidationError("alpha must be positive");
  return std::exp(e_hat / alpha - 1.0);
}

NuSolution solve_nu(const NuProblem& problem, const InnerConfig& config, std::vector<double> warm_start,
                    bool single_step) {
  if (!(problem.alpha > 0.0)) throw ValidationError("alpha must be positive");
  const Newton newton(problem);
  NuSolution sol;
  sol.nu = warm_start.empty() ? std::vector<double>(problem.n_states, 0.0) : std::move(warm_start);
  if (static_cast<int>(sol.nu.size()) != problem.n_states) throw ValidationError("warm start has the wrong size");
  sol.form = problem.shift_invariant ? NuForm::log_sum_exp : NuForm::plain;
  if (problem.terms.empty() || newton.n() == 0) {
    sol.converged = true;
    sol.objective = nu_objective(problem, sol.nu, NuForm::plain);
    return sol;
  }

  Evaluation ev = newton.evaluate(sol.nu, sol.form, true);
  if (!std::isfinite(ev.f)) {
    // Overflow at the start point; the stable form is finite everywhere.
    if (sol.form == NuForm::plain) {
      std::fill(sol.nu.begin(), sol.nu.end(), 0.0);
      ev = newton.evaluate(sol.nu, sol.form, true);
    }
    if (!std::isfinite(ev.f))
      throw SolverError("nu objective overflows at the start point; use the log-sum-exp form");
  }

  const int max_iterations = single_step ? 1 : config.max_iterations;
  for (sol.iterations = 0; sol.iterations < max_iterations; ++sol.iterations) {
    sol.gradient_norm = ev.g.lpNorm<Eigen::Infinity>();
    if (sol.gradient_norm <= config.tolerance) break;

    Eigen::MatrixXd H = ev.H;
    const double scale = std::max(1.0, H.diagonal().cwiseAbs().maxCoeff());
    H.diagonal().array() += config.ridge * scale;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(H);
    Eigen::VectorXd step = ldlt.solve(-ev.g);
    double slope = ev.g.dot(step);
    if (ldlt.info() != Eigen::Success || !step.allFinite() || !(slope < 0.0)) {
      step = -ev.g;
      slope = ev.g.dot(step);
    }

    double t = 1.0;
    bool accepted = false;
    for (int k = 0; k < 80; ++k, t *= 0.5) {
      const auto candidate = newton.moved(sol.nu, step, t);
      Evaluation next = newton.evaluate(candidate, sol.form, true);
      if (!std::isfinite(next.f)) continue;
      const bool armijo = next.f <= ev.f + config.armijo * t * slope;
      // Near the optimum the decrease drowns in rounding; accept a full step
      // that does not raise f beyond that and shrinks the gradient.
      const bool rounding = k == 0 && next.f <= ev.f + 1e-13 * std::max(1.0, std::abs(ev.f)) &&
                            next.g.lpNorm<Eigen::Infinity>() < ev.g.lpNorm<Eigen::Infinity>();
      if (armijo || rounding) {
        sol.nu = candidate;
        ev = std::move(next);
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
  }
  sol.gradient_norm = ev.g.lpNorm<Eigen::Infinity>();
  sol.converged = sol.gradient_norm <= config.tolerance;
  if (!sol.converged && !single_step) {
    std::ostringstream os;
    os << "nu solver did not converge: gradient inf-norm " << sol.gradient_norm << " after " << sol.iterations
       << " iterations (tolerance " << config.tolerance << ", " << newton.n() << " states, "
       << problem.terms.size() << " terms)";
    throw SolverError(os.str());
  }

  if (sol.form == NuForm::log_sum_exp) {
    const double c = shift_constant(problem, sol.nu);
    for (int s : problem.active) sol.nu[s] += c;
  }
  sol.objective = nu_objective(problem, sol.nu, NuForm::plain);
  return sol;
}

}  // namespace alberdice
