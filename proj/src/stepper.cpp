#include "dmrfem/stepper.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "dmrfem/errors.hpp"
#include "dmrfem/norms.hpp"

namespace dmrfem {

void SchemeConfig::validate() const {
  if (!(theta >= 0 && theta <= 1)) throw InvalidArgument("theta must lie in [0, 1]");
  if (!(tau > 0) || !std::isfinite(tau)) throw InvalidArgument("tau must be positive");
  if (!(T > 0) || !std::isfinite(T)) throw InvalidArgument("T must be positive");
  const double tq = theta_q(q_for_stability);
  const double eps = epsilon_or_default();
  if (!(eps > 0 && eps < 2 * std::sin(tq))) {
    throw InvalidArgument("epsilon must lie in (0, 2 sin theta_q) = (0, " + std::to_string(2 * std::sin(tq)) + ")");
  }
}

std::size_t SchemeConfig::steps() const {
  // Relative slack so that T an exact multiple of tau is not lost to rounding.
  return static_cast<std::size_t>(std::floor(T / tau * (1 + 1e-12)));
}

double SchemeConfig::epsilon_or_default() const {
  return epsilon.value_or(std::sin(theta_q(q_for_stability)));
}

double theta_q(double q) {
  if (!(q > 1)) throw InvalidArgument("theta_q needs q > 1");
  if (std::isinf(q)) return std::acos(1.0);
  return std::acos(std::abs(1.0 - 2.0 / q));
}

StabilityReport check_stability(const MeshStats& stats, const SchemeConfig& cfg) {
  cfg.validate();
  StabilityReport report;
  if (cfg.theta >= 0.5) return report;
  const double d1 = stats.dim + 1;
  report.required = true;
  report.tau_max = stats.kappa_h * stats.kappa_h * (2 * std::sin(theta_q(cfg.q_for_stability)) - cfg.epsilon_or_default()) /
                   ((1 - 2 * cfg.theta) * d1 * d1);
  report.satisfied = cfg.tau <= report.tau_max;
  return report;
}

double explicit_step_rule(const MeshStats& stats, double theta, double q) {
  if (!(theta < 0.5)) throw InvalidArgument("the explicit step rule applies to theta < 1/2");
  const double d1 = stats.dim + 1;
  return std::sin(theta_q(q)) * stats.kappa_h * stats.kappa_h / ((1 - 2 * theta) * d1 * d1);
}

namespace {

void require_finite(const Eigen::VectorXd& v, std::size_t step) {
  if (!v.allFinite()) throw OverflowError("iterate became non-finite at step " + std::to_string(step), step);
}

// Entries near the top of the double range make the solver's residual norm
// overflow before any entry does; report that as blow-up as well.
Eigen::VectorXd guarded_solve(const SpdSolver& solver, const Eigen::VectorXd& rhs, std::size_t step) {
  require_finite(rhs, step);
  try {
    return solver.solve(rhs);
  } catch (const LinearSolveError&) {
    if (!std::isfinite(rhs.squaredNorm())) {
      throw OverflowError("iterate overflowed at step " + std::to_string(step), step);
    }
    throw;
  }
}

TrajectorySeries collect(const std::function<void(const StepObserver&)>& run, double tau) {
  TrajectorySeries series;
  series.tau = tau;
  run([&series](std::size_t, double, const FemFunction& u) { series.states.push_back(u); });
  return series;
}

}  // namespace

void march_linear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const SpaceTimeFunction& g,
                  const FemFunction& u0_discrete, const StepObserver& observer, const SolveOptions& options) {
  cfg.validate();
  if (u0_discrete.mesh_ptr() != ops.mesh_ptr()) throw InvalidArgument("initial value lives on a different mesh");
  if (cfg.theta < 0.5) {
    const auto report = check_stability(ops.stats(), cfg);
    if (!report.satisfied && !options.force) {
      throw StabilityError("tau = " + std::to_string(cfg.tau) + " violates the step bound tau_max = " +
                               std::to_string(report.tau_max) + " for theta = " + std::to_string(cfg.theta),
                           report.tau_max);
    }
  }

  const double tau = cfg.tau, theta = cfg.theta;
  const std::size_t steps = cfg.steps();
  const auto& S = ops.stiffness();
  const auto& D = ops.lumped_mass();
  const SpdSolver implicit = ops.shifted_solver(1.0, tau * theta);

  auto source = [&](double t) -> Eigen::VectorXd {
    Eigen::VectorXd b = ops.load_vector([&](double x, double y) { return g(x, y, t); });
    if (cfg.load_variant == LoadVariant::lumped) b = D.cwiseProduct(ops.mass_solver().solve(b));
    return b;
  };

  FemFunction u = u0_discrete;
  observer(0, 0.0, u);
  Eigen::VectorXd b_now = g ? source(0.0) : Eigen::VectorXd();
  for (std::size_t n = 0; n < steps; ++n) {
    const double t_next = static_cast<double>(n + 1) * tau;
    Eigen::VectorXd rhs = D.cwiseProduct(u.coeffs());
    if (theta < 1) rhs -= tau * (1 - theta) * (S * u.coeffs());
    if (g) {
      Eigen::VectorXd b_next = source(t_next);
      rhs += tau * ((1 - theta) * b_now + theta * b_next);
      b_now = std::move(b_next);
    }
    u.coeffs() = guarded_solve(implicit, rhs, n + 1);
    require_finite(u.coeffs(), n + 1);
    observer(n + 1, t_next, u);
  }
}

TrajectorySeries solve_linear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const SpaceTimeFunction& g,
                              const FemFunction& u0, const SolveOptions& options) {
  const FemFunction start = ops.l2_projection(u0);
  return collect([&](const StepObserver& obs) { march_linear(ops, cfg, g, start, obs, options); }, cfg.tau);
}

TrajectorySeries solve_linear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const SpaceTimeFunction& g,
                              const SpatialFunction& u0, const SolveOptions& options) {
  const FemFunction start = ops.l2_projection(u0);
  return collect([&](const StepObserver& obs) { march_linear(ops, cfg, g, start, obs, options); }, cfg.tau);
}

void march_semilinear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const ScalarMap& f,
                      const FemFunction& u0_discrete, const StepObserver& observer) {
  cfg.validate();
  if (cfg.theta != 1) throw InvalidArgument("the semilinear scheme is semi-implicit with theta = 1");
  if (u0_discrete.mesh_ptr() != ops.mesh_ptr()) throw InvalidArgument("initial value lives on a different mesh");
  const double tau = cfg.tau;
  const auto& D = ops.lumped_mass();
  const SpdSolver implicit = ops.shifted_solver(1.0, tau);
  FemFunction u = u0_discrete;
  observer(0, 0.0, u);
  for (std::size_t n = 0; n < cfg.steps(); ++n) {
    Eigen::VectorXd load;
    try {
      load = ops.composed_load_vector(u, f);
    } catch (const EvaluationError&) {
      throw OverflowError("nonlinearity became non-finite at step " + std::to_string(n), n);
    }
    Eigen::VectorXd rhs = D.cwiseProduct(u.coeffs()) + tau * load;
    u.coeffs() = guarded_solve(implicit, rhs, n + 1);
    require_finite(u.coeffs(), n + 1);
    observer(n + 1, static_cast<double>(n + 1) * tau, u);
  }
}

TrajectorySeries solve_semilinear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const ScalarMap& f,
                                  const FemFunction& u0) {
  const FemFunction start = ops.l2_projection(u0);
  return collect([&](const StepObserver& obs) { march_semilinear(ops, cfg, f, start, obs); }, cfg.tau);
}

TrajectorySeries solve_semilinear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const ScalarMap& f,
                                  const SpatialFunction& u0) {
  const FemFunction start = ops.l2_projection(u0);
  return collect([&](const StepObserver& obs) { march_semilinear(ops, cfg, f, start, obs); }, cfg.tau);
}

ScalarMap truncate_nonlinearity(ScalarMap f, double M) {
  if (!(M > 0)) throw InvalidArgument("truncation radius must be positive");
  return [f = std::move(f), M](double z) { return std::abs(z) <= M ? f(z) : f(z > 0 ? M : -M); };
}

ComplexScalarMap truncate_nonlinearity(ComplexScalarMap f, double M) {
  if (!(M > 0)) throw InvalidArgument("truncation radius must be positive");
  return [f = std::move(f), M](std::complex<double> z) { return std::abs(z) <= M ? f(z) : f(M * z / std::abs(z)); };
}

DmrProbeResult dmr_probe(const DiscreteOperatorSet& ops, const DmrProbeConfig& cfg) {
  if (cfg.samples < 1 || cfg.pieces < 1) throw InvalidArgument("probe needs at least one sample and one piece");
  SchemeConfig scheme;
  scheme.theta = 1;
  scheme.tau = cfg.tau;
  scheme.T = cfg.T;
  scheme.validate();
  const std::size_t steps = scheme.steps();
  const auto& D = ops.lumped_mass();
  const SpdSolver implicit = ops.shifted_solver(1.0, cfg.tau);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> normal;
  DmrProbeResult result;
  for (int s = 0; s < cfg.samples; ++s) {
    std::vector<Eigen::VectorXd> pieces(cfg.pieces);
    for (auto& piece : pieces) {
      piece.resize(ops.dofs());
      for (Eigen::Index j = 0; j < piece.size(); ++j) piece[j] = normal(rng);
    }
    double sum_g = 0, sum_du = 0, sum_au = 0;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(ops.dofs());
    for (std::size_t n = 0; n < steps; ++n) {
      const double t = static_cast<double>(n) * cfg.tau;
      const auto piece = std::min<std::size_t>(static_cast<std::size_t>(t / cfg.T * cfg.pieces), cfg.pieces - 1);
      const Eigen::VectorXd& g = pieces[piece];
      Eigen::VectorXd next = implicit.solve(Eigen::VectorXd(D.cwiseProduct(u + cfg.tau * g)));
      const Eigen::VectorXd du = (next - u) / cfg.tau;
      const Eigen::VectorXd au = -(ops.stiffness() * next).cwiseQuotient(D);
      sum_g += std::pow(lumped_norm<double>(g, D, cfg.q), cfg.p) * cfg.tau;
      sum_du += std::pow(lumped_norm<double>(du, D, cfg.q), cfg.p) * cfg.tau;
      sum_au += std::pow(lumped_norm<double>(au, D, cfg.q), cfg.p) * cfg.tau;
      u = std::move(next);
    }
    const double ratio = (std::pow(sum_du, 1 / cfg.p) + std::pow(sum_au, 1 / cfg.p)) / std::pow(sum_g, 1 / cfg.p);
    result.ratios.push_back(ratio);
    result.max_ratio = std::max(result.max_ratio, ratio);
  }
  return result;
}

}  // namespace dmrfem
