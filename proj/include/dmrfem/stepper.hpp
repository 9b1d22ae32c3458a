#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "dmrfem/assembly.hpp"
#include "dmrfem/fem_function.hpp"
#include "dmrfem/mesh.hpp"

namespace dmrfem {

using SpaceTimeFunction = std::function<double(double x, double y, double t)>;
using ScalarMap = std::function<double(double)>;
using ComplexScalarMap = std::function<std::complex<double>(std::complex<double>)>;

/// How the source enters the theta-scheme.
enum class LoadVariant {
  consistent,  ///< A: (G^{n+theta}, v_h)_{L^2}, i.e. K_h^{-1} P_h G
  lumped,      ///< B: (P_h G^{n+theta}, v_h)_h
};

struct SchemeConfig {
  double theta = 1.0;
  double tau = 0.01;
  double T = 1.0;
  LoadVariant load_variant = LoadVariant::consistent;
  double q_for_stability = 2.0;
  /// Margin in the explicit step bound; defaults to sin(theta_q).
  std::optional<double> epsilon;

  void validate() const;
  /// N_T = floor(T / tau).
  std::size_t steps() const;
  double epsilon_or_default() const;
};

/// theta_q = arccos|1 - 2/q|, the sector half-angle of the numerical range
/// of A_h in the lumped L^q norm.
double theta_q(double q);

struct StabilityReport {
  bool required = false;
  bool satisfied = true;
  double tau_max = kUnbounded;  ///< kUnbounded when not required

  static constexpr double kUnbounded = std::numeric_limits<double>::infinity();
};

/// Step-size bound for theta < 1/2:
///   tau <= kappa_h^2 (2 sin theta_q - eps) / ((1 - 2 theta)(d + 1)^2).
/// Equality counts as satisfied.
StabilityReport check_stability(const MeshStats& stats, const SchemeConfig& cfg);

/// Time step used for the explicit scheme in the convergence study:
/// eps = sin theta_q, so tau = sin theta_q kappa_h^2 / ((1 - 2 theta)(d + 1)^2).
double explicit_step_rule(const MeshStats& stats, double theta, double q);

struct TrajectorySeries {
  std::vector<FemFunction> states;  ///< u^0 ... u^{N_T}
  double tau = 0;
  double t0 = 0;
};

/// Called with (n, t_n, u^n) for n = 0 .. N_T.
using StepObserver = std::function<void(std::size_t n, double t, const FemFunction& u)>;

struct SolveOptions {
  bool force = false;  ///< run even when the step bound is violated
};

/// Theta-scheme for u' = Delta u + g with homogeneous Dirichlet data:
///   (D + tau theta S) u^{n+1} = (D - tau (1 - theta) S) u^n + tau b^{n+theta},
/// u^0 = P_h u0. An empty g means g = 0.
void march_linear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const SpaceTimeFunction& g,
                  const FemFunction& u0_discrete, const StepObserver& observer, const SolveOptions& options = {});

TrajectorySeries solve_linear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const SpaceTimeFunction& g,
                              const SpatialFunction& u0, const SolveOptions& options = {});
TrajectorySeries solve_linear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const SpaceTimeFunction& g,
                              const FemFunction& u0, const SolveOptions& options = {});

/// Semi-implicit scheme for u' = Delta u + f(u):
///   (D + tau S) u^{n+1} = D u^n + tau (f(u_h^n), phi_j)_{L^2}.
/// Throws OverflowError (with the step index) when the iterate stops being
/// finite. cfg.theta must be 1.
void march_semilinear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const ScalarMap& f,
                      const FemFunction& u0_discrete, const StepObserver& observer);

TrajectorySeries solve_semilinear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const ScalarMap& f,
                                  const SpatialFunction& u0);
TrajectorySeries solve_semilinear(const DiscreteOperatorSet& ops, const SchemeConfig& cfg, const ScalarMap& f,
                                  const FemFunction& u0);

/// Radial truncation: f(z) for |z| <= M, f(M z / |z|) otherwise.
ScalarMap truncate_nonlinearity(ScalarMap f, double M);
ComplexScalarMap truncate_nonlinearity(ComplexScalarMap f, double M);

/// Empirical maximal-regularity probe for backward Euler with zero initial
/// data: ratios (||D_tau u|| + ||A_h u^{n+1}||) / ||g|| in l^p_tau(X_{h,q})
/// for random sources that are piecewise constant in time.
struct DmrProbeConfig {
  double tau = 1.0 / 16;
  double T = 1.0;
  double p = 4;
  double q = 2;
  int samples = 20;
  int pieces = 8;
  std::uint64_t seed = 1;
};

struct DmrProbeResult {
  std::vector<double> ratios;
  double max_ratio = 0;
};

DmrProbeResult dmr_probe(const DiscreteOperatorSet& ops, const DmrProbeConfig& cfg);

}  // namespace dmrfem
