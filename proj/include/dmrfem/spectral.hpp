#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dmrfem/assembly.hpp"
#include "dmrfem/fem_function.hpp"

namespace dmrfem {

/// Full decomposition of the pencil S x = lambda D x, i.e. of -A_h.
struct EigenDecomposition {
  MeshPtr mesh;
  Eigen::VectorXd eigenvalues;   ///< ascending, all positive
  Eigen::MatrixXd eigenvectors;  ///< columns, D-orthonormal
  Eigen::VectorXd lumped;        ///< the diagonal of D

  Eigen::Index size() const noexcept { return eigenvalues.size(); }
  /// Coordinates of v in the eigenbasis: V^T D v.
  Eigen::VectorXd expand(const Eigen::VectorXd& v) const;
};

inline constexpr Eigen::Index kDenseEigLimit = 5000;

/// Dense symmetric solve of D^{-1/2} S D^{-1/2}. Throws CapabilityError above
/// kDenseEigLimit dofs (use fractional_power_quadrature there).
EigenDecomposition eigendecompose(const DiscreteOperatorSet& ops);

/// (-A_h)^z v for z in [-1, 1] through the eigenbasis.
FemFunction fractional_power_apply(const EigenDecomposition& eig, double z, const FemFunction& v);

struct FractionalQuadratureOptions {
  int panels = 50;        ///< geometric panels, 4 Gauss points each
  double window = 100.0;  ///< integrate over [lambda_min / window, lambda_max * window]
  int tail_terms = 6;     ///< terms in the analytic tail expansions
};

/// (-A_h)^z v for z in [-1, 1] without an eigendecomposition. Negative
/// powers use the resolvent integral
///   (-A_h)^{-s} v = sin(pi s)/pi int_0^inf t^{-s} (t - A_h)^{-1} v dt,
/// positive powers z in (0,1) the composition (-A_h)^{z-1} (-A_h) v.
FemFunction fractional_power_quadrature(const DiscreteOperatorSet& ops, double z, const FemFunction& v,
                                        const FractionalQuadratureOptions& options = {});

struct SpectralBounds {
  double lambda_min;  ///< Rayleigh quotient after inverse iteration
  double lambda_max;  ///< Gershgorin upper bound for D^{-1} S
};
SpectralBounds estimate_spectral_bounds(const DiscreteOperatorSet& ops);

ComplexFemFunction imaginary_power_apply(const EigenDecomposition& eig, double t, const ComplexFemFunction& v);

/// ||(-A_h)^{it}|| as an operator on (S_h, ||.||_{h,2}), computed as the
/// largest singular value of the D^{1/2}-conjugated matrix.
double imaginary_power_norm(const EigenDecomposition& eig, double t);

struct NumericalRangeSample {
  std::vector<std::complex<double>> points;
  double r_estimate = 0;  ///< max |point|: a lower bound for the numerical radius
  double bound = 0;       ///< (d+1)^2 / kappa_h^2
  std::size_t violations = 0;
  std::uint64_t seed = 0;
};

/// Samples (A_h v, v*)_h / (v*, v)_h with ||v||_{h,q} = 1 and
/// v*(P) = |v(P)|^{q-2} v(P). Random draws are followed by adversarial
/// seeds (nodal hats and the top mode of -A_h).
NumericalRangeSample numerical_range_sample(const DiscreteOperatorSet& ops, double q, std::size_t n_samples,
                                            bool complex, std::uint64_t seed);

/// ||v||_inf / (||A_h v||_{h,q}^{d/2q} ||v||_{h,q}^{1 - d/2q}).
double gn_ratio(const DiscreteOperatorSet& ops, const FemFunction& v, double q);

struct SweepLevel {
  Eigen::Index dofs = 0;
  double h = 0;
  double max_ratio = 0;
  std::vector<double> ratios;
};

/// Max GN ratio over random draws plus adversarial vectors (hats, the
/// lowest mode of -A_h, smoothed random vectors).
SweepLevel gn_max_ratio(const DiscreteOperatorSet& ops, double q, std::size_t n_samples, std::uint64_t seed);
std::vector<SweepLevel> gn_ratio_sweep(std::span<const DiscreteOperatorSet* const> family, double q,
                                       std::size_t n_samples, std::uint64_t seed);

/// Max of ||v||_inf / ||(-A_h)^alpha v||_{h,q}, alpha in (d/(2q), 1].
SweepLevel sobolev_max_ratio(const DiscreteOperatorSet& ops, const EigenDecomposition& eig, double q, double alpha,
                             std::size_t n_samples, std::uint64_t seed);
std::vector<SweepLevel> sobolev_ratio_sweep(std::span<const DiscreteOperatorSet* const> family, double q, double alpha,
                                            std::size_t n_samples, std::uint64_t seed);

struct PositivityReport {
  std::size_t trials = 0;
  std::size_t violations = 0;
  double min_relative = 0;  ///< min over trials of min_j w_j / max_j v_j
};

/// Applies (I - t A_h)^{-1} = (D + t S)^{-1} D to nodally nonnegative
/// vectors and counts outputs with an entry below -1e-12 * max(v).
PositivityReport resolvent_positivity(const SparseMatrix& stiffness, const Eigen::VectorXd& lumped,
                                      std::span<const double> ts, std::size_t n_samples, std::uint64_t seed);
PositivityReport resolvent_positivity(const DiscreteOperatorSet& ops, std::span<const double> ts,
                                      std::size_t n_samples, std::uint64_t seed);

}  // namespace dmrfem
