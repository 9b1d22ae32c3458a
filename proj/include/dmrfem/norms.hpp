#pragma once

#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "dmrfem/assembly.hpp"
#include "dmrfem/fem_function.hpp"
#include "dmrfem/quadrature.hpp"

namespace dmrfem {

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

/// Exponents and time step of an l^p_tau(L^q) norm.
struct NormSpec {
  double p = 2;
  double q = 2;  ///< kInfinity for the max norm
  double tau = 1;

  void validate() const;
};

/// ||v||_{L^q}: q = 2 exactly through the element mass matrices, q = inf as
/// the largest nodal modulus, other q by Gauss quadrature of |v|^q.
template <class Scalar>
double lq_norm(const BasicFemFunction<Scalar>& v, double q,
               quadrature::QuadOrder order = quadrature::QuadOrder::standard);

/// ||v||_{h,q} = (sum_j |v_j|^q |Lambda_j|)^{1/q}; max_j |v_j| for q = inf.
template <class Scalar>
double lumped_norm(const BasicFemFunction<Scalar>& v, double q);

/// Same, on raw coefficients with precomputed lumped measures.
template <class Scalar>
double lumped_norm(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& coeffs, const Eigen::VectorXd& measures, double q);

/// ||grad v||_{L^q}, exact (gradients are piecewise constant).
double w1q_seminorm(const FemFunction& v, double q);

/// ||v - f||_{L^q} for a P1 function and a smooth callable, by quadrature.
double lq_error(const FemFunction& v, const SpatialFunction& f, double q,
                quadrature::QuadOrder order = quadrature::QuadOrder::refined);

enum class SpatialNorm { lq, lumped };

/// (sum_n ||v^n||^p tau)^{1/p}.
double bochner_norm(const std::vector<FemFunction>& series, const NormSpec& spec,
                    SpatialNorm spatial = SpatialNorm::lq);

/// v^{n+theta} = (1 - theta) v^n + theta v^{n+1}; one entry shorter.
std::vector<FemFunction> theta_average(const std::vector<FemFunction>& series, double theta);

}  // namespace dmrfem
