#pragma once

#include <array>
#include <filesystem>
#include <functional>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "dmrfem/fem_function.hpp"
#include "dmrfem/linear_solver.hpp"
#include "dmrfem/mesh.hpp"
#include "dmrfem/quadrature.hpp"

namespace dmrfem {

using SpatialFunction = std::function<double(double x, double y)>;
using SpatialGradient = std::function<std::array<double, 2>(double x, double y)>;

/// Which nodes carry unknowns. `interior` realises S_h (homogeneous
/// Dirichlet data); `all_nodes` keeps every node free (natural boundary),
/// used for operator diagnostics on meshes without interior nodes.
enum class DofSet { interior, all_nodes };

SparseMatrix assemble_stiffness(const Triangulation& t, DofSet dofs = DofSet::interior);
SparseMatrix assemble_consistent_mass(const Triangulation& t, DofSet dofs = DofSet::interior);
Eigen::VectorXd assemble_lumped_mass(const Triangulation& t, DofSet dofs = DofSet::interior);

/// Matrices and solver handles realising the discrete operators on S_h:
///
///   A_h = -D^{-1} S      (Laplacian with mass lumping)
///   L_h = -M_c^{-1} S    (Laplacian without lumping)
///   K_h = M_c^{-1} D     ((K_h u, v)_{L^2} = (u, v)_h)
///   P_h : M_c x = (f, phi_j)
///   R_h : S x = (grad u, grad phi_j)
///
/// so that L_h = K_h A_h holds as a matrix identity. Immutable after
/// construction; all members are safe to call concurrently.
class DiscreteOperatorSet {
 public:
  explicit DiscreteOperatorSet(MeshPtr mesh);

  const Triangulation& mesh() const noexcept { return *mesh_; }
  const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
  const MeshStats& stats() const noexcept { return stats_; }
  Eigen::Index dofs() const noexcept { return lumped_.size(); }

  const SparseMatrix& stiffness() const noexcept { return stiffness_; }
  const SparseMatrix& consistent_mass() const noexcept { return mass_; }
  const Eigen::VectorXd& lumped_mass() const noexcept { return lumped_; }

  FemFunction apply_Ah(const FemFunction& v) const;
  ComplexFemFunction apply_Ah(const ComplexFemFunction& v) const;
  FemFunction solve_Ah(const FemFunction& f) const;
  FemFunction apply_Lh(const FemFunction& v) const;
  FemFunction solve_Lh(const FemFunction& f) const;
  FemFunction apply_Kh(const FemFunction& v) const;
  FemFunction apply_Kh_inverse(const FemFunction& v) const;

  /// (f, phi_j)_{L^2} for every interior dof j.
  Eigen::VectorXd load_vector(const SpatialFunction& f,
                              quadrature::QuadOrder order = quadrature::QuadOrder::standard) const;
  /// (f(u_h), phi_j)_{L^2} with f composed with the piecewise-linear u_h at
  /// the quadrature points.
  Eigen::VectorXd composed_load_vector(const FemFunction& u, const std::function<double(double)>& f,
                                       quadrature::QuadOrder order = quadrature::QuadOrder::standard) const;
  /// (grad u, grad phi_j)_{L^2}.
  Eigen::VectorXd gradient_load_vector(const SpatialGradient& grad_u,
                                       quadrature::QuadOrder order = quadrature::QuadOrder::standard) const;

  FemFunction l2_projection(const SpatialFunction& f,
                            quadrature::QuadOrder order = quadrature::QuadOrder::standard) const;
  FemFunction l2_projection(const FemFunction& f) const;
  FemFunction ritz_projection(const SpatialGradient& grad_u,
                              quadrature::QuadOrder order = quadrature::QuadOrder::standard) const;
  /// Nodal interpolant (interior nodes only).
  FemFunction interpolate(const SpatialFunction& f) const;

  FemFunction make_function(Eigen::VectorXd coeffs) const { return {mesh_, std::move(coeffs)}; }
  FemFunction zero_function() const { return FemFunction(mesh_); }

  const SpdSolver& stiffness_solver() const noexcept { return stiffness_solver_; }
  const SpdSolver& mass_solver() const noexcept { return mass_solver_; }
  /// Solver for mass_coeff * D + stiffness_coeff * S.
  SpdSolver shifted_solver(double mass_coeff, double stiffness_coeff) const;

  /// Writes S and M_c as "row col value" triplets and D as one value per
  /// line, all with 17 significant digits: <prefix>_S.txt, _Mc.txt, _D.txt.
  void dump_matrices(const std::filesystem::path& prefix) const;

 private:
  template <class PointFn>
  Eigen::VectorXd integrate_against_basis(PointFn&& fn, quadrature::QuadOrder order) const;

  MeshPtr mesh_;
  MeshStats stats_;
  SparseMatrix stiffness_;
  SparseMatrix mass_;
  Eigen::VectorXd lumped_;
  SpdSolver stiffness_solver_;
  SpdSolver mass_solver_;
};

}  // namespace dmrfem
