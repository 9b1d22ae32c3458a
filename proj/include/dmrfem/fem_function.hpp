#pragma once

#include <complex>
#include <memory>

#include <Eigen/Dense>

#include "dmrfem/errors.hpp"
#include "dmrfem/mesh.hpp"

namespace dmrfem {

using MeshPtr = std::shared_ptr<const Triangulation>;

/// A member of S_h: coefficients over the interior dofs of a triangulation.
/// Boundary values are implicitly zero.
template <class Scalar>
class BasicFemFunction {
 public:
  using scalar_type = Scalar;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  explicit BasicFemFunction(MeshPtr mesh)
      : mesh_(std::move(mesh)), coeffs_(Vector::Zero(static_cast<Eigen::Index>(mesh_->num_interior()))) {}

  BasicFemFunction(MeshPtr mesh, Vector coeffs) : mesh_(std::move(mesh)), coeffs_(std::move(coeffs)) {
    if (coeffs_.size() != static_cast<Eigen::Index>(mesh_->num_interior())) {
      throw InvalidArgument("coefficient vector length " + std::to_string(coeffs_.size()) +
                            " does not match interior dof count " + std::to_string(mesh_->num_interior()));
    }
  }

  const Triangulation& mesh() const noexcept { return *mesh_; }
  const MeshPtr& mesh_ptr() const noexcept { return mesh_; }
  const Vector& coeffs() const noexcept { return coeffs_; }
  Vector& coeffs() noexcept { return coeffs_; }
  Eigen::Index size() const noexcept { return coeffs_.size(); }

  /// Value at node i of the triangulation (zero on the boundary).
  Scalar nodal_value(std::size_t node) const {
    const int dof = mesh_->interior_index(node);
    return dof == Triangulation::kNoDof ? Scalar(0) : coeffs_[dof];
  }

  bool same_mesh(const BasicFemFunction& other) const noexcept { return mesh_ == other.mesh_; }

 private:
  MeshPtr mesh_;
  Vector coeffs_;
};

using FemFunction = BasicFemFunction<double>;
using ComplexFemFunction = BasicFemFunction<std::complex<double>>;

}  // namespace dmrfem
