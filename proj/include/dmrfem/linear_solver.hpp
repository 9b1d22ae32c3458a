#pragma once

#include <memory>

#include <Eigen/Sparse>

namespace dmrfem {

using SparseMatrix = Eigen::SparseMatrix<double>;

/// Solver handle for a sparse symmetric positive definite matrix.
///
/// Systems up to kDirectLimit unknowns are factorised once (sparse
/// Cholesky); larger ones use Jacobi-preconditioned conjugate gradients to a
/// relative residual of 1e-12. Every solve verifies its residual and throws
/// LinearSolveError on failure. Handles are immutable after construction,
/// cheap to copy, and safe for concurrent solve() calls.
class SpdSolver {
 public:
  static constexpr Eigen::Index kDirectLimit = 20000;
  static constexpr double kIterativeTolerance = 1e-12;

  enum class Method { automatic, direct, iterative };

  SpdSolver() = default;
  explicit SpdSolver(const SparseMatrix& a, Method method = Method::automatic);

  Eigen::VectorXd solve(const Eigen::VectorXd& b) const;
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;

  bool is_direct() const noexcept;
  Eigen::Index size() const noexcept;
  const SparseMatrix& matrix() const;

 private:
  struct Impl;
  std::shared_ptr<const Impl> impl_;
};

}  // namespace dmrfem
