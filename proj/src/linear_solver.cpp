#include "dmrfem/linear_solver.hpp"

#include <limits>

#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseCholesky>

#include "dmrfem/errors.hpp"

namespace dmrfem {

namespace {
constexpr double kDirectResidualLimit = 1e-8;
constexpr double kIterativeResidualLimit = 1e-10;
}  // namespace

struct SpdSolver::Impl {
  SparseMatrix a;
  bool direct = true;
  Eigen::SimplicialLLT<SparseMatrix> llt;
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper> cg;
};

SpdSolver::SpdSolver(const SparseMatrix& a, Method method) {
  if (a.rows() != a.cols()) throw InvalidArgument("solver needs a square matrix");
  auto impl = std::make_shared<Impl>();
  impl->a = a;
  impl->a.makeCompressed();
  impl->direct = method == Method::direct || (method == Method::automatic && a.rows() <= kDirectLimit);
  if (a.rows() > 0) {
    if (impl->direct) {
      impl->llt.compute(impl->a);
      if (impl->llt.info() != Eigen::Success) {
        throw LinearSolveError("sparse Cholesky factorisation failed (matrix not SPD?)",
                               std::numeric_limits<double>::quiet_NaN());
      }
    } else {
      impl->cg.setTolerance(kIterativeTolerance);
      impl->cg.setMaxIterations(std::max<Eigen::Index>(1000, 10 * a.rows()));
      impl->cg.compute(impl->a);
    }
  }
  impl_ = std::move(impl);
}

Eigen::VectorXd SpdSolver::solve(const Eigen::VectorXd& b) const {
  if (!impl_) throw Error("solve on an empty solver handle");
  if (b.size() != impl_->a.rows()) throw InvalidArgument("right-hand side has the wrong length");
  if (b.size() == 0) return b;
  const double bnorm = b.norm();
  if (bnorm == 0) return Eigen::VectorXd::Zero(b.size());
  if (!b.allFinite()) throw LinearSolveError("non-finite right-hand side", std::numeric_limits<double>::infinity());
  Eigen::VectorXd x = impl_->direct ? Eigen::VectorXd(impl_->llt.solve(b)) : Eigen::VectorXd(impl_->cg.solve(b));
  const double residual = (impl_->a * x - b).norm() / bnorm;
  const double limit = impl_->direct ? kDirectResidualLimit : kIterativeResidualLimit;
  if (!(residual <= limit)) throw LinearSolveError("linear solve did not converge", residual);
  return x;
}

Eigen::MatrixXd SpdSolver::solve(const Eigen::MatrixXd& b) const {
  Eigen::MatrixXd x(b.rows(), b.cols());
  for (Eigen::Index c = 0; c < b.cols(); ++c) x.col(c) = solve(Eigen::VectorXd(b.col(c)));
  return x;
}

bool SpdSolver::is_direct() const noexcept { return impl_ && impl_->direct; }
Eigen::Index SpdSolver::size() const noexcept { return impl_ ? impl_->a.rows() : 0; }
const SparseMatrix& SpdSolver::matrix() const {
  if (!impl_) throw Error("empty solver handle");
  return impl_->a;
}

}  // namespace dmrfem
