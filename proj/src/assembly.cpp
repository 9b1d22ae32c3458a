#include "dmrfem/assembly.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <vector>

#include "dmrfem/errors.hpp"
#include "geometry.hpp"

namespace dmrfem {

namespace {

std::vector<int> dof_map(const Triangulation& t, DofSet dofs) {
  std::vector<int> map(t.num_nodes());
  for (std::size_t i = 0; i < t.num_nodes(); ++i) {
    map[i] = dofs == DofSet::all_nodes ? static_cast<int>(i) : t.interior_index(i);
  }
  return map;
}

Eigen::Index dof_count(const Triangulation& t, DofSet dofs) {
  return static_cast<Eigen::Index>(dofs == DofSet::all_nodes ? t.num_nodes() : t.num_interior());
}

template <class ElementEntry>
SparseMatrix assemble_pairs(const Triangulation& t, DofSet dofs, ElementEntry&& entry) {
  const auto map = dof_map(t, dofs);
  const int nv = t.vertices_per_cell();
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(t.num_cells() * nv * nv);
  for (std::size_t k = 0; k < t.num_cells(); ++k) {
    const auto eg = detail::element_gradients(t, k);
    const auto c = t.cell(k);
    for (int a = 0; a < nv; ++a) {
      const int r = map[c[a]];
      if (r < 0) continue;
      for (int b = 0; b < nv; ++b) {
        const int s = map[c[b]];
        if (s < 0) continue;
        triplets.emplace_back(r, s, entry(eg, a, b));
      }
    }
  }
  const auto n = dof_count(t, dofs);
  SparseMatrix m(n, n);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

void require_planar(const Triangulation& t) {
  if (t.dim() != 2) throw CapabilityError("quadrature-based operations are implemented for d = 2 only");
}

}  // namespace

SparseMatrix assemble_stiffness(const Triangulation& t, DofSet dofs) {
  return assemble_pairs(t, dofs, [](const detail::ElementGradients& eg, int a, int b) {
    return eg.measure * detail::dot3(eg.grad[a], eg.grad[b]);
  });
}

SparseMatrix assemble_consistent_mass(const Triangulation& t, DofSet dofs) {
  const int d = t.dim();
  const double denom = (d + 1) * (d + 2);
  return assemble_pairs(t, dofs, [denom](const detail::ElementGradients& eg, int a, int b) {
    return eg.measure * (a == b ? 2.0 : 1.0) / denom;
  });
}

Eigen::VectorXd assemble_lumped_mass(const Triangulation& t, DofSet dofs) {
  const auto measures = barycentric_measures(t);
  if (dofs == DofSet::all_nodes) return Eigen::Map<const Eigen::VectorXd>(measures.data(), measures.size());
  Eigen::VectorXd d(static_cast<Eigen::Index>(t.num_interior()));
  const auto nodes = t.interior_nodes();
  for (std::size_t j = 0; j < nodes.size(); ++j) d[j] = measures[nodes[j]];
  return d;
}

namespace {

void require_same_mesh(const MeshPtr& a, const MeshPtr& b) {
  if (a != b) throw InvalidArgument("function lives on a different mesh");
}

}  // namespace

DiscreteOperatorSet::DiscreteOperatorSet(MeshPtr mesh)
    : mesh_(std::move(mesh)),
      stats_(compute_mesh_stats(*mesh_)),
      stiffness_(assemble_stiffness(*mesh_)),
      mass_(assemble_consistent_mass(*mesh_)),
      lumped_(assemble_lumped_mass(*mesh_)),
      stiffness_solver_(stiffness_),
      mass_solver_(mass_) {}

FemFunction DiscreteOperatorSet::apply_Ah(const FemFunction& v) const {
  require_same_mesh(v.mesh_ptr(), mesh_);
  Eigen::VectorXd out = -(stiffness_ * v.coeffs()).cwiseQuotient(lumped_);
  return make_function(std::move(out));
}

ComplexFemFunction DiscreteOperatorSet::apply_Ah(const ComplexFemFunction& v) const {
  require_same_mesh(v.mesh_ptr(), mesh_);
  const Eigen::VectorXd re = -(stiffness_ * v.coeffs().real()).cwiseQuotient(lumped_);
  const Eigen::VectorXd im = -(stiffness_ * v.coeffs().imag()).cwiseQuotient(lumped_);
  ComplexFemFunction::Vector out(re.size());
  out.real() = re;
  out.imag() = im;
  return {mesh_, std::move(out)};
}

FemFunction DiscreteOperatorSet::solve_Ah(const FemFunction& f) const {
  require_same_mesh(f.mesh_ptr(), mesh_);
  return make_function(-stiffness_solver_.solve(Eigen::VectorXd(lumped_.cwiseProduct(f.coeffs()))));
}

FemFunction DiscreteOperatorSet::apply_Lh(const FemFunction& v) const {
  require_same_mesh(v.mesh_ptr(), mesh_);
  return make_function(-mass_solver_.solve(Eigen::VectorXd(stiffness_ * v.coeffs())));
}

FemFunction DiscreteOperatorSet::solve_Lh(const FemFunction& f) const {
  require_same_mesh(f.mesh_ptr(), mesh_);
  return make_function(-stiffness_solver_.solve(Eigen::VectorXd(mass_ * f.coeffs())));
}

FemFunction DiscreteOperatorSet::apply_Kh(const FemFunction& v) const {
  require_same_mesh(v.mesh_ptr(), mesh_);
  return make_function(mass_solver_.solve(Eigen::VectorXd(lumped_.cwiseProduct(v.coeffs()))));
}

FemFunction DiscreteOperatorSet::apply_Kh_inverse(const FemFunction& v) const {
  require_same_mesh(v.mesh_ptr(), mesh_);
  return make_function((mass_ * v.coeffs()).cwiseQuotient(lumped_));
}

template <class PointFn>
Eigen::VectorXd DiscreteOperatorSet::integrate_against_basis(PointFn&& fn, quadrature::QuadOrder order) const {
  require_planar(*mesh_);
  const auto& rule = quadrature::triangle_rule(order);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(dofs());
  for (std::size_t k = 0; k < mesh_->num_cells(); ++k) {
    const auto c = mesh_->cell(k);
    const int dof[3] = {mesh_->interior_index(c[0]), mesh_->interior_index(c[1]), mesh_->interior_index(c[2])};
    if (dof[0] < 0 && dof[1] < 0 && dof[2] < 0) continue;
    const auto p0 = mesh_->node(c[0]), p1 = mesh_->node(c[1]), p2 = mesh_->node(c[2]);
    const double area = std::abs(mesh_->cell_measure(k));
    double local[3] = {0, 0, 0};
    for (const auto& qp : rule) {
      const auto& l = qp.bary;
      const double x = l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0];
      const double y = l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1];
      fn(k, qp, x, y, area, local);
    }
    for (int a = 0; a < 3; ++a) {
      if (dof[a] >= 0) b[dof[a]] += local[a];
    }
  }
  if (!b.allFinite()) throw EvaluationError("integrand produced non-finite values");
  return b;
}

Eigen::VectorXd DiscreteOperatorSet::load_vector(const SpatialFunction& f, quadrature::QuadOrder order) const {
  return integrate_against_basis(
      [&f](std::size_t, const quadrature::TrianglePoint& qp, double x, double y, double area, double* local) {
        const double w = qp.weight * area * f(x, y);
        for (int a = 0; a < 3; ++a) local[a] += w * qp.bary[a];
      },
      order);
}

Eigen::VectorXd DiscreteOperatorSet::composed_load_vector(const FemFunction& u, const std::function<double(double)>& f,
                                                          quadrature::QuadOrder order) const {
  if (u.mesh_ptr() != mesh_) throw InvalidArgument("function lives on a different mesh");
  const auto& mesh = *mesh_;
  return integrate_against_basis(
      [&](std::size_t k, const quadrature::TrianglePoint& qp, double, double, double area, double* local) {
        const auto c = mesh.cell(k);
        const double uq = qp.bary[0] * u.nodal_value(c[0]) + qp.bary[1] * u.nodal_value(c[1]) +
                          qp.bary[2] * u.nodal_value(c[2]);
        const double w = qp.weight * area * f(uq);
        for (int a = 0; a < 3; ++a) local[a] += w * qp.bary[a];
      },
      order);
}

Eigen::VectorXd DiscreteOperatorSet::gradient_load_vector(const SpatialGradient& grad_u,
                                                          quadrature::QuadOrder order) const {
  const auto& mesh = *mesh_;
  return integrate_against_basis(
      [&](std::size_t k, const quadrature::TrianglePoint& qp, double x, double y, double area, double* local) {
        const auto eg = detail::element_gradients(mesh, k);
        const auto g = grad_u(x, y);
        for (int a = 0; a < 3; ++a) {
          local[a] += qp.weight * area * (g[0] * eg.grad[a][0] + g[1] * eg.grad[a][1]);
        }
      },
      order);
}

FemFunction DiscreteOperatorSet::l2_projection(const SpatialFunction& f, quadrature::QuadOrder order) const {
  return make_function(mass_solver_.solve(load_vector(f, order)));
}

FemFunction DiscreteOperatorSet::l2_projection(const FemFunction& f) const {
  if (f.mesh_ptr() != mesh_) throw InvalidArgument("function lives on a different mesh");
  return make_function(mass_solver_.solve(Eigen::VectorXd(mass_ * f.coeffs())));
}

FemFunction DiscreteOperatorSet::ritz_projection(const SpatialGradient& grad_u, quadrature::QuadOrder order) const {
  return make_function(stiffness_solver_.solve(gradient_load_vector(grad_u, order)));
}

FemFunction DiscreteOperatorSet::interpolate(const SpatialFunction& f) const {
  Eigen::VectorXd v(dofs());
  const auto nodes = mesh_->interior_nodes();
  for (std::size_t j = 0; j < nodes.size(); ++j) {
    const auto p = mesh_->node(nodes[j]);
    v[j] = f(p[0], p[1]);
  }
  if (!v.allFinite()) throw EvaluationError("interpolated function has non-finite nodal values");
  return make_function(std::move(v));
}

SpdSolver DiscreteOperatorSet::shifted_solver(double mass_coeff, double stiffness_coeff) const {
  SparseMatrix a = stiffness_coeff * stiffness_;
  SparseMatrix d(dofs(), dofs());
  d.reserve(Eigen::VectorXi::Constant(dofs(), 1));
  for (Eigen::Index j = 0; j < dofs(); ++j) d.insert(j, j) = mass_coeff * lumped_[j];
  return SpdSolver(SparseMatrix(a + d));
}

void DiscreteOperatorSet::dump_matrices(const std::filesystem::path& prefix) const {
  auto write_sparse = [](const SparseMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string());
    out << std::setprecision(17) << "# rows=" << m.rows() << " cols=" << m.cols() << " nnz=" << m.nonZeros() << '\n';
    for (Eigen::Index c = 0; c < m.outerSize(); ++c) {
      for (SparseMatrix::InnerIterator it(m, c); it; ++it) out << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
  };
  write_sparse(stiffness_, prefix.string() + "_S.txt");
  write_sparse(mass_, prefix.string() + "_Mc.txt");
  std::ofstream out(prefix.string() + "_D.txt");
  if (!out) throw Error("cannot open " + prefix.string() + "_D.txt");
  out << std::setprecision(17);
  for (Eigen::Index j = 0; j < lumped_.size(); ++j) out << lumped_[j] << '\n';
}

}  // namespace dmrfem
