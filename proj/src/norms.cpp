#include "dmrfem/norms.hpp"

#include <cmath>

#include "dmrfem/errors.hpp"
#include "geometry.hpp"

namespace dmrfem {

namespace {

void check_exponent(double q) {
  if (!(q >= 1)) throw InvalidArgument("norm exponent must be >= 1 (or infinity)");
}

}  // namespace

void NormSpec::validate() const {
  if (!(q > 1)) throw InvalidArgument("spatial exponent q must lie in (1, inf]");
  if (!(p > 1) || !std::isfinite(p)) throw InvalidArgument("temporal exponent p must lie in (1, inf)");
  if (!(tau > 0)) throw InvalidArgument("time step must be positive");
}

template <class Scalar>
double lq_norm(const BasicFemFunction<Scalar>& v, double q, quadrature::QuadOrder order) {
  check_exponent(q);
  const auto& t = v.mesh();
  if (std::isinf(q)) {
    return v.size() == 0 ? 0.0 : v.coeffs().cwiseAbs().maxCoeff();
  }
  const int nv = t.vertices_per_cell();
  if (q == 2) {
    // v^T M_K v = |K| (sum |v_i|^2 + |sum v_i|^2) / ((d+1)(d+2))
    const double denom = (nv) * (nv + 1);
    double sum = 0;
    for (std::size_t k = 0; k < t.num_cells(); ++k) {
      const auto c = t.cell(k);
      double sq = 0;
      Scalar s{0};
      for (int a = 0; a < nv; ++a) {
        const Scalar val = v.nodal_value(c[a]);
        sq += std::norm(val);
        s += val;
      }
      sum += std::abs(t.cell_measure(k)) * (sq + std::norm(s)) / denom;
    }
    return std::sqrt(sum);
  }
  if (t.dim() != 2) throw CapabilityError("general-q L^q norms are implemented for d = 2 only");
  const auto& rule = quadrature::triangle_rule(order);
  double sum = 0;
  for (std::size_t k = 0; k < t.num_cells(); ++k) {
    const auto c = t.cell(k);
    const Scalar vals[3] = {v.nodal_value(c[0]), v.nodal_value(c[1]), v.nodal_value(c[2])};
    if (vals[0] == Scalar(0) && vals[1] == Scalar(0) && vals[2] == Scalar(0)) continue;
    double local = 0;
    for (const auto& qp : rule) {
      const Scalar val = qp.bary[0] * vals[0] + qp.bary[1] * vals[1] + qp.bary[2] * vals[2];
      local += qp.weight * std::pow(std::abs(val), q);
    }
    sum += std::abs(t.cell_measure(k)) * local;
  }
  return std::pow(sum, 1.0 / q);
}

template <class Scalar>
double lumped_norm(const Eigen::Matrix<Scalar, Eigen::Dynamic, 1>& coeffs, const Eigen::VectorXd& measures, double q) {
  check_exponent(q);
  if (coeffs.size() != measures.size()) throw InvalidArgument("coefficient / measure length mismatch");
  if (coeffs.size() == 0) return 0.0;
  if (std::isinf(q)) return coeffs.cwiseAbs().maxCoeff();
  double sum = 0;
  if (q == 2) {
    for (Eigen::Index j = 0; j < coeffs.size(); ++j) sum += std::norm(coeffs[j]) * measures[j];
    return std::sqrt(sum);
  }
  for (Eigen::Index j = 0; j < coeffs.size(); ++j) sum += std::pow(std::abs(coeffs[j]), q) * measures[j];
  return std::pow(sum, 1.0 / q);
}

template <class Scalar>
double lumped_norm(const BasicFemFunction<Scalar>& v, double q) {
  return lumped_norm<Scalar>(v.coeffs(), assemble_lumped_mass(v.mesh()), q);
}

double w1q_seminorm(const FemFunction& v, double q) {
  check_exponent(q);
  const auto& t = v.mesh();
  const int nv = t.vertices_per_cell();
  double acc = 0;
  for (std::size_t k = 0; k < t.num_cells(); ++k) {
    const auto c = t.cell(k);
    const auto eg = detail::element_gradients(t, k);
    detail::Vec3 g{0, 0, 0};
    for (int a = 0; a < nv; ++a) {
      const double val = v.nodal_value(c[a]);
      for (int r = 0; r < 3; ++r) g[r] += val * eg.grad[a][r];
    }
    const double mag = std::sqrt(detail::dot3(g, g));
    if (std::isinf(q)) {
      acc = std::max(acc, mag);
    } else {
      acc += eg.measure * std::pow(mag, q);
    }
  }
  return std::isinf(q) ? acc : std::pow(acc, 1.0 / q);
}

double lq_error(const FemFunction& v, const SpatialFunction& f, double q, quadrature::QuadOrder order) {
  check_exponent(q);
  const auto& t = v.mesh();
  if (t.dim() != 2) throw CapabilityError("lq_error is implemented for d = 2 only");
  const auto& rule = quadrature::triangle_rule(order);
  double acc = 0;
  for (std::size_t k = 0; k < t.num_cells(); ++k) {
    const auto c = t.cell(k);
    const auto p0 = t.node(c[0]), p1 = t.node(c[1]), p2 = t.node(c[2]);
    const double vals[3] = {v.nodal_value(c[0]), v.nodal_value(c[1]), v.nodal_value(c[2])};
    double local = 0;
    for (const auto& qp : rule) {
      const auto& l = qp.bary;
      const double x = l[0] * p0[0] + l[1] * p1[0] + l[2] * p2[0];
      const double y = l[0] * p0[1] + l[1] * p1[1] + l[2] * p2[1];
      const double diff = std::abs(l[0] * vals[0] + l[1] * vals[1] + l[2] * vals[2] - f(x, y));
      if (std::isinf(q)) {
        local = std::max(local, diff);
      } else {
        local += qp.weight * std::pow(diff, q);
      }
    }
    if (std::isinf(q)) {
      acc = std::max(acc, local);
    } else {
      acc += std::abs(t.cell_measure(k)) * local;
    }
  }
  if (!std::isfinite(acc)) throw EvaluationError("non-finite values in error quadrature");
  return std::isinf(q) ? acc : std::pow(acc, 1.0 / q);
}

double bochner_norm(const std::vector<FemFunction>& series, const NormSpec& spec, SpatialNorm spatial) {
  spec.validate();
  if (series.empty()) throw InvalidArgument("bochner_norm needs a nonempty series");
  for (const auto& v : series) {
    if (!v.same_mesh(series.front())) throw InvalidArgument("series entries live on different meshes");
  }
  const Eigen::VectorXd measures =
      spatial == SpatialNorm::lumped ? assemble_lumped_mass(series.front().mesh()) : Eigen::VectorXd();
  double sum = 0;
  for (const auto& v : series) {
    const double x = spatial == SpatialNorm::lq ? lq_norm(v, spec.q) : lumped_norm<double>(v.coeffs(), measures, spec.q);
    sum += std::pow(x, spec.p) * spec.tau;
  }
  return std::pow(sum, 1.0 / spec.p);
}

std::vector<FemFunction> theta_average(const std::vector<FemFunction>& series, double theta) {
  if (series.size() < 2) throw InvalidArgument("theta_average needs at least two entries");
  if (!(theta >= 0 && theta <= 1)) throw InvalidArgument("theta must lie in [0, 1]");
  std::vector<FemFunction> out;
  out.reserve(series.size() - 1);
  for (std::size_t n = 0; n + 1 < series.size(); ++n) {
    if (!series[n].same_mesh(series[n + 1])) throw InvalidArgument("series entries live on different meshes");
    out.emplace_back(series[n].mesh_ptr(),
                     Eigen::VectorXd((1 - theta) * series[n].coeffs() + theta * series[n + 1].coeffs()));
  }
  return out;
}

template double lq_norm<double>(const FemFunction&, double, quadrature::QuadOrder);
template double lq_norm<std::complex<double>>(const ComplexFemFunction&, double, quadrature::QuadOrder);
template double lumped_norm<double>(const FemFunction&, double);
template double lumped_norm<std::complex<double>>(const ComplexFemFunction&, double);
template double lumped_norm<double>(const Eigen::VectorXd&, const Eigen::VectorXd&, double);
template double lumped_norm<std::complex<double>>(const Eigen::VectorXcd&, const Eigen::VectorXd&, double);

}  // namespace dmrfem
