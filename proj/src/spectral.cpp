#include "dmrfem/spectral.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "dmrfem/errors.hpp"
#include "dmrfem/norms.hpp"
#include "dmrfem/quadrature.hpp"

namespace dmrfem {

namespace {

void check_mesh(const EigenDecomposition& eig, const FemFunction& v) {
  if (v.mesh_ptr() != eig.mesh) throw InvalidArgument("function lives on a different mesh than the decomposition");
}

Eigen::VectorXd random_normal(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(n);
  for (Eigen::Index j = 0; j < n; ++j) v[j] = normal(rng);
  return v;
}

Eigen::VectorXd hat(Eigen::Index n, Eigen::Index j) {
  Eigen::VectorXd v = Eigen::VectorXd::Zero(n);
  v[j] = 1.0;
  return v;
}

// Lowest mode of the pencil (S, D) by inverse iteration, D-normalised.
Eigen::VectorXd lowest_mode(const DiscreteOperatorSet& ops, double* rayleigh = nullptr) {
  const auto& D = ops.lumped_mass();
  Eigen::VectorXd x = Eigen::VectorXd::Ones(ops.dofs());
  double rq = 0;
  for (int it = 0; it < 200; ++it) {
    x = ops.stiffness_solver().solve(Eigen::VectorXd(D.cwiseProduct(x)));
    x /= std::sqrt(x.dot(D.cwiseProduct(x)));
    const double next = x.dot(ops.stiffness() * x);
    if (it > 5 && std::abs(next - rq) <= 1e-14 * next) {
      rq = next;
      break;
    }
    rq = next;
  }
  if (rayleigh) *rayleigh = rq;
  return x;
}

// Dominant mode of D^{-1} S by power iteration (used only as a sampling seed).
Eigen::VectorXd top_mode(const DiscreteOperatorSet& ops, std::mt19937_64& rng) {
  const auto& D = ops.lumped_mass();
  Eigen::VectorXd x = random_normal(ops.dofs(), rng);
  for (int it = 0; it < 300; ++it) {
    x = (ops.stiffness() * x).cwiseQuotient(D);
    x /= x.norm();
  }
  return x;
}

Eigen::VectorXd apply_power_eig(const EigenDecomposition& eig, double z, const Eigen::VectorXd& v) {
  const Eigen::VectorXd coeff = eig.expand(v);
  const Eigen::VectorXd scaled = coeff.cwiseProduct(eig.eigenvalues.array().pow(z).matrix());
  return eig.eigenvectors * scaled;
}

}  // namespace

Eigen::VectorXd EigenDecomposition::expand(const Eigen::VectorXd& v) const {
  return eigenvectors.transpose() * lumped.cwiseProduct(v);
}

EigenDecomposition eigendecompose(const DiscreteOperatorSet& ops) {
  const Eigen::Index n = ops.dofs();
  if (n > kDenseEigLimit) {
    throw CapabilityError("dense eigendecomposition is limited to " + std::to_string(kDenseEigLimit) +
                          " dofs (got " + std::to_string(n) + "); use fractional_power_quadrature");
  }
  if (n == 0) throw InvalidArgument("mesh has no interior dofs");
  const Eigen::VectorXd d_isqrt = ops.lumped_mass().cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd a = Eigen::MatrixXd(ops.stiffness());
  a = d_isqrt.asDiagonal() * a * d_isqrt.asDiagonal();
  Eigen::VectorXd w(n);
  const lapack_int info = LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', static_cast<lapack_int>(n), a.data(),
                                         static_cast<lapack_int>(n), w.data());
  if (info != 0) throw Error("symmetric eigensolver failed (info " + std::to_string(info) + ")");
  EigenDecomposition eig;
  eig.mesh = ops.mesh_ptr();
  eig.eigenvalues = std::move(w);
  eig.eigenvectors = d_isqrt.asDiagonal() * a;
  eig.lumped = ops.lumped_mass();
  if (!(eig.eigenvalues[0] > 0)) throw Error("pencil (S, D) is not positive definite");
  return eig;
}

FemFunction fractional_power_apply(const EigenDecomposition& eig, double z, const FemFunction& v) {
  if (!(z >= -1 && z <= 1)) throw InvalidArgument("fractional power exponent must lie in [-1, 1]");
  check_mesh(eig, v);
  if (z == 0) return v;
  return {eig.mesh, apply_power_eig(eig, z, v.coeffs())};
}

SpectralBounds estimate_spectral_bounds(const DiscreteOperatorSet& ops) {
  SpectralBounds b{};
  lowest_mode(ops, &b.lambda_min);
  const auto& S = ops.stiffness();
  const auto& D = ops.lumped_mass();
  Eigen::VectorXd row_abs = Eigen::VectorXd::Zero(ops.dofs());
  for (Eigen::Index c = 0; c < S.outerSize(); ++c) {
    for (SparseMatrix::InnerIterator it(S, c); it; ++it) row_abs[it.row()] += std::abs(it.value());
  }
  b.lambda_max = row_abs.cwiseQuotient(D).maxCoeff();
  return b;
}

FemFunction fractional_power_quadrature(const DiscreteOperatorSet& ops, double z, const FemFunction& v,
                                        const FractionalQuadratureOptions& options) {
  if (!(z >= -1 && z <= 1)) throw InvalidArgument("fractional power exponent must lie in [-1, 1]");
  if (v.mesh_ptr() != ops.mesh_ptr()) throw InvalidArgument("function lives on a different mesh");
  if (options.panels < 1 || options.tail_terms < 1 || !(options.window > 1)) {
    throw InvalidArgument("invalid fractional quadrature options");
  }
  const auto& D = ops.lumped_mass();
  const auto& S = ops.stiffness();
  auto neg_a = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd { return (S * x).cwiseQuotient(D); };
  auto neg_a_inv = [&](const Eigen::VectorXd& x) -> Eigen::VectorXd {
    return ops.stiffness_solver().solve(Eigen::VectorXd(D.cwiseProduct(x)));
  };

  if (z == 0) return v;
  if (z == 1) return ops.make_function(neg_a(v.coeffs()));
  if (z == -1) return ops.make_function(neg_a_inv(v.coeffs()));
  if (z > 0) {
    return fractional_power_quadrature(ops, z - 1, ops.make_function(neg_a(v.coeffs())), options);
  }

  const double s = -z;
  const auto bounds = estimate_spectral_bounds(ops);
  const double lo = bounds.lambda_min / options.window;
  const double hi = bounds.lambda_max * options.window;
  const Eigen::VectorXd dv = D.cwiseProduct(v.coeffs());

  // Middle part in the variable u = log t: int t^{1-s} (tD + S)^{-1} D v du.
  Eigen::VectorXd acc = Eigen::VectorXd::Zero(ops.dofs());
  const double u0 = std::log(lo), u1 = std::log(hi);
  const double width = (u1 - u0) / options.panels;
  using GL = quadrature::GaussLegendre4;
  for (int p = 0; p < options.panels; ++p) {
    const double mid = u0 + (p + 0.5) * width;
    for (std::size_t g = 0; g < GL::nodes.size(); ++g) {
      const double t = std::exp(mid + 0.5 * width * GL::nodes[g]);
      const SpdSolver resolvent = ops.shifted_solver(t, 1.0);
      acc += (0.5 * width * GL::weights[g] * std::pow(t, 1 - s)) * resolvent.solve(dv);
    }
  }

  // Tails from 1/(t + lambda) = sum_k (-t)^k lambda^{-k-1} (t < lo) and
  // sum_k (-lambda)^k t^{-k-1} (t > hi).
  Eigen::VectorXd low_term = v.coeffs();
  Eigen::VectorXd high_term = v.coeffs();
  for (int k = 0; k < options.tail_terms; ++k) {
    const double sign = (k % 2 == 0) ? 1.0 : -1.0;
    low_term = neg_a_inv(low_term);  // (-A_h)^{-(k+1)} v
    acc += sign * std::pow(lo, k + 1 - s) / (k + 1 - s) * low_term;
    acc += sign * std::pow(hi, -s - k) / (s + k) * high_term;  // (-A_h)^k v
    high_term = neg_a(high_term);
  }
  return ops.make_function(std::sin(std::numbers::pi * s) / std::numbers::pi * acc);
}

ComplexFemFunction imaginary_power_apply(const EigenDecomposition& eig, double t, const ComplexFemFunction& v) {
  if (v.mesh_ptr() != eig.mesh) throw InvalidArgument("function lives on a different mesh than the decomposition");
  const Eigen::VectorXd re = eig.expand(v.coeffs().real());
  const Eigen::VectorXd im = eig.expand(v.coeffs().imag());
  Eigen::VectorXcd coeff(eig.size());
  for (Eigen::Index k = 0; k < eig.size(); ++k) {
    const std::complex<double> mult = std::exp(std::complex<double>(0, t * std::log(eig.eigenvalues[k])));
    coeff[k] = mult * std::complex<double>(re[k], im[k]);
  }
  ComplexFemFunction::Vector out = eig.eigenvectors.cast<std::complex<double>>() * coeff;
  return {eig.mesh, std::move(out)};
}

double imaginary_power_norm(const EigenDecomposition& eig, double t) {
  const Eigen::Index n = eig.size();
  // In the coordinates y = D^{1/2} x the h,2-norm is Euclidean and the
  // operator reads B = W diag(lambda^{it}) W^T with W = D^{1/2} V.
  const Eigen::MatrixXd w = eig.lumped.cwiseSqrt().asDiagonal() * eig.eigenvectors;
  Eigen::VectorXd c(n), s(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const double phase = t * std::log(eig.eigenvalues[k]);
    c[k] = std::cos(phase);
    s[k] = std::sin(phase);
  }
  const Eigen::MatrixXd b_re = w * c.asDiagonal() * w.transpose();
  const Eigen::MatrixXd b_im = w * s.asDiagonal() * w.transpose();
  // G = B^H B, Hermitian; ||B||_2^2 is its largest eigenvalue.
  Eigen::MatrixXcd g(n, n);
  g.real() = b_re.transpose() * b_re + b_im.transpose() * b_im;
  g.imag() = b_re.transpose() * b_im - b_im.transpose() * b_re;
  Eigen::VectorXd ev(n);
  const lapack_int info =
      LAPACKE_zheevd(LAPACK_COL_MAJOR, 'N', 'L', static_cast<lapack_int>(n),
                     reinterpret_cast<lapack_complex_double*>(g.data()), static_cast<lapack_int>(n), ev.data());
  if (info != 0) throw Error("Hermitian eigensolver failed (info " + std::to_string(info) + ")");
  return std::sqrt(ev.maxCoeff());
}

NumericalRangeSample numerical_range_sample(const DiscreteOperatorSet& ops, double q, std::size_t n_samples,
                                            bool complex, std::uint64_t seed) {
  if (!(q > 1) || std::isinf(q)) throw InvalidArgument("numerical range sampling needs q in (1, inf)");
  if (n_samples < 1) throw InvalidArgument("need at least one sample");
  const auto& D = ops.lumped_mass();
  const Eigen::Index n = ops.dofs();
  const double d1 = ops.mesh().dim() + 1;
  NumericalRangeSample out;
  out.seed = seed;
  out.bound = d1 * d1 / (ops.stats().kappa_h * ops.stats().kappa_h);
  if (n == 0) return out;

  std::mt19937_64 rng(seed);
  auto evaluate = [&](Eigen::VectorXcd v) {
    v /= lumped_norm<std::complex<double>>(v, D, q);
    Eigen::VectorXcd vstar(n);
    for (Eigen::Index j = 0; j < n; ++j) {
      const double mag = std::abs(v[j]);
      vstar[j] = mag == 0 ? std::complex<double>(0) : std::pow(mag, q - 2) * v[j];
    }
    Eigen::VectorXcd av(n);
    av.real() = -(ops.stiffness() * v.real()).cwiseQuotient(D);
    av.imag() = -(ops.stiffness() * v.imag()).cwiseQuotient(D);
    std::complex<double> pairing = 0, duality = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      pairing += av[j] * std::conj(vstar[j]) * D[j];
      duality += v[j] * std::conj(vstar[j]) * D[j];
    }
    const std::complex<double> point = pairing / duality;
    out.points.push_back(point);
    out.r_estimate = std::max(out.r_estimate, std::abs(point));
    if (std::abs(point) > out.bound * (1 + 1e-12)) ++out.violations;
  };

  for (std::size_t s = 0; s < n_samples; ++s) {
    Eigen::VectorXcd v(n);
    v.real() = random_normal(n, rng);
    v.imag() = complex ? random_normal(n, rng) : Eigen::VectorXd::Zero(n);
    evaluate(std::move(v));
  }
  // Adversarial seeds: nodal hats and the highest-frequency mode.
  for (Eigen::Index j : {Eigen::Index{0}, n / 2, n - 1}) evaluate(hat(n, j).cast<std::complex<double>>());
  evaluate(top_mode(ops, rng).cast<std::complex<double>>());
  return out;
}

double gn_ratio(const DiscreteOperatorSet& ops, const FemFunction& v, double q) {
  const auto& D = ops.lumped_mass();
  const double exponent = ops.mesh().dim() / (2.0 * q);
  const double vinf = lumped_norm<double>(v.coeffs(), D, kInfinity);
  const double vq = lumped_norm<double>(v.coeffs(), D, q);
  const double avq = lumped_norm<double>(ops.apply_Ah(v).coeffs(), D, q);
  if (!(vq > 0)) throw InvalidArgument("GN ratio is undefined for the zero vector");
  return vinf / (std::pow(avq, exponent) * std::pow(vq, 1 - exponent));
}

namespace {

// Shared sample family for the Sobolev-type sweeps.
std::vector<Eigen::VectorXd> sweep_samples(const DiscreteOperatorSet& ops, std::size_t n_samples,
                                           std::mt19937_64& rng) {
  const Eigen::Index n = ops.dofs();
  const auto& D = ops.lumped_mass();
  std::vector<Eigen::VectorXd> out;
  for (std::size_t s = 0; s < n_samples; ++s) out.push_back(random_normal(n, rng));
  for (std::size_t s = 0; s < std::min<std::size_t>(n_samples, 5); ++s) {
    out.push_back(ops.stiffness_solver().solve(Eigen::VectorXd(D.cwiseProduct(random_normal(n, rng)))));
  }
  // Hats at the first dof, the middle dof and the dof nearest the centroid.
  Eigen::Index centre = 0;
  double best = std::numeric_limits<double>::infinity();
  const auto nodes = ops.mesh().interior_nodes();
  for (Eigen::Index j = 0; j < n; ++j) {
    const auto p = ops.mesh().node(nodes[j]);
    const double r = std::hypot(p[0] - 0.5, p[1] - 0.5);
    if (r < best) best = r, centre = j;
  }
  for (Eigen::Index j : {Eigen::Index{0}, n / 2, centre}) out.push_back(hat(n, j));
  return out;
}

SweepLevel make_level(const DiscreteOperatorSet& ops) {
  SweepLevel level;
  level.dofs = ops.dofs();
  level.h = ops.stats().h;
  return level;
}

}  // namespace

SweepLevel gn_max_ratio(const DiscreteOperatorSet& ops, double q, std::size_t n_samples, std::uint64_t seed) {
  const int d = ops.mesh().dim();
  if (!(q > d / 2.0)) throw InvalidArgument("GN inequality needs q > d/2");
  std::mt19937_64 rng(seed);
  auto samples = sweep_samples(ops, n_samples, rng);
  samples.push_back(lowest_mode(ops));
  SweepLevel level = make_level(ops);
  for (const auto& v : samples) {
    const double r = gn_ratio(ops, ops.make_function(v), q);
    level.ratios.push_back(r);
    level.max_ratio = std::max(level.max_ratio, r);
  }
  return level;
}

std::vector<SweepLevel> gn_ratio_sweep(std::span<const DiscreteOperatorSet* const> family, double q,
                                       std::size_t n_samples, std::uint64_t seed) {
  std::vector<SweepLevel> out;
  for (const auto* ops : family) out.push_back(gn_max_ratio(*ops, q, n_samples, seed));
  return out;
}

SweepLevel sobolev_max_ratio(const DiscreteOperatorSet& ops, const EigenDecomposition& eig, double q, double alpha,
                             std::size_t n_samples, std::uint64_t seed) {
  const int d = ops.mesh().dim();
  if (!(q > d / 2.0)) throw InvalidArgument("discrete Sobolev inequality needs q > d/2");
  if (!(alpha > d / (2.0 * q) && alpha <= 1)) {
    throw InvalidArgument("alpha must lie in (d/(2q), 1], got " + std::to_string(alpha));
  }
  if (eig.mesh != ops.mesh_ptr()) throw InvalidArgument("decomposition belongs to a different mesh");
  std::mt19937_64 rng(seed);
  auto samples = sweep_samples(ops, n_samples, rng);
  for (Eigen::Index k = 0; k < std::min<Eigen::Index>(5, eig.size()); ++k) samples.push_back(eig.eigenvectors.col(k));
  const auto& D = ops.lumped_mass();
  SweepLevel level = make_level(ops);
  for (const auto& v : samples) {
    const double denom = lumped_norm<double>(apply_power_eig(eig, alpha, v), D, q);
    const double r = lumped_norm<double>(v, D, kInfinity) / denom;
    level.ratios.push_back(r);
    level.max_ratio = std::max(level.max_ratio, r);
  }
  return level;
}

std::vector<SweepLevel> sobolev_ratio_sweep(std::span<const DiscreteOperatorSet* const> family, double q, double alpha,
                                            std::size_t n_samples, std::uint64_t seed) {
  std::vector<SweepLevel> out;
  for (const auto* ops : family) {
    const auto eig = eigendecompose(*ops);
    out.push_back(sobolev_max_ratio(*ops, eig, q, alpha, n_samples, seed));
  }
  return out;
}

PositivityReport resolvent_positivity(const SparseMatrix& stiffness, const Eigen::VectorXd& lumped,
                                      std::span<const double> ts, std::size_t n_samples, std::uint64_t seed) {
  const Eigen::Index n = lumped.size();
  PositivityReport report;
  report.min_relative = std::numeric_limits<double>::infinity();
  if (n == 0) return report;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::vector<Eigen::VectorXd> inputs;
  for (std::size_t s = 0; s < n_samples; ++s) {
    Eigen::VectorXd v(n);
    for (Eigen::Index j = 0; j < n; ++j) v[j] = unif(rng) < 0.5 ? 0.0 : unif(rng);
    if (v.maxCoeff() == 0) v[0] = 1.0;
    inputs.push_back(std::move(v));
  }
  const Eigen::Index hats = std::min<Eigen::Index>(n, 64);
  for (Eigen::Index j = 0; j < hats; ++j) inputs.push_back(hat(n, j * n / hats));

  for (double t : ts) {
    if (!(t > 0)) throw InvalidArgument("resolvent parameter must be positive");
    SparseMatrix a = t * stiffness;
    for (Eigen::Index j = 0; j < n; ++j) a.coeffRef(j, j) += lumped[j];
    const SpdSolver solver(a);
    for (const auto& v : inputs) {
      const Eigen::VectorXd w = solver.solve(Eigen::VectorXd(lumped.cwiseProduct(v)));
      const double scale = v.maxCoeff();
      const double rel = w.minCoeff() / scale;
      report.min_relative = std::min(report.min_relative, rel);
      ++report.trials;
      if (rel < -1e-12) ++report.violations;
    }
  }
  return report;
}

PositivityReport resolvent_positivity(const DiscreteOperatorSet& ops, std::span<const double> ts,
                                      std::size_t n_samples, std::uint64_t seed) {
  return resolvent_positivity(ops.stiffness(), ops.lumped_mass(), ts, n_samples, seed);
}

}  // namespace dmrfem
