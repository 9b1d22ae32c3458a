#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <unistd.h>

#include <Eigen/Dense>

#include "dmrfem/assembly.hpp"
#include "dmrfem/mesh.hpp"
#include "dmrfem/stepper.hpp"

namespace testing {

inline std::shared_ptr<const dmrfem::Triangulation> square(int n) {
  return std::make_shared<const dmrfem::Triangulation>(dmrfem::generate_structured_mesh(n));
}

inline Eigen::VectorXd randn(Eigen::Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Eigen::VectorXd v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

inline Eigen::VectorXd rand_nonneg(Eigen::Index n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = u(rng) < 0.3 ? 0.0 : u(rng);
  return v;
}

/// Two triangles on the edge (0,0)-(1,0) whose opposite angles are both 100
/// degrees. Every node lies on the boundary.
inline dmrfem::Triangulation obtuse_pair() {
  const double apex = 0.5 / std::tan(50.0 * std::numbers::pi / 180.0);
  return dmrfem::Triangulation(2, {0, 0, 1, 0, 0.5, apex, 0.5, -apex}, {0, 1, 2, 1, 0, 3}, {1, 1, 1, 1});
}

inline double rel_diff(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
  const double scale = std::max(a.norm(), b.norm());
  return scale == 0 ? 0.0 : (a - b).norm() / scale;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("dmrfem_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// u = b p with b = x(1-x)y(1-y) for five low-degree p: (grad u, Delta u),
/// written out by hand.
inline std::vector<std::pair<dmrfem::SpatialGradient, dmrfem::SpatialFunction>> bubble_polynomials() {
  using dmrfem::SpatialFunction;
  auto make = [](SpatialFunction p, SpatialFunction px, SpatialFunction py, SpatialFunction pxx,
                 SpatialFunction pyy) {
    dmrfem::SpatialGradient grad = [=](double x, double y) -> std::array<double, 2> {
      const double bx = (1 - 2 * x) * y * (1 - y), by = x * (1 - x) * (1 - 2 * y), b = x * (1 - x) * y * (1 - y);
      return {bx * p(x, y) + b * px(x, y), by * p(x, y) + b * py(x, y)};
    };
    SpatialFunction lap = [=](double x, double y) {
      const double b = x * (1 - x) * y * (1 - y);
      const double bx = (1 - 2 * x) * y * (1 - y), by = x * (1 - x) * (1 - 2 * y);
      const double bxx = -2 * y * (1 - y), byy = -2 * x * (1 - x);
      return bxx * p(x, y) + 2 * bx * px(x, y) + b * pxx(x, y) + byy * p(x, y) + 2 * by * py(x, y) +
             b * pyy(x, y);
    };
    return std::pair{grad, lap};
  };
  auto zero = [](double, double) { return 0.0; };
  auto one = [](double, double) { return 1.0; };
  return {
      make(one, zero, zero, zero, zero),
      make([](double x, double) { return x; }, one, zero, zero, zero),
      make([](double, double y) { return y * y; }, zero, [](double, double y) { return 2 * y; }, zero,
           [](double, double) { return 2.0; }),
      make([](double x, double y) { return x * y; }, [](double, double y) { return y; },
           [](double x, double) { return x; }, zero, zero),
      make([](double x, double y) { return x * x + y; }, [](double x, double) { return 2 * x; }, one,
           [](double, double) { return 2.0; }, zero),
  };
}

/// u_t - Delta u - g at (x, y, t) by sixth-order central differences with
/// step e. Returns the residual and a magnitude scale max(|u_t|, |Delta u|, |g|).
inline std::pair<double, double> heat_residual(const dmrfem::SpaceTimeFunction& u, const dmrfem::SpaceTimeFunction& g,
                                               double x, double y, double t, double e = 3e-3) {
  static constexpr double d1[] = {-1.0 / 60, 3.0 / 20, -3.0 / 4, 0, 3.0 / 4, -3.0 / 20, 1.0 / 60};
  static constexpr double d2[] = {1.0 / 90, -3.0 / 20, 3.0 / 2, -49.0 / 18, 3.0 / 2, -3.0 / 20, 1.0 / 90};
  double ut = 0, uxx = 0, uyy = 0;
  for (int k = -3; k <= 3; ++k) {
    ut += d1[k + 3] * u(x, y, t + k * e);
    uxx += d2[k + 3] * u(x + k * e, y, t);
    uyy += d2[k + 3] * u(x, y + k * e, t);
  }
  ut /= e;
  const double lap = (uxx + uyy) / (e * e);
  const double gv = g(x, y, t);
  return {ut - lap - gv, std::max({std::abs(ut), std::abs(lap), std::abs(gv)})};
}

}  // namespace testing
