#pragma once

// Element-level geometry shared by mesh validation and assembly.

#include <array>
#include <cmath>
#include <cstddef>

#include "dmrfem/errors.hpp"
#include "dmrfem/mesh.hpp"

namespace dmrfem::detail {

using Vec3 = std::array<double, 3>;

/// Gradients of the barycentric coordinates of element k (constant on K),
/// padded to 3 components, together with |K|.
struct ElementGradients {
  std::array<Vec3, 4> grad{};
  double measure = 0;
};

inline ElementGradients element_gradients(const Triangulation& t, std::size_t k) {
  const int d = t.dim();
  const auto c = t.cell(k);
  ElementGradients out;
  if (d == 2) {
    const auto p0 = t.node(c[0]), p1 = t.node(c[1]), p2 = t.node(c[2]);
    const double a11 = p1[0] - p0[0], a12 = p2[0] - p0[0];
    const double a21 = p1[1] - p0[1], a22 = p2[1] - p0[1];
    const double det = a11 * a22 - a12 * a21;
    if (!(std::abs(det) > 0)) throw InvalidMesh("degenerate element " + std::to_string(k));
    // rows of J^{-1} are grad lambda_1, grad lambda_2
    out.grad[1] = {a22 / det, -a12 / det, 0};
    out.grad[2] = {-a21 / det, a11 / det, 0};
    out.grad[0] = {-out.grad[1][0] - out.grad[2][0], -out.grad[1][1] - out.grad[2][1], 0};
    out.measure = std::abs(det) / 2.0;
  } else {
    std::array<Vec3, 3> e{};
    const auto p0 = t.node(c[0]);
    for (int j = 0; j < 3; ++j) {
      const auto pj = t.node(c[j + 1]);
      for (int r = 0; r < 3; ++r) e[j][r] = pj[r] - p0[r];
    }
    // J has columns e[0], e[1], e[2]; J^{-T} columns are cross products / det.
    auto cross = [](const Vec3& a, const Vec3& b) {
      return Vec3{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
    };
    const Vec3 c12 = cross(e[1], e[2]);
    const double det = e[0][0] * c12[0] + e[0][1] * c12[1] + e[0][2] * c12[2];
    if (!(std::abs(det) > 0)) throw InvalidMesh("degenerate element " + std::to_string(k));
    const Vec3 c20 = cross(e[2], e[0]);
    const Vec3 c01 = cross(e[0], e[1]);
    for (int r = 0; r < 3; ++r) {
      out.grad[1][r] = c12[r] / det;
      out.grad[2][r] = c20[r] / det;
      out.grad[3][r] = c01[r] / det;
      out.grad[0][r] = -(out.grad[1][r] + out.grad[2][r] + out.grad[3][r]);
    }
    out.measure = std::abs(det) / 6.0;
  }
  return out;
}

inline double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

}  // namespace dmrfem::detail
