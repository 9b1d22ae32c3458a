#pragma once

#include <array>
#include <cmath>
#include <vector>

namespace dmrfem::quadrature {

/// A point on the reference triangle in barycentric coordinates with a
/// weight normalised so that the weights sum to one (multiply by |K|).
struct TrianglePoint {
  std::array<double, 3> bary;
  double weight;
};

enum class QuadOrder {
  standard,  ///< 7-point degree-5 Gauss rule
  refined,   ///< the same rule on the 4 midpoint subtriangles (28 points)
};

namespace detail {

inline std::vector<TrianglePoint> gauss7() {
  const double s15 = std::sqrt(15.0);
  const double a1 = (9.0 - 2.0 * s15) / 21.0;
  const double b1 = (6.0 + s15) / 21.0;
  const double a2 = (9.0 + 2.0 * s15) / 21.0;
  const double b2 = (6.0 - s15) / 21.0;
  const double w1 = (155.0 + s15) / 1200.0;
  const double w2 = (155.0 - s15) / 1200.0;
  return {
      {{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0}, 0.225},
      {{a1, b1, b1}, w1},
      {{b1, a1, b1}, w1},
      {{b1, b1, a1}, w1},
      {{a2, b2, b2}, w2},
      {{b2, a2, b2}, w2},
      {{b2, b2, a2}, w2},
  };
}

inline std::vector<TrianglePoint> gauss7_refined() {
  // Subtriangles in barycentric coordinates of the parent.
  using B = std::array<double, 3>;
  const B v0{1, 0, 0}, v1{0, 1, 0}, v2{0, 0, 1};
  const B m01{0.5, 0.5, 0}, m12{0, 0.5, 0.5}, m02{0.5, 0, 0.5};
  const std::array<std::array<B, 3>, 4> subs{{
      {v0, m01, m02},
      {m01, v1, m12},
      {m02, m12, v2},
      {m12, m02, m01},
  }};
  std::vector<TrianglePoint> out;
  for (const auto& sub : subs) {
    for (const auto& p : gauss7()) {
      B b{0, 0, 0};
      for (int k = 0; k < 3; ++k) {
        for (int c = 0; c < 3; ++c) b[c] += p.bary[k] * sub[k][c];
      }
      out.push_back({b, 0.25 * p.weight});
    }
  }
  return out;
}

}  // namespace detail

inline const std::vector<TrianglePoint>& triangle_rule(QuadOrder order = QuadOrder::standard) {
  static const std::vector<TrianglePoint> standard = detail::gauss7();
  static const std::vector<TrianglePoint> refined = detail::gauss7_refined();
  return order == QuadOrder::standard ? standard : refined;
}

/// 4-point Gauss-Legendre rule on [-1, 1].
struct GaussLegendre4 {
  static constexpr std::array<double, 4> nodes{-0.8611363115940526, -0.3399810435848563,
                                               0.3399810435848563, 0.8611363115940526};
  static constexpr std::array<double, 4> weights{0.3478548451374538, 0.6521451548625461,
                                                 0.6521451548625461, 0.3478548451374538};
};

}  // namespace dmrfem::quadrature
