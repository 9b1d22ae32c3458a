#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "dmrfem/assembly.hpp"
#include "dmrfem/errors.hpp"
#include "dmrfem/mesh.hpp"
#include "support.hpp"

using namespace dmrfem;

namespace {

// Angle at vertex a of triangle (a, b, c).
double angle_at(std::span<const double> a, std::span<const double> b, std::span<const double> c) {
  const double ux = b[0] - a[0], uy = b[1] - a[1], vx = c[0] - a[0], vy = c[1] - a[1];
  return std::acos((ux * vx + uy * vy) / (std::hypot(ux, uy) * std::hypot(vx, vy)));
}

struct EdgeInfo {
  std::vector<double> opposite;  // angles opposite the edge in each adjacent element
};

// Independent oracle: opposite angles per edge, and the stiffness entry via
// the cotangent formula (grad phi_i, grad phi_j) = -1/2 sum cot(alpha).
std::map<std::pair<int, int>, EdgeInfo> edge_angles(const Triangulation& t) {
  std::map<std::pair<int, int>, EdgeInfo> out;
  for (std::size_t k = 0; k < t.num_cells(); ++k) {
    const auto c = t.cell(k);
    for (int e = 0; e < 3; ++e) {
      const int i = c[e], j = c[(e + 1) % 3], o = c[(e + 2) % 3];
      out[{std::min(i, j), std::max(i, j)}].opposite.push_back(angle_at(t.node(o), t.node(i), t.node(j)));
    }
  }
  return out;
}

std::string write_temp(const std::string& name, const std::string& body) {
  const auto path = testing::scratch_dir("mesh") / name;
  std::ofstream(path) << body;
  return path.string();
}

}  // namespace

TEST_CASE("structured mesh counts") {
  const auto t = generate_structured_mesh(2);
  CHECK(t.num_cells() == 8);
  CHECK(t.num_nodes() == 9);
  CHECK(t.num_interior() == 1);
  CHECK(t.interior_nodes()[0] == 4);
  for (int n : {3, 8}) {
    const auto m = generate_structured_mesh(n);
    CHECK(m.num_cells() == static_cast<std::size_t>(2 * n * n));
    CHECK(m.num_nodes() == static_cast<std::size_t>((n + 1) * (n + 1)));
    CHECK(m.num_interior() == static_cast<std::size_t>((n - 1) * (n - 1)));
  }
  // Node (i, j) has id i + j (n + 1).
  const auto m = generate_structured_mesh(4);
  CHECK(m.node(2 + 3 * 5)[0] == doctest::Approx(0.5));
  CHECK(m.node(2 + 3 * 5)[1] == doctest::Approx(0.75));
}

TEST_CASE("structured mesh rejects n < 2") {
  CHECK_THROWS_AS(generate_structured_mesh(1), InvalidArgument);
  CHECK_THROWS_AS(generate_structured_mesh(0), InvalidArgument);
}

TEST_CASE("mesh stats on the diagonal mesh") {
  const auto s = compute_mesh_stats(generate_structured_mesh(8));
  CHECK(s.h == doctest::Approx(std::sqrt(2.0) / 8).epsilon(1e-14));
  CHECK(s.kappa_h == doctest::Approx((1.0 / 8) / std::sqrt(2.0)).epsilon(1e-14));
  CHECK(s.gamma == doctest::Approx(1.0));
  // Right isosceles triangle, legs a: h_K = a sqrt 2, inradius a (2 - sqrt 2) / 2.
  CHECK(s.nu == doctest::Approx(2 * std::sqrt(2.0) / (2 - std::sqrt(2.0))).epsilon(1e-12));
  CHECK(s.kappa_h <= s.h);
  CHECK(s.nu >= 1);
  // Interior nodes see six triangles of area 1/(2 n^2): |Lambda_j| = 1/n^2.
  for (double m : s.lumped_measures) CHECK(m == doctest::Approx(1.0 / 64).epsilon(1e-13));
}

TEST_CASE("measures partition the domain") {
  for (int n : {2, 3, 8, 17}) {
    const auto t = generate_structured_mesh(n);
    const auto s = compute_mesh_stats(t);
    double cells = 0;
    for (std::size_t k = 0; k < t.num_cells(); ++k) cells += t.cell_measure(k);
    CHECK(std::abs(cells - 1) <= 1e-12);
    CHECK(std::abs(s.total_measure - 1) <= 1e-12);
    double bary = 0;
    for (double m : barycentric_measures(t)) bary += m;
    CHECK(std::abs(bary - 1) <= 1e-12);
  }
}

TEST_CASE("equilateral triangle altitude") {
  const double side = 2.0;
  const Triangulation t(2, {0, 0, side, 0, side / 2, side * std::sqrt(3.0) / 2}, {0, 1, 2}, {1, 1, 1});
  const auto s = compute_mesh_stats(t);
  CHECK(s.kappa_h == doctest::Approx(side * std::sqrt(3.0) / 2).epsilon(1e-14));
  CHECK(s.h == doctest::Approx(side));
  // Equilateral: h_K / rho_K = side / (side / (2 sqrt 3)).
  CHECK(s.nu == doctest::Approx(2 * std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("tetrahedra are accepted by the data model") {
  // Unit cube corner tetrahedron plus its reflection is overkill; one cell suffices.
  const Triangulation t(3, {0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1}, {0, 1, 2, 3}, {1, 1, 1, 1});
  const auto s = compute_mesh_stats(t);
  CHECK(s.dim == 3);
  CHECK(s.total_measure == doctest::Approx(1.0 / 6));
  for (double m : s.node_measures) CHECK(m == doctest::Approx(1.0 / 24));
  // Smallest altitude: from the origin onto the face x + y + z = 1.
  CHECK(s.kappa_h == doctest::Approx(1 / std::sqrt(3.0)));
}

TEST_CASE("negatively oriented elements are reoriented") {
  const Triangulation t(2, {0, 0, 1, 0, 0, 1}, {0, 2, 1}, {1, 1, 1});
  CHECK(t.cell_measure(0) == doctest::Approx(0.5));
}

TEST_CASE("invalid meshes are rejected") {
  // Degenerate (collinear) element.
  CHECK_THROWS_AS(Triangulation(2, {0, 0, 1, 0, 2, 0}, {0, 1, 2}, {1, 1, 1}), ValidationError);
  // Out-of-range vertex index.
  CHECK_THROWS_AS(Triangulation(2, {0, 0, 1, 0, 0, 1}, {0, 1, 5}, {1, 1, 1}), ValidationError);
  // Duplicated element.
  CHECK_THROWS_WITH_AS(Triangulation(2, {0, 0, 1, 0, 0, 1}, {0, 1, 2, 1, 2, 0}, {1, 1, 1}),
                       doctest::Contains("duplicated"), ValidationError);
  // Two elements folded onto the same side of their shared edge.
  CHECK_THROWS_AS(Triangulation(2, {0, 0, 1, 0, 0, 1, 0.2, 0.2}, {0, 1, 2, 0, 1, 3}, {1, 1, 1, 1}), ValidationError);
  // Boundary flag on a node that is not on the boundary and vice versa.
  auto good = generate_structured_mesh(2);
  auto flags = good.boundary_flags();
  flags[4] = 1;
  CHECK_THROWS_AS(Triangulation(2, good.coords(), good.cells(), flags), ValidationError);
  flags = good.boundary_flags();
  flags[0] = 0;
  CHECK_THROWS_AS(Triangulation(2, good.coords(), good.cells(), flags), ValidationError);
}

TEST_CASE("acuteness check agrees with the angle and cotangent oracles") {
  for (int n : {4, 16}) {
    const auto t = generate_structured_mesh(n);
    const auto report = check_acuteness(t);
    CHECK(report.pass);
    CHECK(report.angle_criterion_pass);
    CHECK(report.violating_pairs.empty());
    for (const auto& [edge, info] : edge_angles(t)) {
      if (info.opposite.size() != 2) continue;
      CHECK(info.opposite[0] + info.opposite[1] <= std::numbers::pi + 1e-12);
    }
  }
  // Assembled interior stiffness off-diagonals are nonpositive as well.
  const auto S = assemble_stiffness(generate_structured_mesh(4));
  const double tol = 1e-12 * S.coeffs().cwiseAbs().maxCoeff();
  for (int k = 0; k < S.outerSize(); ++k) {
    for (SparseMatrix::InnerIterator it(S, k); it; ++it) {
      if (it.row() != it.col()) CHECK(it.value() <= tol);
    }
  }
}

TEST_CASE("obtuse pair fails with exactly one violating pair") {
  const auto t = testing::obtuse_pair();
  const auto report = check_acuteness(t);
  CHECK_FALSE(report.pass);
  CHECK_FALSE(report.angle_criterion_pass);
  REQUIRE(report.violating_pairs.size() == 1);
  const auto& v = report.violating_pairs[0];
  CHECK(std::min(v.node_i, v.node_j) == 0);
  CHECK(std::max(v.node_i, v.node_j) == 1);
  CHECK(v.opposite_angles == doctest::Approx(200.0 * std::numbers::pi / 180));
  // Cotangent oracle: -(cot 100 deg + cot 100 deg) / 2 > 0.
  const double cot100 = 1 / std::tan(100.0 * std::numbers::pi / 180);
  CHECK(v.stiffness == doctest::Approx(-cot100).epsilon(1e-12));
  CHECK(v.stiffness > 0);
}

TEST_CASE("a single element passes vacuously") {
  const Triangulation t(2, {0, 0, 1, 0, 0.5, 0.1}, {0, 1, 2}, {1, 1, 1});
  CHECK(check_acuteness(t).pass);
}

TEST_CASE("full stiffness entries match the cotangent formula") {
  const auto t = generate_structured_mesh(3);
  const auto angles = edge_angles(t);
  for (const auto& e : full_stiffness_entries(t)) {
    if (e.i == e.j) continue;
    const auto it = angles.find({std::min(e.i, e.j), std::max(e.i, e.j)});
    REQUIRE(it != angles.end());
    double expected = 0;
    for (double a : it->second.opposite) expected -= 0.5 / std::tan(a);
    CHECK(e.value == doctest::Approx(expected).scale(1.0).epsilon(1e-12));
  }
}

TEST_CASE("save and load round-trip") {
  const auto t = generate_structured_mesh(4);
  const auto dir = testing::scratch_dir("roundtrip");
  save_mesh(t, dir / "m.txt", {"generated for a test"});
  const auto u = load_mesh(dir / "m.txt");
  CHECK(u.coords() == t.coords());
  CHECK(u.cells() == t.cells());
  CHECK(u.boundary_flags() == t.boundary_flags());
  save_mesh(u, dir / "m2.txt", {"generated for a test"});
  std::ifstream a(dir / "m.txt"), b(dir / "m2.txt");
  std::stringstream sa, sb;
  sa << a.rdbuf();
  sb << b.rdbuf();
  CHECK(sa.str() == sb.str());
  CHECK(sa.str().rfind("# generated for a test\ndim 2\nnodes 25\n", 0) == 0);
}

TEST_CASE("malformed mesh files") {
  const std::string ok_head = "dim 2\nnodes 3\n0 0 1\n1 0 1\n0 1 1\n";
  CHECK_NOTHROW(load_mesh(write_temp("ok.txt", ok_head + "elements 1\n0 1 2\n")));
  try {
    load_mesh(write_temp("bad_number.txt", "dim 2\nnodes 3\n0 0 1\n1 x 1\n0 1 1\nelements 1\n0 1 2\n"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 4);
  }
  try {
    load_mesh(write_temp("short.txt", ok_head + "elements 2\n0 1 2\n"));
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() >= 7);
  }
  CHECK_THROWS_AS(load_mesh(write_temp("flag.txt", "dim 2\nnodes 3\n0 0 1\n1 0 7\n0 1 1\nelements 1\n0 1 2\n")),
                  ParseError);
  CHECK_THROWS_AS(load_mesh(write_temp("range.txt", ok_head + "elements 1\n0 1 3\n")), ValidationError);
  CHECK_THROWS_AS(load_mesh(write_temp("dup.txt", "dim 2\nnodes 4\n0 0 1\n1 0 1\n0 1 1\n1 1 1\nelements 3\n"
                                                  "0 1 2\n1 3 2\n2 0 1\n")),
                  ValidationError);
}
