#include <doctest.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dmrfem/errors.hpp"
#include "dmrfem/experiments.hpp"
#include "dmrfem/norms.hpp"
#include "support.hpp"

using namespace dmrfem;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

}  // namespace

TEST_CASE("benchmark solution") {
  const auto p = benchmark_problem();
  for (double s : {0.0, 0.3, 0.7, 1.0}) {
    CHECK(p.u_exact(0, s, 0.2) == 0.0);
    CHECK(p.u_exact(1, s, 0.2) == 0.0);
    CHECK(p.u_exact(s, 0, 0.2) == 0.0);
    CHECK(p.u_exact(s, 1, 0.2) == 0.0);
  }
  CHECK(p.u_exact(0.5, 0.5, 0) == doctest::Approx(0.0078125).epsilon(1e-15));
  CHECK(p.u0(0.3, 0.6) == p.u_exact(0.3, 0.6, 0));
}

TEST_CASE("source matches u_t - Delta u") {
  const auto p = benchmark_problem();
  // The same expression with a bare +2 in place of +2 w^2.
  auto misprint = [](double x, double y, double t) {
    const double w = x * (1 - x), b = y * (1 - y);
    return std::sqrt(w) * std::exp(t) * (w * w * b - 1.25 * (3 - 4 * x) * (1 - 4 * x) * b + 2);
  };
  std::mt19937_64 rng(51);
  std::uniform_real_distribution<double> in(0.1, 0.9), time(0, 0.5);
  double worst = 0, worst_misprint = 0;
  for (int k = 0; k < 20; ++k) {
    const double x = in(rng), y = in(rng), t = time(rng);
    const auto [r, scale] = testing::heat_residual(p.u_exact, p.g, x, y, t);
    worst = std::max(worst, std::abs(r) / scale);
    const auto [rm, scale_m] = testing::heat_residual(p.u_exact, misprint, x, y, t);
    worst_misprint = std::max(worst_misprint, std::abs(rm) / scale_m);
  }
  CHECK(worst <= 1e-8);
  CHECK(worst_misprint > 0.1);
}

TEST_CASE("error accumulator against a hand-built series") {
  const DiscreteOperatorSet ops(testing::square(6));
  std::mt19937_64 rng(52);
  const Eigen::VectorXd v = testing::randn(ops.dofs(), rng);
  const double nv = lq_norm(ops.make_function(v), 2.0);
  const std::vector<double> c{1.0, -2.0, 0.5, 3.0};
  const double tau = 0.1;
  auto zero = [](double, double, double) { return 0.0; };
  for (double theta : {0.0, 0.5, 1.0}) {
    LinearErrorAccumulator acc(ops, zero, 4, 2, theta, tau);
    for (std::size_t n = 0; n < c.size(); ++n) acc.observe(n, n * tau, ops.make_function(c[n] * v));
    double sum = 0;
    for (std::size_t n = 0; n + 1 < c.size(); ++n) sum += std::pow(std::abs((1 - theta) * c[n] + theta * c[n + 1]) * nv, 4) * tau;
    CHECK(acc.value() == doctest::Approx(std::pow(sum, 0.25)).epsilon(1e-13));
  }
  CHECK_THROWS_AS(LinearErrorAccumulator(ops, zero, 4, 2, 1.5, tau), InvalidArgument);
}

TEST_CASE("accumulator vanishes on the exact interpolant and matches linear_error") {
  const DiscreteOperatorSet ops(testing::square(8));
  const auto p = benchmark_problem();
  LinearErrorAccumulator acc(ops, p.u_exact, 4, 2, 0.5, 0.1);
  for (int n = 0; n < 4; ++n) acc.observe(n, 0.1 * n, ops.interpolate([&](double x, double y) { return p.u_exact(x, y, 0.1 * n); }));
  CHECK(acc.value() == 0.0);

  SchemeConfig cfg;
  cfg.theta = 0.5;
  cfg.tau = 0.05;
  cfg.T = 0.5;
  const auto traj = solve_linear(ops, cfg, p.g, p.u0);
  LinearErrorAccumulator stream(ops, p.u_exact, 4, 2, 0.5, cfg.tau);
  march_linear(ops, cfg, p.g, ops.l2_projection(p.u0), stream.observer());
  CHECK(stream.value() == doctest::Approx(linear_error(ops, traj, p.u_exact, 4, 2, 0.5)).epsilon(1e-14));
}

TEST_CASE("slope fitting") {
  const std::vector<double> h{0.2, 0.1, 0.05, 0.025};
  for (double alpha : {1.0, 2.0, 0.5}) {
    std::vector<double> e;
    for (double x : h) e.push_back(3.7 * std::pow(x, alpha));
    CHECK(fit_slope(h, e) == doctest::Approx(alpha).epsilon(1e-12));
    ConvergenceReport r;
    for (std::size_t i = 0; i < h.size(); ++i) r.rows.push_back({static_cast<int>(i), h[i], h[i], e[i], 0});
    CHECK(fit_slope(r.rows) == doctest::Approx(alpha).epsilon(1e-12));
    for (double s : incremental_slopes(r)) CHECK(s == doctest::Approx(alpha).epsilon(1e-12));
  }
  const std::vector<double> one{0.1};
  CHECK_THROWS_AS(fit_slope(one, one), InvalidArgument);
}

TEST_CASE("case parameters") {
  const auto mesh = generate_structured_mesh(16);
  const auto stats = compute_mesh_stats(mesh);
  CHECK(case_time_step(1, stats) == doctest::Approx(stats.kappa_h * stats.kappa_h / 9));
  CHECK(case_time_step(2, stats) == stats.h);
  CHECK(case_time_step(3, stats) == stats.h * stats.h);
  CHECK(case_time_step(4, stats) == stats.h);
  CHECK(case_time_step(5, stats) == stats.h * stats.h);
  CHECK(case_final_time(1) == 0.1);
  CHECK(case_final_time(4) == 0.5);
  CHECK(case_theta(1) == 0.0);
  CHECK(case_theta(3) == 0.5);
  CHECK(case_theta(5) == 1.0);
  CHECK_THROWS_AS(case_theta(6), InvalidArgument);
}

TEST_CASE("parallel_for") {
  std::atomic<long> sum{0};
  parallel_for(100, 3, [&](std::size_t i) { sum += static_cast<long>(i); });
  CHECK(sum == 4950);
  CHECK_THROWS_AS(parallel_for(10, 2,
                               [](std::size_t i) {
                                 if (i == 7) throw InvalidArgument("boom");
                               }),
                  InvalidArgument);
  CHECK(default_jobs() >= 1);
}

TEST_CASE("prolongation preserves the function") {
  std::mt19937_64 rng(53);
  const DiscreteOperatorSet coarse(testing::square(4));
  const DiscreteOperatorSet fine(testing::square(12));
  const auto v = coarse.make_function(testing::randn(coarse.dofs(), rng));
  const auto w = fine.make_function(prolongate_structured(v, 4, fine, 12));
  // Same piecewise linear function: its norms agree exactly (quadrature is exact for these degrees).
  CHECK(lq_norm(w, 2.0) == doctest::Approx(lq_norm(v, 2.0)).epsilon(1e-13));
  CHECK(lq_norm(w, 4.0) == doctest::Approx(lq_norm(v, 4.0)).epsilon(1e-13));
  CHECK(w1q_seminorm(w, 2.0) == doctest::Approx(w1q_seminorm(v, 2.0)).epsilon(1e-13));
  CHECK(lq_norm(w, kInfinity) == doctest::Approx(lq_norm(v, kInfinity)).epsilon(1e-15));
  // Coarse nodes keep their values.
  const auto& fm = fine.mesh();
  for (int i = 1; i < 4; ++i) {
    for (int j = 1; j < 4; ++j) {
      const int fine_dof = fm.interior_index(static_cast<std::size_t>(3 * i + 3 * j * 13));
      const int coarse_dof = coarse.mesh().interior_index(static_cast<std::size_t>(i + j * 5));
      CHECK(w.coeffs()[fine_dof] == v.coeffs()[coarse_dof]);
    }
  }
  CHECK_THROWS_AS(prolongate_structured(v, 4, fine, 10), InvalidArgument);
}

TEST_CASE("benchmark cases converge") {
  CaseOptions opt;
  opt.levels = {8, 16, 32};
  opt.timing = false;
  SUBCASE("case 5") {
    const auto r = run_case(5, opt);
    REQUIRE(r.rows.size() == 3);
    CHECK(r.case_label == "5");
    CHECK(r.variant == "A");
    for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i].error < r.rows[i - 1].error);
    CHECK(r.fitted_slope == doctest::Approx(2.0).epsilon(0.15));
    for (const auto& row : r.rows) CHECK(row.runtime_s == 0.0);
  }
  SUBCASE("case 3: load variants approach each other") {
    const auto a = run_case(3, opt);
    opt.variant = LoadVariant::lumped;
    const auto b = run_case(3, opt);
    CHECK(b.variant == "B");
    double prev = 1e300;
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
      const double diff = std::abs(a.rows[i].error - b.rows[i].error);
      CHECK(diff < prev);
      prev = diff;
      CHECK(a.rows[i].tau == doctest::Approx(a.rows[i].h * a.rows[i].h));
    }
  }
}

TEST_CASE("report files") {
  const auto dir = testing::scratch_dir("report");
  ConvergenceReport r;
  r.case_label = "2";
  r.variant = "A";
  r.rows = {{8, 0.17, 0.17, 1e-3, 0.5}, {16, 0.088, 0.088, 2.6e-4, 1.0}};
  r.fitted_slope = fit_slope(r.rows);
  const auto path = dir / "case2_A.csv";
  emit_report(r, path, {"dmrfem test", "seed: 0"});
  const auto first = slurp(path);
  CHECK(first.rfind("# dmrfem test\n# seed: 0\ncase,variant,n,h,tau,error,runtime_s\n", 0) == 0);
  CHECK(count_lines(first) == 2 + 1 + 2 + 1);
  CHECK(first.find("# fitted_slope=") != std::string::npos);
  const auto log_path = log10_companion(path);
  CHECK(log_path.filename() == "case2_A_log10.csv");
  const auto logs = slurp(log_path);
  CHECK(logs.find("case,variant,n,log10_h,log10_tau,log10_error\n") != std::string::npos);
  CHECK(logs.find("2,A,8,") != std::string::npos);
  emit_report(r, path, {"dmrfem test", "seed: 0"});
  CHECK(slurp(path) == first);
  std::filesystem::remove_all(dir);
}

TEST_CASE("semilinear self-convergence on a small ladder") {
  SemilinearStudyConfig cfg;
  cfg.levels = {4, 8};
  cfg.reference_n = 16;
  cfg.T = 0.125;
  cfg.timing = false;
  const auto a = run_semilinear_study(cfg);
  REQUIRE(a.lpq.rows.size() == 2);
  CHECK(a.lpq.case_label == "semilinear-usq");
  CHECK(a.lpq.variant == "lpq");
  CHECK(a.linf.variant == "linf");
  CHECK(a.lpq.rows[1].error < a.lpq.rows[0].error);
  CHECK(a.linf.rows[1].error < a.linf.rows[0].error);
  CHECK(a.lpq.fitted_slope > 1.0);
  cfg.jobs = 1;
  const auto b = run_semilinear_study(cfg);
  CHECK(b.lpq.rows[0].error == a.lpq.rows[0].error);
  CHECK(b.linf.rows[1].error == a.linf.rows[1].error);
  cfg.levels = {5};
  CHECK_THROWS_AS(run_semilinear_study(cfg), InvalidArgument);
}
