#include "dmrfem/cli.hpp"

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>

#include "dmrfem/assembly.hpp"
#include "dmrfem/errors.hpp"
#include "dmrfem/experiments.hpp"
#include "dmrfem/mesh.hpp"
#include "dmrfem/norms.hpp"
#include "dmrfem/spectral.hpp"
#include "dmrfem/stepper.hpp"

namespace dmrfem::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}
std::string g17(double v) { return fmt("%.17g", v); }
std::string g6(double v) { return fmt("%.6g", v); }

struct Context {
  std::ostream& out;
  std::ostream& err;
  std::string command_line;
  std::uint64_t seed = 1;
  unsigned jobs = 0;
  bool verbose = false;

  std::vector<std::string> header() const {
    return {"dmrfem " + std::string(kVersion), "command: " + command_line, "seed: " + std::to_string(seed)};
  }
  void log(const std::string& msg) const {
    if (verbose) err << "[dmrfem] " << msg << '\n';
  }
};

std::ofstream open_output(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  return f;
}

void write_header(std::ostream& os, const Context& ctx) {
  for (const auto& line : ctx.header()) os << "# " << line << '\n';
}

std::shared_ptr<const Triangulation> read_mesh(const std::string& path) {
  return std::make_shared<const Triangulation>(load_mesh(path));
}

// ---- mesh -----------------------------------------------------------------

struct MeshGenArgs {
  int n = 8;
  std::string out;
};

int run_mesh_gen(const Context& ctx, const MeshGenArgs& a) {
  const auto t = generate_structured_mesh(a.n);
  save_mesh(t, a.out, ctx.header());
  ctx.out << "wrote " << a.out << ": " << t.num_nodes() << " nodes, " << t.num_cells() << " elements, "
          << t.num_interior() << " interior dofs\n";
  return kOk;
}

int run_mesh_check(const Context& ctx, const std::string& path) {
  const auto t = load_mesh(path);
  const auto report = check_acuteness(t);
  ctx.out << "acute: " << (report.pass ? "yes" : "no") << '\n';
  ctx.out << "angle criterion: " << (report.angle_criterion_pass ? "yes" : "no") << '\n';
  ctx.out << "tolerance: " << g6(report.tolerance) << '\n';
  for (const auto& v : report.violating_pairs) {
    ctx.out << "violation: nodes " << v.node_i << ' ' << v.node_j << " stiffness " << g6(v.stiffness)
            << " opposite angles " << g6(v.opposite_angles) << '\n';
  }
  return report.pass ? kOk : kCheckFailed;
}

int run_mesh_stats(const Context& ctx, const std::string& path) {
  const auto t = load_mesh(path);
  const auto s = compute_mesh_stats(t);
  ctx.out << "dim " << s.dim << '\n'
          << "nodes " << t.num_nodes() << '\n'
          << "elements " << t.num_cells() << '\n'
          << "interior " << t.num_interior() << '\n'
          << "h " << g6(s.h) << '\n'
          << "kappa_h " << g6(s.kappa_h) << '\n'
          << "nu " << g6(s.nu) << '\n'
          << "gamma " << g6(s.gamma) << '\n';
  return kOk;
}

// ---- solve ----------------------------------------------------------------

struct SolveArgs {
  std::string mesh;
  double theta = 1;
  double tau = 0.01;
  double T = 1;
  std::string variant = "A";
  std::string problem = "appendixB";
  std::string out = "traj.csv";
  std::string dump_states;
  std::string dump_matrices;
  bool force = false;
};

void dump_state(const fs::path& dir, std::size_t n, const FemFunction& u, const Context& ctx) {
  char name[32];
  std::snprintf(name, sizeof name, "state_%06zu.txt", n);
  auto f = open_output(dir / name);
  write_header(f, ctx);
  for (std::size_t i = 0; i < u.mesh().num_nodes(); ++i) f << g17(u.nodal_value(i)) << '\n';
}

int run_solve(const Context& ctx, const SolveArgs& a) {
  const DiscreteOperatorSet ops(read_mesh(a.mesh));
  if (!a.dump_matrices.empty()) ops.dump_matrices(a.dump_matrices);

  SchemeConfig cfg;
  cfg.theta = a.theta;
  cfg.tau = a.tau;
  cfg.T = a.T;
  cfg.load_variant = a.variant == "A" ? LoadVariant::consistent : LoadVariant::lumped;
  cfg.validate();

  SpaceTimeFunction g;
  SpatialFunction u0;
  SpaceTimeFunction exact;
  if (a.problem == "appendixB") {
    auto p = benchmark_problem();
    g = p.g;
    u0 = p.u0;
    exact = p.u_exact;
  } else {
    // Decaying first eigenmode, no source.
    u0 = [](double x, double y) { return std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y); };
  }

  const auto report = check_stability(ops.stats(), cfg);
  if (report.required) ctx.log("step bound tau_max = " + g6(report.tau_max));

  auto csv = open_output(a.out);
  write_header(csv, ctx);
  csv << "n,t,linf,l2\n";
  std::optional<LinearErrorAccumulator> acc;
  if (exact) acc.emplace(ops, exact, 4.0, 2.0, cfg.theta, cfg.tau);
  if (!a.dump_states.empty()) fs::create_directories(a.dump_states);

  double peak = 0;
  int code = kOk;
  try {
    march_linear(
        ops, cfg, g, ops.l2_projection(u0),
        [&](std::size_t n, double t, const FemFunction& u) {
          const double linf = u.coeffs().size() ? u.coeffs().cwiseAbs().maxCoeff() : 0.0;
          peak = std::max(peak, linf);
          csv << n << ',' << g17(t) << ',' << g17(linf) << ',' << g17(lq_norm(u, 2.0)) << '\n';
          if (acc) acc->observe(n, t, u);
          if (!a.dump_states.empty()) dump_state(a.dump_states, n, u, ctx);
        },
        SolveOptions{a.force});
  } catch (const StabilityError& e) {
    ctx.err << "error: " << e.what() << '\n' << "tau_max=" << g6(e.tau_max()) << '\n';
    csv.close();
    fs::remove(a.out);
    return kCheckFailed;
  } catch (const OverflowError& e) {
    ctx.err << "error: " << e.what() << '\n';
    code = kRuntimeError;
  }
  ctx.out << "steps " << cfg.steps() << '\n' << "max_abs " << g6(peak) << '\n';
  if (report.required) ctx.out << "tau_max " << g6(report.tau_max) << '\n';
  if (acc && code == kOk) ctx.out << "error_l4_l2 " << g6(acc->value()) << '\n';
  return code;
}

// ---- diag -----------------------------------------------------------------

struct DiagArgs {
  std::string kind;
  std::string mesh;
  double q = 2;
  double alpha = 0.75;
  double z = -0.5;
  std::vector<double> ts{0.0, 1.0, 10.0};
  int samples = 1000;
  bool complex = false;
  std::string out;
};

int run_diag(const Context& ctx, const DiagArgs& a) {
  const DiscreteOperatorSet ops(read_mesh(a.mesh));
  std::ofstream file;
  if (!a.out.empty()) file = open_output(a.out);
  std::ostream& os = a.out.empty() ? ctx.out : file;
  write_header(os, ctx);
  const auto samples = static_cast<std::size_t>(a.samples);

  if (a.kind == "range") {
    const auto r = numerical_range_sample(ops, a.q, samples, a.complex, ctx.seed);
    os << "sample,re,im\n";
    for (std::size_t i = 0; i < r.points.size(); ++i) {
      os << i << ',' << g17(r.points[i].real()) << ',' << g17(r.points[i].imag()) << '\n';
    }
    os << "# r_estimate=" << g6(r.r_estimate) << " bound=" << g6(r.bound) << " violations=" << r.violations << '\n';
  } else if (a.kind == "positivity") {
    os << "t,min_relative\n";
    std::size_t violations = 0, trials = 0;
    for (double t : {0.01, 0.1, 1.0}) {
      const double ts[] = {t};
      const auto r = resolvent_positivity(ops, ts, samples, ctx.seed);
      os << g17(t) << ',' << g17(r.min_relative) << '\n';
      violations += r.violations;
      trials += r.trials;
    }
    os << "# trials=" << trials << " violations=" << violations << '\n';
  } else if (a.kind == "gn") {
    const auto level = gn_max_ratio(ops, a.q, samples, ctx.seed);
    os << "sample,value\n";
    for (std::size_t i = 0; i < level.ratios.size(); ++i) os << i << ',' << g17(level.ratios[i]) << '\n';
    os << "# max_ratio=" << g6(level.max_ratio) << " h=" << g6(level.h) << '\n';
  } else if (a.kind == "sobolev") {
    const auto eig = eigendecompose(ops);
    const auto level = sobolev_max_ratio(ops, eig, a.q, a.alpha, samples, ctx.seed);
    os << "sample,value\n";
    for (std::size_t i = 0; i < level.ratios.size(); ++i) os << i << ',' << g17(level.ratios[i]) << '\n';
    os << "# max_ratio=" << g6(level.max_ratio) << " alpha=" << g6(a.alpha) << " h=" << g6(level.h) << '\n';
  } else if (a.kind == "fracpower") {
    std::mt19937_64 rng(ctx.seed);
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(ops.dofs());
    for (auto& x : v) x = normal(rng);
    const auto vq = ops.make_function(v);
    const auto quad = fractional_power_quadrature(ops, a.z, vq);
    os << "sample,value\n";
    for (Eigen::Index j = 0; j < quad.coeffs().size(); ++j) os << j << ',' << g17(quad.coeffs()[j]) << '\n';
    if (ops.dofs() <= kDenseEigLimit) {
      const auto exact = fractional_power_apply(eigendecompose(ops), a.z, vq);
      const double rel = (quad.coeffs() - exact.coeffs()).norm() / exact.coeffs().norm();
      os << "# z=" << g6(a.z) << " relative_difference_to_eigen=" << g6(rel) << '\n';
    } else {
      os << "# z=" << g6(a.z) << " eigen path unavailable above " << kDenseEigLimit << " dofs\n";
    }
  } else if (a.kind == "imagpower") {
    const auto eig = eigendecompose(ops);
    os << "t,value\n";
    double worst = 0;
    for (double t : a.ts) {
      const double norm = imaginary_power_norm(eig, t);
      worst = std::max(worst, std::abs(norm - 1));
      os << g17(t) << ',' << g17(norm) << '\n';
    }
    os << "# max_abs_deviation_from_1=" << g6(worst) << '\n';
  }
  return kOk;
}

// ---- study ----------------------------------------------------------------

struct StudyArgs {
  std::vector<int> cases{1, 2, 3, 4, 5};
  std::string variant = "A";
  std::vector<int> levels{8, 16, 32, 64};
  std::string f = "usq";
  std::string out = "study";
  bool no_timing = false;
};

int run_study_linear(const Context& ctx, const StudyArgs& a) {
  CaseOptions opt;
  opt.variant = a.variant == "A" ? LoadVariant::consistent : LoadVariant::lumped;
  opt.levels = a.levels;
  opt.jobs = ctx.jobs;
  opt.timing = !a.no_timing;
  for (int c : a.cases) {
    ctx.log("running case " + std::to_string(c) + " variant " + a.variant);
    const auto report = run_case(c, opt);
    const fs::path path = fs::path(a.out) / ("case" + std::to_string(c) + "_" + a.variant + ".csv");
    emit_report(report, path, ctx.header());
    ctx.out << "case " << c << " variant " << a.variant << " fitted_slope " << fmt("%.4f", report.fitted_slope)
            << '\n';
  }
  return kOk;
}

int run_study_semilinear(const Context& ctx, const StudyArgs& a) {
  SemilinearStudyConfig cfg;
  cfg.f_name = a.f;
  if (a.f == "usq") {
    cfg.f = [](double u) { return u * u; };
  } else if (a.f == "linear") {
    cfg.f = [](double u) { return u; };
  } else {
    cfg.f = [](double) { return 0.0; };
  }
  cfg.levels = a.levels;
  cfg.jobs = ctx.jobs;
  cfg.timing = !a.no_timing;
  ctx.log("running semilinear study, reference n = " + std::to_string(cfg.reference_n));
  const auto result = run_semilinear_study(cfg);
  auto header = ctx.header();
  header.push_back("reference: n=" + std::to_string(cfg.reference_n) + " tau=h^2, same scheme");
  emit_report(result.lpq, fs::path(a.out) / ("semilinear_" + a.f + "_lpq.csv"), header);
  emit_report(result.linf, fs::path(a.out) / ("semilinear_" + a.f + "_linf.csv"), header);
  ctx.out << "semilinear " << a.f << " l4_l2 fitted_slope " << fmt("%.4f", result.lpq.fitted_slope) << '\n'
          << "semilinear " << a.f << " linf fitted_slope " << fmt("%.4f", result.linf.fitted_slope) << '\n';
  return kOk;
}

std::string join(const std::vector<std::string>& args) {
  std::string s = "dmrfem";
  for (const auto& a : args) s += " " + a;
  return s;
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Mass-lumped P1 finite elements for the heat equation", "dmrfem"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  Context ctx{out, err, join(args)};
  if (const char* env = std::getenv("DMRFEM_JOBS")) ctx.jobs = static_cast<unsigned>(std::max(0, std::atoi(env)));
  app.add_option("--seed", ctx.seed, "Seed for randomized diagnostics");
  app.add_option("--jobs", ctx.jobs, "Worker threads (default: DMRFEM_JOBS or all cores)");
  app.add_flag("-v,--verbose", ctx.verbose, "Progress messages on stderr");

  std::function<int()> action;

  auto* mesh = app.add_subcommand("mesh", "Mesh generation and checks");
  mesh->require_subcommand(1);
  MeshGenArgs gen;
  auto* mesh_gen = mesh->add_subcommand("gen", "Structured mesh of the unit square");
  mesh_gen->add_option("--n", gen.n, "Cells per side")->required();
  mesh_gen->add_option("-o,--out", gen.out, "Output path")->required();
  mesh_gen->callback([&] { action = [&] { return run_mesh_gen(ctx, gen); }; });
  std::string mesh_path;
  auto* mesh_check = mesh->add_subcommand("check", "Acuteness check (exit 2 on failure)");
  mesh_check->add_option("path", mesh_path)->required();
  mesh_check->callback([&] { action = [&] { return run_mesh_check(ctx, mesh_path); }; });
  auto* mesh_stats = mesh->add_subcommand("stats", "Print h, kappa_h, nu, gamma");
  mesh_stats->add_option("path", mesh_path)->required();
  mesh_stats->callback([&] { action = [&] { return run_mesh_stats(ctx, mesh_path); }; });

  SolveArgs solve;
  auto* solve_cmd = app.add_subcommand("solve", "Theta-scheme for the heat equation");
  solve_cmd->add_option("--mesh", solve.mesh)->required();
  solve_cmd->add_option("--theta", solve.theta)->check(CLI::Range(0.0, 1.0));
  solve_cmd->add_option("--tau", solve.tau)->required();
  solve_cmd->add_option("--T", solve.T)->required();
  solve_cmd->add_option("--variant", solve.variant)->check(CLI::IsMember({"A", "B"}));
  solve_cmd->add_option("--problem", solve.problem)->check(CLI::IsMember({"appendixB", "custom"}));
  solve_cmd->add_option("--out", solve.out, "Trajectory CSV");
  solve_cmd->add_option("--dump-states", solve.dump_states, "Directory for per-step nodal dumps");
  solve_cmd->add_option("--dump-matrices", solve.dump_matrices, "Prefix for S, Mc, D dumps");
  solve_cmd->add_flag("--force", solve.force, "Run even if the explicit step bound is violated");
  solve_cmd->callback([&] { action = [&] { return run_solve(ctx, solve); }; });

  DiagArgs diag;
  auto* diag_cmd = app.add_subcommand("diag", "Operator diagnostics");
  diag_cmd->add_option("kind", diag.kind)
      ->required()
      ->check(CLI::IsMember({"range", "positivity", "gn", "sobolev", "fracpower", "imagpower"}));
  diag_cmd->add_option("--mesh", diag.mesh)->required();
  diag_cmd->add_option("--q", diag.q);
  diag_cmd->add_option("--alpha", diag.alpha);
  diag_cmd->add_option("--z", diag.z, "Exponent for fracpower");
  diag_cmd->add_option("--t", diag.ts, "Imaginary exponents for imagpower");
  diag_cmd->add_option("--samples", diag.samples)->check(CLI::PositiveNumber);
  diag_cmd->add_flag("--complex", diag.complex, "Complex samples for range");
  diag_cmd->add_option("--seed", ctx.seed);
  diag_cmd->add_option("--out", diag.out, "CSV path (default: stdout)");
  diag_cmd->callback([&] { action = [&] { return run_diag(ctx, diag); }; });

  StudyArgs study;
  auto* study_cmd = app.add_subcommand("study", "Convergence studies");
  study_cmd->require_subcommand(1);
  auto* linear = study_cmd->add_subcommand("linear", "Benchmark cases 1-5");
  linear->add_option("--cases", study.cases)->delimiter(',')->check(CLI::Range(1, 5));
  linear->add_option("--variant", study.variant)->check(CLI::IsMember({"A", "B"}));
  linear->add_option("--levels", study.levels)->delimiter(',')->check(CLI::Range(2, 4096));
  linear->add_option("--out", study.out, "Output directory");
  linear->add_flag("--no-timing", study.no_timing, "Write runtime_s = 0 for reproducible files");
  linear->callback([&] { action = [&] { return run_study_linear(ctx, study); }; });
  auto* semi = study_cmd->add_subcommand("semilinear", "Self-convergence of the semi-implicit scheme");
  semi->add_option("--f", study.f)->check(CLI::IsMember({"usq", "linear", "zero"}));
  semi->add_option("--levels", study.levels)->delimiter(',')->check(CLI::Range(2, 4096));
  semi->add_option("--out", study.out, "Output directory");
  semi->add_flag("--no-timing", study.no_timing, "Write runtime_s = 0 for reproducible files");
  semi->callback([&] { action = [&] { return run_study_semilinear(ctx, study); }; });

  std::vector<const char*> argv{"dmrfem"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    return action ? action() : kUsage;
  } catch (const StabilityError& e) {
    err << "error: " << e.what() << "\ntau_max=" << g6(e.tau_max()) << '\n';
    return kCheckFailed;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return kCheckFailed;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kCheckFailed;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
}

int dispatch(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dispatch(args, std::cout, std::cerr);
}

}  // namespace dmrfem::cli
