#include "dmrfem/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <memory>
#include <mutex>
#include <numbers>
#include <numeric>
#include <thread>

#include "dmrfem/errors.hpp"
#include "dmrfem/norms.hpp"

namespace dmrfem {

BenchmarkProblem benchmark_problem() {
  BenchmarkProblem p;
  p.u_exact = [](double x, double y, double t) {
    const double w = x * (1 - x);
    return std::pow(w, 2.5) * y * (1 - y) * std::exp(t);
  };
  // u_t - Delta u, with a''(x) = w^{1/2} (5/4)(3 - 4x)(1 - 4x) for a = w^{5/2}.
  p.g = [](double x, double y, double t) {
    const double w = x * (1 - x);
    const double b = y * (1 - y);
    return std::sqrt(w) * std::exp(t) * (w * w * b - 1.25 * (3 - 4 * x) * (1 - 4 * x) * b + 2 * w * w);
  };
  p.u0 = [u = p.u_exact](double x, double y) { return u(x, y, 0.0); };
  return p;
}

LinearErrorAccumulator::LinearErrorAccumulator(const DiscreteOperatorSet& ops, SpaceTimeFunction u_exact, double p,
                                               double q, double theta, double tau)
    : ops_(&ops), u_exact_(std::move(u_exact)), p_(p), q_(q), theta_(theta), tau_(tau) {
  NormSpec{p, q, tau}.validate();
  if (!(theta >= 0 && theta <= 1)) throw InvalidArgument("theta must lie in [0, 1]");
}

void LinearErrorAccumulator::observe(std::size_t, double t, const FemFunction& u) {
  const FemFunction exact = ops_->interpolate([&](double x, double y) { return u_exact_(x, y, t); });
  Eigen::VectorXd e = u.coeffs() - exact.coeffs();
  if (has_previous_) {
    const FemFunction avg = ops_->make_function((1 - theta_) * previous_ + theta_ * e);
    sum_ += std::pow(lq_norm(avg, q_), p_) * tau_;
  }
  previous_ = std::move(e);
  has_previous_ = true;
}

StepObserver LinearErrorAccumulator::observer() {
  return [this](std::size_t n, double t, const FemFunction& u) { observe(n, t, u); };
}

double LinearErrorAccumulator::value() const { return std::pow(sum_, 1 / p_); }

double linear_error(const DiscreteOperatorSet& ops, const TrajectorySeries& traj, const SpaceTimeFunction& u_exact,
                    double p, double q, double theta) {
  LinearErrorAccumulator acc(ops, u_exact, p, q, theta, traj.tau);
  for (std::size_t n = 0; n < traj.states.size(); ++n) {
    acc.observe(n, traj.t0 + static_cast<double>(n) * traj.tau, traj.states[n]);
  }
  return acc.value();
}

double fit_slope(std::span<const double> h, std::span<const double> error) {
  if (h.size() != error.size() || h.size() < 2) throw InvalidArgument("slope fit needs at least two points");
  double mx = 0, my = 0;
  const auto m = static_cast<double>(h.size());
  for (std::size_t i = 0; i < h.size(); ++i) {
    if (!(h[i] > 0) || !(error[i] > 0)) throw InvalidArgument("slope fit needs positive h and error");
    mx += std::log(h[i]) / m;
    my += std::log(error[i]) / m;
  }
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double dx = std::log(h[i]) - mx;
    sxy += dx * (std::log(error[i]) - my);
    sxx += dx * dx;
  }
  if (sxx == 0) throw InvalidArgument("slope fit needs distinct h values");
  return sxy / sxx;
}

double fit_slope(const std::vector<ConvergenceRow>& rows) {
  std::vector<double> h, e;
  for (const auto& r : rows) h.push_back(r.h), e.push_back(r.error);
  return fit_slope(h, e);
}

std::vector<double> incremental_slopes(const ConvergenceReport& report) {
  std::vector<double> out;
  for (std::size_t i = 1; i < report.rows.size(); ++i) {
    const auto& a = report.rows[i - 1];
    const auto& b = report.rows[i];
    out.push_back(std::log(a.error / b.error) / std::log(a.h / b.h));
  }
  return out;
}

namespace {

void check_case(int case_id) {
  if (case_id < 1 || case_id > 5) throw InvalidArgument("case must be 1..5, got " + std::to_string(case_id));
}

}  // namespace

double case_theta(int case_id) {
  check_case(case_id);
  static constexpr double thetas[] = {0.0, 0.5, 0.5, 1.0, 1.0};
  return thetas[case_id - 1];
}

double case_final_time(int case_id) {
  check_case(case_id);
  return case_id == 1 ? 0.1 : 0.5;
}

double case_time_step(int case_id, const MeshStats& stats) {
  check_case(case_id);
  switch (case_id) {
    case 1:
      return explicit_step_rule(stats, 0.0, 2.0);
    case 2:
    case 4:
      return stats.h;
    default:
      return stats.h * stats.h;
  }
}

unsigned default_jobs() {
  if (const char* env = std::getenv("DMRFEM_JOBS")) {
    const int v = std::atoi(env);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = default_jobs();
  const auto workers = static_cast<unsigned>(std::min<std::size_t>(jobs, count));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void sort_rows(std::vector<ConvergenceRow>& rows) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.h > b.h; });
}

}  // namespace

ConvergenceReport run_case(int case_id, const CaseOptions& options) {
  check_case(case_id);
  if (options.levels.empty()) throw InvalidArgument("no refinement levels given");
  const BenchmarkProblem problem = benchmark_problem();
  ConvergenceReport report;
  report.case_label = std::to_string(case_id);
  report.variant = options.variant == LoadVariant::consistent ? "A" : "B";
  report.rows.resize(options.levels.size());

  parallel_for(options.levels.size(), options.jobs, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    const int n = options.levels[i];
    const DiscreteOperatorSet ops(std::make_shared<const Triangulation>(generate_structured_mesh(n)));
    SchemeConfig cfg;
    cfg.theta = case_theta(case_id);
    cfg.tau = case_time_step(case_id, ops.stats());
    cfg.T = case_final_time(case_id);
    cfg.load_variant = options.variant;
    LinearErrorAccumulator acc(ops, problem.u_exact, report.p, report.q, cfg.theta, cfg.tau);
    march_linear(ops, cfg, problem.g, ops.l2_projection(problem.u0), acc.observer());
    ConvergenceRow& row = report.rows[i];
    row.n = n;
    row.h = ops.stats().h;
    row.tau = cfg.tau;
    row.error = acc.value();
    row.runtime_s = options.timing ? seconds_since(start) : 0.0;
  });
  sort_rows(report.rows);
  report.fitted_slope = report.rows.size() >= 2 ? fit_slope(report.rows) : 0.0;
  return report;
}

Eigen::VectorXd prolongate_structured(const FemFunction& coarse, int n_coarse, const DiscreteOperatorSet& fine,
                                      int n_fine) {
  if (n_coarse < 1 || n_fine % n_coarse != 0) throw InvalidArgument("meshes are not nested");
  const auto id = [n_coarse](int i, int j) { return static_cast<std::size_t>(i + j * (n_coarse + 1)); };
  const auto nodes = fine.mesh().interior_nodes();
  Eigen::VectorXd out(fine.dofs());
  const int ratio = n_fine / n_coarse;
  for (Eigen::Index k = 0; k < fine.dofs(); ++k) {
    const int node = nodes[k];
    const int I = node % (n_fine + 1), J = node / (n_fine + 1);
    const int i = std::min(I / ratio, n_coarse - 1), j = std::min(J / ratio, n_coarse - 1);
    const double fx = static_cast<double>(I - i * ratio) / ratio;
    const double fy = static_cast<double>(J - j * ratio) / ratio;
    const double u00 = coarse.nodal_value(id(i, j)), u11 = coarse.nodal_value(id(i + 1, j + 1));
    if (fx >= fy) {
      out[k] = (1 - fx) * u00 + (fx - fy) * coarse.nodal_value(id(i + 1, j)) + fy * u11;
    } else {
      out[k] = (1 - fy) * u00 + (fy - fx) * coarse.nodal_value(id(i, j + 1)) + fx * u11;
    }
  }
  return out;
}

SemilinearStudyResult run_semilinear_study(const SemilinearStudyConfig& cfg) {
  if (cfg.levels.empty()) throw InvalidArgument("no refinement levels given");
  if (!cfg.f) throw InvalidArgument("nonlinearity is empty");
  NormSpec{cfg.p, cfg.q, 1.0}.validate();
  const int N = cfg.reference_n;
  for (int n : cfg.levels) {
    if (n < 2 || N % n != 0 || n >= N) {
      throw InvalidArgument("level " + std::to_string(n) + " does not divide the reference size " + std::to_string(N));
    }
  }
  const SpatialFunction u0 = cfg.u0 ? cfg.u0 : SpatialFunction([](double x, double y) {
    return 0.1 * std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y);
  });
  auto step_for = [](int n) { return 2.0 / (static_cast<double>(n) * n); };  // h^2 on the diagonal mesh

  // Reference run, keeping only the states every level can see.
  const auto ref_start = std::chrono::steady_clock::now();
  const DiscreteOperatorSet fine(std::make_shared<const Triangulation>(generate_structured_mesh(N)));
  int stride = 0;
  for (int n : cfg.levels) stride = std::gcd(stride, (N / n) * (N / n));
  SchemeConfig ref_cfg;
  ref_cfg.theta = 1;
  ref_cfg.tau = step_for(N);
  ref_cfg.T = cfg.T;
  std::vector<Eigen::VectorXd> reference;
  try {
    march_semilinear(fine, ref_cfg, cfg.f, fine.l2_projection(u0), [&](std::size_t n, double, const FemFunction& u) {
      if (n % static_cast<std::size_t>(stride) == 0) reference.push_back(u.coeffs());
    });
  } catch (const OverflowError& e) {
    throw Error("reference solution blew up at t = " + std::to_string(static_cast<double>(e.step()) * ref_cfg.tau) +
                " before T = " + std::to_string(cfg.T) + " (life span exceeded)");
  }
  SemilinearStudyResult result;
  result.reference_runtime_s = cfg.timing ? seconds_since(ref_start) : 0.0;

  result.lpq.case_label = "semilinear-" + cfg.f_name;
  result.lpq.variant = "lpq";
  result.lpq.p = cfg.p;
  result.lpq.q = cfg.q;
  result.lpq.theta_averaged = false;
  result.linf = result.lpq;
  result.linf.variant = "linf";
  result.linf.q = kInfinity;
  result.lpq.rows.resize(cfg.levels.size());
  result.linf.rows.resize(cfg.levels.size());

  parallel_for(cfg.levels.size(), cfg.jobs, [&](std::size_t i) {
    const auto start = std::chrono::steady_clock::now();
    const int n = cfg.levels[i];
    const DiscreteOperatorSet ops(std::make_shared<const Triangulation>(generate_structured_mesh(n)));
    SchemeConfig sc;
    sc.theta = 1;
    sc.tau = step_for(n);
    sc.T = cfg.T;
    const auto ref_every = static_cast<std::size_t>((N / n) * (N / n) / stride);
    double sum = 0, worst = 0;
    march_semilinear(ops, sc, cfg.f, ops.l2_projection(u0), [&](std::size_t k, double, const FemFunction& u) {
      const Eigen::VectorXd& ref = reference.at(k * ref_every);
      const FemFunction diff = fine.make_function(prolongate_structured(u, n, fine, N) - ref);
      worst = std::max(worst, diff.coeffs().cwiseAbs().maxCoeff());
      if (k > 0) sum += std::pow(lq_norm(diff, cfg.q), cfg.p) * sc.tau;
    });
    const double runtime = cfg.timing ? seconds_since(start) : 0.0;
    result.lpq.rows[i] = {n, ops.stats().h, sc.tau, std::pow(sum, 1 / cfg.p), runtime};
    result.linf.rows[i] = {n, ops.stats().h, sc.tau, worst, runtime};
  });
  for (auto* r : {&result.lpq, &result.linf}) {
    sort_rows(r->rows);
    r->fitted_slope = r->rows.size() >= 2 ? fit_slope(r->rows) : 0.0;
  }
  return result;
}

std::filesystem::path log10_companion(const std::filesystem::path& path) {
  auto out = path;
  out.replace_filename(path.stem().string() + "_log10" + path.extension().string());
  return out;
}

namespace {

std::string format(const char* fmt, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, fmt, v);
  return buf;
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  return out;
}

}  // namespace

void emit_report(const ConvergenceReport& report, const std::filesystem::path& path,
                 const std::vector<std::string>& header_lines) {
  if (report.rows.empty()) throw InvalidArgument("cannot emit an empty report");
  {
    auto out = open_for_write(path);
    for (const auto& line : header_lines) out << "# " << line << '\n';
    out << "case,variant,n,h,tau,error,runtime_s\n";
    for (const auto& r : report.rows) {
      out << report.case_label << ',' << report.variant << ',' << r.n << ',' << format("%.17g", r.h) << ','
          << format("%.17g", r.tau) << ',' << format("%.17g", r.error) << ',' << format("%.6f", r.runtime_s) << '\n';
    }
    out << "# fitted_slope=" << format("%.4f", report.fitted_slope) << '\n';
    if (!out) throw Error("failed writing " + path.string());
  }
  const auto companion = log10_companion(path);
  auto out = open_for_write(companion);
  for (const auto& line : header_lines) out << "# " << line << '\n';
  out << "case,variant,n,log10_h,log10_tau,log10_error\n";
  for (const auto& r : report.rows) {
    out << report.case_label << ',' << report.variant << ',' << r.n << ',' << format("%.17g", std::log10(r.h)) << ','
        << format("%.17g", std::log10(r.tau)) << ',' << format("%.17g", std::log10(r.error)) << '\n';
  }
  out << "# fitted_slope=" << format("%.4f", report.fitted_slope) << '\n';
  if (!out) throw Error("failed writing " + companion.string());
}

}  // namespace dmrfem
