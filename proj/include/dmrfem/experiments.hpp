#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dmrfem/assembly.hpp"
#include "dmrfem/stepper.hpp"

namespace dmrfem {

/// Manufactured solution of the benchmark study:
///   u(x, y, t) = x^{5/2} (1 - x)^{5/2} y (1 - y) e^t
/// with the matching source g = u_t - Delta u.
struct BenchmarkProblem {
  SpaceTimeFunction u_exact;
  SpaceTimeFunction g;
  SpatialFunction u0;
};

BenchmarkProblem benchmark_problem();

/// Streaming form of
///   ( sum_{n=0}^{N_T-1} ||u_h^{n+theta} - U^{n+theta}||_{L^q}^p tau )^{1/p},
/// U^n the nodal interpolant of u_exact(., t_n). Feed it as a StepObserver.
class LinearErrorAccumulator {
 public:
  LinearErrorAccumulator(const DiscreteOperatorSet& ops, SpaceTimeFunction u_exact, double p, double q,
                         double theta, double tau);

  void observe(std::size_t n, double t, const FemFunction& u);
  StepObserver observer();
  double value() const;

 private:
  const DiscreteOperatorSet* ops_;
  SpaceTimeFunction u_exact_;
  double p_, q_, theta_, tau_;
  Eigen::VectorXd previous_;
  bool has_previous_ = false;
  double sum_ = 0;
};

double linear_error(const DiscreteOperatorSet& ops, const TrajectorySeries& traj, const SpaceTimeFunction& u_exact,
                    double p, double q, double theta);

struct ConvergenceRow {
  int n = 0;
  double h = 0;
  double tau = 0;
  double error = 0;
  double runtime_s = 0;
};

struct ConvergenceReport {
  std::string case_label;  ///< "1".."5" for the linear cases
  std::string variant;     ///< "A" or "B" (or a norm tag for semilinear runs)
  double p = 4;
  double q = 2;
  bool theta_averaged = true;
  std::vector<ConvergenceRow> rows;  ///< sorted by h descending
  double fitted_slope = 0;
};

/// Least-squares slope of log(error) against log(h).
double fit_slope(std::span<const double> h, std::span<const double> error);
double fit_slope(const std::vector<ConvergenceRow>& rows);
/// Slopes between consecutive rows.
std::vector<double> incremental_slopes(const ConvergenceReport& report);

/// Time step of a benchmark case on a given mesh.
double case_time_step(int case_id, const MeshStats& stats);
double case_final_time(int case_id);
double case_theta(int case_id);

/// Worker count: DMRFEM_JOBS if set, else the hardware concurrency.
unsigned default_jobs();

/// Runs fn(i) for i in [0, count) on up to `jobs` threads. The first
/// exception thrown by any task is rethrown after all workers finish.
void parallel_for(std::size_t count, unsigned jobs, const std::function<void(std::size_t)>& fn);

struct CaseOptions {
  LoadVariant variant = LoadVariant::consistent;
  std::vector<int> levels{8, 16, 32, 64};
  unsigned jobs = 0;  ///< 0 = default_jobs()
  bool timing = true;
};

ConvergenceReport run_case(int case_id, const CaseOptions& options = {});

struct SemilinearStudyConfig {
  std::string f_name = "usq";
  ScalarMap f = [](double u) { return u * u; };
  SpatialFunction u0;  ///< defaults to 0.1 sin(pi x) sin(pi y)
  std::vector<int> levels{8, 16, 32, 64};
  int reference_n = 128;  ///< reference uses tau = h_ref^2 on this mesh
  double T = 0.25;
  double p = 4;
  double q = 2;
  unsigned jobs = 0;
  bool timing = true;
};

struct SemilinearStudyResult {
  ConvergenceReport lpq;   ///< l^p_tau(L^q), right-endpoint sampling
  ConvergenceReport linf;  ///< max_n ||u_h^n - u_ref^n||_{L^inf}
  double reference_runtime_s = 0;
};

/// Self-convergence of the semi-implicit scheme (tau = h^2 on each level)
/// against a run of the same scheme on the nested mesh of size reference_n.
/// Coarse iterates are prolongated exactly onto the reference mesh.
SemilinearStudyResult run_semilinear_study(const SemilinearStudyConfig& cfg);

/// Exact P1 prolongation between nested structured meshes (n_fine a
/// multiple of n_coarse).
Eigen::VectorXd prolongate_structured(const FemFunction& coarse, int n_coarse, const DiscreteOperatorSet& fine,
                                      int n_fine);

/// Writes <path> (report CSV) and <stem>_log10.csv next to it. Each file
/// starts with `header_lines` as "# " comments.
void emit_report(const ConvergenceReport& report, const std::filesystem::path& path,
                 const std::vector<std::string>& header_lines = {});
std::filesystem::path log10_companion(const std::filesystem::path& path);

}  // namespace dmrfem
