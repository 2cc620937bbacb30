#pragma once

#include <cfloat>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bmme/beta_nmf.hpp"
#include "bmme/matrix.hpp"
#include "bmme/minvol.hpp"
#include "bmme/trace.hpp"

namespace bmme::cli {

enum class Algo { mu, mue, minvol, minvol_e };

Algo parse_algo(std::string_view name);
std::string_view to_string(Algo a);
bool is_extrapolated(Algo a);
/// mue -> mu, minvol-e -> minvol; plain algorithms map to themselves.
Algo counterpart(Algo a);

/// Flags shared by solve and bench.
struct ProblemOptions {
  Algo algo = Algo::mue;
  std::size_t rank = 0;
  double beta = 1.0;
  double epsilon = DBL_EPSILON;
  long max_iter = 500;
  double max_seconds = std::numeric_limits<double>::infinity();
  Schedule schedule = Schedule::nesterov;
  SafeguardParams safeguard{};
  double lambda_tilde = 0.1;
  double delta = 0.1;
  long kkt_every = 0;
  bool record_time = true;
};

struct RunOutcome {
  Algo algo = Algo::mu;
  std::uint64_t seed = 0;
  FactorPair factors;
  ConvergenceTrace trace;
  ConditionMonitor monitor;
  double final_objective = 0.0;
  double final_rel_objective = 0.0;
  long iters = 0;
  double wall_seconds = 0.0;
  std::optional<double> kkt_residual;  // beta-NMF only
  std::optional<double> lambda1;       // min-vol only
};

/// One solver run. Plain algorithms ignore the schedule.
RunOutcome solve_once(const Matrix& X, const ProblemOptions& opts, std::uint64_t seed);

/// {"algo":..,"seed":..,"final_objective":..,"final_rel_objective":..,"iters":..,
///  "wall_seconds":..,"kkt_residual":..}
std::string summary_json(const RunOutcome& r);

struct BenchOptions {
  ProblemOptions problem;
  std::vector<Algo> algos{Algo::mu, Algo::mue};
  std::size_t n_seeds = 10;
  std::uint64_t seed_base = 0;
  /// Worker threads; 0 means one per hardware thread.
  std::size_t jobs = 0;
  std::size_t time_points = 100;
};

struct Curve {
  std::vector<double> x;
  std::vector<double> y;
};

/// Iterations the extrapolated algorithm needs to get strictly below the final
/// objective of its plain counterpart on the same seed.
struct CrossingStat {
  Algo algo = Algo::mue;
  Algo baseline = Algo::mu;
  std::vector<std::optional<long>> per_seed;  // nullopt = not reached
  std::optional<long> min;
  std::optional<double> median;
  std::optional<long> max;
};

struct BenchReport {
  double e_min = 0.0;
  std::vector<RunOutcome> runs;  // algorithm-major, seeds in order
  std::vector<Algo> algos;
  std::vector<Curve> iter_curves;  // median (objective - e_min) vs iteration, per algo
  std::vector<Curve> time_curves;  // median (objective - e_min) on a shared time grid
  std::vector<CrossingStat> crossings;
  std::size_t cap_violations = 0;
};

/// Median that treats nullopt as +infinity; nullopt when the median itself
/// falls on an unreached entry.
std::optional<double> median_reached(std::vector<std::optional<long>> values);

double median(std::vector<double> values);

BenchReport run_bench(const Matrix& X, const BenchOptions& opts);

std::string bench_report_json(const BenchReport& report);
void write_curves(const BenchReport& report, const std::vector<Curve>& curves, std::ostream& out,
                  std::string_view x_name);

/// Entry point shared by the executable and tests. args excludes argv[0].
/// Returns 2 on usage errors, 1 on other failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bmme::cli
