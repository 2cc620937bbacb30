#pragma once

// Block majorization-minimization with extrapolation.
//
// Each outer iteration t first forms, for every block i,
//   x^_i = x_i^t + alpha_i^t P_i(x_i^t - x_i^{t-1}),
// then updates the blocks in fixed order, block i minimizing a majorizer of
// the objective in x_i anchored at x^_i with blocks j < i already at t + 1.
// alpha_i^t comes from the block's ExtrapolationState through the
// summability safeguard; t = 0 uses alpha = 0.

#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <vector>

#include "bmme/extrapolation.hpp"
#include "bmme/majorizer.hpp"
#include "bmme/matrix.hpp"
#include "bmme/trace.hpp"

namespace bmme {

using BlockObjective = std::function<double(std::span<const Matrix> point)>;

/// Minimizer of block i's majorizer anchored at `x_hat`, with the other blocks
/// taken from `point`.
using BlockUpdate =
    std::function<Matrix(std::size_t block, std::span<const Matrix> point, const Matrix& x_hat)>;

/// Estimate of the block curvature constant C_i in D(x_i^t, x^_i) <= C_i ||x_i^t - x^_i||^2,
/// evaluated before block i is updated.
using CurvatureEstimate =
    std::function<double(std::size_t block, std::span<const Matrix> point, const Matrix& x_hat)>;

struct BlockProblem {
  std::size_t n_blocks = 0;
  BlockObjective objective;
  BlockUpdate update;
  std::vector<double> floor;
  std::vector<Projection> projection;
  /// rel_objective = objective / objective_scale in the trace.
  double objective_scale = 1.0;
  /// Optional stationarity measure recorded in the trace.
  BlockObjective residual;
  CurvatureEstimate curvature;

  void validate() const;
};

/// Builds a BlockUpdate that asks `factory` for block i's majorizer (given
/// the current point) and returns its minimizer at the extrapolated block.
BlockUpdate majorizer_update(
    std::function<MajorizerSpec(std::size_t block, std::span<const Matrix> point)> factory);

struct RunConfig {
  long max_iter = 1000;
  double max_seconds = std::numeric_limits<double>::infinity();
  Schedule schedule = Schedule::nesterov;
  SafeguardParams safeguard{};
  /// Record (and evaluate the objective) every `trace_every` iterations plus
  /// the initial and final points. 0 disables objective evaluation entirely.
  long trace_every = 1;
  /// Stop when the recorded relative objective change over the last 10
  /// records drops below this. 0 runs the full budget.
  double stop_tol = 0.0;
  /// Evaluate problem.residual on records whose iter is a multiple of this.
  long residual_every = 0;
  /// When false, wall_seconds is recorded as 0 so traces are reproducible.
  bool record_time = true;
  /// Calls problem.curvature each iteration to estimate C_max.
  bool estimate_curvature = false;
  /// Replaces the schedule, for experiments that bypass the safeguard.
  std::function<double(std::size_t block, long t, double delta_norm)> alpha_override;
};

/// Record of the extrapolation terms alpha^2 ||P(delta)||^2 against their
/// caps c^2 / t^q.
struct ConditionMonitor {
  struct Term {
    long t = 0;
    std::size_t block = 0;
    double alpha = 0.0;
    double delta_norm = 0.0;
    double value = 0.0;  // alpha^2 delta_norm^2
    double cap = 0.0;
  };

  std::vector<Term> terms;
  std::vector<double> partial_sum;  // per block
  double max_curvature = 0.0;
  bool curvature_observed = false;

  double total() const;
  /// Terms exceeding cap (1 + rel_slack).
  std::size_t cap_violations(double rel_slack = 1e-12) const;
};

struct RunResult {
  std::vector<Matrix> point;
  std::vector<Matrix> previous;
  ConvergenceTrace trace;
  ConditionMonitor monitor;
  long iterations = 0;
  double wall_seconds = 0.0;
  bool converged = false;  // stopped on stop_tol
};

/// Throws DomainError if a starting block is below its floor.
RunResult run(const BlockProblem& problem, std::vector<Matrix> x0, std::vector<Matrix> x_prev0,
              const RunConfig& config);

struct AccumulatedBound {
  bool caps_ok = false;
  /// False when no C_max was supplied or estimated and the partial sum is
  /// positive; the bound itself is then not evaluated.
  bool bound_checked = false;
  bool bound_ok = false;
  double f_first = 0.0;  // f(x^1)
  double f_last = 0.0;   // f(x^{T+1})
  double c_max = 0.0;
  double partial_sum = 0.0;

  bool ok() const { return caps_ok && (!bound_checked || bound_ok); }
};

/// Checks f(x^{T+1}) <= f(x^1) + C_max sum_{t>=1} sum_i alpha^2 ||P(delta)||^2
/// (relative slack 1e-10) and that every term respects its cap. C_max
/// defaults to half the largest curvature the monitor observed; the constant
/// is existential, so this is an estimate.
AccumulatedBound check_accumulated_bound(const ConditionMonitor& monitor,
                                         const ConvergenceTrace& trace,
                                         std::optional<double> c_max = std::nullopt);

}  // namespace bmme
