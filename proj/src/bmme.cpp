#include "bmme/bmme.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "bmme/errors.hpp"
#include "bmme/kernels.hpp"

namespace bmme {

void BlockProblem::validate() const {
  if (n_blocks == 0) throw DomainError("block problem has no blocks");
  if (!objective || !update) throw DomainError("block problem needs objective and update");
  if (floor.size() != n_blocks || projection.size() != n_blocks) {
    throw DimensionMismatch("block problem: floor/projection size differs from block count");
  }
}

BlockUpdate majorizer_update(
    std::function<MajorizerSpec(std::size_t block, std::span<const Matrix> point)> factory) {
  return [factory = std::move(factory)](std::size_t block, std::span<const Matrix> point,
                                        const Matrix& x_hat) {
    const MajorizerSpec spec = factory(block, point);
    Vector next = spec.minimize(x_hat.data());
    return Matrix(x_hat.rows(), x_hat.cols(), std::move(next));
  };
}

double ConditionMonitor::total() const {
  double s = 0.0;
  for (double v : partial_sum) s += v;
  return s;
}

std::size_t ConditionMonitor::cap_violations(double rel_slack) const {
  return static_cast<std::size_t>(std::count_if(terms.begin(), terms.end(), [&](const Term& t) {
    return t.value > t.cap * (1.0 + rel_slack);
  }));
}

namespace {

class Stopwatch {
 public:
  void resume() { start_ = Clock::now(); }
  void pause() { elapsed_ += std::chrono::duration<double>(Clock::now() - start_).count(); }
  double elapsed() const { return elapsed_; }

 private:
  using Clock = std::chrono::steady_clock;
  Clock::time_point start_{};
  double elapsed_ = 0.0;
};

}  // namespace

RunResult run(const BlockProblem& problem, std::vector<Matrix> x0, std::vector<Matrix> x_prev0,
              const RunConfig& config) {
  problem.validate();
  const std::size_t s = problem.n_blocks;
  if (x0.size() != s || x_prev0.size() != s) {
    throw DimensionMismatch("starting point has the wrong number of blocks");
  }
  for (std::size_t i = 0; i < s; ++i) {
    require_same_shape(x0[i], x_prev0[i], "starting blocks");
    if (min_entry(x0[i]) < problem.floor[i] || min_entry(x_prev0[i]) < problem.floor[i]) {
      throw DomainError("block " + std::to_string(i) + " starts below its floor");
    }
  }
  if (config.max_iter < 0) throw DomainError("max_iter must be nonnegative");

  RunResult result;
  result.point = std::move(x0);
  result.previous = std::move(x_prev0);
  result.monitor.partial_sum.assign(s, 0.0);

  std::vector<ExtrapolationState> states(s, ExtrapolationState(config.schedule, config.safeguard));
  std::vector<double> alphas(s, 0.0);
  std::vector<Matrix> x_hat(s);
  Stopwatch clock;

  const bool tracing = config.trace_every > 0;
  auto record = [&](long iter) {
    TraceRecord rec;
    rec.iter = iter;
    rec.wall_seconds = config.record_time ? clock.elapsed() : 0.0;
    rec.objective = problem.objective(result.point);
    rec.rel_objective = rec.objective / problem.objective_scale;
    rec.alpha_W = iter == 0 ? 0.0 : alphas[0];
    rec.alpha_H = iter == 0 || s < 2 ? 0.0 : alphas[1];
    if (problem.residual && config.residual_every > 0 && iter % config.residual_every == 0) {
      rec.kkt_residual = problem.residual(result.point);
    }
    result.trace.push(rec);
  };
  auto converged = [&] {
    const auto& recs = result.trace.records();
    if (config.stop_tol <= 0.0 || recs.size() <= 10) return false;
    const double old = recs[recs.size() - 11].objective;
    const double now = recs.back().objective;
    return std::abs(old - now) <= config.stop_tol * std::abs(old);
  };

  if (tracing) record(0);

  long last_recorded = 0;
  for (long t = 0; t < config.max_iter; ++t) {
    clock.resume();
    for (std::size_t i = 0; i < s; ++i) {
      const auto step = projected_difference(result.point[i], result.previous[i],
                                             problem.projection[i]);
      double alpha = 0.0;
      double cap = 0.0;
      if (t > 0) {
        if (config.alpha_override) {
          alpha = config.alpha_override(i, t, step.norm);
          cap = config.safeguard.c * config.safeguard.c /
                std::pow(static_cast<double>(t), config.safeguard.q);
        } else {
          alpha = states[i].safeguarded_alpha(step.norm);
          cap = states[i].term_cap();
        }
        const double value = alpha * alpha * step.norm * step.norm;
        result.monitor.terms.push_back({t, i, alpha, step.norm, value, cap});
        result.monitor.partial_sum[i] += value;
      }
      alphas[i] = alpha;
      x_hat[i] = alpha > 0.0 ? kernels::axpy(result.point[i], alpha, step.step) : result.point[i];
    }
    for (std::size_t i = 0; i < s; ++i) {
      if (config.estimate_curvature && problem.curvature) {
        clock.pause();
        const double c = problem.curvature(i, result.point, x_hat[i]);
        result.monitor.max_curvature = std::max(result.monitor.max_curvature, c);
        result.monitor.curvature_observed = true;
        clock.resume();
      }
      Matrix next = problem.update(i, result.point, x_hat[i]);
      require_same_shape(next, result.point[i], "block update");
      result.previous[i] = std::move(result.point[i]);
      result.point[i] = std::move(next);
    }
    clock.pause();
    result.iterations = t + 1;

    const bool out_of_time = clock.elapsed() >= config.max_seconds;
    const bool last = t + 1 == config.max_iter || out_of_time;
    if (tracing && ((t + 1) % config.trace_every == 0 || last)) {
      record(t + 1);
      last_recorded = t + 1;
      if (converged()) {
        result.converged = true;
        break;
      }
    }
    if (out_of_time) break;
  }
  if (tracing && last_recorded != result.iterations) record(result.iterations);
  result.wall_seconds = clock.elapsed();
  return result;
}

AccumulatedBound check_accumulated_bound(const ConditionMonitor& monitor,
                                         const ConvergenceTrace& trace,
                                         std::optional<double> c_max) {
  AccumulatedBound out;
  out.caps_ok = monitor.cap_violations() == 0;
  const auto& recs = trace.records();
  const auto first = std::find_if(recs.begin(), recs.end(),
                                  [](const TraceRecord& r) { return r.iter == 1; });
  if (first == recs.end()) throw Error("accumulated bound needs a trace record at iteration 1");
  out.f_first = first->objective;
  out.f_last = recs.back().objective;
  for (const auto& term : monitor.terms) {
    if (term.t >= 1 && term.t <= recs.back().iter - 1) out.partial_sum += term.value;
  }
  if (c_max) {
    out.c_max = *c_max;
  } else if (monitor.curvature_observed) {
    out.c_max = 0.5 * monitor.max_curvature;
  } else if (out.partial_sum == 0.0) {
    out.c_max = 0.0;
  } else {
    return out;
  }
  out.bound_checked = true;
  const double slack = 1e-10 * std::max(std::abs(out.f_first), 1.0);
  out.bound_ok = out.f_last <= out.f_first + out.c_max * out.partial_sum + slack;
  return out;
}

}  // namespace bmme
