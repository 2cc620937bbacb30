// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fail.

#include <chrono>
#include <condition_variable>
#include <cmath>
#include <cstdio>
#include <functional>
#include <json.hpp>
#include <mutex>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "bmme/beta_nmf.hpp"
#include "bmme/bmme.hpp"
#include "bmme/divergence.hpp"
#include "bmme/majorizer.hpp"
#include "bmme/matrixio.hpp"
#include "bmme/minvol.hpp"
#include "cli.hpp"
#include "support.hpp"

using namespace bmme;
using nlohmann::json;
using testing_support::random_matrix;

namespace {

constexpr double kEps = 2.220446049250313e-16;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

Vector uniform_vector(std::size_t n, std::mt19937_64& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vector v(n);
  for (double& x : v) x = u(rng);
  return v;
}

MajorizerSampler box(std::size_t n, double lo, double hi) {
  return [=](std::mt19937_64& rng) {
    return std::pair{uniform_vector(n, rng, lo, hi), uniform_vector(n, rng, lo, hi)};
  };
}

RunConfig iterations(long n) {
  RunConfig rc;
  rc.max_iter = n;
  rc.record_time = false;
  return rc;
}

bool nonincreasing(const ConvergenceTrace& trace, double slack) {
  const auto& recs = trace.records();
  for (std::size_t i = 1; i < recs.size(); ++i)
    if (recs[i].objective > recs[i - 1].objective + slack * std::abs(recs[i - 1].objective))
      return false;
  return true;
}

// W with columns on the simplex, H positive
std::pair<Matrix, Matrix> simplex_pair(std::size_t m, std::size_t r, std::size_t n,
                                       std::mt19937_64& rng) {
  Matrix W = random_matrix(m, r, rng, 0.05, 1.0);
  for (std::size_t k = 0; k < r; ++k) {
    double s = 0;
    for (std::size_t j = 0; j < m; ++j) s += W(j, k);
    for (std::size_t j = 0; j < m; ++j) W(j, k) /= s;
  }
  return {W, random_matrix(r, n, rng, 0.1, 2.0)};
}

// ---------------------------------------------------------------------------

Outcome majorizer_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(101);
  double tight = 0, dom = INFINITY, grad = 0;
  double ld_tight = 0, ld_dom = INFINITY, ld_grad = 0, worst_l = 0;
  std::size_t instances = 0;
  for (double b : {1.0, 1.25, 1.5, 2.0}) {
    for (int inst = 0; inst < 100; ++inst, ++instances) {
      const std::size_t m = pick(rng, 1, 10), n = pick(rng, 1, 10), r = pick(rng, 1, 4);
      const Matrix X = random_matrix(m, n, rng, 0.0, 3.0);
      const Matrix W = random_matrix(m, r, rng, 0.05, 2.0);
      for (std::size_t j = 0; j < n; ++j) {
        const auto spec = jensen_beta_majorizer(X.column(j), W, Beta(b), kEps);
        const auto rep = validate_majorizer(spec, jensen_objective(X.column(j), W, Beta(b)),
                                            box(r, 0.05, 3.0), 5, inst * 16 + j);
        tight = std::max(tight, rep.tightness);
        dom = std::min(dom, rep.domination);
        grad = std::max(grad, rep.gradient_mismatch);
      }

      const double delta = std::uniform_real_distribution<double>(0.1, 1.0)(rng);
      const auto ld = logdet_majorizer(m, r, delta);
      const ScalarField f = [=](std::span<const double> x) {
        return logdet_gram(Matrix(m, r, Vector(x.begin(), x.end())), delta);
      };
      const auto rep = validate_majorizer(ld, f, box(m * r, 0.0, 1.5), 5, inst);
      ld_tight = std::max(ld_tight, rep.tightness);
      ld_dom = std::min(ld_dom, rep.domination);
      ld_grad = std::max(ld_grad, rep.gradient_mismatch);
      const auto p = logdet_majorizer_params(random_matrix(m, r, rng, 0.0, 1.5), delta);
      worst_l = std::max(worst_l, p.lipschitz * delta / 2.0);
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = tight <= 1e-6 && dom >= -1e-6 && grad <= 1e-6 && ld_tight <= 1e-6 &&
                  ld_dom >= -1e-8 && ld_grad <= 1e-6 && worst_l <= 1.0 && secs < 30;
  return {ok, fmt("%zu instances; jensen tight %.1e dom %.1e grad %.1e; logdet tight %.1e dom "
                  "%.1e grad %.1e; max L*delta/2 %.3f; %.1fs",
                  instances, tight, dom, grad, ld_tight, ld_dom, ld_grad, worst_l, secs)};
}

Outcome oracle_equivalence() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(202);
  double worst_gap = -INFINITY;
  for (int inst = 0; inst < 50; ++inst) {
    const std::size_t m = pick(rng, 2, 6), n = pick(rng, 1, 4), r = pick(rng, 1, 3);
    const double b = std::uniform_real_distribution<double>(1.0, 2.0)(rng);
    const Matrix X = random_matrix(m, n, rng, 0.0, 3.0);
    const Matrix W = random_matrix(m, r, rng, 0.1, 2.0), H = random_matrix(r, n, rng, 0.1, 2.0);
    const Matrix Hn = mu_step(X, W, H, Beta(b), kEps);
    for (std::size_t j = 0; j < n; ++j) {
      const Vector v = X.column(j), ht = H.column(j);
      const Vector num = testing_support::jensen_numeric_argmin(v, W, ht, b, kEps);
      const double gap = testing_support::jensen_value(v, W, Hn.column(j), ht, b) -
                         testing_support::jensen_value(v, W, num, ht, b);
      worst_gap = std::max(worst_gap, gap);
    }
  }

  double worst_w = 0;
  for (int inst = 0; inst < 20; ++inst) {
    const std::size_t m = pick(rng, 2, 5), n = pick(rng, 2, 6), r = pick(rng, 1, std::min<std::size_t>(3, m));
    const auto [W, H] = simplex_pair(m, r, n, rng);
    const Matrix X = random_matrix(m, n, rng, 0.0, 3.0);
    MinVolParams p;
    p.lambda1 = std::uniform_real_distribution<double>(0.1, 5.0)(rng);
    p.delta = 0.1;
    p.epsilon = kEps;
    const Matrix got = minvol_w_step(X, W, H, p);
    const Matrix want = testing_support::minvol_w_oracle(X, W, H, p.lambda1, p.delta, kEps);
    for (std::size_t e = 0; e < got.size(); ++e)
      worst_w = std::max(worst_w, std::abs(got.data()[e] - want.data()[e]));
  }
  const double secs = seconds_since(t0);
  return {worst_gap <= 1e-8 && worst_w <= 1e-6 && secs < 120,
          fmt("mu_step worst objective gap %.2e over 50 instances; minvol_w_step max |diff| "
              "%.2e over 20; %.1fs",
              worst_gap, worst_w, secs)};
}

Outcome mm_descent() {
  bool ok = true;
  int runs = 0;
  const Matrix X = synth_lowrank({30, 40, 4, Noise::poisson, 3.0, 11}).X;
  for (double b : {1.0, 1.5, 2.0}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed, ++runs) {
      BetaNmfConfig cfg;
      cfg.beta = Beta(b);
      cfg.rank = 4;
      cfg.seed = seed;
      ok = ok && nonincreasing(solve_mu(X, cfg, iterations(500)).trace, 1e-10);
    }
  }
  const Matrix Y = synth_lowrank({20, 30, 3, Noise::poisson, 3.0, 12}).X;
  for (std::uint64_t seed = 0; seed < 10; ++seed, ++runs) {
    MinVolConfig cfg;
    cfg.rank = 3;
    cfg.seed = seed;
    ok = ok && nonincreasing(solve_minvol(Y, cfg, iterations(500), {Schedule::none, {}}).trace,
                             1e-10);
  }
  return {ok, fmt("%d runs of 500 iterations (MU at beta 1, 1.5, 2; min-vol MM)", runs)};
}

std::optional<json> default_bench;

Outcome acceleration() {
  const auto t0 = std::chrono::steady_clock::now();
  std::ostringstream out, err;
  if (cli::run_cli({"bench"}, out, err) != 0) return {false, "bench failed: " + err.str()};
  default_bench = json::parse(out.str());
  const auto& c = (*default_bench)["crossings"][0];
  const double secs = seconds_since(t0);
  if (!c["median"].is_number()) return {false, "median crossing not reached"};
  const double med = c["median"].get<double>();
  return {med <= 140 && secs < 120,
          fmt("100x200 r=10 beta=1.5, 10 seeds: median crossing %.1f (min %s, max %s); %.1fs", med,
              c["min"].dump().c_str(), c["max"].dump().c_str(), secs)};
}

// Two runs share one core and take turns a whole iteration at a time; each
// turn is timed on the wall clock. Slow drift of the machine then hits both
// runs alike instead of whichever happened to go second.
class Lockstep {
 public:
  using Clock = std::chrono::steady_clock;

  // Blocks until it is `who`'s turn.
  void begin(int who) {
    std::unique_lock lock(mu_);
    cv_.wait(lock, [&] { return turn_ == who || done_[1 - who]; });
    start_[who] = Clock::now();
  }
  // Ends `who`'s turn; counts it if `timed`, then waits for the next one.
  void pass(int who, bool timed) {
    const auto now = Clock::now();
    std::unique_lock lock(mu_);
    if (timed) {
      spent_[who] += std::chrono::duration<double>(now - start_[who]).count();
      ++turns_[who];
    }
    turn_ = 1 - who;
    cv_.notify_all();
    cv_.wait(lock, [&] { return turn_ == who || done_[1 - who]; });
    start_[who] = Clock::now();
  }
  void finish(int who) {
    std::lock_guard lock(mu_);
    done_[who] = true;
    turn_ = 1 - who;
    cv_.notify_all();
  }
  double mean(int who) const { return spent_[who] / turns_[who]; }
  long turns(int who) const { return turns_[who]; }

 private:
  std::mutex mu_;
  std::condition_variable cv_;
  int turn_ = 0;
  bool done_[2] = {false, false};
  Clock::time_point start_[2];
  double spent_[2] = {0, 0};
  long turns_[2] = {0, 0};
};

Outcome overhead() {
  const auto t0 = std::chrono::steady_clock::now();
  const Matrix X = synth_lowrank({361, 2429, 49, Noise::poisson, 1.0, 5}).X;
  BetaNmfConfig cfg;
  cfg.beta = Beta(1.5);
  cfg.rank = 49;
  cfg.seed = 1;
  const FactorPair f = random_factors(X, cfg.rank, cfg.epsilon, cfg.seed, true);
  constexpr long kIters = 200;

  Lockstep gate;
  auto worker = [&](int who, Schedule schedule) {
    BlockProblem p = make_beta_nmf_problem(X, cfg);
    auto inner = p.update;
    long done = 0;
    // the turn boundary sits at the end of each H update; the first partial
    // iteration is a warm-up and is not counted
    p.update = [&, inner](std::size_t b, std::span<const Matrix> x, const Matrix& xh) {
      Matrix next = inner(b, x, xh);
      if (b == 1) gate.pass(who, done++ > 0);
      return next;
    };
    RunConfig rc = iterations(kIters + 1);
    rc.trace_every = 0;
    rc.schedule = schedule;
    gate.begin(who);
    run(p, {f.W, f.H}, {f.W_prev, f.H_prev}, rc);
    gate.finish(who);
  };
  std::thread a(worker, 0, Schedule::none);
  std::thread b(worker, 1, Schedule::nesterov);
  a.join();
  b.join();
  const double mu = gate.mean(0), mue = gate.mean(1);
  const double secs = seconds_since(t0);
  return {gate.turns(0) == kIters && gate.turns(1) == kIters && mue <= 1.05 * mu && secs < 60,
          fmt("361x2429 r=49, %ld iterations each, alternating: MU %.2f ms/iter, MUe %.2f "
              "ms/iter, ratio %.4f; %.1fs",
              kIters, 1e3 * mu, 1e3 * mue, mue / mu, secs)};
}

Outcome minvol_feasibility() {
  const Matrix X = synth_lowrank({20, 50, 4, Noise::poisson, 2.0, 9}).X;
  MinVolConfig cfg;
  cfg.rank = 4;
  cfg.lambda_tilde = 0.1;
  cfg.delta = 0.1;
  cfg.seed = 0;
  RunConfig rc = iterations(2000);
  rc.trace_every = 0;
  const auto r = solve_minvol(X, cfg, rc, {});
  const Matrix& W = r.factors.W;
  double sum_err = 0;
  for (std::size_t k = 0; k < W.cols(); ++k) {
    double s = 0;
    for (std::size_t j = 0; j < W.rows(); ++j) s += W(j, k);
    sum_err = std::max(sum_err, std::abs(s - 1.0));
  }
  const double lowest = std::min(min_entry(W), min_entry(r.factors.H));
  MinVolParams p;
  p.lambda1 = r.lambda1;
  p.delta = cfg.delta;
  p.epsilon = cfg.epsilon;
  const double res = coordinatewise_residual(X, W, r.factors.H, p);
  return {sum_err <= 1e-8 && lowest >= cfg.epsilon && res <= 1e-6,
          fmt("max |column sum - 1| %.2e; min entry %.2e; coordinate-wise residual %.2e", sum_err,
              lowest, res)};
}

Outcome condition_monitors() {
  if (!default_bench) return {false, "default bench did not run"};
  const long mu_caps = (*default_bench)["cap_violations"].get<long>();

  cli::BenchOptions o;
  o.problem.rank = 3;
  o.problem.max_iter = 300;
  o.algos = {cli::Algo::minvol, cli::Algo::minvol_e};
  o.n_seeds = 5;
  const auto mv = cli::run_bench(synth_lowrank({15, 30, 3, Noise::poisson, 2.0, 3}).X, o);

  // schedule none: no extrapolation terms, bound check is plain descent
  const Matrix X = synth_lowrank({20, 30, 3, Noise::poisson, 3.0, 4}).X;
  BetaNmfConfig cfg;
  cfg.beta = Beta(1.5);
  cfg.rank = 3;
  const auto none = solve_mue(X, cfg, iterations(300), {Schedule::none, {}});
  const auto bound = check_accumulated_bound(none.monitor, none.trace);
  const bool ok = mu_caps == 0 && mv.cap_violations == 0 && bound.ok() && bound.bound_checked &&
                  bound.partial_sum == 0.0 && nonincreasing(none.trace, 1e-10);
  return {ok, fmt("cap violations: beta-NMF bench %ld, min-vol bench %zu; schedule none bound "
                  "ok=%d checked=%d sum=%g",
                  mu_caps, mv.cap_violations, bound.ok(), bound.bound_checked, bound.partial_sum)};
}

Outcome kkt_diagnostics() {
  double worst = 0;
  bool decreasing = true;
  for (double b : {1.0, 2.0}) {
    for (int inst = 0; inst < 5; ++inst) {
      // random nonnegative rank-3 instance
      std::mt19937_64 rng(300 + inst);
      const Matrix X =
          testing_support::product(random_matrix(6, 3, rng, 0.0, 1.0), random_matrix(3, 8, rng, 0.0, 1.0));
      BetaNmfConfig cfg;
      cfg.beta = Beta(b);
      cfg.rank = 3;
      cfg.seed = inst;
      RunConfig rc = iterations(5000);
      rc.trace_every = 100;
      rc.residual_every = 100;
      const auto r = solve_mu(X, cfg, rc);
      worst = std::max(worst, kkt_residual(X, r.factors.W, r.factors.H, cfg.beta, cfg.epsilon));
      // eventually decreasing: over the second half, sampled every 100
      // iterations, no sample exceeds its predecessor beyond round-off
      std::vector<double> tail;
      for (const auto& rec : r.trace.records())
        if (rec.iter >= 2500 && rec.kkt_residual) tail.push_back(*rec.kkt_residual);
      for (std::size_t i = 1; i < tail.size(); ++i)
        decreasing = decreasing && tail[i] <= tail[i - 1] * (1 + 1e-6) + 1e-12;
      decreasing = decreasing && tail.size() >= 2 && tail.back() <= tail.front();
    }
  }
  return {worst <= 1e-3 && decreasing,
          fmt("10 runs x 5000 MU iterations: worst final residual %.2e; tail nonincreasing %s",
              worst, decreasing ? "yes" : "no")};
}

Outcome nesterov_recovery() {
  const double Q[2][2] = {{4.0, 1.0}, {1.0, 2.0}};
  const double b[2] = {1.0, -2.0};
  const double tr = Q[0][0] + Q[1][1], det = Q[0][0] * Q[1][1] - Q[0][1] * Q[1][0];
  const double L = tr / 2 + std::sqrt(tr * tr / 4 - det);
  auto f = [&](std::span<const double> x) {
    return 0.5 * (Q[0][0] * x[0] * x[0] + 2 * Q[0][1] * x[0] * x[1] + Q[1][1] * x[1] * x[1]) -
           b[0] * x[0] - b[1] * x[1];
  };
  auto g = [&](std::span<const double> x) {
    return Vector{Q[0][0] * x[0] + Q[0][1] * x[1] - b[0], Q[1][0] * x[0] + Q[1][1] * x[1] - b[1]};
  };
  std::vector<Matrix> iterates;
  BlockProblem p;
  p.n_blocks = 1;
  p.floor = {-INFINITY};
  p.projection = {Projection::identity};
  p.objective = [&](std::span<const Matrix> x) { return f(x[0].data()); };
  const auto step =
      majorizer_update([&](std::size_t, std::span<const Matrix>) { return lipschitz_majorizer(f, g, L); });
  p.update = [&](std::size_t i, std::span<const Matrix> x, const Matrix& xh) {
    iterates.push_back(step(i, x, xh));
    return iterates.back();
  };
  const Matrix x0 = Matrix::from_rows({{3.0}, {-1.5}});
  RunConfig rc = iterations(5);
  rc.schedule = Schedule::nesterov;
  rc.safeguard = {1e100, 1.5};
  run(p, {x0}, {x0}, rc);
  const auto oracle = testing_support::fast_gradient(Q, b, L, {3.0, -1.5}, 5);
  double worst = iterates.size() == 5 ? 0.0 : INFINITY;
  for (std::size_t k = 0; k < iterates.size() && k < 5; ++k)
    for (std::size_t i = 0; i < 2; ++i)
      worst = std::max(worst, std::abs(iterates[k](i, 0) - oracle[k + 1][i]));
  return {worst <= 1e-12, fmt("max deviation from the fast-gradient recursion over 5 steps %.2e", worst)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"majorizer suite", majorizer_suite},
      {"oracle equivalence", oracle_equivalence},
      {"MM descent", mm_descent},
      {"acceleration on synthetic 100x200", acceleration},
      {"extrapolation overhead", overhead},
      {"min-vol feasibility and convergence", minvol_feasibility},
      {"condition monitors", condition_monitors},
      {"KKT diagnostics", kkt_diagnostics},
      {"fast-gradient recovery", nesterov_recovery},
  };
  int failed = 0;
  int index = 0;
  for (const auto& [name, check] : criteria) {
    ++index;
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    if (!o.pass) ++failed;
    std::printf("%s %d %s: %s\n", o.pass ? "PASS" : "FAIL", index, name, o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
