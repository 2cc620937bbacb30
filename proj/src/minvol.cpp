#include "bmme/minvol.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>

#include "bmme/errors.hpp"
#include "bmme/kernels.hpp"
#include "bmme/majorizer.hpp"

namespace bmme {

void MinVolParams::validate(std::size_t m) const {
  if (!(lambda1 > 0.0) || !std::isfinite(lambda1)) throw DomainError("lambda1 must be positive");
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  if (!(epsilon > 0.0) || epsilon * static_cast<double>(m) >= 1.0) {
    throw DomainError("epsilon must lie in (0, 1/m)");
  }
  if (!(bisection_tol > 0.0) || bisection_max_iter < 1) {
    throw DomainError("bisection tolerance and iteration limit must be positive");
  }
}

WUpdateWorkspace make_w_workspace(const Matrix& X, const Matrix& W_hat, const Matrix& H,
                                  double lambda1, double delta) {
  const auto ld = logdet_majorizer_params(W_hat, delta, 1.0);
  const auto terms = kernels::mu_terms_rows(X, W_hat, H, Beta(1.0));
  WUpdateWorkspace ws;
  ws.m = W_hat.rows();
  ws.r = W_hat.cols();
  ws.lipschitz = ld.lipschitz;
  ws.A = ld.gradient;
  ws.W_hat = W_hat;
  ws.B1 = Matrix(ws.m, ws.r);
  ws.B2_base = Matrix(ws.m, ws.r);
  ws.h_row_sums.assign(ws.r, 0.0);
  for (std::size_t k = 0; k < ws.r; ++k) {
    double s = 0.0;
    for (double v : H.row(k)) s += v;
    ws.h_row_sums[k] = s;
  }
  for (std::size_t j = 0; j < ws.m; ++j) {
    for (std::size_t k = 0; k < ws.r; ++k) {
      ws.B1(j, k) = terms.numerator(j, k) * W_hat(j, k);
      ws.B2_base(j, k) =
          ws.h_row_sums[k] + lambda1 * (ws.A(j, k) - ws.lipschitz * W_hat(j, k));
    }
  }
  ws.mu.assign(ws.r, 0.0);
  return ws;
}

namespace {

// Root of a w^2 + b2 w - b1 = 0 with a = lambda1 L, in whichever form avoids
// cancellation.
double scalar_root(double b1, double b2, double a) {
  const double disc = std::sqrt(b2 * b2 + 4.0 * a * b1);
  if (b2 >= 0.0) {
    const double den = b2 + disc;
    return den > 0.0 ? 2.0 * b1 / den : 0.0;
  }
  return (disc - b2) / (2.0 * a);
}

// c = lambda1 mu, so the bisection is insensitive to the scale of lambda1.
double psi_c(std::size_t j, std::size_t k, double c, const WUpdateWorkspace& ws, double a) {
  return scalar_root(ws.B1(j, k), ws.B2_base(j, k) + c, a);
}

double column_excess(std::size_t k, double c, const WUpdateWorkspace& ws, double a, double eps) {
  double s = 0.0;
  for (std::size_t j = 0; j < ws.m; ++j) s += std::max(eps, psi_c(j, k, c, ws, a));
  return s - 1.0;
}

std::pair<double, double> c_bracket(std::size_t k, const WUpdateWorkspace& ws, double lambda1,
                                    BracketRule rule) {
  const double a = lambda1 * ws.lipschitz;
  const double m = static_cast<double>(ws.m);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t j = 0; j < ws.m; ++j) {
    double c;
    if (rule == BracketRule::derived) {
      c = ws.B1(j, k) * m - a / m - ws.B2_base(j, k);
    } else {
      c = 4.0 * a * ws.B1(j, k) * m - 1.0 / m - ws.h_row_sums[k] +
          lambda1 * (ws.lipschitz * ws.W_hat(j, k) - ws.A(j, k));
    }
    lo = std::min(lo, c);
    hi = std::max(hi, c);
  }
  return {lo, hi};
}

double solve_c(std::size_t k, const WUpdateWorkspace& ws, double lambda1, double eps, double tol,
               int max_iter, BracketRule rule) {
  const double a = lambda1 * ws.lipschitz;
  auto [lo, hi] = c_bracket(k, ws, lambda1, rule);
  double f_lo = column_excess(k, lo, ws, a, eps);
  if (std::abs(f_lo) <= tol) return lo;
  double f_hi = column_excess(k, hi, ws, a, eps);
  if (std::abs(f_hi) <= tol) return hi;

  double width = std::max({hi - lo, 1e-12 * (1.0 + std::abs(lo) + std::abs(hi)), 1e-300});
  for (int n = 0; n < 60 && f_lo < 0.0; ++n, width *= 2.0) {
    lo -= width;
    f_lo = column_excess(k, lo, ws, a, eps);
  }
  width = std::max({hi - lo, 1e-12 * (1.0 + std::abs(lo) + std::abs(hi)), 1e-300});
  for (int n = 0; n < 60 && f_hi > 0.0; ++n, width *= 2.0) {
    hi += width;
    f_hi = column_excess(k, hi, ws, a, eps);
  }
  if (!(f_lo >= 0.0 && f_hi <= 0.0)) {
    throw BisectionFailure("no sign change for column " + std::to_string(k));
  }
  for (int n = 0; n < max_iter; ++n) {
    const double mid = 0.5 * (lo + hi);
    const double f = column_excess(k, mid, ws, a, eps);
    if (std::abs(f) <= tol) return mid;
    if (mid <= lo || mid >= hi) break;  // bracket exhausted
    (f > 0.0 ? lo : hi) = mid;
  }
  throw BisectionFailure("bisection did not reach tolerance for column " + std::to_string(k));
}

}  // namespace

double psi(std::size_t j, std::size_t k, double mu_k, const WUpdateWorkspace& ws,
           double lambda1) {
  return psi_c(j, k, lambda1 * mu_k, ws, lambda1 * ws.lipschitz);
}

std::pair<double, double> mu_bracket(std::size_t k, const WUpdateWorkspace& ws, double lambda1,
                                     BracketRule rule) {
  const auto [lo, hi] = c_bracket(k, ws, lambda1, rule);
  return {lo / lambda1, hi / lambda1};
}

double solve_mu_k(std::size_t k, const WUpdateWorkspace& ws, double lambda1, double epsilon,
                  double tol, int max_iter, BracketRule rule) {
  return solve_c(k, ws, lambda1, epsilon, tol, max_iter, rule) / lambda1;
}

Matrix minvol_w_step(const Matrix& X, const Matrix& W_from, const Matrix& H,
                     const MinVolParams& params) {
  params.validate(W_from.rows());
  if (W_from.rows() != X.rows() || W_from.cols() != H.rows() || H.cols() != X.cols()) {
    throw DimensionMismatch("minvol_w_step: X, W and H do not conform");
  }
  if (min_entry(W_from) <= 0.0 || min_entry(H) <= 0.0) {
    throw DomainError("minvol_w_step: factors must be positive");
  }
  const double l1 = params.lambda1;
  WUpdateWorkspace ws = make_w_workspace(X, W_from, H, l1, params.delta);
  const double a = l1 * ws.lipschitz;
  const long r = static_cast<long>(ws.r);
  std::vector<double> c(ws.r, 0.0);
  std::string failure;
#pragma omp parallel for schedule(static)
  for (long k = 0; k < r; ++k) {
    try {
      c[k] = solve_c(k, ws, l1, params.epsilon, params.bisection_tol, params.bisection_max_iter,
                     params.bracket);
    } catch (const BisectionFailure& e) {
#pragma omp critical
      if (failure.empty()) failure = e.what();
    }
  }
  if (!failure.empty()) throw BisectionFailure(failure);
  Matrix W(ws.m, ws.r);
  for (std::size_t j = 0; j < ws.m; ++j) {
    for (std::size_t k = 0; k < ws.r; ++k) {
      W(j, k) = std::max(params.epsilon, psi_c(j, k, c[k], ws, a));
    }
  }
  return W;
}

Matrix minvol_h_step(const Matrix& X, const Matrix& W, const Matrix& H_from, double epsilon) {
  return mu_step(X, W, H_from, Beta(1.0), epsilon);
}

double minvol_objective(const Matrix& X, const Matrix& W, const Matrix& H, double lambda1,
                        double delta) {
  return D_beta(X, W, H, Beta(1.0)) + lambda1 * logdet_gram(W, delta);
}

double resolve_lambda1(const Matrix& X, const Matrix& W0, const Matrix& H0, double lambda_tilde,
                       double delta) {
  if (!(lambda_tilde > 0.0)) throw DomainError("lambda_tilde must be positive");
  const double ld = std::abs(logdet_gram(W0, delta));
  if (ld == 0.0) throw DomainError("logdet(W0^T W0 + delta I) is zero; cannot scale lambda");
  const double l1 = lambda_tilde * D_beta(X, W0, H0, Beta(1.0)) / ld;
  if (!(l1 > 0.0)) throw DomainError("resolved lambda1 is not positive (exact initial fit?)");
  return l1;
}

FactorPair minvol_initial_factors(const Matrix& X, std::size_t rank, double epsilon,
                                  std::uint64_t seed) {
  FactorPair f = random_factors(X, rank, epsilon, seed, true);
  for (std::size_t k = 0; k < rank; ++k) {
    double s = 0.0;
    for (std::size_t j = 0; j < f.W.rows(); ++j) s += f.W(j, k);
    for (std::size_t j = 0; j < f.W.rows(); ++j) f.W(j, k) = std::max(epsilon, f.W(j, k) / s);
    for (double& v : f.H.row(k)) v = std::max(epsilon, v * s);
  }
  f.W_prev = f.W;
  f.H_prev = f.H;
  return f;
}

BlockProblem make_minvol_problem(const Matrix& X, const MinVolParams& params) {
  params.validate(X.rows());
  if (!is_nonnegative(X)) throw NegativeEntry("X must be nonnegative");
  auto data = std::make_shared<const Matrix>(X);
  BlockProblem p;
  p.n_blocks = 2;
  p.floor = {params.epsilon, params.epsilon};
  p.projection = {Projection::nonneg, Projection::nonneg};
  p.objective = [data, params](std::span<const Matrix> x) {
    return minvol_objective(*data, x[0], x[1], params.lambda1, params.delta);
  };
  p.update = [data, params](std::size_t block, std::span<const Matrix> x, const Matrix& x_hat) {
    if (block == 0) return minvol_w_step(*data, x_hat, x[1], params);
    return minvol_h_step(*data, x[0], x_hat, params.epsilon);
  };
  const double baseline = baseline_divergence(X, Beta(1.0));
  p.objective_scale = baseline > 0.0 ? baseline : std::nan("");
  return p;
}

MinVolResult solve_minvol(const Matrix& X, const MinVolConfig& config, const RunConfig& run_config,
                          const ExtrapolationConfig& extrapolation,
                          std::optional<FactorPair> init) {
  if (config.rank < 1) throw DomainError("rank must be at least 1");
  FactorPair start;
  if (init) {
    start = std::move(*init);
    if (start.W_prev.empty()) start.W_prev = start.W;
    if (start.H_prev.empty()) start.H_prev = start.H;
  } else {
    start = minvol_initial_factors(X, config.rank, config.epsilon, config.seed);
  }
  MinVolParams params;
  params.delta = config.delta;
  params.epsilon = config.epsilon;
  params.bisection_tol = config.bisection_tol;
  params.bisection_max_iter = config.bisection_max_iter;
  params.bracket = config.bracket;
  params.lambda1 = config.lambda1 ? *config.lambda1
                                  : resolve_lambda1(X, start.W, start.H, config.lambda_tilde,
                                                    config.delta);
  const BlockProblem problem = make_minvol_problem(X, params);
  RunConfig rc = run_config;
  rc.schedule = extrapolation.schedule;
  rc.safeguard = extrapolation.safeguard;
  auto out = run(problem, {std::move(start.W), std::move(start.H)},
                 {std::move(start.W_prev), std::move(start.H_prev)}, rc);
  MinVolResult result;
  result.factors = {std::move(out.point[0]), std::move(out.point[1]), std::move(out.previous[0]),
                    std::move(out.previous[1])};
  result.trace = std::move(out.trace);
  result.monitor = std::move(out.monitor);
  result.iterations = out.iterations;
  result.wall_seconds = out.wall_seconds;
  result.lambda1 = params.lambda1;
  return result;
}

double coordinatewise_residual(const Matrix& X, const Matrix& W, const Matrix& H,
                               const MinVolParams& params) {
  const double f0 = minvol_objective(X, W, H, params.lambda1, params.delta);
  const Matrix W1 = minvol_w_step(X, W, H, params);
  const double fw = minvol_objective(X, W1, H, params.lambda1, params.delta);
  const Matrix H1 = minvol_h_step(X, W, H, params.epsilon);
  const double fh = minvol_objective(X, W, H1, params.lambda1, params.delta);
  const double scale = std::max(1.0, std::abs(f0));
  return std::max(std::abs(fw - f0), std::abs(fh - f0)) / scale;
}

}  // namespace bmme
