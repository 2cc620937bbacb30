#include "bmme/beta_nmf.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <random>

#include "bmme/errors.hpp"
#include "bmme/kernels.hpp"

namespace bmme {

void BetaNmfConfig::validate() const {
  if (rank < 1) throw DomainError("rank must be at least 1");
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
}

FactorPair random_factors(const Matrix& X, std::size_t rank, double epsilon, std::uint64_t seed,
                          bool scale_to_data) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  FactorPair f;
  f.W = Matrix(X.rows(), rank);
  f.H = Matrix(rank, X.cols());
  for (double& v : f.W.data()) v = std::max(epsilon, unit(rng));
  for (double& v : f.H.data()) v = std::max(epsilon, unit(rng));
  if (scale_to_data) {
    const Matrix V = kernels::matmul(f.W, f.H);
    const double rho = inner(X, V) / inner(V, V);
    for (double& v : f.H.data()) v = std::max(epsilon, rho * v);
  }
  f.W_prev = f.W;
  f.H_prev = f.H;
  return f;
}

Matrix mu_step(const Matrix& X, const Matrix& W, const Matrix& H_from, Beta beta,
               double epsilon) {
  if (min_entry(W) < epsilon || min_entry(H_from) < epsilon) {
    throw DomainError("mu_step: factors must be >= epsilon");
  }
  return kernels::mu_update_rows(X.transposed(), H_from.transposed(), W.transposed(), beta,
                                 epsilon)
      .transposed();
}

Matrix mu_step_w(const Matrix& X, const Matrix& W_from, const Matrix& H, Beta beta,
                 double epsilon) {
  if (min_entry(W_from) < epsilon || min_entry(H) < epsilon) {
    throw DomainError("mu_step_w: factors must be >= epsilon");
  }
  return kernels::mu_update_rows(X, W_from, H, beta, epsilon);
}

namespace {

// Largest Hessian diagonal of the row-wise Jensen majorizers of F -> D(X, F G)
// anchored at F_hat, evaluated at both F and F_hat.
double max_row_curvature(const Matrix& X, const Matrix& F, const Matrix& F_hat, const Matrix& G,
                         double beta) {
  const Matrix V_hat = kernels::matmul(F_hat, G);
  double best = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    for (std::size_t k = 0; k < G.rows(); ++k) {
      for (const Matrix* at : {&F, &F_hat}) {
        const double scale = (*at)(i, k) / F_hat(i, k);
        double s = 0.0;
        for (std::size_t j = 0; j < X.cols(); ++j) {
          const double vt = V_hat(i, j);
          s += G(k, j) * vt / F_hat(i, k) * detail::d_beta_dy2(X(i, j), vt * scale, beta);
        }
        best = std::max(best, s);
      }
    }
  }
  return best;
}

}  // namespace

BlockProblem make_beta_nmf_problem(const Matrix& X, const BetaNmfConfig& config) {
  config.validate();
  if (!is_nonnegative(X)) throw NegativeEntry("X must be nonnegative");
  auto data = std::make_shared<const Matrix>(X);
  auto data_t = std::make_shared<const Matrix>(X.transposed());
  const Beta beta = config.beta;
  const double eps = config.epsilon;

  BlockProblem p;
  p.n_blocks = 2;
  p.floor = {eps, eps};
  p.projection = {Projection::nonneg, Projection::nonneg};
  p.objective = [data, beta](std::span<const Matrix> x) { return D_beta(*data, x[0], x[1], beta); };
  p.update = [data, data_t, beta, eps](std::size_t block, std::span<const Matrix> x,
                                       const Matrix& x_hat) {
    if (block == 0) return kernels::mu_update_rows(*data, x_hat, x[1], beta, eps);
    return kernels::mu_update_rows(*data_t, x_hat.transposed(), x[0].transposed(), beta, eps)
        .transposed();
  };
  p.residual = [data, beta, eps](std::span<const Matrix> x) {
    return kkt_residual(*data, x[0], x[1], beta, eps);
  };
  p.curvature = [data, data_t, beta](std::size_t block, std::span<const Matrix> x,
                                     const Matrix& x_hat) {
    if (block == 0) return max_row_curvature(*data, x[0], x_hat, x[1], beta.value());
    return max_row_curvature(*data_t, x[1].transposed(), x_hat.transposed(), x[0].transposed(),
                             beta.value());
  };
  const double baseline = baseline_divergence(X, beta);
  p.objective_scale = baseline > 0.0 ? baseline : std::nan("");
  return p;
}

namespace {

FactorPair initial_factors(const Matrix& X, const BetaNmfConfig& config,
                           std::optional<FactorPair> init) {
  if (init) {
    if (init->W_prev.empty()) init->W_prev = init->W;
    if (init->H_prev.empty()) init->H_prev = init->H;
    return std::move(*init);
  }
  if (config.init == InitKind::user) throw DomainError("init=user requires initial factors");
  return random_factors(X, config.rank, config.epsilon, config.seed,
                        config.init == InitKind::scaled_random);
}

}  // namespace

NmfResult solve_mue(const Matrix& X, const BetaNmfConfig& config, const RunConfig& run_config,
                    const ExtrapolationConfig& extrapolation, std::optional<FactorPair> init) {
  const BlockProblem problem = make_beta_nmf_problem(X, config);
  FactorPair start = initial_factors(X, config, std::move(init));
  RunConfig rc = run_config;
  rc.schedule = extrapolation.schedule;
  rc.safeguard = extrapolation.safeguard;
  auto out = run(problem, {std::move(start.W), std::move(start.H)},
                 {std::move(start.W_prev), std::move(start.H_prev)}, rc);
  NmfResult result;
  result.factors = {std::move(out.point[0]), std::move(out.point[1]), std::move(out.previous[0]),
                    std::move(out.previous[1])};
  result.trace = std::move(out.trace);
  result.monitor = std::move(out.monitor);
  result.iterations = out.iterations;
  result.wall_seconds = out.wall_seconds;
  if (!within_iterate_bounds(X, result.factors.W, result.factors.H, config.epsilon)) {
    throw Error("iterates left the theoretical bounded region");
  }
  return result;
}

NmfResult solve_mu(const Matrix& X, const BetaNmfConfig& config, const RunConfig& run,
                   std::optional<FactorPair> init) {
  return solve_mue(X, config, run, ExtrapolationConfig{Schedule::none, {}}, std::move(init));
}

double kkt_residual(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta,
                    double epsilon) {
  const double active = epsilon * (1.0 + 1e-6);
  double worst = 0.0;
  auto scan = [&](const Matrix& factor, const Matrix& grad) {
    auto f = factor.data();
    auto g = grad.data();
    for (std::size_t i = 0; i < f.size(); ++i) {
      const double v = f[i] <= active ? std::max(0.0, -g[i]) : std::abs(g[i]);
      worst = std::max(worst, v);
    }
  };
  scan(W, grad_W(X, W, H, beta));
  scan(H, grad_H(X, W, H, beta));
  return worst;
}

bool within_iterate_bounds(const Matrix& X, const Matrix& W, const Matrix& H, double epsilon) {
  double max_col = 0.0;
  for (std::size_t j = 0; j < X.cols(); ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < X.rows(); ++i) s += X(i, j);
    max_col = std::max(max_col, s);
  }
  double max_row = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double s = 0.0;
    for (double v : X.row(i)) s += v;
    max_row = std::max(max_row, s);
  }
  // A zero X still admits entries at the floor.
  return max_entry(H) <= std::max(max_col / epsilon, epsilon) &&
         max_entry(W) <= std::max(max_row / epsilon, epsilon);
}

}  // namespace bmme
