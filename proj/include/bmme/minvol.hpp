#pragma once

// Minimum-volume KL-NMF:
//   min D_KL(X, WH) + lambda1 logdet(W^T W + delta I)
//   s.t. W >= eps, H >= eps, e^T W_:k = 1 for every column k.
//
// H is updated by the KL multiplicative update. W minimizes the sum of the
// row-wise Jensen majorizers of the KL term and the quadratic logdet
// majorizer, anchored at W^, under the column-simplex constraints. The
// problem separates into scalar problems
//   min_{w >= eps}  -b1 log w + b2(mu_k) w + (lambda1 L / 2) w^2
// coupled per column through the multiplier mu_k, which is found by
// bisection on sum_j w_jk(mu_k) = 1.

#include <cfloat>
#include <cstdint>
#include <optional>
#include <utility>

#include "bmme/beta_nmf.hpp"
#include "bmme/bmme.hpp"
#include "bmme/matrix.hpp"

namespace bmme {

/// Where the first bisection bracket comes from. `derived` uses the
/// multipliers mu~_jk at which w_jk(mu~_jk) = 1/m exactly; `literal_form`
/// uses the older closed form
///   (4 lambda1 L b1 m - 1/m - sum_i H_ki) / lambda1 + L W^_jk - A_jk.
/// Either bracket is widened geometrically if it does not straddle the root.
enum class BracketRule { derived, literal_form };

struct MinVolParams {
  double lambda1 = 0.0;
  double delta = 0.1;
  double epsilon = DBL_EPSILON;
  double bisection_tol = 1e-10;
  int bisection_max_iter = 200;
  BracketRule bracket = BracketRule::derived;

  /// Throws DomainError unless lambda1 > 0, delta > 0 and 0 < eps < 1/m.
  void validate(std::size_t m) const;
};

struct MinVolConfig {
  double lambda_tilde = 0.1;
  /// When set, used as lambda1 directly instead of resolving lambda_tilde.
  std::optional<double> lambda1;
  double delta = 0.1;
  double epsilon = DBL_EPSILON;
  std::size_t rank = 1;
  std::uint64_t seed = 0;
  double bisection_tol = 1e-10;
  int bisection_max_iter = 200;
  BracketRule bracket = BracketRule::derived;
};

/// Per-call quantities of the W update at anchor W^ with H fixed.
struct WUpdateWorkspace {
  std::size_t m = 0;
  std::size_t r = 0;
  double lipschitz = 0.0;  // 2 / (lambda_min(W^T W^) + delta)
  Matrix A;                // 2 W^ (W^T W^ + delta I)^{-1}
  Matrix B1;               // ((X / (W^ H)) H^T) o W^
  Matrix B2_base;          // e e^T H^T + lambda1 (A - L W^)
  Matrix W_hat;
  std::vector<double> h_row_sums;
  std::vector<double> mu;
};

WUpdateWorkspace make_w_workspace(const Matrix& X, const Matrix& W_hat, const Matrix& H,
                                  double lambda1, double delta);

/// Unclamped minimizer of the scalar problem for entry (j, k) at multiplier mu_k:
///   (-b2 + sqrt(b2^2 + 4 lambda1 L b1)) / (2 lambda1 L),  b2 = B2_base_jk + lambda1 mu_k.
/// Strictly decreasing in mu_k when b1 > 0.
double psi(std::size_t j, std::size_t k, double mu_k, const WUpdateWorkspace& ws,
           double lambda1);

/// Initial [lower, upper] multiplier bracket for column k.
std::pair<double, double> mu_bracket(std::size_t k, const WUpdateWorkspace& ws, double lambda1,
                                     BracketRule rule);

/// Multiplier with |sum_j max(eps, psi_jk(mu)) - 1| <= tol. Throws
/// BisectionFailure when no sign change is found after 60 bracket doublings
/// or the tolerance is not met within max_iter halvings.
double solve_mu_k(std::size_t k, const WUpdateWorkspace& ws, double lambda1, double epsilon,
                  double tol, int max_iter, BracketRule rule = BracketRule::derived);

/// Simplex-constrained W update anchored at W_from (= W^).
Matrix minvol_w_step(const Matrix& X, const Matrix& W_from, const Matrix& H,
                     const MinVolParams& params);

/// KL multiplicative update of H.
Matrix minvol_h_step(const Matrix& X, const Matrix& W, const Matrix& H_from, double epsilon);

double minvol_objective(const Matrix& X, const Matrix& W, const Matrix& H, double lambda1,
                        double delta);

/// lambda_tilde D_KL(X, W0 H0) / |logdet(W0^T W0 + delta I)|.
double resolve_lambda1(const Matrix& X, const Matrix& W0, const Matrix& H0, double lambda_tilde,
                       double delta);

/// Scaled random factors with the columns of W rescaled to sum to one (the
/// scale moved into H), then clamped at eps.
FactorPair minvol_initial_factors(const Matrix& X, std::size_t rank, double epsilon,
                                  std::uint64_t seed);

BlockProblem make_minvol_problem(const Matrix& X, const MinVolParams& params);

struct MinVolResult : NmfResult {
  double lambda1 = 0.0;
};

MinVolResult solve_minvol(const Matrix& X, const MinVolConfig& config, const RunConfig& run,
                          const ExtrapolationConfig& extrapolation,
                          std::optional<FactorPair> init = std::nullopt);

/// Largest relative objective change from re-minimizing one block's majorizer
/// anchored at its own current value (W first, then H, each from (W, H)).
/// Zero at a coordinate-wise minimizer.
double coordinatewise_residual(const Matrix& X, const Matrix& W, const Matrix& H,
                               const MinVolParams& params);

}  // namespace bmme
