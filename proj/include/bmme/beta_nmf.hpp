#pragma once

#include <cfloat>
#include <cstdint>
#include <optional>

#include "bmme/bmme.hpp"
#include "bmme/divergence.hpp"
#include "bmme/matrix.hpp"

namespace bmme {

/// Current and previous iterates of X ~ W H.
struct FactorPair {
  Matrix W;
  Matrix H;
  Matrix W_prev;
  Matrix H_prev;
};

enum class InitKind { uniform_random, scaled_random, user };

struct BetaNmfConfig {
  Beta beta{1.0};
  std::size_t rank = 1;
  double epsilon = DBL_EPSILON;
  InitKind init = InitKind::scaled_random;
  std::uint64_t seed = 0;

  void validate() const;
};

struct ExtrapolationConfig {
  Schedule schedule = Schedule::nesterov;
  SafeguardParams safeguard{};
};

struct NmfResult {
  FactorPair factors;
  ConvergenceTrace trace;
  ConditionMonitor monitor;
  long iterations = 0;
  double wall_seconds = 0.0;
};

/// Random factors in (0, 1) clamped at epsilon. With `scale_to_data`, H is
/// multiplied by <X, WH> / <WH, WH> and clamped again. Previous iterates equal
/// the current ones.
FactorPair random_factors(const Matrix& X, std::size_t rank, double epsilon, std::uint64_t seed,
                          bool scale_to_data);

/// Multiplicative update of H at H_from (possibly an extrapolated point):
///   max(eps, H_from o [W^T (X / V^{2-beta})] / [W^T V^{beta-1}]),  V = W H_from.
Matrix mu_step(const Matrix& X, const Matrix& W, const Matrix& H_from, Beta beta,
               double epsilon);

/// Multiplicative update of W at W_from, i.e. MU(X^T, H^T, W_from^T)^T.
Matrix mu_step_w(const Matrix& X, const Matrix& W_from, const Matrix& H, Beta beta,
                 double epsilon);

/// Two-block problem (W, H) with MU block updates, floor epsilon and
/// P = [.]_+. The objective is D_beta(X, WH); the trace residual is
/// kkt_residual.
BlockProblem make_beta_nmf_problem(const Matrix& X, const BetaNmfConfig& config);

/// Plain MU (no extrapolation).
NmfResult solve_mu(const Matrix& X, const BetaNmfConfig& config, const RunConfig& run,
                   std::optional<FactorPair> init = std::nullopt);

/// MU with extrapolation: both W^ and H^ are formed at the top of each
/// iteration, W is updated first, then H with the new W.
NmfResult solve_mue(const Matrix& X, const BetaNmfConfig& config, const RunConfig& run,
                    const ExtrapolationConfig& extrapolation,
                    std::optional<FactorPair> init = std::nullopt);

/// Largest KKT violation over both factors: |min(0, g)| for entries at the
/// floor (<= eps (1 + 1e-6)), |g| elsewhere, with g the gradient of D_beta.
double kkt_residual(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta,
                    double epsilon);

/// H_kj <= max_j sum_i X_ij / eps and W_ik <= max_i sum_j X_ij / eps.
bool within_iterate_bounds(const Matrix& X, const Matrix& W, const Matrix& H, double epsilon);

}  // namespace bmme
