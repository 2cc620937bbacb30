#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "bmme/divergence.hpp"
#include "bmme/matrix.hpp"

namespace bmme {

using Vector = std::vector<double>;
using ScalarField = std::function<double(std::span<const double>)>;
using VectorField = std::function<Vector(std::span<const double>)>;

enum class MajorizerKind { jensen_beta, logdet_quadratic, lipschitz, bregman };

/// A majorizer g(x, x~) of some f: g(x~, x~) = f(x~), g(x, x~) >= f(x) on the
/// domain, and grad_1 g(x~, x~) = grad f(x~). Points are flat vectors; matrix
/// blocks are flattened row-major. The closures own copies of their data.
struct MajorizerSpec {
  MajorizerKind kind = MajorizerKind::lipschitz;
  std::function<double(std::span<const double> x, std::span<const double> anchor)> evaluate;
  std::function<Vector(std::span<const double> x, std::span<const double> anchor)>
      gradient_at_first;
  /// argmin_x g(x, anchor) over the feasible set the majorizer was built for.
  std::function<Vector(std::span<const double> anchor)> minimize;
};

/// h -> D_beta(v, W h).
ScalarField jensen_objective(Vector v, Matrix W, Beta beta);

/// Jensen majorizer of h -> D_beta(v, W h):
///   g(h, h~) = sum_i sum_k (W_ik h~_k / v~_i) d_beta(v_i, v~_i h_k / h~_k),  v~ = W h~,
/// minimized over {h >= epsilon} by the clamped multiplicative update.
MajorizerSpec jensen_beta_majorizer(Vector v, Matrix W, Beta beta, double epsilon);

/// Diagonal of the Hessian of h -> g(h, h~):
///   sum_i (W_ik v~_i / h~_k) d''_beta(v_i, v~_i h_k / h~_k).
Vector jensen_hessian_diag(std::span<const double> v, const Matrix& W, std::span<const double> h,
                           std::span<const double> h_tilde, Beta beta);

struct LogDetMajorizerParams {
  double delta = 0.0;
  double lambda1 = 0.0;
  double value = 0.0;      // logdet(W~^T W~ + delta I)
  double lipschitz = 0.0;  // 2 / (lambda_min(W~^T W~) + delta) <= 2 / delta
  Matrix gradient;         // 2 W~ (W~^T W~ + delta I)^{-1}
};

LogDetMajorizerParams logdet_majorizer_params(const Matrix& W_tilde, double delta,
                                              double lambda1 = 1.0);

/// Quadratic majorizer of W -> logdet(W^T W + delta I) for m x r blocks:
///   phi(W~) + <grad phi(W~), W - W~> + (L / 2) ||W - W~||^2,
/// minimized over {W >= floor}.
MajorizerSpec logdet_majorizer(std::size_t m, std::size_t r, double delta,
                               double floor = -std::numeric_limits<double>::infinity());

/// f(x~) + <grad f(x~), x - x~> + (L / 2) ||x - x~||^2, minimized over {x >= floor}.
MajorizerSpec lipschitz_majorizer(ScalarField f, VectorField grad, double lipschitz,
                                  double floor = -std::numeric_limits<double>::infinity());

/// f(x~) + <grad f(x~), x - x~> + L B_h(x, x~) for a Legendre kernel h with
/// gradient `kernel_grad` and its inverse `kernel_grad_inverse` (mirror map).
MajorizerSpec bregman_majorizer(ScalarField f, VectorField grad, ScalarField kernel,
                                VectorField kernel_grad, VectorField kernel_grad_inverse,
                                double relative_smoothness);

/// Returns (x, x~) pairs of feasible points.
using MajorizerSampler = std::function<std::pair<Vector, Vector>(std::mt19937_64&)>;

/// Worst observed violations over the samples. Each is scaled by
/// 1 + |f(x)| (or 1 + ||grad f||) so the same tolerance works across scales.
struct MajorizerReport {
  std::size_t samples = 0;
  double tightness = 0.0;          // max |g(x~, x~) - f(x~)|
  double domination = std::numeric_limits<double>::infinity();  // min g(x, x~) - f(x)
  double gradient_mismatch = 0.0;  // max ||grad_1 g(x~, x~) - grad f(x~)||

  bool passed(double tol) const {
    return tightness <= tol && domination >= -tol && gradient_mismatch <= tol;
  }
};

/// Central finite differences with step 1e-6 (1 + |x_i|).
Vector finite_difference_gradient(const ScalarField& f, std::span<const double> x);

MajorizerReport validate_majorizer(const MajorizerSpec& spec, const ScalarField& f,
                                   const MajorizerSampler& sampler, std::size_t n_samples,
                                   std::uint64_t seed);

/// Three-point inequality residual for the majorizer anchored at z:
///   [phi(u) + B(u, z)] - [phi(z+) + B(z+, z) + B(u, z+)]
/// with xi = g(., z), B its Bregman distance, phi the linearization of f at
/// z and z+ = argmin g(., z). Nonnegative for convex xi (up to rounding).
double three_point_check(const MajorizerSpec& spec, std::span<const double> z,
                         std::span<const double> u);

}  // namespace bmme
