#pragma once

#include <algorithm>
#include <cmath>

#include "bmme/matrix.hpp"

namespace bmme {

/// Exponent of the beta-divergence, restricted to [1, 2].
class Beta {
 public:
  explicit Beta(double value);

  double value() const { return value_; }
  bool is_kl() const { return value_ == 1.0; }

 private:
  double value_;
};

namespace detail {

// Unchecked scalar divergence; callers guarantee x >= 0, y > 0.
inline double d_beta_raw(double x, double y, double beta) {
  if (beta == 1.0) {
    return x > 0.0 ? x * std::log(x / y) - x + y : y;
  }
  // ratio form: exact zero on the diagonal, no x^b vs y^b cancellation
  const double y_pow_b = std::exp(beta * std::log(y));
  if (x == 0.0) return y_pow_b / beta;
  const double u = std::log(x / y);
  const double g = std::expm1(beta * u) - beta * std::expm1(u);
  return y_pow_b * std::max(0.0, g) / (beta * (beta - 1.0));
}

// First and second derivatives of y -> d_beta(x, y).
inline double d_beta_dy(double x, double y, double beta) {
  if (beta == 1.0) return 1.0 - x / y;
  const double p = std::exp((beta - 2.0) * std::log(y));
  return p * (y - x);
}

inline double d_beta_dy2(double x, double y, double beta) {
  if (beta == 1.0) return x / (y * y);
  const double p = std::exp((beta - 3.0) * std::log(y));
  return p * ((beta - 1.0) * y - (beta - 2.0) * x);
}

}  // namespace detail

/// Scalar beta-divergence d_beta(x | y) with the convention 0 log 0 = 0.
///
/// Throws DomainError for x < 0 or y <= 0.
double d_beta(double x, double y, Beta beta);

/// D_beta(X, WH) summed over all entries.
double D_beta(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta);

/// D_beta(X, V) for an already formed model matrix V.
double D_beta_model(const Matrix& X, const Matrix& V, Beta beta);

/// Gradient of H -> D_beta(X, WH): W^T (V^{beta-1} - X o V^{beta-2}).
Matrix grad_H(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta);

/// Gradient of W -> D_beta(X, WH): (V^{beta-1} - X o V^{beta-2}) H^T.
Matrix grad_W(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta);

/// Rank-one row-mean model (X e / n) e^T.
Matrix row_mean_model(const Matrix& X);

/// D_beta(X, (X e / n) e^T); rows of X that are identically zero contribute 0.
double baseline_divergence(const Matrix& X, Beta beta);

/// log det(W^T W + delta I).
double logdet_gram(const Matrix& W, double delta);

/// (D_KL(X, WH) + lambda1 logdet(W^T W + delta I)) / D_KL(X, (X e / n) e^T).
///
/// Throws DegenerateBaseline when the denominator is zero.
double rel_error_minvol(const Matrix& X, const Matrix& W, const Matrix& H, double lambda1,
                        double delta);

/// D_beta(X, WH) / D_beta(X, (X e / n) e^T).
double rel_objective_beta(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta);

/// Throws DegenerateBaseline when `baseline` is not strictly positive.
double require_positive_baseline(double baseline);

}  // namespace bmme
