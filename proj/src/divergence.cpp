#include "bmme/divergence.hpp"

#include <string>

#include "bmme/errors.hpp"
#include "bmme/kernels.hpp"
#include "bmme/linalg.hpp"

namespace bmme {

Beta::Beta(double value) : value_(value) {
  if (!(value >= 1.0 && value <= 2.0)) {
    throw DomainError("beta must lie in [1, 2], got " + std::to_string(value));
  }
}

double d_beta(double x, double y, Beta beta) {
  if (!(x >= 0.0)) throw DomainError("d_beta: x must be nonnegative");
  if (!(y > 0.0)) throw DomainError("d_beta: y must be positive");
  return detail::d_beta_raw(x, y, beta.value());
}

namespace {

void check_model(const Matrix& X, const Matrix& W, const Matrix& H) {
  if (W.cols() != H.rows() || X.rows() != W.rows() || X.cols() != H.cols()) {
    throw DimensionMismatch("W (" + std::to_string(W.rows()) + "x" + std::to_string(W.cols()) +
                            ") * H (" + std::to_string(H.rows()) + "x" +
                            std::to_string(H.cols()) + ") does not match X (" +
                            std::to_string(X.rows()) + "x" + std::to_string(X.cols()) + ")");
  }
}

void check_positive_model(const Matrix& V) {
  for (double v : V.data()) {
    if (!(v > 0.0)) throw DomainError("model matrix WH has a nonpositive entry");
  }
}

}  // namespace

double D_beta_model(const Matrix& X, const Matrix& V, Beta beta) {
  require_same_shape(X, V, "D_beta");
  check_positive_model(V);
  return kernels::divergence_sum(X, V, beta);
}

double D_beta(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta) {
  check_model(X, W, H);
  return D_beta_model(X, kernels::matmul(W, H), beta);
}

Matrix grad_H(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta) {
  check_model(X, W, H);
  check_positive_model(kernels::matmul(W, H));
  // Rows of H^T pair with rows of X^T: X^T ~ H^T W^T.
  auto terms = kernels::mu_terms_rows(X.transposed(), H.transposed(), W.transposed(), beta);
  Matrix g(H.rows(), H.cols());
  for (std::size_t j = 0; j < H.cols(); ++j)
    for (std::size_t k = 0; k < H.rows(); ++k)
      g(k, j) = terms.denominator(j, k) - terms.numerator(j, k);
  return g;
}

Matrix grad_W(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta) {
  check_model(X, W, H);
  check_positive_model(kernels::matmul(W, H));
  auto terms = kernels::mu_terms_rows(X, W, H, beta);
  Matrix g(W.rows(), W.cols());
  auto d = terms.denominator.data();
  auto n = terms.numerator.data();
  auto out = g.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = d[i] - n[i];
  return g;
}

Matrix row_mean_model(const Matrix& X) {
  Matrix M(X.rows(), X.cols());
  for (std::size_t i = 0; i < X.rows(); ++i) {
    double s = 0.0;
    for (double v : X.row(i)) s += v;
    const double mean = s / static_cast<double>(X.cols());
    for (double& v : M.row(i)) v = mean;
  }
  return M;
}

double baseline_divergence(const Matrix& X, Beta beta) {
  const Matrix M = row_mean_model(X);
  double total = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i) {
    const double mean = M(i, 0);
    if (mean == 0.0) continue;  // all-zero row: fitted exactly
    for (double x : X.row(i)) total += detail::d_beta_raw(x, mean, beta.value());
  }
  return total;
}

double logdet_gram(const Matrix& W, double delta) {
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  Matrix gram = linalg::gram(W);
  for (std::size_t k = 0; k < gram.rows(); ++k) gram(k, k) += delta;
  return linalg::logdet_spd(gram);
}

double require_positive_baseline(double baseline) {
  if (!(baseline > 0.0)) {
    throw DegenerateBaseline("rank-one row-mean baseline fits X exactly; relative error undefined");
  }
  return baseline;
}

double rel_error_minvol(const Matrix& X, const Matrix& W, const Matrix& H, double lambda1,
                        double delta) {
  const Beta kl(1.0);
  const double denom = require_positive_baseline(baseline_divergence(X, kl));
  return (D_beta(X, W, H, kl) + lambda1 * logdet_gram(W, delta)) / denom;
}

double rel_objective_beta(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta) {
  const double denom = require_positive_baseline(baseline_divergence(X, beta));
  return D_beta(X, W, H, beta) / denom;
}

}  // namespace bmme
