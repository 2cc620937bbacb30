#include "bmme/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "bmme/errors.hpp"

namespace bmme::kernels {
namespace {

// ratio = x * v^{beta-2}, power = v^{beta-1}. One log and one exp per entry in
// the general case; exact arithmetic at the two endpoints.
inline void ratio_and_power(double x, double v, double beta, double& ratio, double& power) {
  if (beta == 1.0) {
    ratio = x / v;
    power = 1.0;
  } else if (beta == 2.0) {
    ratio = x;
    power = v;
  } else {
    const double p = std::exp((beta - 2.0) * std::log(v));
    ratio = x * p;
    power = v * p;
  }
}

void check_product_shapes(const Matrix& X, const Matrix& F, const Matrix& G) {
  if (F.cols() != G.rows() || X.rows() != F.rows() || X.cols() != G.cols()) {
    throw DimensionMismatch("factor shapes do not conform with X");
  }
}

// v <- f^T G for one row f of F.
inline void row_times(std::span<const double> f, const Matrix& G, double* v) {
  const std::size_t n = G.cols();
  std::fill(v, v + n, 0.0);
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double fk = f[k];
    const double* g = G.row(k).data();
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) v[j] += fk * g[j];
  }
}

// Fills num[k] = sum_j ratio_j G_kj and den[k] = sum_j power_j G_kj for one row.
inline void row_terms(const double* x, std::span<const double> f, const Matrix& G, double beta,
                      double* v, double* ratio, double* num, double* den) {
  const std::size_t n = G.cols();
  row_times(f, G, v);
  if (beta == 1.5) {
    // sqrt vectorizes, exp/log do not
#pragma omp simd
    for (std::size_t j = 0; j < n; ++j) {
      const double p = 1.0 / std::sqrt(v[j]);
      ratio[j] = x[j] * p;
      v[j] *= p;
    }
  } else {
    for (std::size_t j = 0; j < n; ++j) ratio_and_power(x[j], v[j], beta, ratio[j], v[j]);
  }
  for (std::size_t k = 0; k < f.size(); ++k) {
    const double* g = G.row(k).data();
    double s_num = 0.0;
    double s_den = 0.0;
#pragma omp simd reduction(+ : s_num, s_den)
    for (std::size_t j = 0; j < n; ++j) {
      s_num += ratio[j] * g[j];
      s_den += v[j] * g[j];
    }
    num[k] = s_num;
    den[k] = s_den;
  }
}

}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < rows; ++i) {
    row_times(a.row(static_cast<std::size_t>(i)), b, out.row(static_cast<std::size_t>(i)).data());
  }
  return out;
}

MuTerms mu_terms_rows(const Matrix& X, const Matrix& F, const Matrix& G, Beta beta) {
  check_product_shapes(X, F, G);
  const std::size_t n = G.cols();
  MuTerms terms{Matrix(F.rows(), F.cols()), Matrix(F.rows(), F.cols())};
  const auto rows = static_cast<std::ptrdiff_t>(F.rows());
  const double b = beta.value();
#pragma omp parallel
  {
    std::vector<double> v(n);
    std::vector<double> ratio(n);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      row_terms(X.row(i).data(), F.row(i), G, b, v.data(), ratio.data(),
                terms.numerator.row(i).data(), terms.denominator.row(i).data());
    }
  }
  return terms;
}

Matrix mu_update_rows(const Matrix& X, const Matrix& F, const Matrix& G, Beta beta,
                      double epsilon) {
  check_product_shapes(X, F, G);
  const std::size_t n = G.cols();
  const std::size_t r = F.cols();
  Matrix out(F.rows(), r);
  const auto rows = static_cast<std::ptrdiff_t>(F.rows());
  const double b = beta.value();
#pragma omp parallel
  {
    std::vector<double> v(n);
    std::vector<double> ratio(n);
    std::vector<double> num(r);
    std::vector<double> den(r);
#pragma omp for schedule(static)
    for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      auto f = F.row(i);
      row_terms(X.row(i).data(), f, G, b, v.data(), ratio.data(), num.data(), den.data());
      auto o = out.row(i);
      for (std::size_t k = 0; k < r; ++k) o[k] = std::max(epsilon, f[k] * num[k] / den[k]);
    }
  }
  return out;
}

double divergence_sum(const Matrix& X, const Matrix& V, Beta beta) {
  require_same_shape(X, V, "divergence_sum");
  std::vector<double> partial(X.rows(), 0.0);
  const auto rows = static_cast<std::ptrdiff_t>(X.rows());
  const double b = beta.value();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < rows; ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    auto x = X.row(i);
    auto v = V.row(i);
    double s = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) s += detail::d_beta_raw(x[j], v[j], b);
    partial[i] = s;
  }
  double total = 0.0;
  for (double s : partial) total += s;
  return total;
}

PositiveStep positive_part_difference(const Matrix& curr, const Matrix& prev) {
  require_same_shape(curr, prev, "positive_part_difference");
  PositiveStep out{Matrix(curr.rows(), curr.cols()), 0.0};
  auto c = curr.data();
  auto p = prev.data();
  auto s = out.step.data();
  double sq = 0.0;
  for (std::size_t i = 0; i < c.size(); ++i) {
    const double d = std::max(0.0, c[i] - p[i]);
    s[i] = d;
    sq += d * d;
  }
  out.norm = std::sqrt(sq);
  return out;
}

Matrix axpy(const Matrix& curr, double alpha, const Matrix& step) {
  require_same_shape(curr, step, "axpy");
  Matrix out(curr.rows(), curr.cols());
  auto c = curr.data();
  auto s = step.data();
  auto o = out.data();
  for (std::size_t i = 0; i < c.size(); ++i) o[i] = c[i] + alpha * s[i];
  return out;
}

namespace reference {

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw DimensionMismatch("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw DimensionMismatch("matmul_tn: row counts differ");
  Matrix out(a.cols(), b.cols());
  for (std::size_t i = 0; i < a.cols(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.rows(); ++k) s += a(k, i) * b(k, j);
      out(i, j) = s;
    }
  return out;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) throw DimensionMismatch("matmul_nt: column counts differ");
  Matrix out(a.rows(), b.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.rows(); ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += a(i, k) * b(j, k);
      out(i, j) = s;
    }
  return out;
}

namespace {

// (X / V^{2-beta}, V^{beta-1}) elementwise with std::pow.
std::pair<Matrix, Matrix> ratio_power(const Matrix& X, const Matrix& V, double beta) {
  Matrix ratio(V.rows(), V.cols());
  Matrix power(V.rows(), V.cols());
  for (std::size_t i = 0; i < V.rows(); ++i)
    for (std::size_t j = 0; j < V.cols(); ++j) {
      ratio(i, j) = X(i, j) / std::pow(V(i, j), 2.0 - beta);
      power(i, j) = std::pow(V(i, j), beta - 1.0);
    }
  return {ratio, power};
}

}  // namespace

Matrix mu_update_h(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta,
                   double epsilon) {
  check_product_shapes(X, W, H);
  const Matrix V = matmul(W, H);
  const auto [ratio, power] = ratio_power(X, V, beta.value());
  const Matrix num = matmul_tn(W, ratio);
  const Matrix den = matmul_tn(W, power);
  Matrix out(H.rows(), H.cols());
  for (std::size_t k = 0; k < H.rows(); ++k)
    for (std::size_t j = 0; j < H.cols(); ++j)
      out(k, j) = std::max(epsilon, H(k, j) * num(k, j) / den(k, j));
  return out;
}

Matrix mu_update_w(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta,
                   double epsilon) {
  check_product_shapes(X, W, H);
  const Matrix V = matmul(W, H);
  const auto [ratio, power] = ratio_power(X, V, beta.value());
  const Matrix num = matmul_nt(ratio, H);
  const Matrix den = matmul_nt(power, H);
  Matrix out(W.rows(), W.cols());
  for (std::size_t i = 0; i < W.rows(); ++i)
    for (std::size_t k = 0; k < W.cols(); ++k)
      out(i, k) = std::max(epsilon, W(i, k) * num(i, k) / den(i, k));
  return out;
}

double divergence_sum(const Matrix& X, const Matrix& V, Beta beta) {
  require_same_shape(X, V, "divergence_sum");
  double total = 0.0;
  for (std::size_t i = 0; i < X.rows(); ++i)
    for (std::size_t j = 0; j < X.cols(); ++j)
      total += detail::d_beta_raw(X(i, j), V(i, j), beta.value());
  return total;
}

}  // namespace reference
}  // namespace bmme::kernels
