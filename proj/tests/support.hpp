#pragma once

// Helpers shared by the unit and acceptance tests. The oracles here avoid the
// library's own closed forms: scalar problems are minimized numerically and
// linear algebra goes through Eigen.

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <utility>
#include <vector>

#include "bmme/matrix.hpp"

namespace testing_support {

using bmme::Matrix;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng,
                            double lo = 0.1, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = u(rng);
  return m;
}

inline Matrix product(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < b.cols(); ++j) {
      long double s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += (long double)a(i, k) * b(k, j);
      c(i, j) = (double)s;
    }
  return c;
}

inline double rel_diff(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300});
}

// Scalar beta-divergence written out in long double, straight from the
// definition.
inline long double d_beta_ld(long double x, long double y, long double beta) {
  if (beta == 1.0L) return (x == 0 ? 0.0L : x * std::log(x / y)) - x + y;
  return (std::pow(x, beta) + (beta - 1) * std::pow(y, beta) - beta * x * std::pow(y, beta - 1)) /
         (beta * (beta - 1));
}

/// Golden-section search for the minimizer of a unimodal f on [lo, hi].
inline double golden_section(const std::function<double(double)>& f, double lo, double hi,
                             int iters = 200) {
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  for (int i = 0; i < iters && b - a > 1e-15 * (1.0 + std::abs(a)); ++i) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  double best = 0.5 * (a + b);
  // the endpoints matter when the minimum sits on the boundary
  for (double x : {lo, hi, c, d})
    if (f(x) < f(best)) best = x;
  return best;
}

/// Root of a nondecreasing function by bisection on [lo, hi]; expands hi
/// until the sign changes.
inline double increasing_root(const std::function<double(double)>& f, double lo, double hi) {
  while (f(hi) < 0) hi *= 2;
  for (int i = 0; i < 400; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    (f(mid) < 0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

/// Value of the Jensen majorizer of h -> D_beta(v, W h) at h, anchored at h~,
/// summed term by term.
inline double jensen_value(const std::vector<double>& v, const Matrix& W,
                           const std::vector<double>& h, const std::vector<double>& ht,
                           double beta) {
  long double s = 0;
  for (std::size_t i = 0; i < W.rows(); ++i) {
    long double vt = 0;
    for (std::size_t k = 0; k < W.cols(); ++k) vt += (long double)W(i, k) * ht[k];
    for (std::size_t k = 0; k < W.cols(); ++k)
      s += W(i, k) * ht[k] / vt * d_beta_ld(v[i], vt * h[k] / ht[k], beta);
  }
  return (double)s;
}

/// Coordinate-wise golden-section minimization of the Jensen majorizer over
/// h >= eps. The majorizer is separable in h, so this is exact up to the
/// search resolution.
inline std::vector<double> jensen_numeric_argmin(const std::vector<double>& v, const Matrix& W,
                                                 const std::vector<double>& ht, double beta,
                                                 double eps) {
  const std::size_t r = W.cols();
  std::vector<double> h = ht;
  for (std::size_t k = 0; k < r; ++k) {
    auto fk = [&](double x) {
      std::vector<double> hh = h;
      hh[k] = x;
      return jensen_value(v, W, hh, ht, beta);
    };
    double hi = std::max(1.0, ht[k]);
    while (fk(2 * hi) < fk(hi)) hi *= 2;
    h[k] = golden_section(fk, eps, 4 * hi);
  }
  return h;
}

/// Independent minimizer of the min-vol W subproblem: the Jensen majorizer of
/// the KL term in W plus lambda1 times the quadratic logdet majorizer, both
/// anchored at W^, over {W >= eps, columns summing to one}. Every entry is
/// solved by bisection on its own analytic derivative; every column's
/// multiplier by an outer bisection.
inline Matrix minvol_w_oracle(const Matrix& X, const Matrix& Wh, const Matrix& H, double lambda1,
                              double delta, double eps) {
  const std::size_t m = Wh.rows(), r = Wh.cols(), n = X.cols();
  Eigen::MatrixXd E(m, r);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < r; ++k) E(j, k) = Wh(j, k);
  const Eigen::MatrixXd G = E.transpose() * E + delta * Eigen::MatrixXd::Identity(r, r);
  const Eigen::MatrixXd A = 2.0 * E * G.inverse();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(E.transpose() * E);
  const double L = 2.0 / (es.eigenvalues().minCoeff() + delta);
  const Matrix V = product(Wh, H);

  // derivative of entry (j, k)'s part of the majorizer plus mu w
  auto deriv = [&](std::size_t j, std::size_t k, double w, double mu) {
    long double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const long double y = V(j, i) * w / Wh(j, k);
      s += (long double)H(k, i) * (1.0L - X(j, i) / y);
    }
    return (double)(s + lambda1 * (A(j, k) + L * (w - Wh(j, k)) + mu));
  };
  auto entry = [&](std::size_t j, std::size_t k, double mu) {
    if (deriv(j, k, eps, mu) >= 0) return eps;
    return increasing_root([&](double w) { return deriv(j, k, w, mu); }, eps, 1.0);
  };

  Matrix W(m, r);
  for (std::size_t k = 0; k < r; ++k) {
    auto excess = [&](double mu) {
      double s = 0;
      for (std::size_t j = 0; j < m; ++j) s += entry(j, k, mu);
      return s - 1.0;
    };
    double lo = -1, hi = 1;
    while (excess(lo) < 0) lo *= 2;
    while (excess(hi) > 0) hi *= 2;
    for (int i = 0; i < 300; ++i) {
      const double mid = 0.5 * (lo + hi);
      if (mid <= lo || mid >= hi) break;
      (excess(mid) > 0 ? lo : hi) = mid;
    }
    const double mu = 0.5 * (lo + hi);
    for (std::size_t j = 0; j < m; ++j) W(j, k) = entry(j, k, mu);
  }
  return W;
}

/// Fast-gradient recursion for min 0.5 x^T Q x - b^T x with step 1/L:
///   y_1 = x_0, x_k = y_k - grad(y_k) / L,
///   t_1 = 1, t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2,
///   y_{k+1} = x_k + ((t_k - 1) / t_{k+1}) (x_k - x_{k-1}).
inline std::vector<std::vector<double>> fast_gradient(const double Q[2][2], const double b[2],
                                                      double L, std::vector<double> x0,
                                                      int steps) {
  std::vector<std::vector<double>> xs{x0};
  std::vector<double> y = x0, x_prev = x0;
  double t = 1.0;
  for (int k = 0; k < steps; ++k) {
    std::vector<double> x(2);
    for (int i = 0; i < 2; ++i) {
      const double g = Q[i][0] * y[0] + Q[i][1] * y[1] - b[i];
      x[i] = y[i] - g / L;
    }
    const double t_next = (1.0 + std::sqrt(1.0 + 4.0 * t * t)) / 2.0;
    for (int i = 0; i < 2; ++i) y[i] = x[i] + (t - 1.0) / t_next * (x[i] - x_prev[i]);
    t = t_next;
    x_prev = x;
    xs.push_back(x);
  }
  return xs;
}

}  // namespace testing_support
