#include "bmme/majorizer.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "bmme/errors.hpp"
#include "bmme/linalg.hpp"

namespace bmme {
namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

Vector times(const Matrix& W, std::span<const double> h) {
  Vector out(W.rows(), 0.0);
  for (std::size_t i = 0; i < W.rows(); ++i) out[i] = dot(W.row(i), h);
  return out;
}

struct JensenData {
  Vector v;
  Matrix W;
  double beta;
  double epsilon;

  void check(std::span<const double> h) const {
    if (h.size() != W.cols()) throw DimensionMismatch("jensen majorizer: wrong point size");
  }
};

}  // namespace

ScalarField jensen_objective(Vector v, Matrix W, Beta beta) {
  if (v.size() != W.rows()) throw DimensionMismatch("jensen_objective: v and W disagree");
  return [v = std::move(v), W = std::move(W), beta](std::span<const double> h) {
    const Vector wh = times(W, h);
    double s = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) s += d_beta(v[i], wh[i], beta);
    return s;
  };
}

MajorizerSpec jensen_beta_majorizer(Vector v, Matrix W, Beta beta, double epsilon) {
  if (v.size() != W.rows()) throw DimensionMismatch("jensen majorizer: v and W disagree");
  if (!(epsilon > 0.0)) throw DomainError("epsilon must be positive");
  if (!is_nonnegative(W) || std::any_of(v.begin(), v.end(), [](double x) { return x < 0.0; })) {
    throw DomainError("jensen majorizer needs nonnegative v and W");
  }
  auto data = std::make_shared<const JensenData>(JensenData{std::move(v), std::move(W),
                                                            beta.value(), epsilon});
  MajorizerSpec spec;
  spec.kind = MajorizerKind::jensen_beta;
  spec.evaluate = [data, beta](std::span<const double> h, std::span<const double> ht) {
    data->check(h);
    data->check(ht);
    const Vector vt = times(data->W, ht);
    double s = 0.0;
    for (std::size_t i = 0; i < vt.size(); ++i) {
      if (!(vt[i] > 0.0)) throw DomainError("jensen majorizer: W h~ has a zero entry");
      for (std::size_t k = 0; k < ht.size(); ++k) {
        const double wik = data->W(i, k);
        if (wik == 0.0) continue;
        s += wik * ht[k] / vt[i] * d_beta(data->v[i], vt[i] * h[k] / ht[k], beta);
      }
    }
    return s;
  };
  spec.gradient_at_first = [data](std::span<const double> h, std::span<const double> ht) {
    data->check(h);
    data->check(ht);
    const Vector vt = times(data->W, ht);
    Vector g(h.size(), 0.0);
    for (std::size_t i = 0; i < vt.size(); ++i)
      for (std::size_t k = 0; k < h.size(); ++k)
        g[k] += data->W(i, k) * detail::d_beta_dy(data->v[i], vt[i] * h[k] / ht[k], data->beta);
    return g;
  };
  spec.minimize = [data](std::span<const double> ht) {
    data->check(ht);
    const Vector vt = times(data->W, ht);
    const std::size_t r = ht.size();
    Vector num(r, 0.0);
    Vector den(r, 0.0);
    for (std::size_t i = 0; i < vt.size(); ++i) {
      const double ratio = data->v[i] * std::pow(vt[i], data->beta - 2.0);
      const double power = std::pow(vt[i], data->beta - 1.0);
      for (std::size_t k = 0; k < r; ++k) {
        num[k] += data->W(i, k) * ratio;
        den[k] += data->W(i, k) * power;
      }
    }
    Vector out(r);
    for (std::size_t k = 0; k < r; ++k) out[k] = std::max(data->epsilon, ht[k] * num[k] / den[k]);
    return out;
  };
  return spec;
}

Vector jensen_hessian_diag(std::span<const double> v, const Matrix& W, std::span<const double> h,
                           std::span<const double> h_tilde, Beta beta) {
  if (v.size() != W.rows() || h.size() != W.cols() || h_tilde.size() != W.cols()) {
    throw DimensionMismatch("jensen_hessian_diag: sizes disagree");
  }
  const Vector vt = times(W, h_tilde);
  Vector out(h.size(), 0.0);
  for (std::size_t i = 0; i < vt.size(); ++i)
    for (std::size_t k = 0; k < h.size(); ++k) {
      const double y = vt[i] * h[k] / h_tilde[k];
      out[k] += W(i, k) * vt[i] / h_tilde[k] * detail::d_beta_dy2(v[i], y, beta.value());
    }
  return out;
}

LogDetMajorizerParams logdet_majorizer_params(const Matrix& W_tilde, double delta,
                                              double lambda1) {
  if (!(delta > 0.0)) throw DomainError("logdet majorizer: delta must be positive");
  LogDetMajorizerParams p;
  p.delta = delta;
  p.lambda1 = lambda1;
  const Matrix gram = linalg::gram(W_tilde);
  const double lambda_min = std::max(0.0, linalg::symmetric_eigenvalues(gram).front());
  p.lipschitz = 2.0 / (lambda_min + delta);
  Matrix shifted = gram;
  for (std::size_t k = 0; k < shifted.rows(); ++k) shifted(k, k) += delta;
  p.value = linalg::logdet_spd(shifted);
  const Matrix inv = linalg::spd_inverse(shifted);
  p.gradient = Matrix(W_tilde.rows(), W_tilde.cols());
  for (std::size_t i = 0; i < W_tilde.rows(); ++i)
    for (std::size_t k = 0; k < W_tilde.cols(); ++k) {
      double s = 0.0;
      for (std::size_t l = 0; l < W_tilde.cols(); ++l) s += W_tilde(i, l) * inv(l, k);
      p.gradient(i, k) = 2.0 * s;
    }
  return p;
}

MajorizerSpec logdet_majorizer(std::size_t m, std::size_t r, double delta, double floor) {
  if (!(delta > 0.0)) throw DomainError("logdet majorizer: delta must be positive");
  auto as_matrix = [m, r](std::span<const double> x) {
    if (x.size() != m * r) throw DimensionMismatch("logdet majorizer: wrong point size");
    return Matrix(m, r, Vector(x.begin(), x.end()));
  };
  MajorizerSpec spec;
  spec.kind = MajorizerKind::logdet_quadratic;
  spec.evaluate = [=](std::span<const double> x, std::span<const double> anchor) {
    const auto p = logdet_majorizer_params(as_matrix(anchor), delta);
    double lin = 0.0;
    double sq = 0.0;
    auto g = p.gradient.data();
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - anchor[i];
      lin += g[i] * d;
      sq += d * d;
    }
    return p.value + lin + 0.5 * p.lipschitz * sq;
  };
  spec.gradient_at_first = [=](std::span<const double> x, std::span<const double> anchor) {
    const auto p = logdet_majorizer_params(as_matrix(anchor), delta);
    Vector out(x.size());
    auto g = p.gradient.data();
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = g[i] + p.lipschitz * (x[i] - anchor[i]);
    return out;
  };
  spec.minimize = [=](std::span<const double> anchor) {
    const auto p = logdet_majorizer_params(as_matrix(anchor), delta);
    Vector out(anchor.size());
    auto g = p.gradient.data();
    for (std::size_t i = 0; i < anchor.size(); ++i)
      out[i] = std::max(floor, anchor[i] - g[i] / p.lipschitz);
    return out;
  };
  return spec;
}

MajorizerSpec lipschitz_majorizer(ScalarField f, VectorField grad, double lipschitz,
                                  double floor) {
  if (!(lipschitz > 0.0)) throw DomainError("Lipschitz constant must be positive");
  MajorizerSpec spec;
  spec.kind = MajorizerKind::lipschitz;
  spec.evaluate = [=](std::span<const double> x, std::span<const double> xt) {
    const Vector g = grad(xt);
    double lin = 0.0;
    double sq = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double d = x[i] - xt[i];
      lin += g[i] * d;
      sq += d * d;
    }
    return f(xt) + lin + 0.5 * lipschitz * sq;
  };
  spec.gradient_at_first = [=](std::span<const double> x, std::span<const double> xt) {
    Vector g = grad(xt);
    for (std::size_t i = 0; i < x.size(); ++i) g[i] += lipschitz * (x[i] - xt[i]);
    return g;
  };
  spec.minimize = [=](std::span<const double> xt) {
    Vector out = grad(xt);
    for (std::size_t i = 0; i < out.size(); ++i)
      out[i] = std::max(floor, xt[i] - out[i] / lipschitz);
    return out;
  };
  return spec;
}

MajorizerSpec bregman_majorizer(ScalarField f, VectorField grad, ScalarField kernel,
                                VectorField kernel_grad, VectorField kernel_grad_inverse,
                                double relative_smoothness) {
  if (!(relative_smoothness > 0.0)) throw DomainError("relative smoothness must be positive");
  const double L = relative_smoothness;
  MajorizerSpec spec;
  spec.kind = MajorizerKind::bregman;
  spec.evaluate = [=](std::span<const double> x, std::span<const double> xt) {
    const Vector g = grad(xt);
    const Vector kg = kernel_grad(xt);
    double lin = 0.0;
    double klin = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      lin += g[i] * (x[i] - xt[i]);
      klin += kg[i] * (x[i] - xt[i]);
    }
    return f(xt) + lin + L * (kernel(x) - kernel(xt) - klin);
  };
  spec.gradient_at_first = [=](std::span<const double> x, std::span<const double> xt) {
    Vector g = grad(xt);
    const Vector kx = kernel_grad(x);
    const Vector kt = kernel_grad(xt);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += L * (kx[i] - kt[i]);
    return g;
  };
  spec.minimize = [=](std::span<const double> xt) {
    const Vector g = grad(xt);
    Vector dual = kernel_grad(xt);
    for (std::size_t i = 0; i < dual.size(); ++i) dual[i] -= g[i] / L;
    return kernel_grad_inverse(dual);
  };
  return spec;
}

Vector finite_difference_gradient(const ScalarField& f, std::span<const double> x) {
  Vector xp(x.begin(), x.end());
  Vector g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double step = 1e-6 * (1.0 + std::abs(x[i]));
    const double orig = xp[i];
    xp[i] = orig + step;
    const double fp = f(xp);
    xp[i] = orig - step;
    const double fm = f(xp);
    xp[i] = orig;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

MajorizerReport validate_majorizer(const MajorizerSpec& spec, const ScalarField& f,
                                   const MajorizerSampler& sampler, std::size_t n_samples,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  MajorizerReport report;
  for (std::size_t s = 0; s < n_samples; ++s) {
    const auto [x, xt] = sampler(rng);
    const double f_xt = f(xt);
    const double f_x = f(x);
    const double g_tt = spec.evaluate(xt, xt);
    const double g_xt = spec.evaluate(x, xt);
    report.tightness = std::max(report.tightness, std::abs(g_tt - f_xt) / (1.0 + std::abs(f_xt)));
    report.domination = std::min(report.domination, (g_xt - f_x) / (1.0 + std::abs(f_x)));
    const Vector grad_g = spec.gradient_at_first(xt, xt);
    const Vector grad_f = finite_difference_gradient(f, xt);
    Vector diff(grad_g.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = grad_g[i] - grad_f[i];
    report.gradient_mismatch =
        std::max(report.gradient_mismatch, norm(diff) / (1.0 + norm(grad_f)));
    ++report.samples;
  }
  return report;
}

double three_point_check(const MajorizerSpec& spec, std::span<const double> z,
                         std::span<const double> u) {
  const Vector z_plus = spec.minimize(z);
  auto xi = [&](std::span<const double> x) { return spec.evaluate(x, z); };
  auto bregman = [&](std::span<const double> a, std::span<const double> b) {
    const Vector gb = spec.gradient_at_first(b, z);
    double lin = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) lin += gb[i] * (a[i] - b[i]);
    return xi(a) - xi(b) - lin;
  };
  const double f_z = xi(z);
  const Vector grad_z = spec.gradient_at_first(z, z);
  auto phi = [&](std::span<const double> x) {
    double lin = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) lin += grad_z[i] * (x[i] - z[i]);
    return f_z + lin;
  };
  const double lhs = phi(u) + bregman(u, z);
  const double rhs = phi(z_plus) + bregman(z_plus, z) + bregman(u, z_plus);
  return lhs - rhs;
}

}  // namespace bmme
