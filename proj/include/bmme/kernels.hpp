#pragma once

// Dense kernels behind the NMF solvers.
//
// The functions in `bmme::kernels` are OpenMP-parallel over output rows. Every
// output entry is produced by exactly one thread with a fixed reduction order,
// so results are bit-identical for any thread count. The functions in
// `bmme::kernels::reference` are straightforward serial versions built from
// separate matrix products and elementwise passes; they exist to check the
// fused kernels and as the baseline in bench/.

#include "bmme/divergence.hpp"
#include "bmme/matrix.hpp"

namespace bmme::kernels {

/// A * B.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Numerator and denominator of the multiplicative update of F in X ~ F G:
///   numerator   = (X o V^{beta-2}) G^T
///   denominator = V^{beta-1} G^T
/// with V = F G. Both are rows(F) x cols(F).
struct MuTerms {
  Matrix numerator;
  Matrix denominator;
};

MuTerms mu_terms_rows(const Matrix& X, const Matrix& F, const Matrix& G, Beta beta);

/// max(eps, F o numerator / denominator), fused row by row.
Matrix mu_update_rows(const Matrix& X, const Matrix& F, const Matrix& G, Beta beta,
                      double epsilon);

/// Sum of d_beta(X_ij, V_ij); per-row partial sums are combined in row order.
double divergence_sum(const Matrix& X, const Matrix& V, Beta beta);

/// Elementwise max(0, curr - prev) together with its Frobenius norm.
struct PositiveStep {
  Matrix step;
  double norm = 0.0;
};

PositiveStep positive_part_difference(const Matrix& curr, const Matrix& prev);

/// curr + alpha * step.
Matrix axpy(const Matrix& curr, double alpha, const Matrix& step);

namespace reference {

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);  // a^T b
Matrix matmul_nt(const Matrix& a, const Matrix& b);  // a b^T

/// Textbook H <- max(eps, H o [W^T (X / V^{2-beta})] / [W^T V^{beta-1}]).
Matrix mu_update_h(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta,
                   double epsilon);

/// Textbook W <- max(eps, W o [(X / V^{2-beta}) H^T] / [V^{beta-1} H^T]).
Matrix mu_update_w(const Matrix& X, const Matrix& W, const Matrix& H, Beta beta,
                   double epsilon);

double divergence_sum(const Matrix& X, const Matrix& V, Beta beta);

}  // namespace reference
}  // namespace bmme::kernels
