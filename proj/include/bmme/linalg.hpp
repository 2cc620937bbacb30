#pragma once

#include <vector>

#include "bmme/matrix.hpp"

// Small dense linear algebra on r x r matrices (r is the factorization rank,
// at most a few dozen).
namespace bmme::linalg {

/// W^T W.
Matrix gram(const Matrix& W);

/// Lower-triangular Cholesky factor; throws DomainError if `a` is not
/// numerically positive definite.
Matrix cholesky(const Matrix& a);

double logdet_spd(const Matrix& a);

Matrix spd_inverse(const Matrix& a);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Sweeps stop once the off-diagonal Frobenius mass falls below
/// `tol` times the Frobenius norm of the input.
std::vector<double> symmetric_eigenvalues(const Matrix& a, double tol = 1e-12);

/// Singular values by one-sided Jacobi, descending.
std::vector<double> singular_values(const Matrix& a);

}  // namespace bmme::linalg
