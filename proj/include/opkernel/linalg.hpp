#pragma once

// Dense complex linear algebra used throughout the library.  Vectors and
// matrices are plain Eigen dynamic types; the free functions below add the
// checks and conventions the rest of the code relies on (physics inner
// product, descending Hermitian spectra, minimum-norm least squares).

#include <complex>
#include <vector>

#include <Eigen/Dense>

#include "opkernel/error.hpp"

namespace opk {

using Complex = std::complex<double>;
using CVector = Eigen::VectorXcd;
using CMatrix = Eigen::MatrixXcd;

/// <a, b> = sum conj(a_i) b_i.  Conjugate-linear in the first slot.
Complex inner(const CVector& a, const CVector& b);

CMatrix adjoint(const CMatrix& m);

double norm_fro(const CMatrix& m);

/// Largest singular value.
double spectral_norm(const CMatrix& m);

/// ||M - M*||_fro.
double hermitian_defect(const CMatrix& m);

/// Spectral decomposition of a Hermitian matrix.
///
/// eigenvalues are sorted in descending order and eigenvectors holds the
/// matching unit eigenvectors as columns, so that
/// M = eigenvectors * diag(eigenvalues) * eigenvectors^*.
struct HermEig {
  std::vector<double> eigenvalues;
  CMatrix eigenvectors;

  double min_eigenvalue() const;
  double max_eigenvalue() const;
};

/// Relative Hermiticity tolerance accepted by herm_eig.
inline constexpr double kHermitianInputTol = 1e-8;

/// Decomposes (M + M*)/2.  Throws DimensionError for non-square input and
/// ValidationError when ||M - M*||_fro > 1e-8 (1 + ||M||_fro).
HermEig herm_eig(const CMatrix& m);

/// Minimum-norm X minimizing ||A X - B||_fro.
CMatrix lstsq(const CMatrix& a, const CMatrix& b);

/// Numerical rank: singular values above rel_tol * sigma_max.
Eigen::Index numerical_rank(const CMatrix& m, double rel_tol);

/// Orthonormal basis (columns) for the span of the left singular vectors
/// whose singular values exceed abs_cut.
CMatrix range_basis(const CMatrix& m, double abs_cut);

/// Unitary polar factor W Z* of M = W S Z*.
CMatrix polar_unitary(const CMatrix& m);

/// Hermitian square root of a positive semidefinite matrix; negative
/// eigenvalues from roundoff are clamped to zero.
CMatrix psd_sqrt(const CMatrix& m);

/// ||M - I||_fro for square M.
double identity_defect(const CMatrix& m);

}  // namespace opk
