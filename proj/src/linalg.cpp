#include "opkernel/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace opk {

Complex inner(const CVector& a, const CVector& b) {
  if (a.size() != b.size()) {
    throw DimensionError("inner: dimension mismatch (" + std::to_string(a.size()) + " vs " +
                         std::to_string(b.size()) + ")");
  }
  // Eigen's dot() conjugates the first argument.
  return a.dot(b);
}

CMatrix adjoint(const CMatrix& m) { return m.adjoint(); }

double norm_fro(const CMatrix& m) { return m.norm(); }

double spectral_norm(const CMatrix& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  return svd.singularValues()(0);
}

double hermitian_defect(const CMatrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("hermitian_defect: matrix is not square");
  }
  return (m - m.adjoint()).norm();
}

double HermEig::min_eigenvalue() const {
  return eigenvalues.empty() ? 0.0 : eigenvalues.back();
}

double HermEig::max_eigenvalue() const {
  return eigenvalues.empty() ? 0.0 : eigenvalues.front();
}

HermEig herm_eig(const CMatrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("herm_eig: matrix is " + std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()) + ", expected square");
  }
  if (!m.allFinite()) throw ValidationError("herm_eig: matrix has non-finite entries");
  const double defect = hermitian_defect(m);
  if (defect > kHermitianInputTol * (1.0 + m.norm())) {
    throw ValidationError("herm_eig: matrix is not Hermitian (||M - M*||_fro = " +
                          std::to_string(defect) + ")");
  }
  const Eigen::Index n = m.rows();
  HermEig out;
  if (n == 0) {
    out.eigenvectors = CMatrix(0, 0);
    return out;
  }
  const CMatrix sym = 0.5 * (m + m.adjoint());
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw ValidationError("herm_eig: eigensolver did not converge");
  }
  // Eigen returns ascending order.
  out.eigenvalues.resize(static_cast<std::size_t>(n));
  out.eigenvectors.resize(n, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    out.eigenvalues[static_cast<std::size_t>(k)] = solver.eigenvalues()(n - 1 - k);
    out.eigenvectors.col(k) = solver.eigenvectors().col(n - 1 - k);
  }
  return out;
}

CMatrix lstsq(const CMatrix& a, const CMatrix& b) {
  if (a.rows() != b.rows()) {
    throw DimensionError("lstsq: A has " + std::to_string(a.rows()) + " rows, B has " +
                         std::to_string(b.rows()));
  }
  if (a.cols() == 0 || b.cols() == 0) return CMatrix::Zero(a.cols(), b.cols());
  if (a.rows() == 0) return CMatrix::Zero(a.cols(), b.cols());
  Eigen::CompleteOrthogonalDecomposition<CMatrix> cod(a);
  return cod.solve(b);
}

Eigen::Index numerical_rank(const CMatrix& m, double rel_tol) {
  if (m.size() == 0) return 0;
  Eigen::JacobiSVD<CMatrix> svd(m);
  const auto& sv = svd.singularValues();
  if (sv(0) <= 0.0) return 0;
  const double cut = rel_tol * sv(0);
  Eigen::Index rank = 0;
  for (Eigen::Index k = 0; k < sv.size(); ++k) {
    if (sv(k) > cut) ++rank;
  }
  return rank;
}

CMatrix range_basis(const CMatrix& m, double abs_cut) {
  if (m.size() == 0) return CMatrix(m.rows(), 0);
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeThinU);
  const auto& sv = svd.singularValues();
  Eigen::Index rank = 0;
  while (rank < sv.size() && sv(rank) > abs_cut) ++rank;
  return svd.matrixU().leftCols(rank);
}

CMatrix polar_unitary(const CMatrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("polar_unitary: matrix is not square");
  }
  if (m.size() == 0) return m;
  Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  return svd.matrixU() * svd.matrixV().adjoint();
}

CMatrix psd_sqrt(const CMatrix& m) {
  const HermEig eig = herm_eig(m);
  const Eigen::Index n = m.rows();
  Eigen::VectorXd root(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    root(k) = std::sqrt(std::max(0.0, eig.eigenvalues[static_cast<std::size_t>(k)]));
  }
  return eig.eigenvectors * root.asDiagonal() * eig.eigenvectors.adjoint();
}

double identity_defect(const CMatrix& m) {
  if (m.rows() != m.cols()) {
    throw DimensionError("identity_defect: matrix is not square");
  }
  return (m - CMatrix::Identity(m.rows(), m.cols())).norm();
}

}  // namespace opk
