#include "opkernel/factorization.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace opk {

namespace {

void check_index(const DilationFactorization& fact, std::size_t i) {
  if (i >= fact.size()) {
    throw DimensionError("factor index " + std::to_string(i) + " out of range (size " +
                         std::to_string(fact.size()) + ")");
  }
}

void check_h(const DilationFactorization& fact, const CVector& a) {
  if (static_cast<std::size_t>(a.size()) != fact.dim()) {
    throw DimensionError("vector has dimension " + std::to_string(a.size()) + ", expected " +
                         std::to_string(fact.dim()));
  }
}

void check_l(const DilationFactorization& fact, const DilationVector& x) {
  if (static_cast<std::size_t>(x.coords.size()) != fact.rank()) {
    throw DimensionError("dilation vector has dimension " + std::to_string(x.coords.size()) +
                         ", expected rank " + std::to_string(fact.rank()));
  }
}

}  // namespace

const CMatrix& DilationFactorization::factor(std::size_t i) const {
  check_index(*this, i);
  return factors_[i];
}

CMatrix DilationFactorization::stacked() const {
  const auto d = static_cast<Eigen::Index>(dim());
  CMatrix out(static_cast<Eigen::Index>(rank_), d * static_cast<Eigen::Index>(factors_.size()));
  for (std::size_t i = 0; i < factors_.size(); ++i) {
    out.middleCols(static_cast<Eigen::Index>(i) * d, d) = factors_[i];
  }
  return out;
}

DilationFactorization factorize(const OperatorKernel& kernel, double tol) {
  const CMatrix g = block_gram(kernel);
  const double gram_norm = g.norm();
  const HermEig eig = herm_eig(g);
  const double min_eig = eig.min_eigenvalue();
  if (min_eig < -tol * (1.0 + gram_norm)) {
    throw NotPositiveDefinite(
        "factorize: kernel is not positive definite (min eigenvalue " + std::to_string(min_eig) + ")",
        min_eig);
  }

  const double lambda_max = eig.max_eigenvalue();
  std::size_t rank = 0;
  if (lambda_max > 0.0) {
    const double cut = tol * lambda_max;
    while (rank < eig.eigenvalues.size() && eig.eigenvalues[rank] > cut) ++rank;
  }

  const auto r = static_cast<Eigen::Index>(rank);
  const auto d = static_cast<Eigen::Index>(kernel.dim());
  Eigen::VectorXd root(r);
  for (Eigen::Index k = 0; k < r; ++k) root(k) = std::sqrt(eig.eigenvalues[static_cast<std::size_t>(k)]);
  const CMatrix stacked = root.asDiagonal() * eig.eigenvectors.leftCols(r).adjoint();

  std::vector<CMatrix> factors(kernel.size());
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    factors[i] = stacked.middleCols(static_cast<Eigen::Index>(i) * d, d);
  }

  double residual = 0.0;
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    for (std::size_t j = 0; j < kernel.size(); ++j) {
      const CMatrix approx = factors[i].adjoint() * factors[j];
      residual = std::max(residual, (kernel.block(i, j) - approx).norm());
    }
  }
  const double bound = kResidualTol * (1.0 + gram_norm);
  if (residual > bound) {
    throw ToleranceError("factorize: reconstruction residual " + std::to_string(residual) +
                             " exceeds bound " + std::to_string(bound),
                         residual, bound);
  }
  return DilationFactorization(kernel, std::move(factors), rank, tol, residual, gram_norm);
}

CMatrix reconstruct(const DilationFactorization& fact, std::size_t i, std::size_t j) {
  return fact.factor(i).adjoint() * fact.factor(j);
}

DilationVector apply_V(const DilationFactorization& fact, std::size_t i, const CVector& a) {
  check_h(fact, a);
  return DilationVector{fact.factor(i) * a};
}

CVector apply_V_adjoint(const DilationFactorization& fact, std::size_t i, const DilationVector& x) {
  check_l(fact, x);
  return fact.factor(i).adjoint() * x.coords;
}

CVector chain_product(const DilationFactorization& fact,
                      std::span<const std::pair<std::size_t, std::size_t>> pairs,
                      const CVector& b) {
  check_h(fact, b);
  for (const auto& [s, t] : pairs) {
    check_index(fact, s);
    check_index(fact, t);
  }
  CVector v = b;
  for (auto it = pairs.rbegin(); it != pairs.rend(); ++it) {
    v = apply_V_adjoint(fact, it->first, apply_V(fact, it->second, v));
  }
  return v;
}

DilationVector embed(const DilationFactorization& fact, const KernelSection& f) {
  if (!f.kernel().same_as(fact.kernel())) {
    throw ValidationError("embed: section belongs to a different kernel");
  }
  CVector x = CVector::Zero(static_cast<Eigen::Index>(fact.rank()));
  for (const auto& term : f.terms()) {
    x += term.coeff * (fact.factor(term.index) * term.vector);
  }
  return DilationVector{std::move(x)};
}

KernelSection transfer_apply(const DilationFactorization& fact, std::size_t to, std::size_t from,
                             const KernelSection& f) {
  check_index(fact, to);
  check_index(fact, from);
  CVector image = apply_V_adjoint(fact, from, embed(fact, f));
  KernelSection out(fact.kernel());
  out.add(Complex{1.0, 0.0}, to, std::move(image));
  return out;
}

KernelSection projection_apply(const DilationFactorization& fact, std::size_t s,
                               const KernelSection& f) {
  return transfer_apply(fact, s, s, f);
}

CMatrix frame_reconstruct(const DilationFactorization& fact, std::size_t i, std::size_t j) {
  const CMatrix& vi = fact.factor(i);
  const CMatrix& vj = fact.factor(j);
  const auto d = static_cast<Eigen::Index>(fact.dim());
  CMatrix out = CMatrix::Zero(d, d);
  // V^* e_k is the conjugated k-th row of V.
  for (Eigen::Index k = 0; k < static_cast<Eigen::Index>(fact.rank()); ++k) {
    const CVector left = vi.row(k).adjoint();
    const CVector right = vj.row(k).adjoint();
    out += left * right.adjoint();
  }
  return out;
}

double isometry_defect(const DilationFactorization& fact, std::size_t i) {
  return identity_defect(reconstruct(fact, i, i));
}

}  // namespace opk
