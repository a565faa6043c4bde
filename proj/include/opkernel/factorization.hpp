#pragma once

// Minimal dilation factorization K(s, t) = V_s^* V_t of a p.d. operator
// kernel.  The dilation space L is C^r with r the numerical rank of the block
// Gram matrix; its standard basis plays the role of a fixed orthonormal basis
// of the RKHS of the scalar lift, through the isomorphism
// Kt(., (s, a)) <-> V_s a.

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "opkernel/kernel.hpp"

namespace opk {

/// Default relative eigenvalue cut used to pick the rank.
inline constexpr double kDefaultRankTol = 1e-10;

/// Reconstruction bound: max ||K(s_i, s_j) - V_i^* V_j||_fro <= 1e-9 (1 + ||G||_fro).
inline constexpr double kResidualTol = 1e-9;

/// Coordinates of an element of the dilation space L = C^r.
struct DilationVector {
  CVector coords;
};

class DilationFactorization {
 public:
  const OperatorKernel& kernel() const noexcept { return kernel_; }
  std::size_t rank() const noexcept { return rank_; }
  std::size_t size() const noexcept { return factors_.size(); }
  std::size_t dim() const noexcept { return kernel_.dim(); }

  /// V_i as an r x d matrix.
  const CMatrix& factor(std::size_t i) const;
  /// [V_1 ... V_m], r x (m d).
  CMatrix stacked() const;

  double truncation_tol() const noexcept { return truncation_tol_; }
  double residual() const noexcept { return residual_; }
  double gram_norm() const noexcept { return gram_norm_; }

 private:
  friend DilationFactorization factorize(const OperatorKernel&, double);
  DilationFactorization(OperatorKernel kernel, std::vector<CMatrix> factors, std::size_t rank,
                        double truncation_tol, double residual, double gram_norm)
      : kernel_(std::move(kernel)),
        factors_(std::move(factors)),
        rank_(rank),
        truncation_tol_(truncation_tol),
        residual_(residual),
        gram_norm_(gram_norm) {}

  OperatorKernel kernel_;
  std::vector<CMatrix> factors_;
  std::size_t rank_ = 0;
  double truncation_tol_ = 0.0;
  double residual_ = 0.0;
  double gram_norm_ = 0.0;
};

/// Spectral factorization of the block Gram matrix G = U diag(lambda) U^*.
///
/// Keeps eigenvalues lambda > tol * lambda_max, sets F = diag(sqrt(lambda)) U^*
/// and splits F into the column blocks V_i.  Throws NotPositiveDefinite when
/// the kernel fails is_positive_definite(kernel, tol), and ToleranceError
/// when the reconstruction residual exceeds 1e-9 (1 + ||G||_fro).
DilationFactorization factorize(const OperatorKernel& kernel, double tol = kDefaultRankTol);

/// V_i^* V_j.
CMatrix reconstruct(const DilationFactorization& fact, std::size_t i, std::size_t j);

/// V_i a, i.e. the generator Kt(., (s_i, a)) in L coordinates.
DilationVector apply_V(const DilationFactorization& fact, std::size_t i, const CVector& a);

/// V_i^* x.
CVector apply_V_adjoint(const DilationFactorization& fact, std::size_t i, const DilationVector& x);

/// (V_{s_1}^* V_{t_1}) ... (V_{s_n}^* V_{t_n}) b, evaluated right to left
/// through L.
CVector chain_product(const DilationFactorization& fact,
                      std::span<const std::pair<std::size_t, std::size_t>> pairs,
                      const CVector& b);

/// Image of a section under the isomorphism onto L: sum_i c_i V_{s_i} a_i.
DilationVector embed(const DilationFactorization& fact, const KernelSection& f);

/// V_to V_from^* F, returned as the single generator Kt(., (to, V_from^* F)).
KernelSection transfer_apply(const DilationFactorization& fact, std::size_t to, std::size_t from,
                             const KernelSection& f);

/// V_s V_s^* F.  A projection whenever K(s, s) = I.
KernelSection projection_apply(const DilationFactorization& fact, std::size_t s,
                               const KernelSection& f);

/// sum_k (V_i^* e_k)(V_j^* e_k)^* over the standard basis of L.
CMatrix frame_reconstruct(const DilationFactorization& fact, std::size_t i, std::size_t j);

/// ||V_i^* V_i - I||_fro.
double isometry_defect(const DilationFactorization& fact, std::size_t i);

}  // namespace opk
