#pragma once

// Two classical dilations built on the factorization machinery:
//
//  * power dilation of a contraction A, A^n = V^* U^n V, realized on the
//    kernel K(m, n) = A^(n - m) over the truncated window {0, ..., N};
//  * Naimark dilation of a discrete POVM, Q = V^* P V with P a PVM.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "opkernel/factorization.hpp"

namespace opk {

/// Slack allowed above 1 in the contraction check.
inline constexpr double kContractionSlack = 1e-12;
/// Certification tolerance for ||A^n - V^* U^n V||_fro.
inline constexpr double kPowerTol = 1e-8;
/// Tolerance for POVM validation and the Naimark invariants.
inline constexpr double kPovmTol = 1e-10;

/// Throws ValidationError (with the spectral norm in the message) unless
/// ||A|| <= 1 + slack.  Returns the spectral norm.
double require_contraction(const CMatrix& a, double slack = kContractionSlack);

/// A^(k): A^k for k >= 0 and (A^*)^(-k) for k < 0.
CMatrix signed_power(const CMatrix& a, long k);

/// K(m, n) = A^(n - m) on labels "0", ..., "N".
OperatorKernel contraction_kernel(const CMatrix& a, std::size_t window);

/// Telescoping evaluation of <h, T h> for T = [A^(n - m)]:
///   sum_{k<n} (||t_k||^2 - ||A t_{k+1}||^2) + ||t_n||^2,
/// with tails t_k = h_k + A h_{k+1} + ... + A^{n-k} h_n.
double telescoping_quadratic(const CMatrix& a, std::span<const CVector> h);

/// ||t_1||^2 + (1 - ||A||^2) sum_{k>=2} ||t_k||^2, a lower bound for
/// telescoping_quadratic when A is a contraction.
double telescoping_lower_bound(const CMatrix& a, std::span<const CVector> h);

struct ShiftDilation {
  CMatrix a;
  std::size_t window = 0;
  DilationFactorization fact;
  /// Shift on L, U V_m = V_{m+1} on the span of V_0, ..., V_{N-1}.
  CMatrix shift;
  /// The embedding V = V_0 : H -> L.
  CMatrix embedding;
  /// ||U [V_0 .. V_{N-1}] - [V_1 .. V_N]||_fro.
  double shift_defect = 0.0;
  /// power_residuals[n - 1] = ||A^n - V^* U^n V||_fro for n = 1..N.
  std::vector<double> power_residuals;
  /// Largest n such that every residual up to n is within tolerance.
  std::size_t max_power = 0;
  bool polar = false;

  /// V^* U^n V.
  CMatrix compressed_power(std::size_t n) const;
};

struct PowerDilationOptions {
  double rank_tol = kDefaultRankTol;
  double power_tol = kPowerTol;
  /// Replace the least-squares shift by its unitary polar factor.
  bool polar = false;
};

/// Throws ValidationError for non-contractions or window < 2, and
/// ToleranceError when not even A^1 is reproduced.
ShiftDilation power_dilation(const CMatrix& a, std::size_t window,
                             const PowerDilationOptions& options = {});

class DiscretePOVM {
 public:
  /// Validates: every effect d x d, Hermitian and PSD within 1e-10, and
  /// sum of effects equal to I within 1e-10 (Frobenius).
  DiscretePOVM(std::vector<std::string> atoms, std::vector<CMatrix> effects,
               double tol = kPovmTol);

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return effects_.size(); }
  const IndexSet& atoms() const noexcept { return atoms_; }
  const CMatrix& effect(std::size_t j) const { return effects_.at(j); }
  const std::vector<CMatrix>& effects() const noexcept { return effects_; }

  /// Q(subset) = sum of the subset's effects.
  CMatrix measure(std::span<const std::size_t> subset) const;

 private:
  IndexSet atoms_;
  std::vector<CMatrix> effects_;
  std::size_t dim_ = 0;
};

struct NaimarkDilation {
  DiscretePOVM povm;
  DilationFactorization fact;
  /// V = sum_j V_j : H -> L, the image of the whole outcome set.
  CMatrix embedding;
  /// P({j}), orthogonal projection of L onto the range of V_j.
  std::vector<CMatrix> projections;

  double isometry_defect = 0.0;
  /// max_j ||P_j - P_j^*||_fro and max_j ||P_j - P_j^2||_fro.
  double selfadjoint_defect = 0.0;
  double idempotent_defect = 0.0;
  /// max_{i != j} ||P_i P_j||_fro.
  double orthogonality_defect = 0.0;
  /// ||sum_j P_j - I||_fro.
  double completeness_defect = 0.0;
  /// ||Q({j}) - V^* P_j V||_fro per atom.
  std::vector<double> compression_defects;
};

/// Throws ToleranceError if any invariant exceeds tol.
NaimarkDilation naimark_dilate(const DiscretePOVM& povm, double tol = kPovmTol);

/// V^* (sum_{j in subset} P_j) V.  Throws DimensionError on unknown atoms.
CMatrix povm_compress(const NaimarkDilation& dil, std::span<const std::string> subset);
CMatrix povm_compress(const NaimarkDilation& dil, std::span<const std::size_t> subset);

}  // namespace opk
