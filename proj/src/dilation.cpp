#include "opkernel/dilation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

namespace opk {

double require_contraction(const CMatrix& a, double slack) {
  if (a.rows() != a.cols() || a.rows() == 0) {
    throw DimensionError("contraction must be a nonempty square matrix");
  }
  const double norm = spectral_norm(a);
  if (norm > 1.0 + slack) {
    std::ostringstream msg;
    msg.precision(17);
    msg << "not a contraction: spectral norm " << norm << " > 1";
    throw ValidationError(msg.str());
  }
  return norm;
}

CMatrix signed_power(const CMatrix& a, long k) {
  const CMatrix base = k >= 0 ? a : a.adjoint();
  CMatrix out = CMatrix::Identity(a.rows(), a.cols());
  for (long n = 0; n < std::labs(k); ++n) out = out * base;
  return out;
}

OperatorKernel contraction_kernel(const CMatrix& a, std::size_t window) {
  require_contraction(a);
  if (window < 1) throw ValidationError("contraction_kernel: window must be at least 1");
  // powers[k] = A^k for k = 0..N; negative offsets use adjoints.
  std::vector<CMatrix> powers(window + 1);
  powers[0] = CMatrix::Identity(a.rows(), a.cols());
  for (std::size_t k = 1; k <= window; ++k) powers[k] = powers[k - 1] * a;
  return OperatorKernel::from_upper(IndexSet::range(window + 1), static_cast<std::size_t>(a.rows()),
                                    [&](std::size_t m, std::size_t n) { return powers[n - m]; });
}

namespace {

// tails[k] = h_k + A h_{k+1} + ... + A^{n-1-k} h_{n-1} (zero-based).
std::vector<CVector> telescoping_tails(const CMatrix& a, std::span<const CVector> h) {
  if (h.empty()) return {};
  for (const auto& v : h) {
    if (v.size() != a.cols()) {
      throw DimensionError("telescoping: vector dimension " + std::to_string(v.size()) +
                           " does not match operator dimension " + std::to_string(a.cols()));
    }
  }
  std::vector<CVector> tails(h.size());
  tails.back() = h.back();
  for (std::size_t k = h.size() - 1; k-- > 0;) tails[k] = h[k] + a * tails[k + 1];
  return tails;
}

}  // namespace

double telescoping_quadratic(const CMatrix& a, std::span<const CVector> h) {
  require_contraction(a);
  const auto tails = telescoping_tails(a, h);
  double total = 0.0;
  for (std::size_t k = 0; k < tails.size(); ++k) {
    total += tails[k].squaredNorm();
    if (k + 1 < tails.size()) total -= (a * tails[k + 1]).squaredNorm();
  }
  return total;
}

double telescoping_lower_bound(const CMatrix& a, std::span<const CVector> h) {
  const double norm = require_contraction(a);
  const auto tails = telescoping_tails(a, h);
  if (tails.empty()) return 0.0;
  double tail_sum = 0.0;
  for (std::size_t k = 1; k < tails.size(); ++k) tail_sum += tails[k].squaredNorm();
  return tails[0].squaredNorm() + (1.0 - norm * norm) * tail_sum;
}

CMatrix ShiftDilation::compressed_power(std::size_t n) const {
  CMatrix image = embedding;
  for (std::size_t k = 0; k < n; ++k) image = shift * image;
  return embedding.adjoint() * image;
}

ShiftDilation power_dilation(const CMatrix& a, std::size_t window,
                             const PowerDilationOptions& options) {
  require_contraction(a);
  if (window < 2) throw ValidationError("power_dilation: window must be at least 2");

  DilationFactorization fact = factorize(contraction_kernel(a, window), options.rank_tol);
  const auto d = a.rows();
  const auto r = static_cast<Eigen::Index>(fact.rank());
  const auto n_shift = static_cast<Eigen::Index>(window);

  CMatrix domain(r, n_shift * d);
  CMatrix target(r, n_shift * d);
  for (Eigen::Index m = 0; m < n_shift; ++m) {
    domain.middleCols(m * d, d) = fact.factor(static_cast<std::size_t>(m));
    target.middleCols(m * d, d) = fact.factor(static_cast<std::size_t>(m + 1));
  }
  // U X = Y  <=>  X^* U^* = Y^*; the minimum-norm solution vanishes off span X.
  CMatrix shift = lstsq(domain.adjoint(), target.adjoint()).adjoint();
  if (options.polar) shift = polar_unitary(shift);

  ShiftDilation out{a, window, std::move(fact), std::move(shift), CMatrix(), 0.0, {}, 0, options.polar};
  out.embedding = out.fact.factor(0);
  out.shift_defect = (out.shift * domain - target).norm();

  CMatrix image = out.embedding;
  CMatrix power = CMatrix::Identity(d, d);
  bool contiguous = true;
  for (std::size_t n = 1; n <= window; ++n) {
    image = out.shift * image;
    power = power * a;
    const double residual = (power - out.embedding.adjoint() * image).norm();
    out.power_residuals.push_back(residual);
    if (contiguous && residual <= options.power_tol) {
      out.max_power = n;
    } else {
      contiguous = false;
    }
  }
  if (out.max_power == 0) {
    throw ToleranceError("power_dilation: A is not reproduced by V^* U V", out.power_residuals[0],
                         options.power_tol);
  }
  return out;
}

DiscretePOVM::DiscretePOVM(std::vector<std::string> atoms, std::vector<CMatrix> effects, double tol)
    : atoms_(std::move(atoms)), effects_(std::move(effects)) {
  if (atoms_.size() == 0) throw ValidationError("POVM: at least one atom is required");
  if (effects_.size() != atoms_.size()) {
    throw DimensionError("POVM: expected one effect per atom");
  }
  dim_ = static_cast<std::size_t>(effects_[0].rows());
  if (dim_ == 0) throw DimensionError("POVM: effects must be nonempty");
  CMatrix total = CMatrix::Zero(effects_[0].rows(), effects_[0].rows());
  for (std::size_t j = 0; j < effects_.size(); ++j) {
    const CMatrix& q = effects_[j];
    if (q.rows() != total.rows() || q.cols() != total.cols()) {
      throw DimensionError("POVM: effect '" + atoms_.label(j) + "' has the wrong shape");
    }
    if (hermitian_defect(q) > tol) {
      throw ValidationError("POVM: effect '" + atoms_.label(j) + "' is not Hermitian");
    }
    const double min_eig = herm_eig(q).min_eigenvalue();
    if (min_eig < -tol) {
      throw ValidationError("POVM: effect '" + atoms_.label(j) +
                            "' is not positive semidefinite (min eigenvalue " +
                            std::to_string(min_eig) + ")");
    }
    total += q;
  }
  const double defect = identity_defect(total);
  if (defect > tol) {
    throw ValidationError("POVM: effects do not sum to the identity (||sum Q - I||_fro = " +
                          std::to_string(defect) + ")");
  }
}

CMatrix DiscretePOVM::measure(std::span<const std::size_t> subset) const {
  const auto d = static_cast<Eigen::Index>(dim_);
  CMatrix out = CMatrix::Zero(d, d);
  for (std::size_t j : subset) out += effects_.at(j);
  return out;
}

NaimarkDilation naimark_dilate(const DiscretePOVM& povm, double tol) {
  // Atoms are disjoint, so K(i, j) = Q(atom_i cap atom_j) vanishes off the diagonal.
  const auto d = static_cast<Eigen::Index>(povm.dim());
  OperatorKernel kernel = OperatorKernel::from_upper(
      povm.atoms(), povm.dim(), [&](std::size_t i, std::size_t j) -> CMatrix {
        return i == j ? povm.effect(i) : CMatrix::Zero(d, d);
      });
  DilationFactorization fact = factorize(kernel, kDefaultRankTol);
  const auto r = static_cast<Eigen::Index>(fact.rank());

  CMatrix embedding = CMatrix::Zero(r, d);
  for (std::size_t j = 0; j < povm.size(); ++j) embedding += fact.factor(j);

  // Retained singular values of V_j are at least sqrt(tol * lambda_max).
  double lambda_max = 0.0;
  for (const auto& q : povm.effects()) lambda_max = std::max(lambda_max, herm_eig(q).max_eigenvalue());
  const double cut = 0.5 * std::sqrt(kDefaultRankTol * lambda_max);

  std::vector<CMatrix> projections;
  projections.reserve(povm.size());
  for (std::size_t j = 0; j < povm.size(); ++j) {
    const CMatrix basis = range_basis(fact.factor(j), cut);
    projections.push_back(basis * basis.adjoint());
  }

  NaimarkDilation out{povm, std::move(fact), std::move(embedding), std::move(projections),
                      0.0, 0.0, 0.0, 0.0, 0.0, {}};
  out.isometry_defect = identity_defect(out.embedding.adjoint() * out.embedding);
  CMatrix sum = CMatrix::Zero(r, r);
  for (std::size_t j = 0; j < out.projections.size(); ++j) {
    const CMatrix& p = out.projections[j];
    out.selfadjoint_defect = std::max(out.selfadjoint_defect, hermitian_defect(p));
    out.idempotent_defect = std::max(out.idempotent_defect, (p - p * p).norm());
    for (std::size_t k = 0; k < j; ++k) {
      out.orthogonality_defect =
          std::max(out.orthogonality_defect, (p * out.projections[k]).norm());
    }
    out.compression_defects.push_back(
        (povm.effect(j) - out.embedding.adjoint() * p * out.embedding).norm());
    sum += p;
  }
  out.completeness_defect = identity_defect(sum);

  const double worst_compression =
      out.compression_defects.empty()
          ? 0.0
          : *std::max_element(out.compression_defects.begin(), out.compression_defects.end());
  const double worst = std::max({out.isometry_defect, out.selfadjoint_defect, out.idempotent_defect,
                                 out.orthogonality_defect, out.completeness_defect,
                                 worst_compression});
  if (worst > tol) {
    throw ToleranceError("naimark_dilate: dilation invariants violated (worst defect " +
                             std::to_string(worst) + ")",
                         worst, tol);
  }
  return out;
}

CMatrix povm_compress(const NaimarkDilation& dil, std::span<const std::size_t> subset) {
  const auto r = static_cast<Eigen::Index>(dil.fact.rank());
  CMatrix p = CMatrix::Zero(r, r);
  for (std::size_t j : subset) {
    if (j >= dil.projections.size()) throw DimensionError("povm_compress: atom index out of range");
    p += dil.projections[j];
  }
  return dil.embedding.adjoint() * p * dil.embedding;
}

CMatrix povm_compress(const NaimarkDilation& dil, std::span<const std::string> subset) {
  std::vector<std::size_t> indices;
  indices.reserve(subset.size());
  for (const auto& label : subset) indices.push_back(dil.povm.atoms().index_of(label));
  return povm_compress(dil, std::span<const std::size_t>(indices));
}

}  // namespace opk
