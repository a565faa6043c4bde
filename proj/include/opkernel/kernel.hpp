#pragma once

// Operator-valued kernels K : S x S -> B(H) on a finite ordered index set S,
// with H = C^d.  The scalar lift
//
//     Kt((s, a), (t, b)) = <a, K(s, t) b>
//
// is a scalar p.d. kernel on S x H whenever K is p.d., and elements of its
// RKHS are represented here as finite combinations of kernel sections
// Kt(., (t, b)).

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "opkernel/linalg.hpp"

namespace opk {

/// Finite ordered set of distinct labels.
class IndexSet {
 public:
  IndexSet() = default;
  explicit IndexSet(std::vector<std::string> labels);

  /// Labels "0", "1", ..., "n-1".
  static IndexSet range(std::size_t n);

  std::size_t size() const noexcept { return labels_.size(); }
  const std::string& label(std::size_t i) const { return labels_.at(i); }
  const std::vector<std::string>& labels() const noexcept { return labels_; }

  bool contains(const std::string& label) const { return lookup_.contains(label); }
  /// Throws DimensionError for unknown labels.
  std::size_t index_of(const std::string& label) const;

  friend bool operator==(const IndexSet& a, const IndexSet& b) { return a.labels_ == b.labels_; }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> lookup_;
};

/// Relative tolerance for the Hermitian symmetry check at construction.
inline constexpr double kKernelSymmetryTol = 1e-12;

/// Default tolerance of the positive-definiteness gate, relative to 1 + ||G||_fro.
inline constexpr double kDefaultPdTol = 1e-10;

/// A B(C^d)-valued kernel on a finite index set.
///
/// Copies share the immutable block table, so kernels are cheap to pass
/// around by value and sections can hold on to the kernel they belong to.
class OperatorKernel {
 public:
  /// blocks is the row-major m x m table, blocks[i * m + j] = K(s_i, s_j).
  /// Throws DimensionError on shape problems and ValidationError when
  /// K(s_j, s_i) differs from K(s_i, s_j)^* by more than 1e-12 (relative).
  OperatorKernel(IndexSet index_set, std::size_t dim, std::vector<CMatrix> blocks);

  /// Builds the table from the pairs i <= j; the lower triangle is filled
  /// with adjoints.
  static OperatorKernel from_upper(IndexSet index_set, std::size_t dim,
                                   const std::function<CMatrix(std::size_t, std::size_t)>& upper);

  /// K(s_i, s_j) = W_i^* W_j for a family of r x d factors.
  static OperatorKernel from_factors(IndexSet index_set, std::span<const CMatrix> factors);

  std::size_t size() const noexcept { return data_->index_set.size(); }
  std::size_t dim() const noexcept { return data_->dim; }
  const IndexSet& index_set() const noexcept { return data_->index_set; }

  const CMatrix& block(std::size_t i, std::size_t j) const;
  const CMatrix& block(const std::string& s, const std::string& t) const;

  /// True when both handles refer to the same block table.
  bool same_as(const OperatorKernel& other) const noexcept { return data_ == other.data_; }

 private:
  struct Data {
    IndexSet index_set;
    std::size_t dim = 0;
    std::vector<CMatrix> blocks;
  };
  explicit OperatorKernel(std::shared_ptr<const Data> data) : data_(std::move(data)) {}

  std::shared_ptr<const Data> data_;
};

/// A point (s, a) of S x H.
struct LiftedPoint {
  std::string index;
  CVector vector;
};

/// Kt(p, q) = <a, K(s, t) b> for p = (s, a), q = (t, b).
Complex lift(const OperatorKernel& kernel, const LiftedPoint& p, const LiftedPoint& q);

/// The (m d) x (m d) matrix whose (i, j) block is K(s_i, s_j).
CMatrix block_gram(const OperatorKernel& kernel);

/// sum_{i,j} <a_i, K(s_i, s_j) a_j> over one vector per index.
Complex quadratic_form(const OperatorKernel& kernel, std::span<const CVector> vectors);

struct PdReport {
  bool positive = false;
  double min_eig = 0.0;
  double gram_norm = 0.0;
};

/// Positive iff lambda_min(G) >= -tol (1 + ||G||_fro).
PdReport is_positive_definite(const OperatorKernel& kernel, double tol = kDefaultPdTol);

/// Finite combination F = sum_i c_i Kt(., (s_i, a_i)) in the RKHS of the
/// scalar lift.
class KernelSection {
 public:
  struct Term {
    Complex coeff;
    std::size_t index;
    CVector vector;
  };

  explicit KernelSection(OperatorKernel kernel) : kernel_(std::move(kernel)) {}

  /// The single generator Kt(., p).
  static KernelSection generator(OperatorKernel kernel, const LiftedPoint& p);

  KernelSection& add(Complex coeff, const LiftedPoint& p);
  KernelSection& add(Complex coeff, std::size_t index, CVector vector);

  const OperatorKernel& kernel() const noexcept { return kernel_; }
  const std::vector<Term>& terms() const noexcept { return terms_; }

  KernelSection scaled(Complex factor) const;
  /// Concatenation of terms.  Both sections must share the kernel.
  KernelSection plus(const KernelSection& other) const;

 private:
  OperatorKernel kernel_;
  std::vector<Term> terms_;
};

/// F(q) = sum_i c_i Kt(q, (s_i, a_i)).  Conjugate-linear in q's vector.
Complex section_evaluate(const KernelSection& f, const LiftedPoint& q);

/// <F, G> = sum_{i,j} conj(c_i) d_j Kt((s_i, a_i), (t_j, b_j)).
Complex section_inner(const KernelSection& f, const KernelSection& g);

}  // namespace opk
