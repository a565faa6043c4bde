#include "opkernel/kernel.hpp"

#include <algorithm>
#include <string>

namespace opk {

IndexSet::IndexSet(std::vector<std::string> labels) : labels_(std::move(labels)) {
  lookup_.reserve(labels_.size());
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!lookup_.emplace(labels_[i], i).second) {
      throw ValidationError("IndexSet: duplicate label '" + labels_[i] + "'");
    }
  }
}

IndexSet IndexSet::range(std::size_t n) {
  std::vector<std::string> labels;
  labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) labels.push_back(std::to_string(i));
  return IndexSet(std::move(labels));
}

std::size_t IndexSet::index_of(const std::string& label) const {
  auto it = lookup_.find(label);
  if (it == lookup_.end()) {
    throw DimensionError("unknown index label '" + label + "'");
  }
  return it->second;
}

namespace {

double max_abs(const CMatrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

}  // namespace

OperatorKernel::OperatorKernel(IndexSet index_set, std::size_t dim, std::vector<CMatrix> blocks) {
  const std::size_t m = index_set.size();
  if (dim == 0) throw DimensionError("OperatorKernel: dimension must be positive");
  if (blocks.size() != m * m) {
    throw DimensionError("OperatorKernel: expected " + std::to_string(m * m) + " blocks, got " +
                         std::to_string(blocks.size()));
  }
  const auto d = static_cast<Eigen::Index>(dim);
  for (std::size_t k = 0; k < blocks.size(); ++k) {
    if (blocks[k].rows() != d || blocks[k].cols() != d) {
      throw DimensionError("OperatorKernel: block (" + index_set.label(k / m) + ", " +
                           index_set.label(k % m) + ") is not " + std::to_string(dim) + "x" +
                           std::to_string(dim));
    }
    if (!blocks[k].allFinite()) {
      throw ValidationError("OperatorKernel: block (" + index_set.label(k / m) + ", " +
                            index_set.label(k % m) + ") has non-finite entries");
    }
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      const CMatrix& kij = blocks[i * m + j];
      const CMatrix& kji = blocks[j * m + i];
      const double diff = max_abs(kji - kij.adjoint());
      const double scale = 1.0 + std::max(max_abs(kij), max_abs(kji));
      if (diff > kKernelSymmetryTol * scale) {
        throw ValidationError("OperatorKernel: K(" + index_set.label(j) + ", " +
                              index_set.label(i) + ") is not the adjoint of K(" +
                              index_set.label(i) + ", " + index_set.label(j) +
                              ") (max deviation " + std::to_string(diff) + ")");
      }
    }
  }
  data_ = std::make_shared<const Data>(Data{std::move(index_set), dim, std::move(blocks)});
}

OperatorKernel OperatorKernel::from_upper(
    IndexSet index_set, std::size_t dim,
    const std::function<CMatrix(std::size_t, std::size_t)>& upper) {
  const std::size_t m = index_set.size();
  std::vector<CMatrix> blocks(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i; j < m; ++j) {
      blocks[i * m + j] = upper(i, j);
      if (i != j) blocks[j * m + i] = blocks[i * m + j].adjoint();
    }
  }
  return OperatorKernel(std::move(index_set), dim, std::move(blocks));
}

OperatorKernel OperatorKernel::from_factors(IndexSet index_set, std::span<const CMatrix> factors) {
  const std::size_t m = index_set.size();
  if (factors.size() != m || m == 0) {
    throw DimensionError("from_factors: need exactly one factor per label");
  }
  const Eigen::Index d = factors[0].cols();
  const Eigen::Index r = factors[0].rows();
  for (const auto& w : factors) {
    if (w.cols() != d || w.rows() != r) {
      throw DimensionError("from_factors: factors must share one shape");
    }
  }
  return from_upper(std::move(index_set), static_cast<std::size_t>(d),
                    [&](std::size_t i, std::size_t j) -> CMatrix {
                      return factors[i].adjoint() * factors[j];
                    });
}

const CMatrix& OperatorKernel::block(std::size_t i, std::size_t j) const {
  const std::size_t m = size();
  if (i >= m || j >= m) throw DimensionError("OperatorKernel::block: index out of range");
  return data_->blocks[i * m + j];
}

const CMatrix& OperatorKernel::block(const std::string& s, const std::string& t) const {
  return block(index_set().index_of(s), index_set().index_of(t));
}

namespace {

void check_vector(const OperatorKernel& kernel, const CVector& v) {
  if (static_cast<std::size_t>(v.size()) != kernel.dim()) {
    throw DimensionError("vector has dimension " + std::to_string(v.size()) +
                         ", kernel acts on C^" + std::to_string(kernel.dim()));
  }
}

Complex lift_at(const OperatorKernel& kernel, std::size_t s, const CVector& a, std::size_t t,
                const CVector& b) {
  return a.dot(kernel.block(s, t) * b);
}

}  // namespace

Complex lift(const OperatorKernel& kernel, const LiftedPoint& p, const LiftedPoint& q) {
  const std::size_t s = kernel.index_set().index_of(p.index);
  const std::size_t t = kernel.index_set().index_of(q.index);
  check_vector(kernel, p.vector);
  check_vector(kernel, q.vector);
  return lift_at(kernel, s, p.vector, t, q.vector);
}

CMatrix block_gram(const OperatorKernel& kernel) {
  const std::size_t m = kernel.size();
  const auto d = static_cast<Eigen::Index>(kernel.dim());
  const auto n = static_cast<Eigen::Index>(m) * d;
  CMatrix g(n, n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      g.block(static_cast<Eigen::Index>(i) * d, static_cast<Eigen::Index>(j) * d, d, d) =
          kernel.block(i, j);
    }
  }
  return g;
}

Complex quadratic_form(const OperatorKernel& kernel, std::span<const CVector> vectors) {
  if (vectors.size() != kernel.size()) {
    throw DimensionError("quadratic_form: need one vector per index");
  }
  for (const auto& v : vectors) check_vector(kernel, v);
  Complex total{0.0, 0.0};
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    for (std::size_t j = 0; j < vectors.size(); ++j) {
      total += lift_at(kernel, i, vectors[i], j, vectors[j]);
    }
  }
  return total;
}

PdReport is_positive_definite(const OperatorKernel& kernel, double tol) {
  if (tol < 0.0) throw ValidationError("is_positive_definite: tolerance must be nonnegative");
  const CMatrix g = block_gram(kernel);
  const HermEig eig = herm_eig(g);
  PdReport report;
  report.gram_norm = g.norm();
  report.min_eig = eig.min_eigenvalue();
  report.positive = report.min_eig >= -tol * (1.0 + report.gram_norm);
  return report;
}

KernelSection KernelSection::generator(OperatorKernel kernel, const LiftedPoint& p) {
  KernelSection f(std::move(kernel));
  f.add(Complex{1.0, 0.0}, p);
  return f;
}

KernelSection& KernelSection::add(Complex coeff, const LiftedPoint& p) {
  return add(coeff, kernel_.index_set().index_of(p.index), p.vector);
}

KernelSection& KernelSection::add(Complex coeff, std::size_t index, CVector vector) {
  if (index >= kernel_.size()) throw DimensionError("KernelSection: index out of range");
  check_vector(kernel_, vector);
  terms_.push_back(Term{coeff, index, std::move(vector)});
  return *this;
}

KernelSection KernelSection::scaled(Complex factor) const {
  KernelSection out = *this;
  for (auto& term : out.terms_) term.coeff *= factor;
  return out;
}

KernelSection KernelSection::plus(const KernelSection& other) const {
  if (!kernel_.same_as(other.kernel_)) {
    throw ValidationError("KernelSection::plus: sections belong to different kernels");
  }
  KernelSection out = *this;
  out.terms_.insert(out.terms_.end(), other.terms_.begin(), other.terms_.end());
  return out;
}

Complex section_evaluate(const KernelSection& f, const LiftedPoint& q) {
  const OperatorKernel& kernel = f.kernel();
  const std::size_t s = kernel.index_set().index_of(q.index);
  check_vector(kernel, q.vector);
  Complex value{0.0, 0.0};
  for (const auto& term : f.terms()) {
    value += term.coeff * lift_at(kernel, s, q.vector, term.index, term.vector);
  }
  return value;
}

Complex section_inner(const KernelSection& f, const KernelSection& g) {
  if (!f.kernel().same_as(g.kernel())) {
    throw ValidationError("section_inner: sections belong to different kernels");
  }
  const OperatorKernel& kernel = f.kernel();
  Complex value{0.0, 0.0};
  for (const auto& x : f.terms()) {
    for (const auto& y : g.terms()) {
      value += std::conj(x.coeff) * y.coeff * lift_at(kernel, x.index, x.vector, y.index, y.vector);
    }
  }
  return value;
}

}  // namespace opk
