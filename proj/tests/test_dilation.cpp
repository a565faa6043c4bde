#include <gtest/gtest.h>

#include "opkernel/dilation.hpp"
#include "test_support.hpp"

namespace opk {
namespace {

using testing::random_povm;
using testing::Rng;
using testing::scalar;
using testing::scalar_vector;
using testing::toeplitz_quadratic_oracle;

CMatrix nilpotent() {
  CMatrix n = CMatrix::Zero(2, 2);
  n(0, 1) = 1.0;
  return n;
}

CMatrix diag2(double x, double y) {
  CMatrix m = CMatrix::Zero(2, 2);
  m(0, 0) = x;
  m(1, 1) = y;
  return m;
}

TEST(ContractionKernel, IdentityAndZeroAndHalf) {
  const OperatorKernel id = contraction_kernel(CMatrix::Identity(2, 2), 3);
  for (std::size_t i = 0; i <= 3; ++i)
    for (std::size_t j = 0; j <= 3; ++j) EXPECT_EQ(id.block(i, j), CMatrix::Identity(2, 2));

  const OperatorKernel zero = contraction_kernel(scalar(0.0), 2);
  EXPECT_EQ(zero.block(0, 0)(0, 0), Complex(1.0, 0.0));
  EXPECT_EQ(zero.block(0, 1)(0, 0), Complex(0.0, 0.0));
  EXPECT_EQ(zero.block(2, 0)(0, 0), Complex(0.0, 0.0));

  const OperatorKernel half = contraction_kernel(scalar(0.5), 2);
  EXPECT_DOUBLE_EQ(half.block(0, 2)(0, 0).real(), 0.25);
  EXPECT_DOUBLE_EQ(half.block(2, 0)(0, 0).real(), 0.25);
  EXPECT_EQ(half.index_set().label(2), "2");
}

TEST(ContractionKernel, NegativeOffsetsUseAdjoint) {
  const OperatorKernel k = contraction_kernel(nilpotent(), 2);
  EXPECT_EQ(k.block(0, 1), nilpotent());
  EXPECT_EQ(k.block(1, 0), CMatrix(nilpotent().adjoint()));
  EXPECT_EQ(k.block(0, 2), CMatrix::Zero(2, 2));
  EXPECT_TRUE(is_positive_definite(k).positive);
}

TEST(ContractionKernel, RejectsNonContractions) {
  try {
    contraction_kernel(scalar(1.5), 2);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("1.5"), std::string::npos);
  }
  EXPECT_THROW(contraction_kernel(CMatrix::Zero(2, 3), 2), DimensionError);
  EXPECT_NO_THROW(contraction_kernel(scalar(1.0), 2));
}

TEST(ContractionKernel, PositiveForRandomContractions) {
  Rng rng(61);
  for (int trial = 0; trial < 10; ++trial) {
    const CMatrix a = rng.contraction(rng.integer(1, 3), rng.uniform(0.0, 1.0));
    EXPECT_TRUE(is_positive_definite(contraction_kernel(a, 5)).positive);
  }
}

TEST(Telescoping, MatchesOracleAndBlockGram) {
  Rng rng(62);
  for (int trial = 0; trial < 40; ++trial) {
    const auto d = rng.integer(1, 3);
    const CMatrix a = rng.contraction(d, rng.uniform(0.0, 1.0));
    const int n = rng.integer(1, 6);
    std::vector<CVector> h;
    double scale = 0.0;
    for (int k = 0; k < n; ++k) {
      h.push_back(rng.vector(d));
      scale += h.back().squaredNorm();
    }
    const double telescoped = telescoping_quadratic(a, h);
    EXPECT_NEAR(telescoped, toeplitz_quadratic_oracle(a, h), 1e-10 * scale);
    const OperatorKernel k = contraction_kernel(a, static_cast<std::size_t>(n - 1 > 0 ? n - 1 : 1));
    if (n >= 2) EXPECT_NEAR(telescoped, quadratic_form(k, h).real(), 1e-10 * scale);
    EXPECT_GE(telescoped, -1e-10 * scale);
    EXPECT_GE(telescoped, telescoping_lower_bound(a, h) - 1e-10 * scale);
  }
}

TEST(Telescoping, ZeroOperatorIsSumOfSquares) {
  Rng rng(63);
  std::vector<CVector> h{rng.vector(2), rng.vector(2), rng.vector(2)};
  const double expected = h[0].squaredNorm() + h[1].squaredNorm() + h[2].squaredNorm();
  EXPECT_NEAR(telescoping_quadratic(CMatrix::Zero(2, 2), h), expected, 1e-12);
}

TEST(Telescoping, UnitaryWithAlignedTailsVanishes) {
  // A = 1 and h = (1, -1): every tail after the first cancels.
  const std::vector<CVector> h{scalar_vector(1.0), scalar_vector(-1.0)};
  EXPECT_NEAR(telescoping_quadratic(scalar(1.0), h), 0.0, 1e-15);
  EXPECT_THROW(telescoping_quadratic(scalar(1.0), std::vector<CVector>{CVector::Zero(2)}), DimensionError);
  EXPECT_EQ(telescoping_quadratic(scalar(0.5), std::vector<CVector>{}), 0.0);
}

void expect_power_dilation(const CMatrix& a, std::size_t window, std::size_t min_power) {
  const ShiftDilation dil = power_dilation(a, window);
  EXPECT_GE(dil.max_power, min_power);
  CMatrix power = CMatrix::Identity(a.rows(), a.cols());
  for (std::size_t n = 1; n <= dil.max_power; ++n) {
    power = power * a;
    EXPECT_LE((power - dil.compressed_power(n)).norm(), kPowerTol) << "n = " << n;
  }
  EXPECT_LE(identity_defect(dil.embedding.adjoint() * dil.embedding), 1e-10);
}

TEST(PowerDilation, ScalarHalf) { expect_power_dilation(scalar(0.5), 8, 4); }

TEST(PowerDilation, Nilpotent) {
  const ShiftDilation dil = power_dilation(nilpotent(), 6);
  EXPECT_EQ(dil.max_power, 6u);
  EXPECT_LE(dil.compressed_power(2).norm(), 1e-10);
  EXPECT_LE((dil.compressed_power(1) - nilpotent()).norm(), 1e-10);
}

TEST(PowerDilation, RotationNeedsNoExtraSpace) {
  const double th = 0.7;
  CMatrix rot(2, 2);
  rot << std::cos(th), -std::sin(th), std::sin(th), std::cos(th);
  const ShiftDilation dil = power_dilation(rot, 8);
  EXPECT_EQ(dil.fact.rank(), 2u);
  EXPECT_EQ(dil.max_power, 8u);
  for (std::size_t n = 1; n <= 8; ++n) {
    EXPECT_LE(dil.power_residuals[n - 1], 1e-9);
  }
}

TEST(PowerDilation, RandomContractions) {
  Rng rng(64);
  for (int trial = 0; trial < 10; ++trial) {
    expect_power_dilation(rng.contraction(3, rng.uniform(0.1, 0.99)), 8, 4);
  }
}

TEST(PowerDilation, PolarShiftIsUnitary) {
  Rng rng(65);
  PowerDilationOptions options;
  options.polar = true;
  const ShiftDilation dil = power_dilation(rng.contraction(2, 0.6), 8, options);
  EXPECT_LE(identity_defect(dil.shift.adjoint() * dil.shift), 1e-10);
  EXPECT_GE(dil.max_power, 1u);
  EXPECT_LE(dil.power_residuals[0], kPowerTol);
}

TEST(PowerDilation, RejectsBadInput) {
  EXPECT_THROW(power_dilation(scalar(1.5), 8), ValidationError);
  EXPECT_THROW(power_dilation(scalar(0.5), 1), ValidationError);
}

void expect_naimark(const DiscretePOVM& povm) {
  const NaimarkDilation dil = naimark_dilate(povm);
  const auto r = static_cast<Eigen::Index>(dil.fact.rank());
  EXPECT_LE(identity_defect(dil.embedding.adjoint() * dil.embedding), 1e-10);
  CMatrix sum = CMatrix::Zero(r, r);
  for (std::size_t j = 0; j < povm.size(); ++j) {
    const CMatrix& p = dil.projections[j];
    EXPECT_LE((p - p.adjoint()).norm(), 1e-10);
    EXPECT_LE((p - p * p).norm(), 1e-10);
    for (std::size_t k = 0; k < j; ++k) EXPECT_LE((p * dil.projections[k]).norm(), 1e-10);
    sum += p;
  }
  EXPECT_LE(identity_defect(sum), 1e-10);
  const std::size_t total = std::size_t{1} << povm.size();
  for (std::size_t mask = 0; mask < total; ++mask) {
    std::vector<std::size_t> subset;
    for (std::size_t j = 0; j < povm.size(); ++j)
      if (mask & (std::size_t{1} << j)) subset.push_back(j);
    EXPECT_LE((povm.measure(subset) - povm_compress(dil, subset)).norm(), 1e-10) << "mask " << mask;
  }
}

TEST(Naimark, TrivialPovm) {
  const DiscretePOVM povm({"all"}, {CMatrix::Identity(2, 2)});
  const NaimarkDilation dil = naimark_dilate(povm);
  EXPECT_EQ(dil.fact.rank(), 2u);
  EXPECT_LE(identity_defect(dil.projections[0]), 1e-10);
  expect_naimark(povm);
}

TEST(Naimark, DiagonalQubit) {
  const DiscretePOVM povm({"1", "2"}, {diag2(0.75, 0.25), diag2(0.25, 0.75)});
  const NaimarkDilation dil = naimark_dilate(povm);
  EXPECT_EQ(dil.fact.rank(), 4u);
  expect_naimark(povm);
}

TEST(Naimark, UniformQubit) {
  const DiscretePOVM povm({"a", "b"}, {diag2(0.5, 0.5), diag2(0.5, 0.5)});
  expect_naimark(povm);
}

TEST(Naimark, ProjectiveInputKeepsDimension) {
  const DiscretePOVM povm({"x", "y"}, {diag2(1.0, 0.0), diag2(0.0, 1.0)});
  const NaimarkDilation dil = naimark_dilate(povm);
  EXPECT_EQ(dil.fact.rank(), 2u);
  expect_naimark(povm);
}

TEST(Naimark, RandomPovms) {
  Rng rng(66);
  for (int trial = 0; trial < 20; ++trial) {
    expect_naimark(random_povm(rng, rng.integer(1, 3), rng.integer(1, 4)));
  }
}

TEST(Naimark, CompressByLabel) {
  const DiscretePOVM povm({"1", "2"}, {diag2(0.75, 0.25), diag2(0.25, 0.75)});
  const NaimarkDilation dil = naimark_dilate(povm);
  const std::vector<std::string> none;
  const std::vector<std::string> both{"1", "2"};
  const std::vector<std::string> one{"1"};
  EXPECT_LE(povm_compress(dil, none).norm(), 1e-15);
  EXPECT_LE(identity_defect(povm_compress(dil, both)), 1e-10);
  EXPECT_LE((povm_compress(dil, one) - diag2(0.75, 0.25)).norm(), 1e-10);
  const std::vector<std::string> unknown{"3"};
  EXPECT_THROW(povm_compress(dil, unknown), DimensionError);
}

TEST(DiscretePovm, Validation) {
  EXPECT_THROW(DiscretePOVM({"a"}, {0.9 * CMatrix::Identity(2, 2)}), ValidationError);
  EXPECT_THROW(DiscretePOVM({"a", "b"}, {diag2(1.5, 0.5), diag2(-0.5, 0.5)}), ValidationError);
  CMatrix skew = CMatrix::Identity(2, 2);
  skew(0, 1) = 0.1;
  EXPECT_THROW(DiscretePOVM({"a"}, {skew}), ValidationError);
  EXPECT_THROW(DiscretePOVM({"a", "b"}, {CMatrix::Identity(2, 2)}), DimensionError);
  EXPECT_THROW(DiscretePOVM({"a", "b"}, {diag2(1, 0), CMatrix::Zero(3, 3)}), DimensionError);
  EXPECT_THROW(DiscretePOVM({"a", "a"}, {diag2(1, 0), diag2(0, 1)}), ValidationError);
}

}  // namespace
}  // namespace opk
