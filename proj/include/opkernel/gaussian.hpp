#pragma once

// H-valued Gaussian processes with operator covariance K.
//
// With K(s, t) = V_s^* V_t on L = C^r and i.i.d. real N(0, 1) variables
// Z_1..Z_r, the process W_t = sum_i (V_t^* e_i) Z_i = V_t^* z satisfies
// E[<a, W_s><W_t, b>] = <a, K(s, t) b>.  One joint draw shares z across all
// indices.
//
// Random numbers.  Draw k reads its normals from the substream of block
// k / kDrawsPerBlock, seeded by splitmix64(seed, block).  Each substream is a
// std::mt19937_64 whose outputs become 53-bit uniforms feeding the
// Box-Muller transform (both variates used).  Work split along block
// boundaries therefore reproduces the sequential draws exactly, and
// estimates sum block partials in block order, so results do not depend on
// the number of worker threads.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "opkernel/factorization.hpp"

namespace opk {

inline constexpr std::string_view kNormalAlgorithm = "mt19937_64+box-muller(53-bit uniforms)";
inline constexpr std::uint64_t kDrawsPerBlock = 4096;

/// Seed of the substream for a given block.
std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t block);

/// Deterministic stream of i.i.d. standard normal reals.
class NormalStream {
 public:
  explicit NormalStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  double next();
  std::uint64_t seed() const noexcept { return seed_; }
  static constexpr std::string_view algorithm() { return kNormalAlgorithm; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  std::optional<double> spare_;
};

NormalStream normal_stream(std::uint64_t seed);

/// One joint draw: the normals z and W_s = V_s^* z for every index.
struct JointDraw {
  std::uint64_t index = 0;
  Eigen::VectorXd normals;
  std::vector<CVector> values;
};

class GaussianSampler {
 public:
  GaussianSampler(DilationFactorization fact, std::uint64_t seed);

  const DilationFactorization& fact() const noexcept { return fact_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::size_t rank() const noexcept { return fact_.rank(); }
  std::size_t size() const noexcept { return fact_.size(); }
  std::size_t dim() const noexcept { return fact_.dim(); }
  /// Index of the next draw.
  std::uint64_t position() const noexcept { return position_; }

  /// V_s^* as a d x r matrix.
  const CMatrix& adjoint_row(std::size_t i) const { return adjoint_rows_.at(i); }
  /// [V_1^*; ...; V_m^*], (m d) x r.
  const CMatrix& stacked_adjoint() const noexcept { return stacked_adjoint_; }

  /// Advances the stream by r normals.
  JointDraw draw();

  /// Advances past count draws without materializing them.
  void skip(std::uint64_t count);

 private:
  DilationFactorization fact_;
  std::uint64_t seed_;
  std::vector<CMatrix> adjoint_rows_;
  CMatrix stacked_adjoint_;
  std::uint64_t position_ = 0;
  NormalStream stream_;
};

GaussianSampler build_sampler(const DilationFactorization& fact, std::uint64_t seed);

/// (1/M) sum_m <a, W_s^(m)> <W_t^(m), b> over the sampler's next M draws.
Complex estimate_covariance(GaussianSampler& sampler, std::uint64_t samples, std::size_t s,
                            std::size_t t, const CVector& a, const CVector& b,
                            unsigned workers = 1);

struct CovarianceEstimate {
  std::uint64_t samples = 0;
  /// (1/M) sum_m W_s^(m) (W_t^(m))^*.
  CMatrix matrix;
  /// max entrywise |Khat(s, t) - K(s, t)|.
  double max_abs_error = 0.0;
  /// max entrywise sqrt(mean |W_s,k conj(W_t,l)|^2) / sqrt(M).
  double std_error = 0.0;
};

/// Empirical K(s, t) from the sampler's next M draws.
CovarianceEstimate estimate_operator_covariance(GaussianSampler& sampler, std::uint64_t samples,
                                                std::size_t s, std::size_t t,
                                                unsigned workers = 1);

/// All pairs from one shared batch of draws.
struct CovarianceTable {
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::size_t size = 0;
  /// estimates[i * size + j] for the pair (s_i, s_j).
  std::vector<CovarianceEstimate> estimates;
  /// (1/M) sum_m W_s^(m), one per index.
  std::vector<CVector> means;

  const CovarianceEstimate& at(std::size_t i, std::size_t j) const {
    return estimates.at(i * size + j);
  }
  double max_abs_error() const;
  double max_abs_mean() const;
};

CovarianceTable estimate_all_covariances(GaussianSampler& sampler, std::uint64_t samples,
                                         unsigned workers = 1);

/// Monte Carlo acceptance bound 5 / sqrt(M).
double clt_tolerance(std::uint64_t samples);

}  // namespace opk
