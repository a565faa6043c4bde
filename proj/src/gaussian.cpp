#include "opkernel/gaussian.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <string>
#include <thread>

namespace opk {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t block) {
  return splitmix64(splitmix64(seed) ^ (block * 0xD1B54A32D192ED03ULL));
}

double NormalStream::next() {
  if (spare_) {
    const double z = *spare_;
    spare_.reset();
    return z;
  }
  constexpr double kScale = 0x1.0p-53;
  // u1 in (0, 1], u2 in [0, 1).
  const double u1 = (static_cast<double>(engine_() >> 11) + 1.0) * kScale;
  const double u2 = static_cast<double>(engine_() >> 11) * kScale;
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  return radius * std::cos(angle);
}

NormalStream normal_stream(std::uint64_t seed) { return NormalStream(seed); }

namespace {

void fill_normals(NormalStream& stream, Eigen::VectorXd& z) {
  for (Eigen::Index k = 0; k < z.size(); ++k) z(k) = stream.next();
}

// Normal source positioned at an arbitrary draw index.
class DrawCursor {
 public:
  DrawCursor(std::uint64_t seed, std::size_t rank, std::uint64_t position)
      : seed_(seed), rank_(rank), position_(position), stream_(seed) {
    const std::uint64_t block = position / kDrawsPerBlock;
    stream_ = NormalStream(substream_seed(seed_, block));
    const std::uint64_t skip = (position % kDrawsPerBlock) * rank_;
    for (std::uint64_t k = 0; k < skip; ++k) stream_.next();
  }

  void next(Eigen::VectorXd& z) {
    if (position_ % kDrawsPerBlock == 0) {
      stream_ = NormalStream(substream_seed(seed_, position_ / kDrawsPerBlock));
    }
    fill_normals(stream_, z);
    ++position_;
  }

 private:
  std::uint64_t seed_;
  std::size_t rank_;
  std::uint64_t position_;
  NormalStream stream_;
};

struct Segment {
  std::uint64_t begin;
  std::uint64_t end;
};

std::vector<Segment> split_blocks(std::uint64_t begin, std::uint64_t count) {
  std::vector<Segment> out;
  std::uint64_t pos = begin;
  const std::uint64_t stop = begin + count;
  while (pos < stop) {
    const std::uint64_t block_end = (pos / kDrawsPerBlock + 1) * kDrawsPerBlock;
    const std::uint64_t end = std::min(block_end, stop);
    out.push_back({pos, end});
    pos = end;
  }
  return out;
}

// Runs visit(acc, w) for every stacked draw w = [W_1; ...; W_m] in
// [sampler.position(), +count), one accumulator per block segment, and
// merges the accumulators in segment order.
template <class Acc, class Make, class Visit, class Merge>
Acc run_segments(GaussianSampler& sampler, std::uint64_t count, unsigned workers, Make make,
                 Visit visit, Merge merge) {
  const auto segments = split_blocks(sampler.position(), count);
  std::vector<Acc> partial;
  partial.reserve(segments.size());
  for (std::size_t k = 0; k < segments.size(); ++k) partial.push_back(make());

  const CMatrix& lift = sampler.stacked_adjoint();
  const auto rank = static_cast<Eigen::Index>(sampler.rank());
  const std::uint64_t seed = sampler.seed();

  auto work = [&](std::size_t k) {
    const Segment seg = segments[k];
    DrawCursor cursor(seed, sampler.rank(), seg.begin);
    Eigen::VectorXd z(rank);
    CVector w(lift.rows());
    for (std::uint64_t n = seg.begin; n < seg.end; ++n) {
      cursor.next(z);
      if (rank > 0) {
        w.noalias() = lift * z.cast<Complex>();
      } else {
        w.setZero();
      }
      visit(partial[k], w);
    }
  };

  const unsigned threads = std::max(1u, std::min<unsigned>(workers, segments.size()));
  if (threads <= 1) {
    for (std::size_t k = 0; k < segments.size(); ++k) work(k);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        for (std::size_t k = next++; k < segments.size(); k = next++) work(k);
      });
    }
  }

  Acc total = make();
  for (auto& acc : partial) merge(total, acc);
  sampler.skip(count);
  return total;
}

void check_index(const GaussianSampler& sampler, std::size_t i) {
  if (i >= sampler.size()) throw DimensionError("sampler index out of range");
}

void check_samples(std::uint64_t samples) {
  if (samples == 0) throw ValidationError("sample count must be at least 1");
}

}  // namespace

GaussianSampler::GaussianSampler(DilationFactorization fact, std::uint64_t seed)
    : fact_(std::move(fact)), seed_(seed), stream_(substream_seed(seed, 0)) {
  const auto d = static_cast<Eigen::Index>(fact_.dim());
  const auto r = static_cast<Eigen::Index>(fact_.rank());
  stacked_adjoint_.resize(d * static_cast<Eigen::Index>(fact_.size()), r);
  adjoint_rows_.reserve(fact_.size());
  for (std::size_t i = 0; i < fact_.size(); ++i) {
    adjoint_rows_.push_back(fact_.factor(i).adjoint());
    stacked_adjoint_.middleRows(static_cast<Eigen::Index>(i) * d, d) = adjoint_rows_.back();
  }
}

JointDraw GaussianSampler::draw() {
  if (position_ % kDrawsPerBlock == 0) {
    stream_ = NormalStream(substream_seed(seed_, position_ / kDrawsPerBlock));
  }
  JointDraw out;
  out.index = position_;
  out.normals.resize(static_cast<Eigen::Index>(rank()));
  fill_normals(stream_, out.normals);
  const CVector z = out.normals.cast<Complex>();
  out.values.reserve(size());
  for (const auto& row : adjoint_rows_) {
    out.values.push_back(rank() > 0 ? CVector(row * z) : CVector::Zero(row.rows()));
  }
  ++position_;
  return out;
}

void GaussianSampler::skip(std::uint64_t count) {
  if (count == 0) return;
  const std::uint64_t target = position_ + count;
  stream_ = NormalStream(substream_seed(seed_, target / kDrawsPerBlock));
  for (std::uint64_t k = 0; k < (target % kDrawsPerBlock) * rank(); ++k) stream_.next();
  position_ = target;
}

GaussianSampler build_sampler(const DilationFactorization& fact, std::uint64_t seed) {
  return GaussianSampler(fact, seed);
}

Complex estimate_covariance(GaussianSampler& sampler, std::uint64_t samples, std::size_t s,
                            std::size_t t, const CVector& a, const CVector& b, unsigned workers) {
  check_samples(samples);
  check_index(sampler, s);
  check_index(sampler, t);
  const auto d = static_cast<Eigen::Index>(sampler.dim());
  if (a.size() != d || b.size() != d) {
    throw DimensionError("estimate_covariance: test vectors must have dimension " +
                         std::to_string(d));
  }
  const Eigen::Index off_s = static_cast<Eigen::Index>(s) * d;
  const Eigen::Index off_t = static_cast<Eigen::Index>(t) * d;
  const Complex sum = run_segments<Complex>(
      sampler, samples, workers, [] { return Complex{0.0, 0.0}; },
      [&](Complex& acc, const CVector& w) {
        acc += a.dot(w.segment(off_s, d)) * w.segment(off_t, d).dot(b);
      },
      [](Complex& total, const Complex& part) { total += part; });
  return sum / static_cast<double>(samples);
}

namespace {

struct MomentAcc {
  CMatrix outer;
  Eigen::MatrixXd second;
  CVector sum;
};

MomentAcc accumulate_moments(GaussianSampler& sampler, std::uint64_t samples, unsigned workers) {
  const auto n = static_cast<Eigen::Index>(sampler.size() * sampler.dim());
  return run_segments<MomentAcc>(
      sampler, samples, workers,
      [n] {
        return MomentAcc{CMatrix::Zero(n, n), Eigen::MatrixXd::Zero(n, n), CVector::Zero(n)};
      },
      [](MomentAcc& acc, const CVector& w) {
        acc.outer.noalias() += w * w.adjoint();
        const Eigen::VectorXd mag = w.cwiseAbs2();
        acc.second.noalias() += mag * mag.transpose();
        acc.sum += w;
      },
      [](MomentAcc& total, const MomentAcc& part) {
        total.outer += part.outer;
        total.second += part.second;
        total.sum += part.sum;
      });
}

CovarianceEstimate pair_estimate(const GaussianSampler& sampler, const MomentAcc& acc,
                                 std::uint64_t samples, std::size_t i, std::size_t j) {
  const auto d = static_cast<Eigen::Index>(sampler.dim());
  const double inv = 1.0 / static_cast<double>(samples);
  const Eigen::Index oi = static_cast<Eigen::Index>(i) * d;
  const Eigen::Index oj = static_cast<Eigen::Index>(j) * d;
  CovarianceEstimate est;
  est.samples = samples;
  // Read the upper block triangle only, so Khat(t, s) is exactly Khat(s, t)^*.
  if (i <= j) {
    est.matrix = acc.outer.block(oi, oj, d, d) * inv;
  } else {
    est.matrix = (acc.outer.block(oj, oi, d, d) * inv).adjoint();
  }
  const CMatrix& target = sampler.fact().kernel().block(i, j);
  est.max_abs_error = (est.matrix - target).cwiseAbs().maxCoeff();
  const double second = acc.second.block(oi, oj, d, d).maxCoeff() * inv;
  est.std_error = std::sqrt(second) / std::sqrt(static_cast<double>(samples));
  return est;
}

}  // namespace

CovarianceEstimate estimate_operator_covariance(GaussianSampler& sampler, std::uint64_t samples,
                                                std::size_t s, std::size_t t, unsigned workers) {
  check_samples(samples);
  check_index(sampler, s);
  check_index(sampler, t);
  const MomentAcc acc = accumulate_moments(sampler, samples, workers);
  return pair_estimate(sampler, acc, samples, s, t);
}

double CovarianceTable::max_abs_error() const {
  double worst = 0.0;
  for (const auto& e : estimates) worst = std::max(worst, e.max_abs_error);
  return worst;
}

double CovarianceTable::max_abs_mean() const {
  double worst = 0.0;
  for (const auto& m : means) {
    if (m.size() > 0) worst = std::max(worst, m.cwiseAbs().maxCoeff());
  }
  return worst;
}

CovarianceTable estimate_all_covariances(GaussianSampler& sampler, std::uint64_t samples,
                                         unsigned workers) {
  check_samples(samples);
  CovarianceTable table;
  table.samples = samples;
  table.seed = sampler.seed();
  table.size = sampler.size();
  const MomentAcc acc = accumulate_moments(sampler, samples, workers);
  const auto d = static_cast<Eigen::Index>(sampler.dim());
  table.estimates.reserve(table.size * table.size);
  for (std::size_t i = 0; i < table.size; ++i) {
    for (std::size_t j = 0; j < table.size; ++j) {
      table.estimates.push_back(pair_estimate(sampler, acc, samples, i, j));
    }
    table.means.push_back(acc.sum.segment(static_cast<Eigen::Index>(i) * d, d) /
                          static_cast<double>(samples));
  }
  return table;
}

double clt_tolerance(std::uint64_t samples) {
  return 5.0 / std::sqrt(static_cast<double>(samples));
}

}  // namespace opk
