// Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any fail.
// Every tolerance used below is fixed here; nothing adapts to the data.

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "opkernel/io.hpp"
#include "test_support.hpp"

namespace {

using namespace opk;
using testing::Rng;

constexpr double kFactorTol = 1e-9;
constexpr double kPdMinEigTol = 1e-10;
constexpr double kIdentityTol = 1e-9;
constexpr double kFrameTol = 1e-10;
constexpr double kPowerResidualTol = 1e-8;
constexpr std::size_t kMinPower = 4;
constexpr double kQuadraticTol = 1e-10;
constexpr double kNaimarkTol = 1e-10;
constexpr std::uint64_t kSamples = 200000;
constexpr double kSharedDrawTol = 1e-12;
constexpr double kSectionTol = 1e-10;

constexpr double kFactorSeconds = 5.0;
constexpr double kPowerSeconds = 2.0;
constexpr double kSampleSecondsPerKernel = 60.0;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok && pass) detail << "first failure: " << what << "; ";
    pass = pass && ok;
  }
};

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double max_abs(const CMatrix& m) { return testing::max_abs(m); }

std::vector<testing::GramKernel> suite() {
  // Factors are rescaled so max_s ||K(s, s)||_2 = 1; criterion 8 reuses the suite.
  Rng rng(2024);
  std::vector<testing::GramKernel> out;
  for (int k = 0; k < 50; ++k) {
    const std::size_t m = rng.integer(1, 6);
    const std::size_t d = rng.integer(1, 4);
    const std::size_t g = rng.integer(1, 6);
    out.push_back(testing::random_unit_gram_kernel(rng, m, d, g));
  }
  return out;
}

void factorization_correctness(Outcome& o, const std::vector<testing::GramKernel>& kernels) {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0.0;
  for (const auto& gk : kernels) {
    const DilationFactorization f = factorize(gk.kernel);
    for (std::size_t i = 0; i < f.size(); ++i)
      for (std::size_t j = 0; j < f.size(); ++j)
        worst = std::max(worst, (gk.kernel.block(i, j) - f.factor(i).adjoint() * f.factor(j)).norm());
    o.require(f.rank() <= gk.generating_rank, "rank exceeds generating rank");
  }
  const double elapsed = seconds_since(start);
  o.require(worst <= kFactorTol, "residual");
  o.require(elapsed < kFactorSeconds, "runtime");
  o.detail << "kernels=" << kernels.size() << " max_residual=" << worst << " (tol " << kFactorTol
           << ") seconds=" << elapsed << " (limit " << kFactorSeconds << ")";
}

void pd_detection(Outcome& o, const std::vector<testing::GramKernel>& kernels) {
  const OperatorKernel bad = OperatorKernel::from_upper(
      IndexSet::range(2), 1, [](std::size_t i, std::size_t j) { return testing::scalar(i == j ? 1.0 : 2.0); });
  const PdReport r = is_positive_definite(bad);
  o.require(!r.positive, "indefinite kernel accepted");
  o.require(std::abs(r.min_eig + 1.0) <= kPdMinEigTol, "min_eig");
  std::size_t accepted = 0;
  for (const auto& gk : kernels) accepted += is_positive_definite(gk.kernel).positive ? 1 : 0;
  o.require(accepted == kernels.size(), "Gram kernel rejected");
  o.detail << "min_eig=" << r.min_eig << " (target -1 +- " << kPdMinEigTol << ") gram_accepted=" << accepted
           << "/" << kernels.size();
}

KernelSection random_section(Rng& rng, const OperatorKernel& k, int terms) {
  KernelSection f(k);
  for (int t = 0; t < terms; ++t)
    f.add(rng.complex(), std::size_t(rng.integer(0, int(k.size()) - 1)), rng.vector(Eigen::Index(k.dim())));
  return f;
}

void identity_suite(Outcome& o) {
  Rng rng(3);
  double worst[6] = {0, 0, 0, 0, 0, 0};
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = rng.integer(2, 5);
    const std::size_t d = rng.integer(1, 3);
    const auto di = Eigen::Index(d);
    const auto gk = testing::random_unit_gram_kernel(rng, m, d, rng.integer(1, 6));
    const DilationFactorization f = factorize(gk.kernel);
    const auto pick = [&] { return std::size_t(rng.integer(0, int(m) - 1)); };

    // (1) ||V_s a||^2 = <a, K(s,s) a>.
    const std::size_t s = pick();
    const std::size_t t = pick();
    const CVector a = rng.vector(di);
    const CVector b = rng.vector(di);
    worst[0] = std::max(worst[0], std::abs(apply_V(f, s, a).coords.squaredNorm() -
                                           inner(a, gk.kernel.block(s, s) * a).real()) /
                                      (1.0 + a.squaredNorm()));

    // (2) V_s^* V_t b = K(s,t) b.
    worst[1] = std::max(worst[1], (apply_V_adjoint(f, s, apply_V(f, t, b)) - gk.kernel.block(s, t) * b).norm() /
                                      (1.0 + b.norm()));

    // (3) With K(s,s) = I: V_s V_s^* is a projection acting as K(s,t) on generators.
    const auto uk = testing::random_unitary_kernel(rng, m, d);
    const DilationFactorization fu = factorize(uk.kernel);
    const KernelSection gen = KernelSection::generator(uk.kernel, {std::to_string(t), b});
    const KernelSection once = projection_apply(fu, s, gen);
    const KernelSection expected =
        KernelSection::generator(uk.kernel, {std::to_string(s), CVector(uk.kernel.block(s, t) * b)});
    const KernelSection sec = random_section(rng, uk.kernel, 3);
    const KernelSection p1 = projection_apply(fu, s, sec);
    worst[2] = std::max({worst[2], testing::pointwise_gap(once, expected),
                         testing::pointwise_gap(projection_apply(fu, s, p1), p1)});

    // (4)/(6) n-fold chains for n <= 4.
    const int n = rng.integer(1, 4);
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    std::vector<std::size_t> chain;
    for (int k = 0; k < n; ++k) {
      pairs.emplace_back(pick(), pick());
      chain.push_back(pick());
    }
    const CVector oracle = testing::block_chain_oracle(gk.kernel, pairs, b);
    worst[3] = std::max(worst[3], (chain_product(f, pairs, b) - oracle).norm() /
                                      (1.0 + b.norm()));
    KernelSection current = KernelSection::generator(gk.kernel, {std::to_string(t), b});
    for (int k = n - 1; k >= 0; --k) current = projection_apply(f, chain[k], current);
    CVector chained = gk.kernel.block(chain[n - 1], t) * b;
    for (int k = n - 2; k >= 0; --k) chained = gk.kernel.block(chain[k], chain[k + 1]) * chained;
    const KernelSection target = KernelSection::generator(gk.kernel, {std::to_string(chain[0]), chained});
    for (int probe = 0; probe < 3; ++probe) {
      const LiftedPoint q{std::to_string(pick()), rng.vector(di)};
      const Complex y = section_evaluate(target, q);
      worst[5] = std::max(worst[5], std::abs(section_evaluate(current, q) - y) /
                                        (1.0 + q.vector.norm() * b.norm()));
    }

    // (5) V_to V_from^* acting on a generator.
    const std::size_t to = pick();
    const std::size_t from = pick();
    const KernelSection lhs = transfer_apply(f, to, from, KernelSection::generator(gk.kernel, {std::to_string(t), b}));
    const KernelSection rhs =
        KernelSection::generator(gk.kernel, {std::to_string(to), CVector(gk.kernel.block(from, t) * b)});
    worst[4] = std::max(worst[4], testing::pointwise_gap(lhs, rhs));
  }
  const char* names[6] = {"norms", "adjoint", "projection", "chain", "mixed", "chain-projection"};
  for (int k = 0; k < 6; ++k) {
    o.require(worst[k] <= kIdentityTol, names[k]);
    o.detail << names[k] << "=" << worst[k] << " ";
  }
  o.detail << "(tol " << kIdentityTol << ", unit-diagonal kernels)";
}

void frame_identity(Outcome& o, const std::vector<testing::GramKernel>& kernels) {
  double worst = 0.0;
  for (const auto& gk : kernels) {
    const DilationFactorization f = factorize(gk.kernel);
    for (std::size_t i = 0; i < f.size(); ++i)
      for (std::size_t j = 0; j < f.size(); ++j)
        worst = std::max(worst, max_abs(frame_reconstruct(f, i, j) - reconstruct(f, i, j)));
  }
  o.require(worst <= kFrameTol, "frame");
  o.detail << "max_entry_gap=" << worst << " (tol " << kFrameTol << ")";
}

void power_dilations(Outcome& o) {
  Rng rng(5);
  CMatrix nil = CMatrix::Zero(2, 2);
  nil(0, 1) = 1.0;
  const std::vector<std::pair<std::string, CMatrix>> cases{
      {"0.5", testing::scalar(0.5)}, {"nilpotent", nil}, {"random3", rng.contraction(3, 0.9)}};
  const auto start = std::chrono::steady_clock::now();
  for (const auto& [name, a] : cases) {
    const ShiftDilation dil = power_dilation(a, 8);
    double worst = 0.0;
    for (std::size_t n = 1; n <= dil.max_power; ++n) worst = std::max(worst, dil.power_residuals[n - 1]);
    o.require(worst <= kPowerResidualTol, name + " residual");
    o.require(dil.max_power >= kMinPower, name + " max_power");
    o.detail << name << ":max_power=" << dil.max_power << ",residual=" << worst << " ";
  }
  const double elapsed = seconds_since(start);
  o.require(elapsed < kPowerSeconds, "runtime");
  o.detail << "(tol " << kPowerResidualTol << ", min power " << kMinPower << ") seconds=" << elapsed;
}

void telescoping(Outcome& o) {
  Rng rng(6);
  double worst_gap = 0.0;
  double worst_neg = std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < 100; ++trial) {
    const auto d = rng.integer(1, 3);
    const CMatrix a = rng.contraction(d, rng.uniform(0.0, 1.0));
    const int n = rng.integer(2, 5);
    std::vector<CVector> h;
    for (int k = 0; k < n; ++k) h.push_back(rng.vector(d));
    const double tq = telescoping_quadratic(a, h);
    const double direct = quadratic_form(contraction_kernel(a, std::size_t(n - 1)), h).real();
    worst_gap = std::max(worst_gap, std::abs(tq - direct));
    worst_neg = std::min(worst_neg, tq);
  }
  o.require(worst_gap <= kQuadraticTol, "telescoping gap");
  o.require(worst_neg >= -kQuadraticTol, "negativity");
  o.detail << "instances=100 max_gap=" << worst_gap << " min_value=" << worst_neg << " (tol " << kQuadraticTol
           << ")";
}

void naimark(Outcome& o) {
  Rng rng(7);
  CMatrix q1 = CMatrix::Zero(2, 2);
  CMatrix q2 = CMatrix::Zero(2, 2);
  q1(0, 0) = 0.75;
  q1(1, 1) = 0.25;
  q2(0, 0) = 0.25;
  q2(1, 1) = 0.75;
  std::vector<DiscretePOVM> povms{DiscretePOVM({"1", "2"}, {q1, q2})};
  for (int k = 0; k < 20; ++k) povms.push_back(testing::random_povm(rng, rng.integer(1, 3), rng.integer(1, 4)));
  double worst = 0.0;
  for (const auto& povm : povms) {
    const NaimarkDilation dil = naimark_dilate(povm);
    worst = std::max({worst, dil.isometry_defect, dil.selfadjoint_defect, dil.idempotent_defect,
                      dil.completeness_defect});
    const std::size_t total = std::size_t{1} << povm.size();
    for (std::size_t mask = 0; mask < total; ++mask) {
      std::vector<std::size_t> subset;
      for (std::size_t j = 0; j < povm.size(); ++j)
        if (mask & (std::size_t{1} << j)) subset.push_back(j);
      worst = std::max(worst, (povm.measure(subset) - povm_compress(dil, subset)).norm());
    }
  }
  o.require(worst <= kNaimarkTol, "naimark defect");
  o.detail << "povms=" << povms.size() << " max_defect=" << worst << " (tol " << kNaimarkTol << ")";
}

void gaussian_covariance(Outcome& o, const std::vector<testing::GramKernel>& kernels) {
  const std::uint64_t seeds[3] = {1, 2, 3};
  const double bound = clt_tolerance(kSamples);
  double worst = 0.0;
  double slowest = 0.0;
  std::size_t used = 0;
  for (const auto& gk : kernels) {
    double diag = 0.0;
    for (std::size_t i = 0; i < gk.kernel.size(); ++i) diag = std::max(diag, spectral_norm(gk.kernel.block(i, i)));
    if (diag > 1.0 + 1e-12) continue;
    ++used;
    const auto start = std::chrono::steady_clock::now();
    const DilationFactorization f = factorize(gk.kernel);
    for (std::uint64_t seed : seeds) {
      GaussianSampler sampler(f, seed);
      worst = std::max(worst, estimate_all_covariances(sampler, kSamples).max_abs_error());
    }
    slowest = std::max(slowest, seconds_since(start));
  }
  o.require(used == kernels.size(), "suite kernel exceeds unit diagonal");
  o.require(worst <= bound, "covariance error");
  o.require(slowest < kSampleSecondsPerKernel, "runtime");
  o.detail << "kernels=" << used << " seeds=3 M=" << kSamples << " max_abs_error=" << worst << " (tol " << bound
           << ") slowest_kernel_seconds=" << slowest << " (limit " << kSampleSecondsPerKernel << ")";
}

void direct_integral(Outcome& o) {
  Rng rng(9);
  const double bound = clt_tolerance(kSamples);
  double algebraic = 0.0;
  double statistical = 0.0;
  for (int k = 0; k < 5; ++k) {
    const auto gk = testing::random_unit_gram_kernel(rng, 3, 2, 3);
    const DilationFactorization f = factorize(gk.kernel);
    const std::size_t s = rng.integer(0, 2);
    const std::size_t t = rng.integer(0, 2);
    const CVector a = rng.vector(2);
    const CVector b = rng.vector(2);
    GaussianSampler s1(f, 40 + k);
    GaussianSampler s2(f, 40 + k);
    const CovarianceEstimate op = estimate_operator_covariance(s1, kSamples, s, t);
    const Complex scalar_est = estimate_covariance(s2, kSamples, s, t, a, b);
    algebraic = std::max(algebraic, std::abs(inner(a, op.matrix * b) - scalar_est) / (1.0 + std::abs(scalar_est)));
    statistical = std::max(statistical, max_abs(op.matrix - gk.kernel.block(s, t)));
  }
  o.require(algebraic <= kSharedDrawTol, "shared draws");
  o.require(statistical <= bound, "CLT bound");
  o.detail << "shared_draw_gap=" << algebraic << " (tol " << kSharedDrawTol << ") max_abs_error=" << statistical
           << " (tol " << bound << ")";
}

void section_properties(Outcome& o) {
  Rng rng(10);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t m = rng.integer(1, 4);
    const auto d = rng.integer(1, 4);
    const auto gk = testing::random_gram_kernel(rng, m, std::size_t(d), rng.integer(1, 5));
    const KernelSection f = random_section(rng, gk.kernel, rng.integer(1, 5));
    const std::string s = std::to_string(rng.integer(0, int(m) - 1));
    const CVector a = rng.vector(d);
    const CVector b = rng.vector(d);
    const Complex lambda = rng.complex();
    const Complex fa = section_evaluate(f, {s, a});
    const double scale = 1.0 + std::abs(fa) + std::abs(section_evaluate(f, {s, b}));
    worst = std::max(worst, std::abs(section_evaluate(f, {s, a + b}) - fa - section_evaluate(f, {s, b})) / scale);
    worst = std::max(worst, std::abs(section_evaluate(f, {s, lambda * a}) - std::conj(lambda) * fa) /
                                (scale * (1.0 + std::abs(lambda))));
    worst = std::max(worst, std::abs(section_evaluate(f, {s, CVector::Zero(d)})));
    const CMatrix basis = rng.unitary(d);
    Complex expanded{0.0, 0.0};
    for (Eigen::Index i = 0; i < d; ++i) {
      const CVector e = basis.col(i);
      expanded += section_evaluate(f, {s, e}) * std::conj(inner(e, a));
    }
    worst = std::max(worst, std::abs(expanded - fa) / scale);
  }
  o.require(worst <= kSectionTol, "section property");
  o.detail << "sections=50 max_relative_defect=" << worst << " (tol " << kSectionTol << ")";
}

std::string scratch(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("opkernel_acceptance_" + name)).string();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(OPKERNEL_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void determinism(Outcome& o) {
  Rng rng(11);
  const auto gk = testing::random_unit_gram_kernel(rng, 3, 2, 3);
  const std::string kernel = scratch("kernel.json");
  const std::string matrix = scratch("matrix.json");
  io::write_text_file(kernel, io::kernel_to_json(gk.kernel).dump());
  io::write_text_file(matrix, io::json{{"matrix", io::matrix_to_json(rng.contraction(2, 0.8))}}.dump());

  const std::string sample = "sample --kernel " + kernel + " --samples 20000 --seed 99";
  const std::string r1 = scratch("r1.json");
  const std::string r2 = scratch("r2.json");
  // Both runs get identical arguments apart from the thread count; the report
  // is copied aside and the draw file hashed between runs.
  const std::string report = scratch("report.json");
  const std::string draws = scratch("draws.csv");
  const std::string args = sample + " --out " + report + " --emit-draws " + draws;
  o.require(run_cli(args) == 0, "sample run 1");
  std::filesystem::copy_file(report, r1, std::filesystem::copy_options::overwrite_existing);
  const std::string draws_digest = io::file_digest(draws);
  o.require(run_cli(args + " --threads 4") == 0, "sample run 2");
  std::filesystem::copy_file(report, r2, std::filesystem::copy_options::overwrite_existing);
  const bool report_same = io::file_digest(r1) == io::file_digest(r2);
  const bool draws_same = draws_digest == io::file_digest(draws);
  o.require(report_same, "sample report differs");
  o.require(draws_same, "draw file differs");

  const std::string d1 = scratch("d1.json");
  const std::string d2 = scratch("d2.json");
  const std::string dil = std::string(OPKERNEL_CLI_PATH) + " dilate-contraction --matrix " + matrix + " --seed 5";
  const int s1 = std::system((dil + " > " + d1).c_str());
  const int s2 = std::system((dil + " > " + d2).c_str());
  const bool dil_same = s1 == 0 && s2 == 0 && io::file_digest(d1) == io::file_digest(d2);
  o.require(dil_same, "dilate-contraction report differs");
  o.detail << "sample_report=" << (report_same ? "identical" : "different")
           << " draws=" << (draws_same ? "identical" : "different")
           << " dilate_contraction=" << (dil_same ? "identical" : "different");
  for (const auto& p : {kernel, matrix, report, draws, r1, r2, d1, d2}) std::filesystem::remove(p);
}

}  // namespace

int main() {
  const auto kernels = suite();
  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"factorization correctness", [&](Outcome& o) { factorization_correctness(o, kernels); }},
      {"positive definiteness detection", [&](Outcome& o) { pd_detection(o, kernels); }},
      {"factorization identity suite", identity_suite},
      {"frame identity", [&](Outcome& o) { frame_identity(o, kernels); }},
      {"power dilation", power_dilations},
      {"telescoping quadratic form", telescoping},
      {"Naimark dilation", naimark},
      {"Gaussian covariance", [&](Outcome& o) { gaussian_covariance(o, kernels); }},
      {"operator vs scalar covariance", direct_integral},
      {"section properties", section_properties},
      {"determinism", determinism},
  };
  int failures = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      criteria[k].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    if (!o.pass) ++failures;
    std::printf("%s %2zu %s: %s\n", o.pass ? "PASS" : "FAIL", k + 1, criteria[k].first.c_str(),
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria failed\n", failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
