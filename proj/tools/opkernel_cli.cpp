// opkernel: command-line front end for operator-valued kernels.
//
//   opkernel check-pd           --kernel K.json [--tol 1e-10]
//   opkernel factorize          --kernel K.json [--tol 1e-10] [--out factors.json]
//   opkernel dilate-contraction --matrix A.json [--window 8] [--tol 1e-8] [--seed 0] [--polar]
//   opkernel naimark            --povm Q.json [--tol 1e-10]
//   opkernel sample             --kernel K.json [--samples 200000] [--seed 0]
//                               [--out report.json] [--emit-draws draws.csv] [--threads 1]
//
// Every command prints a JSON report on stdout.  Exit codes: 0 success,
// 1 tolerance failure, 2 parse error, 3 validation error, 64 usage error.

#include <iostream>
#include <string>

#include "CLI11.hpp"

#include "opkernel/io.hpp"

namespace {

int emit(const opk::io::CommandResult& result) {
  std::cout << result.report.dump(2) << '\n';
  return result.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  using namespace opk::io;

  CLI::App app{"Operator-valued positive definite kernels: factorization, dilations, sampling"};
  app.require_subcommand(1);

  CheckPdOptions check;
  auto* check_cmd = app.add_subcommand("check-pd", "Test a kernel file for positive definiteness");
  check_cmd->add_option("--kernel,kernel", check.kernel_path, "Kernel JSON file")->required();
  check_cmd->add_option("--tol", check.tol, "Relative eigenvalue tolerance")->capture_default_str();

  FactorizeOptions fact;
  std::string fact_out;
  auto* fact_cmd = app.add_subcommand("factorize", "Minimal factorization K(s,t) = V_s^* V_t");
  fact_cmd->add_option("--kernel,kernel", fact.kernel_path, "Kernel JSON file")->required();
  fact_cmd->add_option("--tol", fact.tol, "Relative rank truncation tolerance")->capture_default_str();
  fact_cmd->add_option("--out", fact_out, "Write the factors to this JSON file");

  DilateContractionOptions dil;
  auto* dil_cmd = app.add_subcommand("dilate-contraction", "Power dilation A^n = V^* U^n V");
  dil_cmd->add_option("--matrix,matrix", dil.matrix_path, "Contraction JSON file")->required();
  dil_cmd->add_option("--window", dil.window, "Index window {0..N}")->capture_default_str();
  dil_cmd->add_option("--tol", dil.tol, "Certification tolerance for powers")->capture_default_str();
  dil_cmd->add_option("--seed", dil.seed, "Seed for the quadratic-form check")->capture_default_str();
  dil_cmd->add_flag("--polar", dil.polar, "Use the unitary polar factor of the shift");

  NaimarkOptions naimark;
  auto* naimark_cmd = app.add_subcommand("naimark", "Naimark dilation of a discrete POVM");
  naimark_cmd->add_option("--povm,povm", naimark.povm_path, "POVM JSON file")->required();
  naimark_cmd->add_option("--tol", naimark.tol, "Tolerance for POVM and PVM checks")->capture_default_str();

  SampleOptions sample;
  std::string sample_out;
  std::string sample_draws;
  auto* sample_cmd = app.add_subcommand("sample", "Sample the H-valued Gaussian process of a kernel");
  sample_cmd->add_option("--kernel,kernel", sample.kernel_path, "Kernel JSON file")->required();
  sample_cmd->add_option("--samples", sample.samples, "Number of joint draws M")->capture_default_str();
  sample_cmd->add_option("--seed", sample.seed, "Random seed")->capture_default_str();
  sample_cmd->add_option("--tol", sample.tol, "Relative rank truncation tolerance")->capture_default_str();
  sample_cmd->add_option("--out", sample_out, "Write the covariance report to this JSON file");
  sample_cmd->add_option("--emit-draws", sample_draws, "Write all draws to this CSV file");
  sample_cmd->add_option("--threads", sample.threads, "Worker threads")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (*check_cmd) {
    return emit(run_guarded("check-pd", [&] { return cmd_check_pd(check); }));
  }
  if (*fact_cmd) {
    if (!fact_out.empty()) fact.out_path = fact_out;
    return emit(run_guarded("factorize", [&] { return cmd_factorize(fact); }));
  }
  if (*dil_cmd) {
    return emit(run_guarded("dilate-contraction", [&] { return cmd_dilate_contraction(dil); }));
  }
  if (*naimark_cmd) {
    return emit(run_guarded("naimark", [&] { return cmd_naimark(naimark); }));
  }
  if (!sample_out.empty()) sample.out_path = sample_out;
  if (!sample_draws.empty()) sample.draws_path = sample_draws;
  return emit(run_guarded("sample", [&] { return cmd_sample(sample); }));
}
