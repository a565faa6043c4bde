#pragma once

// File formats and command implementations behind the `opkernel` CLI.
//
// Complex numbers are [re, im] pairs (a bare number is read as a real
// value).  Matrices are row lists.  A kernel file is
//
//   { "dim": d, "labels": ["s0", ...],
//     "blocks": { "s0|s0": [[[re, im], ...], ...], "s0|s1": ..., ... } }
//
// where only pairs with i <= j (label order) are required; a lower pair that
// is present must agree with the adjoint of its mirror.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "opkernel/dilation.hpp"
#include "opkernel/gaussian.hpp"

namespace opk::io {

using nlohmann::json;

/// Process exit codes of the CLI.
enum ExitCode : int {
  kExitOk = 0,
  /// A certified residual or Monte Carlo bound failed.
  kExitToleranceFailure = 1,
  /// Unreadable file, malformed JSON, schema violation.
  kExitParseError = 2,
  /// Valid input violating a precondition: non-Hermitian or non-p.d.
  /// kernel, non-contraction, invalid POVM, bad argument values.
  kExitValidationError = 3,
  /// Command line could not be parsed.
  kExitUsage = 64,
};

json complex_to_json(Complex z);
Complex complex_from_json(const json& j);
json matrix_to_json(const CMatrix& m);
CMatrix matrix_from_json(const json& j);
json vector_to_json(const CVector& v);

/// Throws ParseError on schema problems, ValidationError on Hermitian
/// mismatch, DimensionError never escapes (reported as ParseError).
OperatorKernel kernel_from_json(const json& j);
/// Upper-triangle blocks only.
json kernel_to_json(const OperatorKernel& kernel);

/// { "matrix": [...] } or a bare matrix.
CMatrix contraction_from_json(const json& j);

/// { "dim": d, "atoms": [...], "effects": { "<atom>": matrix } }
DiscretePOVM povm_from_json(const json& j, double tol = kPovmTol);
json povm_to_json(const DiscretePOVM& povm);

/// { "dim", "rank", "labels", "factors": { label: r x d matrix }, ... }
json factors_to_json(const DilationFactorization& fact);
/// Rebuilds K(s_i, s_j) = V_i^* V_j from an exported factor file.
OperatorKernel kernel_from_factors_json(const json& j);

/// Reads and parses a JSON file; ParseError on failure.
json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// 64-bit FNV-1a of the file bytes, as 16 hex digits.
std::string file_digest(const std::string& path);

/// CSV header "draw,label,re0,im0,re1,im1,...".
void write_draw_header(std::ostream& out, std::size_t dim);
void write_draw_rows(std::ostream& out, const JointDraw& draw, const IndexSet& labels);

struct CommandResult {
  json report;
  int exit_code = kExitOk;
};

struct CheckPdOptions {
  std::string kernel_path;
  double tol = kDefaultPdTol;
};

struct FactorizeOptions {
  std::string kernel_path;
  double tol = kDefaultRankTol;
  std::optional<std::string> out_path;
};

struct DilateContractionOptions {
  std::string matrix_path;
  std::size_t window = 8;
  double tol = kPowerTol;
  std::uint64_t seed = 0;
  std::size_t quadratic_trials = 10;
  bool polar = false;
};

struct NaimarkOptions {
  std::string povm_path;
  double tol = kPovmTol;
};

struct SampleOptions {
  std::string kernel_path;
  std::uint64_t samples = 200000;
  std::uint64_t seed = 0;
  double tol = kDefaultRankTol;
  std::optional<std::string> out_path;
  std::optional<std::string> draws_path;
  unsigned threads = 1;
};

// Each command returns its report and exit code.  Input errors propagate as
// exceptions; run_guarded converts them into an error report.
CommandResult cmd_check_pd(const CheckPdOptions& options);
CommandResult cmd_factorize(const FactorizeOptions& options);
CommandResult cmd_dilate_contraction(const DilateContractionOptions& options);
CommandResult cmd_naimark(const NaimarkOptions& options);
CommandResult cmd_sample(const SampleOptions& options);

/// Runs a command, mapping ParseError (and JSON errors) to kExitParseError,
/// ValidationError / DimensionError to kExitValidationError and
/// ToleranceError to kExitToleranceFailure, with an "error" report.
template <class Fn>
CommandResult run_guarded(const std::string& command, Fn&& fn);

CommandResult guarded_error(const std::string& command, int code, const std::string& message);

template <class Fn>
CommandResult run_guarded(const std::string& command, Fn&& fn) {
  try {
    return fn();
  } catch (const ParseError& e) {
    return guarded_error(command, kExitParseError, e.what());
  } catch (const json::exception& e) {
    return guarded_error(command, kExitParseError, e.what());
  } catch (const NotPositiveDefinite& e) {
    CommandResult r = guarded_error(command, kExitValidationError, e.what());
    r.report["min_eig"] = e.min_eig();
    return r;
  } catch (const ValidationError& e) {
    return guarded_error(command, kExitValidationError, e.what());
  } catch (const DimensionError& e) {
    return guarded_error(command, kExitValidationError, e.what());
  } catch (const ToleranceError& e) {
    CommandResult r = guarded_error(command, kExitToleranceFailure, e.what());
    r.report["residual"] = e.residual();
    r.report["bound"] = e.bound();
    return r;
  }
}

}  // namespace opk::io
