#include "opkernel/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <limits>
#include <ostream>
#include <sstream>

namespace opk::io {

json complex_to_json(Complex z) { return json::array({z.real(), z.imag()}); }

Complex complex_from_json(const json& j) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  throw ParseError("expected a complex number [re, im], got " + j.dump());
}

json matrix_to_json(const CMatrix& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index k = 0; k < m.cols(); ++k) row.push_back(complex_to_json(m(i, k)));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const CVector& v) {
  json out = json::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) out.push_back(complex_to_json(v(k)));
  return out;
}

CMatrix matrix_from_json(const json& j) {
  if (!j.is_array()) throw ParseError("expected a matrix (list of rows), got " + j.dump());
  if (j.empty()) return CMatrix(0, 0);
  const std::size_t cols = j[0].is_array() ? j[0].size() : 0;
  CMatrix m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_array() || j[i].size() != cols) {
      throw ParseError("matrix rows must be lists of equal length");
    }
    for (std::size_t k = 0; k < cols; ++k) {
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = complex_from_json(j[i][k]);
    }
  }
  return m;
}

namespace {

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw ParseError(std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

std::size_t require_dim(const json& j) {
  const json& dim = require(j, "dim");
  if (!dim.is_number_integer() || dim.get<long long>() <= 0) {
    throw ParseError("'dim' must be a positive integer");
  }
  return static_cast<std::size_t>(dim.get<long long>());
}

std::vector<std::string> require_labels(const json& j, const char* key) {
  const json& labels = require(j, key);
  if (!labels.is_array() || labels.empty()) {
    throw ParseError(std::string("'") + key + "' must be a nonempty list of strings");
  }
  std::vector<std::string> out;
  for (const auto& l : labels) {
    if (!l.is_string()) throw ParseError(std::string("'") + key + "' entries must be strings");
    out.push_back(l.get<std::string>());
  }
  return out;
}

IndexSet make_index_set(std::vector<std::string> labels) {
  try {
    return IndexSet(std::move(labels));
  } catch (const ValidationError& e) {
    throw ParseError(e.what());
  }
}

CMatrix require_square(const json& j, std::size_t dim, const std::string& what) {
  CMatrix m = matrix_from_json(j);
  const auto d = static_cast<Eigen::Index>(dim);
  if (m.rows() != d || m.cols() != d) {
    throw ParseError(what + " must be " + std::to_string(dim) + "x" + std::to_string(dim));
  }
  return m;
}

// Splits "s|t" into a pair of declared labels.  Labels may themselves
// contain '|', so every split point is tried.
std::pair<std::size_t, std::size_t> split_pair(const std::string& key, const IndexSet& labels) {
  std::optional<std::pair<std::size_t, std::size_t>> found;
  for (std::size_t pos = key.find('|'); pos != std::string::npos; pos = key.find('|', pos + 1)) {
    const std::string s = key.substr(0, pos);
    const std::string t = key.substr(pos + 1);
    if (labels.contains(s) && labels.contains(t)) {
      if (found) throw ParseError("ambiguous block key '" + key + "'");
      found = std::make_pair(labels.index_of(s), labels.index_of(t));
    }
  }
  if (!found) throw ParseError("block key '" + key + "' does not name two declared labels");
  return *found;
}

}  // namespace

OperatorKernel kernel_from_json(const json& j) {
  const std::size_t dim = require_dim(j);
  IndexSet labels = make_index_set(require_labels(j, "labels"));
  const json& blocks = require(j, "blocks");
  if (!blocks.is_object()) throw ParseError("'blocks' must be an object keyed by \"s|t\"");

  const std::size_t m = labels.size();
  std::vector<std::optional<CMatrix>> given(m * m);
  for (const auto& [key, value] : blocks.items()) {
    const auto [i, j2] = split_pair(key, labels);
    given[i * m + j2] = require_square(value, dim, "block '" + key + "'");
  }

  std::vector<CMatrix> table(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t k = i; k < m; ++k) {
      auto& upper = given[i * m + k];
      auto& lower = given[k * m + i];
      if (!upper && !lower) {
        throw ParseError("missing block '" + labels.label(i) + "|" + labels.label(k) + "'");
      }
      table[i * m + k] = upper ? *upper : CMatrix(lower->adjoint());
      table[k * m + i] = lower ? *lower : CMatrix(upper->adjoint());
    }
  }
  return OperatorKernel(std::move(labels), dim, std::move(table));
}

json kernel_to_json(const OperatorKernel& kernel) {
  json blocks = json::object();
  const auto& labels = kernel.index_set();
  for (std::size_t i = 0; i < kernel.size(); ++i) {
    for (std::size_t k = i; k < kernel.size(); ++k) {
      blocks[labels.label(i) + "|" + labels.label(k)] = matrix_to_json(kernel.block(i, k));
    }
  }
  return json{{"dim", kernel.dim()}, {"labels", labels.labels()}, {"blocks", std::move(blocks)}};
}

CMatrix contraction_from_json(const json& j) {
  const json& body = j.is_object() ? require(j, "matrix") : j;
  CMatrix a = matrix_from_json(body);
  if (a.rows() == 0 || a.rows() != a.cols()) throw ParseError("'matrix' must be square and nonempty");
  return a;
}

DiscretePOVM povm_from_json(const json& j, double tol) {
  const std::size_t dim = require_dim(j);
  std::vector<std::string> atoms = require_labels(j, "atoms");
  make_index_set(atoms);
  const json& effects = require(j, "effects");
  if (!effects.is_object()) throw ParseError("'effects' must be an object keyed by atom");
  std::vector<CMatrix> mats;
  for (const auto& atom : atoms) {
    if (!effects.contains(atom)) throw ParseError("missing effect for atom '" + atom + "'");
    mats.push_back(require_square(effects.at(atom), dim, "effect '" + atom + "'"));
  }
  if (effects.size() != atoms.size()) throw ParseError("'effects' names undeclared atoms");
  return DiscretePOVM(std::move(atoms), std::move(mats), tol);
}

json povm_to_json(const DiscretePOVM& povm) {
  json effects = json::object();
  for (std::size_t k = 0; k < povm.size(); ++k) {
    effects[povm.atoms().label(k)] = matrix_to_json(povm.effect(k));
  }
  return json{{"dim", povm.dim()}, {"atoms", povm.atoms().labels()}, {"effects", std::move(effects)}};
}

json factors_to_json(const DilationFactorization& fact) {
  json factors = json::object();
  const auto& labels = fact.kernel().index_set();
  for (std::size_t i = 0; i < fact.size(); ++i) {
    factors[labels.label(i)] = matrix_to_json(fact.factor(i));
  }
  return json{{"dim", fact.dim()},
              {"rank", fact.rank()},
              {"labels", labels.labels()},
              {"truncation_tol", fact.truncation_tol()},
              {"residual", fact.residual()},
              {"factors", std::move(factors)}};
}

OperatorKernel kernel_from_factors_json(const json& j) {
  const std::size_t dim = require_dim(j);
  const json& rank_field = require(j, "rank");
  if (!rank_field.is_number_integer() || rank_field.get<long long>() < 0) {
    throw ParseError("'rank' must be a nonnegative integer");
  }
  const auto rank = static_cast<Eigen::Index>(rank_field.get<long long>());
  IndexSet labels = make_index_set(require_labels(j, "labels"));
  const json& factors = require(j, "factors");
  std::vector<CMatrix> mats;
  for (const auto& label : labels.labels()) {
    if (!factors.contains(label)) throw ParseError("missing factor for label '" + label + "'");
    CMatrix v = rank == 0 ? CMatrix(0, static_cast<Eigen::Index>(dim)) : matrix_from_json(factors.at(label));
    if (v.rows() != rank || v.cols() != static_cast<Eigen::Index>(dim)) {
      throw ParseError("factor '" + label + "' must be rank x dim");
    }
    mats.push_back(std::move(v));
  }
  return OperatorKernel::from_factors(std::move(labels), mats);
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed JSON in '" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write '" + path + "'");
  out << text;
}

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path + "'");
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::istreambuf_iterator<char> it(in), end; it != end; ++it) {
    hash ^= static_cast<unsigned char>(*it);
    hash *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

void write_draw_header(std::ostream& out, std::size_t dim) {
  out << "draw,label";
  for (std::size_t k = 0; k < dim; ++k) out << ",re" << k << ",im" << k;
  out << '\n';
}

void write_draw_rows(std::ostream& out, const JointDraw& draw, const IndexSet& labels) {
  for (std::size_t i = 0; i < draw.values.size(); ++i) {
    out << draw.index << ',' << labels.label(i);
    for (Eigen::Index k = 0; k < draw.values[i].size(); ++k) {
      out << ',' << draw.values[i](k).real() << ',' << draw.values[i](k).imag();
    }
    out << '\n';
  }
}

CommandResult guarded_error(const std::string& command, int code, const std::string& message) {
  return CommandResult{json{{"command", command}, {"ok", false}, {"exit_code", code}, {"error", message}},
                       code};
}

namespace {

json input_echo(const std::string& path) {
  return json{{"path", path}, {"digest_fnv1a64", file_digest(path)}};
}

CVector random_vector(NormalStream& stream, Eigen::Index dim) {
  CVector v(dim);
  for (Eigen::Index k = 0; k < dim; ++k) v(k) = Complex{stream.next(), stream.next()};
  return v;
}

}  // namespace

CommandResult cmd_check_pd(const CheckPdOptions& options) {
  if (options.tol < 0.0) throw ValidationError("--tol must be nonnegative");
  const OperatorKernel kernel = kernel_from_json(read_json_file(options.kernel_path));
  const PdReport pd = is_positive_definite(kernel, options.tol);
  json report{{"command", "check-pd"},
              {"input", input_echo(options.kernel_path)},
              {"tolerances", {{"pd_tol", options.tol}}},
              {"dim", kernel.dim()},
              {"size", kernel.size()},
              {"min_eig", pd.min_eig},
              {"gram_norm_fro", pd.gram_norm},
              {"threshold", -options.tol * (1.0 + pd.gram_norm)},
              {"positive_definite", pd.positive},
              {"ok", pd.positive}};
  return {std::move(report), pd.positive ? kExitOk : kExitValidationError};
}

CommandResult cmd_factorize(const FactorizeOptions& options) {
  if (options.tol < 0.0) throw ValidationError("--tol must be nonnegative");
  const OperatorKernel kernel = kernel_from_json(read_json_file(options.kernel_path));
  const DilationFactorization fact = factorize(kernel, options.tol);
  const CMatrix stacked = fact.stacked();
  const auto minimal_rank = numerical_rank(stacked, std::sqrt(options.tol));
  json report{{"command", "factorize"},
              {"input", input_echo(options.kernel_path)},
              {"tolerances",
               {{"rank_tol", options.tol}, {"residual_bound", kResidualTol * (1.0 + fact.gram_norm())}}},
              {"dim", fact.dim()},
              {"size", fact.size()},
              {"rank", fact.rank()},
              {"stacked_rank", minimal_rank},
              {"minimal", static_cast<std::size_t>(minimal_rank) == fact.rank()},
              {"residual", fact.residual()},
              {"gram_norm_fro", fact.gram_norm()},
              {"ok", true}};
  if (options.out_path) {
    write_text_file(*options.out_path, factors_to_json(fact).dump(2) + "\n");
    report["factors_path"] = *options.out_path;
  }
  return {std::move(report), kExitOk};
}

CommandResult cmd_dilate_contraction(const DilateContractionOptions& options) {
  if (options.tol <= 0.0) throw ValidationError("--tol must be positive");
  const CMatrix a = contraction_from_json(read_json_file(options.matrix_path));
  const double norm = require_contraction(a);
  PowerDilationOptions pd_options;
  pd_options.power_tol = options.tol;
  pd_options.polar = options.polar;
  const ShiftDilation dil = power_dilation(a, options.window, pd_options);

  json residuals = json::array();
  for (std::size_t n = 1; n <= dil.max_power; ++n) {
    residuals.push_back(json{{"n", n}, {"residual_fro", dil.power_residuals[n - 1]}});
  }

  // Telescoping evaluation against the block Gram quadratic form on random h.
  NormalStream stream(options.seed);
  const std::size_t count = options.window + 1;
  const OperatorKernel toeplitz = contraction_kernel(a, options.window);
  double worst_gap = 0.0;
  double min_value = std::numeric_limits<double>::infinity();
  bool quadratic_ok = true;
  for (std::size_t trial = 0; trial < options.quadratic_trials; ++trial) {
    std::vector<CVector> h;
    double scale = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      h.push_back(random_vector(stream, a.rows()));
      scale += h.back().squaredNorm();
    }
    const double telescoped = telescoping_quadratic(a, h);
    const double direct = quadratic_form(toeplitz, h).real();
    const double gap = std::abs(telescoped - direct) / scale;
    worst_gap = std::max(worst_gap, gap);
    min_value = std::min(min_value, telescoped / scale);
    if (gap > 1e-10 || telescoped < -1e-10 * scale) quadratic_ok = false;
  }

  const bool ok = quadratic_ok && dil.max_power >= 1;
  json report{{"command", "dilate-contraction"},
              {"input", input_echo(options.matrix_path)},
              {"tolerances",
               {{"power_tol", options.tol},
                {"contraction_slack", kContractionSlack},
                {"rank_tol", pd_options.rank_tol},
                {"quadratic_tol", 1e-10}}},
              {"seed", options.seed},
              {"window", options.window},
              {"polar", options.polar},
              {"dim", a.rows()},
              {"spectral_norm", norm},
              {"rank", dil.fact.rank()},
              {"shift_defect", dil.shift_defect},
              {"max_power", dil.max_power},
              {"full_window", dil.max_power == options.window},
              {"power_residuals", std::move(residuals)},
              {"quadratic_check",
               {{"trials", options.quadratic_trials},
                {"vectors", count},
                {"max_relative_gap", worst_gap},
                {"min_normalized_value", options.quadratic_trials ? min_value : 0.0},
                {"ok", quadratic_ok}}},
              {"ok", ok}};
  return {std::move(report), ok ? kExitOk : kExitToleranceFailure};
}

CommandResult cmd_naimark(const NaimarkOptions& options) {
  if (options.tol <= 0.0) throw ValidationError("--tol must be positive");
  const DiscretePOVM povm = povm_from_json(read_json_file(options.povm_path), options.tol);
  const NaimarkDilation dil = naimark_dilate(povm, options.tol);

  json atoms = json::array();
  for (std::size_t j = 0; j < povm.size(); ++j) {
    atoms.push_back(json{{"atom", povm.atoms().label(j)},
                         {"projection_rank", static_cast<long>(std::lround(dil.projections[j].trace().real()))},
                         {"compression_defect", dil.compression_defects[j]}});
  }

  // Every subset for small outcome sets.
  constexpr std::size_t kMaxSubsetAtoms = 16;
  json subsets = nullptr;
  bool subsets_ok = true;
  if (povm.size() <= kMaxSubsetAtoms) {
    double worst = 0.0;
    const std::size_t total = std::size_t{1} << povm.size();
    for (std::size_t mask = 0; mask < total; ++mask) {
      std::vector<std::size_t> subset;
      for (std::size_t j = 0; j < povm.size(); ++j) {
        if (mask & (std::size_t{1} << j)) subset.push_back(j);
      }
      worst = std::max(worst, (povm.measure(subset) - povm_compress(dil, subset)).norm());
    }
    subsets_ok = worst <= options.tol;
    subsets = json{{"count", total}, {"max_defect", worst}, {"ok", subsets_ok}};
  }

  json report{{"command", "naimark"},
              {"input", input_echo(options.povm_path)},
              {"tolerances", {{"povm_tol", options.tol}, {"rank_tol", kDefaultRankTol}}},
              {"dim", povm.dim()},
              {"atoms", povm.size()},
              {"rank", dil.fact.rank()},
              {"isometry_defect", dil.isometry_defect},
              {"selfadjoint_defect", dil.selfadjoint_defect},
              {"idempotent_defect", dil.idempotent_defect},
              {"orthogonality_defect", dil.orthogonality_defect},
              {"completeness_defect", dil.completeness_defect},
              {"per_atom", std::move(atoms)},
              {"subsets", std::move(subsets)},
              {"ok", subsets_ok}};
  return {std::move(report), subsets_ok ? kExitOk : kExitToleranceFailure};
}

CommandResult cmd_sample(const SampleOptions& options) {
  if (options.samples == 0) throw ValidationError("--samples must be at least 1");
  if (options.tol < 0.0) throw ValidationError("--tol must be nonnegative");
  const OperatorKernel kernel = kernel_from_json(read_json_file(options.kernel_path));
  const DilationFactorization fact = factorize(kernel, options.tol);

  GaussianSampler sampler(fact, options.seed);
  const CovarianceTable table = estimate_all_covariances(sampler, options.samples, options.threads);
  const double bound = clt_tolerance(options.samples);
  const auto& labels = kernel.index_set();

  json pairs = json::array();
  for (std::size_t i = 0; i < table.size; ++i) {
    for (std::size_t j = 0; j < table.size; ++j) {
      const auto& est = table.at(i, j);
      pairs.push_back(json{{"s", labels.label(i)},
                           {"t", labels.label(j)},
                           {"estimate", matrix_to_json(est.matrix)},
                           {"max_abs_error", est.max_abs_error},
                           {"std_error", est.std_error}});
    }
  }
  const double mean_bound = 4.0 / std::sqrt(static_cast<double>(options.samples));
  const bool pass = table.max_abs_error() <= bound;

  json report{{"command", "sample"},
              {"input", input_echo(options.kernel_path)},
              {"tolerances",
               {{"rank_tol", options.tol}, {"clt_tol", bound}, {"mean_tol", mean_bound}}},
              {"seed", options.seed},
              {"samples", options.samples},
              {"generator", std::string(kNormalAlgorithm)},
              {"draws_per_block", kDrawsPerBlock},
              {"rank", fact.rank()},
              {"dim", fact.dim()},
              {"size", fact.size()},
              {"pairs", std::move(pairs)},
              {"max_abs_error", table.max_abs_error()},
              {"max_abs_mean", table.max_abs_mean()},
              {"mean_ok", table.max_abs_mean() <= mean_bound},
              {"pass", pass},
              {"ok", pass}};

  if (options.draws_path) {
    std::ofstream out(*options.draws_path);
    if (!out) throw ParseError("cannot write '" + *options.draws_path + "'");
    out.precision(17);
    write_draw_header(out, fact.dim());
    GaussianSampler replay(fact, options.seed);
    for (std::uint64_t n = 0; n < options.samples; ++n) write_draw_rows(out, replay.draw(), labels);
    report["draws_path"] = *options.draws_path;
  }
  if (options.out_path) {
    write_text_file(*options.out_path, report.dump(2) + "\n");
    report["report_path"] = *options.out_path;
  }
  return {std::move(report), pass ? kExitOk : kExitToleranceFailure};
}

}  // namespace opk::io
