#include "nips/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <istream>
#include <ostream>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/spdlog.h>

#include "nips/batch.hpp"
#include "nips/errors.hpp"
#include "nips/incremental.hpp"
#include "nips/io.hpp"
#include "nips/nmf.hpp"
#include "nips/problems.hpp"

namespace nips {

namespace {

// ---------------------------------------------------------------------------
// Value codecs

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double to_double(std::string_view v) {
  const std::string s(v);
  char* end = nullptr;
  const double d = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw ConfigError("not a number: '" + s + "'");
  return d;
}

std::uint64_t to_u64(std::string_view v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (v.empty() || ec != std::errc() || ptr != v.data() + v.size())
    throw ConfigError("not a nonnegative integer: '" + std::string(v) + "'");
  return out;
}

bool to_bool(std::string_view v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("not a boolean: '" + std::string(v) + "'");
}

std::string num(double d) { return fmt::format("{}", d); }

struct Field {
  const char* key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, std::string_view)> set;
};

template <typename T>
Field text(const char* key, T ExperimentConfig::*m) {
  return {key, [m](const ExperimentConfig& c) { return c.*m; },
          [m](ExperimentConfig& c, std::string_view v) { c.*m = std::string(v); }};
}

template <typename T>
Field count(const char* key, T ExperimentConfig::*m) {
  return {key, [m](const ExperimentConfig& c) { return std::to_string(c.*m); },
          [m](ExperimentConfig& c, std::string_view v) { c.*m = static_cast<T>(to_u64(v)); }};
}

Field real(const char* key, double ExperimentConfig::*m) {
  return {key, [m](const ExperimentConfig& c) { return num(c.*m); },
          [m](ExperimentConfig& c, std::string_view v) { c.*m = to_double(v); }};
}

Field real_or_auto(const char* key, std::optional<double> ExperimentConfig::*m) {
  return {key,
          [m](const ExperimentConfig& c) { return (c.*m) ? num(*(c.*m)) : std::string("auto"); },
          [m](ExperimentConfig& c, std::string_view v) {
            if (v == "auto")
              (c.*m).reset();
            else
              c.*m = to_double(v);
          }};
}

Field flag(const char* key, bool ExperimentConfig::*m) {
  return {key, [m](const ExperimentConfig& c) { return std::string(c.*m ? "true" : "false"); },
          [m](ExperimentConfig& c, std::string_view v) { c.*m = to_bool(v); }};
}

const std::vector<Field>& fields() {
  using C = ExperimentConfig;
  static const std::vector<Field> table = {
      text("problem", &C::problem),
      text("data.path", &C::data_path),
      text("data.format", &C::data_format),
      text("data.kind", &C::data_kind),
      count("data.m", &C::data_m),
      count("data.n", &C::data_n),
      count("data.rank", &C::data_rank),
      count("data.seed", &C::data_seed),
      real("data.density", &C::data_density),
      text("solver", &C::solver),
      text("variant", &C::variant),
      text("ordering", &C::ordering),
      count("minibatch", &C::minibatch),
      real("c", &C::c),
      real_or_auto("eta", &C::eta),
      real_or_auto("L", &C::L),
      text("error_model", &C::error_model),
      real("error_bound", &C::error_bound),
      real("error_sigma", &C::error_sigma),
      count("seed", &C::seed),
      count("max_iters", &C::max_iters),
      real("residual_tol", &C::residual_tol),
      text("regularizer", &C::regularizer),
      real("reg.weight", &C::reg_weight),
      real("reg.lower", &C::reg_lower),
      real("reg.upper", &C::reg_upper),
      real("x0", &C::x0),
      count("nmf.rank", &C::nmf_rank),
      real("nmf.lambda", &C::nmf_lambda),
      real("nmf.gamma", &C::nmf_gamma),
      count("nmf.minibatch", &C::nmf_minibatch),
      real("nmf.inner_tol", &C::nmf_inner_tol),
      count("nmf.inner_max_iters", &C::nmf_inner_max_iters),
      flag("nmf.inner_abort", &C::nmf_inner_abort),
      text("trace_out", &C::trace_out),
      text("factors_out", &C::factors_out),
      flag("audit", &C::audit),
      count("trace_every", &C::trace_every),
      flag("record_time", &C::record_time),
  };
  return table;
}

void require_one_of(const std::string& value, std::initializer_list<const char*> allowed,
                    const char* key) {
  for (const char* a : allowed)
    if (value == a) return;
  std::string list;
  for (const char* a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
  throw ConfigError(fmt::format("{} = '{}' is not one of {{{}}}", key, value, list));
}

// ---------------------------------------------------------------------------
// Problem construction

DataMatrix load_data(const ExperimentConfig& cfg) {
  if (!cfg.data_path.empty()) {
    const MatrixFormat f = cfg.data_format == "auto" ? matrix_format_from_path(cfg.data_path)
                                                     : matrix_format_from_string(cfg.data_format);
    return read_matrix(cfg.data_path, f);
  }
  SyntheticParams p;
  p.density = cfg.data_density;
  p.rank = cfg.data_rank;
  return generate_synthetic(synthetic_kind_from_string(cfg.data_kind), cfg.data_m, cfg.data_n,
                            cfg.data_seed, p)
      .Y;
}

ProxRegularizer make_regularizer(const ExperimentConfig& cfg, std::size_t dim) {
  if (cfg.regularizer == "box") {
    const auto n = static_cast<Eigen::Index>(dim);
    return ProxRegularizer::box(Vec::Constant(n, cfg.reg_lower), Vec::Constant(n, cfg.reg_upper));
  }
  return ProxRegularizer::from_name(cfg.regularizer, cfg.reg_weight);
}

// Smooth part as components plus a tight Lipschitz constant for the whole sum.
struct Built {
  std::vector<SmoothOracle> components;
  SmoothOracle whole;
};

Built build_smooth(const ExperimentConfig& cfg) {
  Built b;
  if (cfg.problem == "quartic_1d") {
    b.whole = quartic_1d_oracle(2.0, cfg.seed);
    b.components = {b.whole};
    return b;
  }
  const DataMatrix data = load_data(cfg);
  DataMatrix D;
  Vec y;
  if (cfg.problem == "custom_decomposable") {
    if (cols(data) < 2) throw InvalidInput("custom_decomposable data needs rows [a_t, b_t]");
    const Mat dense = to_dense(data);
    D = Mat(dense.leftCols(dense.cols() - 1));
    y = dense.col(dense.cols() - 1);
  } else {
    // Targets D * 1, so x = 1 fits exactly without a regularizer.
    y = std::visit([](const auto& m) { return Vec(m * Vec::Ones(m.cols())); }, data);
    D = data;
  }
  b.components = least_squares_rows(D, y);
  b.whole = least_squares_oracle(D, y);
  return b;
}

SolverConfig solver_config(const ExperimentConfig& cfg) {
  SolverConfig s;
  s.c = cfg.c;
  if (cfg.eta) s.eta_schedule = schedule::Constant{*cfg.eta};
  s.max_outer_iters = cfg.max_iters;
  s.residual_tol = cfg.residual_tol;
  if (cfg.error_model == "gaussian_clipped")
    s.error_model = ErrorModel::gaussian_clipped(cfg.error_sigma, cfg.error_bound, cfg.seed);
  s.trace_every = cfg.trace_every;
  s.audit_inequalities = cfg.audit;
  s.record_time = cfg.record_time;
  return s;
}

IncrementalConfig incremental_config(const ExperimentConfig& cfg) {
  IncrementalConfig ic;
  ic.solver = solver_config(cfg);
  ic.minor = minor_operator_from_string(cfg.variant);
  ic.ordering = cfg.ordering == "shuffled" ? Ordering::shuffled : Ordering::cyclic;
  ic.shuffle_seed = cfg.seed;
  ic.minibatch = cfg.minibatch;
  return ic;
}

void print_vector(std::ostream& out, const Vec& x) {
  if (x.size() > 10) return;
  out << "x =";
  for (Eigen::Index i = 0; i < x.size(); ++i) out << fmt::format(" {:.17g}", x[i]);
  out << '\n';
}

struct Outcome {
  SolveStatus status;
  std::size_t iterations;
  double phi;
  double rho;
  std::string violation;
};

void report(std::ostream& out, const Outcome& o) {
  out << "status = " << to_string(o.status) << '\n'
      << "iterations = " << o.iterations << '\n'
      << fmt::format("phi = {:.17g}\nrho_norm = {:.17g}\n", o.phi, o.rho);
}

int finish(const ExperimentConfig& cfg, const IterationTrace& trace, const Outcome& o,
           std::ostream& err) {
  if (!cfg.trace_out.empty()) write_trace(trace, std::filesystem::path(cfg.trace_out));
  if (o.status == SolveStatus::audit_violation) {
    err << "audit violation: " << o.violation << '\n';
    return kExitAudit;
  }
  return kExitOk;
}

int run_smooth(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  Built b = build_smooth(cfg);
  const std::size_t dim = b.whole.dim;
  const ProxRegularizer g = make_regularizer(cfg, dim);
  if (cfg.L) {
    b.whole.lipschitz = *cfg.L;
    for (SmoothOracle& f : b.components) f.lipschitz = *cfg.L;
  }
  // A tiny step maps the start into dom g without moving it elsewhere.
  const Vec x0 = g.prox(Vec::Constant(static_cast<Eigen::Index>(dim), cfg.x0), 1e-12);

  if (cfg.solver == "batch") {
    const CompositeProblem problem(b.whole, g);
    const BatchResult r = solve_batch(problem, x0, solver_config(cfg));
    const Outcome o{r.status, r.iterations, problem.phi(r.x), r.final_rho_norm,
                    r.violation ? fmt::format("k={} {}", r.violation->k, r.violation->failure)
                                : std::string()};
    report(out, o);
    print_vector(out, r.x);
    return finish(cfg, r.trace, o, err);
  }
  const DecomposableProblem problem(std::move(b.components), g);
  const IncrementalResult r = solve_incremental(problem, x0, incremental_config(cfg));
  const Outcome o{r.status, r.iterations, problem.phi(r.x), r.final_rho_norm,
                  r.violation ? fmt::format("k={} {}", r.violation->k, r.violation->failure)
                              : std::string()};
  report(out, o);
  print_vector(out, r.x);
  return finish(cfg, r.trace, o, err);
}

int run_nmf(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  NmfProblem p;
  p.Y = load_data(cfg);
  p.rank = cfg.nmf_rank;
  p.lambda = cfg.nmf_lambda;
  p.gamma = cfg.nmf_gamma;
  p.minibatch = cfg.solver == "batch" ? p.T() : cfg.nmf_minibatch;
  p.inner.tol = cfg.nmf_inner_tol;
  p.inner.max_iters = cfg.nmf_inner_max_iters;
  p.inner.abort_on_failure = cfg.nmf_inner_abort;
  const NmfResult r = solve_nmf(p, NmfInit{cfg.seed}, incremental_config(cfg));
  const Outcome o{r.outer.status, r.outer.iterations, r.objective, r.outer.final_rho_norm,
                  r.outer.violation
                      ? fmt::format("k={} {}", r.outer.violation->k, r.outer.violation->failure)
                      : std::string()};
  report(out, o);
  out << fmt::format("fit = {:.17g}\nsparsity_X = {:.17g}\nsparsity_A = {:.17g}\n", r.fit,
                     r.sparsity_X, r.sparsity_A)
      << "reinitialized = " << (r.reinitialized ? "true" : "false") << '\n';
  if (!cfg.factors_out.empty()) {
    write_dense_csv(cfg.factors_out + "_X.csv", r.X);
    write_dense_csv(cfg.factors_out + "_A.csv", r.A);
  }
  return finish(cfg, r.outer.trace, o, err);
}

}  // namespace

void ExperimentConfig::validate() const {
  require_one_of(problem, {"nmf", "synthetic_quadratic", "quartic_1d", "custom_decomposable"},
                 "problem");
  require_one_of(data_format, {"auto", "matrix_market", "dense_csv"}, "data.format");
  require_one_of(data_kind, {"uniform_dense", "planted_nmf", "sparse_uniform"}, "data.kind");
  require_one_of(solver, {"batch", "incremental"}, "solver");
  require_one_of(variant, {"major_only", "minor_prox"}, "variant");
  require_one_of(ordering, {"cyclic", "shuffled"}, "ordering");
  require_one_of(error_model, {"none", "gaussian_clipped"}, "error_model");
  require_one_of(regularizer, {"zero", "l1", "indicator_nonneg", "l1_plus_nonneg", "box"},
                 "regularizer");
  if (minibatch < 1) throw ConfigError("minibatch must be >= 1");
  if (!(data_density >= 0.0 && data_density <= 1.0))
    throw ConfigError("data.density must lie in [0, 1]");
  if (!(c >= 0.0) || !std::isfinite(c)) throw ConfigError("c must be finite and >= 0");
  if (eta && !(*eta > 0.0)) throw ConfigError("eta must be > 0");
  if (L && !(*L > 0.0 && std::isfinite(*L))) throw ConfigError("L must be finite and > 0");
  if (L && c > 0.0 && !(c < 1.0 / *L))
    throw ConfigError(fmt::format("c = {} must be < 1/L = {}", c, 1.0 / *L));
  if (L && eta) stepsize_for(*L, c > 0.0 ? c : default_c(*L), 0, schedule::Constant{*eta});
  if (!(error_bound >= 0.0)) throw ConfigError("error_bound must be >= 0");
  if (!(error_sigma >= 0.0)) throw ConfigError("error_sigma must be >= 0");
  if (error_model != "none" && (solver == "incremental" || problem == "nmf"))
    throw ConfigError("injected errors are only supported by the batch solver");
  if (!(residual_tol >= 0.0)) throw ConfigError("residual_tol must be >= 0");
  if (!(reg_weight >= 0.0) || !std::isfinite(reg_weight))
    throw ConfigError("reg.weight must be finite and >= 0");
  if (regularizer == "box" && !(reg_lower <= reg_upper))
    throw ConfigError("reg.lower must not exceed reg.upper");
  if (problem == "nmf") {
    if (L) throw ConfigError("nmf uses local curvature estimates; L must be auto");
    if (nmf_rank < 1) throw ConfigError("nmf.rank must be >= 1");
    if (!(nmf_lambda >= 0.0) || !(nmf_gamma >= 0.0))
      throw ConfigError("nmf.lambda and nmf.gamma must be >= 0");
    if (!(nmf_inner_tol > 0.0)) throw ConfigError("nmf.inner_tol must be > 0");
  }
}

void apply_override(ExperimentConfig& cfg, std::string_view key, std::string_view value) {
  key = trim(key);
  value = trim(value);
  for (const Field& f : fields()) {
    if (key == f.key) {
      f.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown configuration key '" + std::string(key) + "'");
}

ExperimentConfig parse_config(std::istream& in) {
  ExperimentConfig cfg;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view body(line);
    body = trim(body.substr(0, body.find('#')));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(fmt::format("line {}: expected 'key = value'", lineno));
    try {
      apply_override(cfg, body.substr(0, eq), body.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(fmt::format("line {}: {}", lineno, e.what()));
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path.string() + "'");
  return parse_config(in);
}

std::string serialize_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const Field& f : fields()) out += fmt::format("{} = {}\n", f.key, f.get(cfg));
  return out;
}

std::vector<std::pair<std::string, std::string>> config_keys() {
  const ExperimentConfig defaults;
  std::vector<std::pair<std::string, std::string>> out;
  for (const Field& f : fields()) out.emplace_back(f.key, f.get(defaults));
  return out;
}

int run_experiment(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    cfg.validate();
    spdlog::info("running {} with the {} solver", cfg.problem, cfg.solver);
    return cfg.problem == "nmf" ? run_nmf(cfg, out, err) : run_smooth(cfg, out, err);
  } catch (const ConfigError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const InvalidInput& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "solver error: " << e.what() << '\n';
    return kExitNumerical;
  }
}

}  // namespace nips
