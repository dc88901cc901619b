// Command-line entry point: run experiments, verify properties, generate data.

#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "nips/errors.hpp"
#include "nips/experiment.hpp"
#include "nips/io.hpp"
#include "nips/verify.hpp"

namespace {

constexpr const char* kExitCodes =
    "Exit codes:\n"
    "  0  success (converged or iteration limit reached; verify: all checks passed)\n"
    "  1  verify: at least one check failed\n"
    "  2  usage or configuration error\n"
    "  3  file could not be read, written or parsed\n"
    "  4  solver or numerical failure\n"
    "  5  audited inequality violated\n"
    "Environment: NIPS_LOG_LEVEL = error | info | debug (default error)\n";

bool setup_logging() {
  auto logger = spdlog::stderr_color_mt("nips");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::err);
  const char* env = std::getenv("NIPS_LOG_LEVEL");
  if (env == nullptr || *env == '\0') return true;
  const std::string level(env);
  if (level == "error") return true;
  if (level == "info") {
    spdlog::set_level(spdlog::level::info);
  } else if (level == "debug") {
    spdlog::set_level(spdlog::level::debug);
  } else {
    std::cerr << "NIPS_LOG_LEVEL must be error, info or debug\n";
    return false;
  }
  return true;
}

std::string config_help() {
  std::string s = "Configuration keys (defaults):\n";
  for (const auto& [k, v] : nips::config_keys()) s += "  " + k + " = " + v + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  if (!setup_logging()) return nips::kExitConfig;

  CLI::App app{"Inexact proximal splitting toolkit"};
  app.footer(kExitCodes);
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run an experiment described by a config file");
  run->footer(config_help());
  std::string config_path;
  std::vector<std::string> sets;
  std::string trace_out;
  bool audit = false;
  std::uint64_t seed = 0;
  std::size_t max_iters = 0;
  double tol = 0.0;
  std::string eta;
  double c = 0.0;
  double error_bound = 0.0;
  std::string variant;
  std::size_t minibatch = 0;
  bool print_config = false;
  run->add_option("config", config_path, "Config file (key = value lines)")->required();
  run->add_option("--set", sets, "Override any config key, as key=value (repeatable)");
  auto* o_trace = run->add_option("--trace-out", trace_out, "Trace CSV path");
  auto* o_audit = run->add_flag("--audit", audit, "Audit the descent inequalities each step");
  auto* o_seed = run->add_option("--seed", seed, "Seed for errors, shuffles and initialization");
  auto* o_iters = run->add_option("--max-iters", max_iters, "Outer iteration limit");
  auto* o_tol = run->add_option("--tol", tol, "Residual tolerance");
  auto* o_eta = run->add_option("--eta", eta, "Stepsize, or 'auto'");
  auto* o_c = run->add_option("--c", c, "Stepsize lower constant c (0 < c < 1/L)");
  auto* o_eb = run->add_option("--error-bound", error_bound, "Bound on eta * ||e||");
  auto* o_variant = run->add_option("--variant", variant, "major_only | minor_prox");
  auto* o_mb = run->add_option("--minibatch", minibatch, "Components per incremental block");
  run->add_flag("--print-config", print_config, "Print the effective config and exit");

  // verify
  auto* ver = app.add_subcommand("verify", "Run a property suite");
  std::string suite;
  std::uint64_t verify_seed = nips::VerifyOptions{}.seed;
  std::string fault;
  ver->add_option("suite", suite, "prox | lemmas | incremental | nmf | all")
      ->required()
      ->check(CLI::IsMember({"prox", "lemmas", "incremental", "nmf", "all"}));
  ver->add_option("--seed", verify_seed, "Seed of the randomized cases");
  ver->add_option("--inject-fault", fault)->group("")->check(CLI::IsMember({"a3_sign"}));

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a synthetic matrix");
  std::string kind;
  std::string dims;
  std::uint64_t gen_seed = 0;
  std::string out_path;
  double density = 0.01;
  std::size_t rank = 3;
  std::string format = "auto";
  gen->add_option("kind", kind, "uniform_dense | planted_nmf | sparse_uniform")
      ->required()
      ->check(CLI::IsMember({"uniform_dense", "planted_nmf", "sparse_uniform"}));
  gen->add_option("dims", dims, "MxN")->required();
  gen->add_option("seed", gen_seed)->required();
  gen->add_option("out", out_path, "Output path (.mtx for MatrixMarket, else CSV)")->required();
  gen->add_option("--density", density, "Nonzero probability for sparse_uniform");
  gen->add_option("--rank", rank, "Inner dimension for planted_nmf");
  gen->add_option("--format", format, "auto | matrix_market | dense_csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return nips::kExitConfig;
  }

  try {
    if (*run) {
      nips::ExperimentConfig cfg = nips::load_config(config_path);
      for (const std::string& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw nips::ConfigError("--set expects key=value");
        nips::apply_override(cfg, s.substr(0, eq), s.substr(eq + 1));
      }
      if (*o_trace) cfg.trace_out = trace_out;
      if (*o_audit) cfg.audit = audit;
      if (*o_seed) cfg.seed = seed;
      if (*o_iters) cfg.max_iters = max_iters;
      if (*o_tol) cfg.residual_tol = tol;
      if (*o_eta) nips::apply_override(cfg, "eta", eta);
      if (*o_c) cfg.c = c;
      if (*o_eb) cfg.error_bound = error_bound;
      if (*o_variant) cfg.variant = variant;
      if (*o_mb) cfg.minibatch = minibatch;
      if (print_config) {
        std::cout << nips::serialize_config(cfg);
        return nips::kExitOk;
      }
      return nips::run_experiment(cfg, std::cout, std::cerr);
    }
    if (*ver) {
      nips::VerifyOptions opts;
      opts.seed = verify_seed;
      opts.fault_a3_sign = fault == "a3_sign";
      return nips::verify(suite, std::cout, opts);
    }
    // gen
    const auto x = dims.find_first_of("xX");
    if (x == std::string::npos) throw nips::ConfigError("dims must look like MxN");
    std::size_t m = 0;
    std::size_t n = 0;
    try {
      m = std::stoul(dims.substr(0, x));
      n = std::stoul(dims.substr(x + 1));
    } catch (const std::exception&) {
      throw nips::ConfigError("dims must look like MxN");
    }
    nips::SyntheticParams params;
    params.density = density;
    params.rank = rank;
    const nips::SyntheticData data =
        nips::generate_synthetic(nips::synthetic_kind_from_string(kind), m, n, gen_seed, params);
    const nips::MatrixFormat f = format == "auto" ? nips::matrix_format_from_path(out_path)
                                                  : nips::matrix_format_from_string(format);
    nips::write_matrix(out_path, data.Y, f);
    if (data.X) nips::write_matrix(out_path + ".X" + (f == nips::MatrixFormat::matrix_market ? ".mtx" : ".csv"), *data.X, f);
    if (data.A) nips::write_matrix(out_path + ".A" + (f == nips::MatrixFormat::matrix_market ? ".mtx" : ".csv"), *data.A, f);
    return nips::kExitOk;
  } catch (const nips::ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return nips::kExitConfig;
  } catch (const nips::InvalidInput& e) {
    std::cerr << "invalid input: " << e.what() << '\n';
    return nips::kExitConfig;
  } catch (const nips::IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return nips::kExitIo;
  } catch (const nips::ParseError& e) {
    std::cerr << "parse error: " << e.what() << '\n';
    return nips::kExitIo;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return nips::kExitNumerical;
  }
}
