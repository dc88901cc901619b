#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace nips {

/// Process exit codes shared by every CLI subcommand.
enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitConfig = 2,
  kExitIo = 3,
  kExitNumerical = 4,
  kExitAudit = 5,
};

struct ExperimentConfig {
  std::string problem = "synthetic_quadratic";

  std::string data_path;
  std::string data_format = "auto";
  std::string data_kind = "uniform_dense";
  std::size_t data_m = 20;
  std::size_t data_n = 10;
  std::size_t data_rank = 3;
  std::uint64_t data_seed = 0;
  double data_density = 0.1;

  std::string solver = "batch";
  std::string variant = "minor_prox";
  std::string ordering = "cyclic";
  std::size_t minibatch = 1;

  /// 0 selects min(0.1 / L, 0.5).
  double c = 0.0;
  /// Unset means auto.
  std::optional<double> eta;
  std::optional<double> L;
  std::string error_model = "none";
  double error_bound = 0.0;
  double error_sigma = 1.0;
  std::uint64_t seed = 0;
  std::size_t max_iters = 1000;
  double residual_tol = 1e-8;

  std::string regularizer = "zero";
  double reg_weight = 0.0;
  /// Bounds of the box regularizer, applied to every coordinate.
  double reg_lower = 0.0;
  double reg_upper = 1.0;
  /// Starting point, applied to every coordinate and moved into dom g.
  double x0 = 0.1;

  std::size_t nmf_rank = 3;
  double nmf_lambda = 0.0;
  double nmf_gamma = 0.0;
  std::size_t nmf_minibatch = 0;
  double nmf_inner_tol = 1e-6;
  std::size_t nmf_inner_max_iters = 10000;
  bool nmf_inner_abort = false;

  std::string trace_out;
  std::string factors_out;
  bool audit = false;
  std::size_t trace_every = 1;
  bool record_time = true;

  /// Throws ConfigError on invalid values or combinations.
  void validate() const;
};

/// Flat "key = value" lines; '#' starts a comment. Unknown keys and bad
/// values throw ConfigError with the line number.
ExperimentConfig parse_config(std::istream& in);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Applies one "key = value" or "key=value" override.
void apply_override(ExperimentConfig& cfg, std::string_view key, std::string_view value);

/// Every key in documentation order.
std::string serialize_config(const ExperimentConfig& cfg);

/// Documented keys with their defaults, for --help.
std::vector<std::pair<std::string, std::string>> config_keys();

/// Builds and solves the configured problem, writes outputs, and prints a
/// summary to `out`. Returns an ExitCode; errors are reported on `err`.
int run_experiment(const ExperimentConfig& cfg, std::ostream& out, std::ostream& err);

}  // namespace nips
