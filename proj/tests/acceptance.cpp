// Acceptance report: one PASS/FAIL line per criterion, exit 1 if any fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "nips/experiment.hpp"
#include "nips/io.hpp"
#include "nips/nmf.hpp"
#include "nips/prox.hpp"
#include "nips/verify.hpp"
#include "support.hpp"

#ifndef NIPS_CONFIG_DIR
#error "NIPS_CONFIG_DIR must point at tests/configs"
#endif

namespace fs = std::filesystem;
using namespace nips;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Line {
  int id;
  std::string name;
  bool passed;
  std::string detail;
};

class Checks {
 public:
  explicit Checks(std::vector<CheckResult> all) {
    for (auto& c : all) by_name_[c.suite + "/" + c.name] = std::move(c);
  }
  bool passed(const std::string& key) const {
    const auto it = by_name_.find(key);
    return it != by_name_.end() && it->second.passed;
  }
  std::string detail(const std::string& key) const {
    const auto it = by_name_.find(key);
    if (it == by_name_.end()) return key + " missing";
    return it->second.detail + (it->second.replay.empty() ? "" : " replay: " + it->second.replay);
  }

 private:
  std::map<std::string, CheckResult> by_name_;
};

// Closed forms against a per-coordinate golden-section search, a reference that
// shares no code with the library oracle.
std::pair<bool, double> separable_crosscheck() {
  std::mt19937_64 rng(101);
  double worst = 0.0;
  const double w = 0.7;
  for (int i = 0; i < 50; ++i) {
    const auto n = static_cast<Eigen::Index>(1 + i % 3);
    const Vec y = testing::uniform_vec(rng, n, -3.0, 3.0);
    const double eta = std::uniform_real_distribution<double>(0.2, 2.0)(rng);
    const double big = 1e12;
    const Vec ref_l1 =
        testing::separable_prox([&](double v) { return w * std::abs(v); }, y, eta, -10, 10);
    const Vec ref_nn = testing::separable_prox([&](double v) { return v < 0 ? big : 0.0; }, y,
                                               eta, 0.0, 10);
    const Vec ref_l1nn = testing::separable_prox(
        [&](double v) { return v < 0 ? big : w * v; }, y, eta, 0.0, 10);
    const Vec ref_box = testing::separable_prox([](double) { return 0.0; }, y, eta, -1.0, 1.5);
    worst = std::max({worst, (ProxRegularizer::l1(w).prox(y, eta) - ref_l1).norm(),
                      (ProxRegularizer::nonneg().prox(y, eta) - ref_nn).norm(),
                      (ProxRegularizer::l1_nonneg(w).prox(y, eta) - ref_l1nn).norm(),
                      (ProxRegularizer::box(Vec::Constant(n, -1.0), Vec::Constant(n, 1.5))
                           .prox(y, eta) -
                       ref_box)
                          .norm()});
  }
  return {worst <= 1e-6, worst};
}

IncrementalConfig nmf_budget(std::size_t iters) {
  IncrementalConfig cfg;
  cfg.solver.max_outer_iters = iters;
  cfg.solver.residual_tol = 0.0;  // equal budgets: never stop early
  cfg.solver.trace_every = 0;
  cfg.solver.record_time = false;
  return cfg;
}

Line sparsity_claim() {
  const SyntheticData d = generate_synthetic(SyntheticKind::uniform_dense, 100, 200, 2024);
  NmfProblem base;
  base.Y = d.Y;
  base.rank = 8;
  NmfProblem pen = base;
  pen.lambda = 0.1;
  pen.gamma = 0.1;
  const IncrementalConfig cfg = nmf_budget(60);
  const NmfResult r0 = solve_nmf(base, std::uint64_t{5}, cfg);
  const NmfResult r1 = solve_nmf(pen, std::uint64_t{5}, cfg);
  const bool ok = r1.sparsity_X > r0.sparsity_X && r1.sparsity_A > r0.sparsity_A &&
                  r0.outer.iterations == r1.outer.iterations;
  return {10, "sparsity_claim", ok,
          fmt::format("budget={} sparsity_X {:.4f} -> {:.4f}, sparsity_A {:.4f} -> {:.4f}",
                      r0.outer.iterations, r0.sparsity_X, r1.sparsity_X, r0.sparsity_A,
                      r1.sparsity_A)};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// Runs one config into `dir` and returns everything it produced.
std::string run_outputs(const fs::path& cfg_path, const fs::path& dir) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  ExperimentConfig cfg = load_config(cfg_path);
  cfg.trace_out = (dir / "trace.csv").string();
  cfg.factors_out = (dir / "factors").string();
  cfg.record_time = false;
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_experiment(cfg, out, err);
  std::string all = fmt::format("exit={}\n{}{}", code, out.str(), err.str());
  for (const char* f : {"trace.csv", "factors_X.csv", "factors_A.csv"})
    if (fs::exists(dir / f)) all += slurp(dir / f);
  return all;
}

Line determinism() {
  std::ostringstream a;
  std::ostringstream b;
  const int ca = verify("all", a);
  const int cb = verify("all", b);
  bool ok = a.str() == b.str() && ca == cb && ca == 0;

  const fs::path scratch = fs::temp_directory_path() / "nips_acceptance";
  std::size_t configs = 0;
  std::string mismatch;
  for (const auto& entry : fs::directory_iterator(NIPS_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    ++configs;
    const std::string one = run_outputs(entry.path(), scratch / "one");
    const std::string two = run_outputs(entry.path(), scratch / "two");
    if (one != two) mismatch += entry.path().filename().string() + " ";
  }
  for (auto kind : {SyntheticKind::uniform_dense, SyntheticKind::planted_nmf,
                    SyntheticKind::sparse_uniform}) {
    if (to_dense(generate_synthetic(kind, 30, 40, 8).Y) !=
        to_dense(generate_synthetic(kind, 30, 40, 8).Y))
      mismatch += std::string(to_string(kind)) + " ";
  }
  ok = ok && mismatch.empty() && configs > 0;
  return {13, "determinism", ok,
          fmt::format("verify_all_identical={} configs={} mismatches=[{}]", a.str() == b.str(),
                      configs, mismatch)};
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::err);
  std::vector<Line> lines;

  auto t0 = Clock::now();
  std::vector<CheckResult> prox = run_verify("prox");
  const double prox_s = seconds_since(t0);
  std::vector<CheckResult> all = prox;
  for (const char* s : {"lemmas", "incremental"}) {
    auto r = run_verify(s);
    all.insert(all.end(), r.begin(), r.end());
  }
  t0 = Clock::now();
  auto nmf = run_verify("nmf");
  const double nmf_s = seconds_since(t0);
  all.insert(all.end(), nmf.begin(), nmf.end());
  const Checks c(all);

  const auto [sep_ok, sep_err] = separable_crosscheck();
  lines.push_back({1, "prox_correctness",
                   c.passed("prox/closed_form_vs_oracle") && sep_ok && prox_s < 30.0,
                   fmt::format("{}; golden_section_max_error={:.2e}; runtime={:.2f}s",
                               c.detail("prox/closed_form_vs_oracle"), sep_err, prox_s)});
  lines.push_back({2, "nonexpansive", c.passed("lemmas/nonexpansive"),
                   c.detail("lemmas/nonexpansive")});
  lines.push_back({3, "prox_monotonicity", c.passed("lemmas/prox_monotonicity"),
                   c.detail("lemmas/prox_monotonicity")});
  lines.push_back({4, "exact_descent", c.passed("lemmas/exact_descent"),
                   c.detail("lemmas/exact_descent")});
  lines.push_back({5, "inexact_audits", c.passed("lemmas/inexact_audits"),
                   c.detail("lemmas/inexact_audits")});
  lines.push_back({6, "residual_trend", c.passed("lemmas/residual_trend"),
                   c.detail("lemmas/residual_trend")});
  lines.push_back({7, "incremental_error_bounds", c.passed("incremental/error_bounds"),
                   c.detail("incremental/error_bounds")});
  lines.push_back({8, "batch_incremental_consistency",
                   c.passed("incremental/single_component_matches_batch") &&
                       c.passed("incremental/sum_of_quadratics_matches_batch"),
                   c.detail("incremental/single_component_matches_batch") + "; " +
                       c.detail("incremental/sum_of_quadratics_matches_batch")});
  lines.push_back({9, "nmf_desk_scale",
                   c.passed("nmf/planted_fit") && c.passed("nmf/rank_one_exact") && nmf_s < 10.0,
                   c.detail("nmf/planted_fit") + "; " + c.detail("nmf/rank_one_exact") +
                       fmt::format("; runtime={:.2f}s", nmf_s)});
  lines.push_back(sparsity_claim());
  lines.push_back({11, "gradient_formula", c.passed("nmf/gradient_formula"),
                   c.detail("nmf/gradient_formula")});
  lines.push_back({12, "dykstra", c.passed("prox/dykstra_l1_nonneg"),
                   c.detail("prox/dykstra_l1_nonneg")});
  lines.push_back(determinism());

  int failed = 0;
  for (const Line& l : lines) {
    std::cout << fmt::format("{} {:2d} {} {}\n", l.passed ? "PASS" : "FAIL", l.id, l.name,
                             l.detail);
    failed += l.passed ? 0 : 1;
  }
  std::cout << fmt::format("{} criteria, {} failed\n", lines.size(), failed);
  return failed == 0 ? 0 : 1;
}
