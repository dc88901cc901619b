#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace nips {

struct VerifyOptions {
  std::uint64_t seed = 7;
  /// Mutation fixture: negate a3 when re-checking the corollary constants.
  bool fault_a3_sign = false;
};

struct CheckResult {
  std::string suite;
  std::string name;
  bool passed = true;
  std::string detail;
  /// Serialized failing case, empty on success.
  std::string replay;
};

/// Suites: prox, lemmas, incremental, nmf, all. Throws ConfigError otherwise.
std::vector<CheckResult> run_verify(std::string_view suite, const VerifyOptions& opts = {});

/// Prints one line per check and a summary; returns 0 iff every check passed.
int verify(std::string_view suite, std::ostream& out, const VerifyOptions& opts = {});

}  // namespace nips
