#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string_view>

#include "nips/batch.hpp"
#include "nips/linalg.hpp"

namespace nips {

enum class MatrixFormat { matrix_market, dense_csv };

MatrixFormat matrix_format_from_string(std::string_view name);
/// .mtx selects MatrixMarket, anything else dense CSV.
MatrixFormat matrix_format_from_path(const std::filesystem::path& path);

/// MatrixMarket coordinate files load as sparse, MatrixMarket array and CSV
/// files as dense. Throws IoError if unreadable, ParseError otherwise.
DataMatrix read_matrix(const std::filesystem::path& path, MatrixFormat format);
DataMatrix read_matrix_market(std::istream& in);
Mat read_dense_csv(std::istream& in);

/// Sparse input is written in coordinate format, dense in array format.
void write_matrix_market(const std::filesystem::path& path, const DataMatrix& m);
void write_dense_csv(const std::filesystem::path& path, const Mat& m);
void write_matrix(const std::filesystem::path& path, const DataMatrix& m, MatrixFormat format);

enum class SyntheticKind { uniform_dense, planted_nmf, sparse_uniform };

SyntheticKind synthetic_kind_from_string(std::string_view name);
const char* to_string(SyntheticKind kind) noexcept;

struct SyntheticParams {
  /// Probability of a nonzero entry for sparse_uniform.
  double density = 0.01;
  /// Inner dimension for planted_nmf.
  std::size_t rank = 3;
};

struct SyntheticData {
  DataMatrix Y;
  /// Planted factors, Y = X A (planted_nmf only).
  std::optional<Mat> X;
  std::optional<Mat> A;
};

/// Entries uniform on [0, 1]; deterministic in `seed`.
SyntheticData generate_synthetic(SyntheticKind kind, std::size_t m, std::size_t n,
                                 std::uint64_t seed, const SyntheticParams& params = {});

inline constexpr std::string_view kTraceHeader = "k,eta,phi,rho_norm,err_norm,step_norm,wall_ms";

void write_trace(const IterationTrace& trace, std::ostream& out);
void write_trace(const IterationTrace& trace, const std::filesystem::path& path);
IterationTrace read_trace(std::istream& in);
IterationTrace read_trace(const std::filesystem::path& path);

}  // namespace nips
