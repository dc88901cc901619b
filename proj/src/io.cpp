#include "nips/io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/os.h>

#include "nips/errors.hpp"

namespace nips {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

double parse_double(std::string_view token, std::size_t line) {
  const std::string t(trim(token));
  if (t.empty()) throw ParseError("empty numeric field", line);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) throw ParseError("not a number: '" + t + "'", line);
  return v;
}

std::size_t parse_count(const std::string& token, std::size_t line) {
  std::size_t v = 0;
  const auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size())
    throw ParseError("not a nonnegative integer: '" + token + "'", line);
  return v;
}

std::vector<std::string> split_ws(const std::string& line) {
  std::istringstream ss(line);
  std::vector<std::string> out;
  for (std::string tok; ss >> tok;) out.push_back(tok);
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

// Next line that is neither blank nor a comment; false at end of input.
bool next_data_line(std::istream& in, std::string& line, std::size_t& lineno) {
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = trim(line);
    if (!t.empty() && t.front() != '%') return true;
  }
  return false;
}

}  // namespace

MatrixFormat matrix_format_from_string(std::string_view name) {
  const std::string n = lower(name);
  if (n == "matrix_market" || n == "mtx" || n == "mm") return MatrixFormat::matrix_market;
  if (n == "dense_csv" || n == "csv") return MatrixFormat::dense_csv;
  throw ConfigError("unknown matrix format '" + std::string(name) + "'");
}

MatrixFormat matrix_format_from_path(const std::filesystem::path& path) {
  return lower(path.extension().string()) == ".mtx" ? MatrixFormat::matrix_market
                                                    : MatrixFormat::dense_csv;
}

DataMatrix read_matrix_market(std::istream& in) {
  std::string line;
  std::size_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty MatrixMarket file", 1);
  ++lineno;
  const auto banner = split_ws(lower(line));
  if (banner.size() != 5 || banner[0] != "%%matrixmarket" || banner[1] != "matrix")
    throw ParseError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", lineno);
  const bool coordinate = banner[2] == "coordinate";
  if (!coordinate && banner[2] != "array")
    throw ParseError("unsupported MatrixMarket format '" + banner[2] + "'", lineno);
  const std::string& field = banner[3];
  if (field != "real" && field != "double" && field != "integer" && field != "pattern")
    throw ParseError("unsupported MatrixMarket field '" + field + "'", lineno);
  const bool pattern = field == "pattern";
  const std::string& sym = banner[4];
  if (sym != "general" && sym != "symmetric" && sym != "skew-symmetric")
    throw ParseError("unsupported MatrixMarket symmetry '" + sym + "'", lineno);
  if (!coordinate && (sym != "general" || pattern))
    throw ParseError("array files must be general and carry values", lineno);
  const double mirror = sym == "skew-symmetric" ? -1.0 : 1.0;

  if (!next_data_line(in, line, lineno)) throw ParseError("missing size line", lineno + 1);
  const auto size = split_ws(line);
  if (size.size() != (coordinate ? 3U : 2U)) throw ParseError("malformed size line", lineno);
  const std::size_t nr = parse_count(size[0], lineno);
  const std::size_t nc = parse_count(size[1], lineno);
  const auto r = static_cast<Eigen::Index>(nr);
  const auto c = static_cast<Eigen::Index>(nc);

  if (!coordinate) {
    Mat m(r, c);
    const std::size_t expected = nr * nc;
    std::size_t seen = 0;
    while (next_data_line(in, line, lineno)) {
      const auto toks = split_ws(line);
      if (toks.size() != 1) throw ParseError("expected one value per line", lineno);
      if (seen == expected)
        throw ParseError(fmt::format("more than the {} entries declared", expected), lineno);
      m(static_cast<Eigen::Index>(seen % nr), static_cast<Eigen::Index>(seen / nr)) =
          parse_double(toks[0], lineno);
      ++seen;
    }
    if (seen != expected)
      throw ParseError(fmt::format("expected {} entries, found {}", expected, seen), lineno);
    return m;
  }

  const std::size_t expected = parse_count(size[2], lineno);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(sym == "general" ? expected : 2 * expected);
  std::size_t seen = 0;
  while (next_data_line(in, line, lineno)) {
    const auto toks = split_ws(line);
    if (toks.size() != (pattern ? 2U : 3U)) throw ParseError("malformed entry line", lineno);
    if (seen == expected)
      throw ParseError(fmt::format("more than the {} entries declared", expected), lineno);
    const std::size_t i = parse_count(toks[0], lineno);
    const std::size_t j = parse_count(toks[1], lineno);
    if (i < 1 || i > nr || j < 1 || j > nc)
      throw ParseError(fmt::format("index ({}, {}) outside {}x{}", i, j, nr, nc), lineno);
    const double v = pattern ? 1.0 : parse_double(toks[2], lineno);
    const auto ii = static_cast<Eigen::Index>(i - 1);
    const auto jj = static_cast<Eigen::Index>(j - 1);
    triplets.emplace_back(ii, jj, v);
    if (sym != "general" && ii != jj) triplets.emplace_back(jj, ii, mirror * v);
    ++seen;
  }
  if (seen != expected)
    throw ParseError(fmt::format("expected {} entries, found {}", expected, seen), lineno);
  SpMat m(r, c);
  m.setFromTriplets(triplets.begin(), triplets.end());
  m.makeCompressed();
  return m;
}

Mat read_dense_csv(std::istream& in) {
  std::vector<std::vector<double>> rows_;
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      row.push_back(parse_double(rest.substr(0, comma), lineno));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (rows_.empty()) {
      width = row.size();
    } else if (row.size() != width) {
      throw ParseError(fmt::format("expected {} columns, found {}", width, row.size()), lineno);
    }
    rows_.push_back(std::move(row));
  }
  Mat m(static_cast<Eigen::Index>(rows_.size()), static_cast<Eigen::Index>(width));
  for (std::size_t i = 0; i < rows_.size(); ++i)
    for (std::size_t j = 0; j < width; ++j)
      m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows_[i][j];
  return m;
}

DataMatrix read_matrix(const std::filesystem::path& path, MatrixFormat format) {
  auto in = open_in(path);
  if (format == MatrixFormat::matrix_market) return read_matrix_market(in);
  return read_dense_csv(in);
}

void write_matrix_market(const std::filesystem::path& path, const DataMatrix& m) {
  try {
    auto out = fmt::output_file(path.string());
    if (const auto* s = std::get_if<SpMat>(&m)) {
      out.print("%%MatrixMarket matrix coordinate real general\n{} {} {}\n", s->rows(), s->cols(),
                s->nonZeros());
      for (Eigen::Index j = 0; j < s->outerSize(); ++j)
        for (SpMat::InnerIterator it(*s, j); it; ++it)
          out.print("{} {} {:.17g}\n", it.row() + 1, it.col() + 1, it.value());
    } else {
      const Mat& d = std::get<Mat>(m);
      out.print("%%MatrixMarket matrix array real general\n{} {}\n", d.rows(), d.cols());
      for (Eigen::Index j = 0; j < d.cols(); ++j)
        for (Eigen::Index i = 0; i < d.rows(); ++i) out.print("{:.17g}\n", d(i, j));
    }
  } catch (const std::system_error& e) {
    throw IoError("cannot write '" + path.string() + "': " + e.what());
  }
}

void write_dense_csv(const std::filesystem::path& path, const Mat& m) {
  try {
    auto out = fmt::output_file(path.string());
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
      for (Eigen::Index j = 0; j < m.cols(); ++j)
        out.print("{}{:.17g}", j == 0 ? "" : ",", m(i, j));
      out.print("\n");
    }
  } catch (const std::system_error& e) {
    throw IoError("cannot write '" + path.string() + "': " + e.what());
  }
}

void write_matrix(const std::filesystem::path& path, const DataMatrix& m, MatrixFormat format) {
  if (format == MatrixFormat::matrix_market)
    write_matrix_market(path, m);
  else
    write_dense_csv(path, to_dense(m));
}

SyntheticKind synthetic_kind_from_string(std::string_view name) {
  if (name == "uniform_dense") return SyntheticKind::uniform_dense;
  if (name == "planted_nmf") return SyntheticKind::planted_nmf;
  if (name == "sparse_uniform") return SyntheticKind::sparse_uniform;
  throw ConfigError("unknown synthetic kind '" + std::string(name) + "'");
}

const char* to_string(SyntheticKind kind) noexcept {
  switch (kind) {
    case SyntheticKind::uniform_dense:
      return "uniform_dense";
    case SyntheticKind::planted_nmf:
      return "planted_nmf";
    case SyntheticKind::sparse_uniform:
      return "sparse_uniform";
  }
  return "unknown";
}

SyntheticData generate_synthetic(SyntheticKind kind, std::size_t m, std::size_t n,
                                 std::uint64_t seed, const SyntheticParams& params) {
  if (m == 0 || n == 0) throw InvalidInput("synthetic dimensions must be positive");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](std::size_t r, std::size_t c) {
    Mat M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
    for (Eigen::Index j = 0; j < M.cols(); ++j)
      for (Eigen::Index i = 0; i < M.rows(); ++i) M(i, j) = unit(rng);
    return M;
  };

  SyntheticData out;
  switch (kind) {
    case SyntheticKind::uniform_dense:
      out.Y = uniform(m, n);
      break;
    case SyntheticKind::planted_nmf: {
      if (params.rank < 1 || params.rank > std::min(m, n))
        throw InvalidInput("planted rank must satisfy 1 <= K <= min(m, n)");
      out.X = uniform(m, params.rank);
      out.A = uniform(params.rank, n);
      out.Y = Mat(*out.X * *out.A);
      break;
    }
    case SyntheticKind::sparse_uniform: {
      if (!(params.density >= 0.0 && params.density <= 1.0))
        throw InvalidInput("density must lie in [0, 1]");
      std::bernoulli_distribution keep(params.density);
      std::vector<Eigen::Triplet<double>> triplets;
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t i = 0; i < m; ++i)
          if (keep(rng))
            triplets.emplace_back(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j),
                                  unit(rng));
      SpMat Y(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
      Y.setFromTriplets(triplets.begin(), triplets.end());
      Y.makeCompressed();
      out.Y = std::move(Y);
      break;
    }
  }
  return out;
}

void write_trace(const IterationTrace& trace, std::ostream& out) {
  out << kTraceHeader << '\n';
  for (const IterationRecord& r : trace)
    out << fmt::format("{},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g},{:.17g}\n", r.k, r.eta, r.phi,
                       r.rho_norm, r.err_norm, r.step_norm, r.wall_ms);
}

void write_trace(const IterationTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_trace(trace, out);
  if (!out.flush()) throw IoError("failed writing '" + path.string() + "'");
}

IterationTrace read_trace(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || trim(line) != kTraceHeader)
    throw ParseError("missing trace header", 1);
  IterationTrace trace;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 7) throw ParseError("expected 7 trace fields", lineno);
    IterationRecord r;
    r.k = parse_count(std::string(trim(f[0])), lineno);
    r.eta = parse_double(f[1], lineno);
    r.phi = parse_double(f[2], lineno);
    r.rho_norm = parse_double(f[3], lineno);
    r.err_norm = parse_double(f[4], lineno);
    r.step_norm = parse_double(f[5], lineno);
    r.wall_ms = parse_double(f[6], lineno);
    trace.push_back(r);
  }
  return trace;
}

IterationTrace read_trace(const std::filesystem::path& path) {
  auto in = open_in(path);
  return read_trace(in);
}

}  // namespace nips
