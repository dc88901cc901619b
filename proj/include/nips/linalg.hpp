#pragma once

#include <cstddef>
#include <variant>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace nips {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SpMat = Eigen::SparseMatrix<double>;

/// Data matrix that keeps sparse inputs sparse.
using DataMatrix = std::variant<Mat, SpMat>;

inline std::size_t rows(const DataMatrix& m) {
  return std::visit([](const auto& a) { return static_cast<std::size_t>(a.rows()); }, m);
}

inline std::size_t cols(const DataMatrix& m) {
  return std::visit([](const auto& a) { return static_cast<std::size_t>(a.cols()); }, m);
}

inline bool is_sparse(const DataMatrix& m) { return std::holds_alternative<SpMat>(m); }

inline Vec column(const DataMatrix& m, std::size_t j) {
  const auto c = static_cast<Eigen::Index>(j);
  if (const auto* d = std::get_if<Mat>(&m)) return d->col(c);
  return Vec(std::get<SpMat>(m).col(c));
}

inline Mat to_dense(const DataMatrix& m) {
  if (const auto* d = std::get_if<Mat>(&m)) return *d;
  return Mat(std::get<SpMat>(m));
}

}  // namespace nips
