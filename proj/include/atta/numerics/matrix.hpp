#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "atta/errors.hpp"

namespace atta {

/// Dense row-major matrix of doubles. Every vector quantity in the library
/// (samples, latents, logits, biases) is one of these; a vector is a 1×n row.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVector = Eigen::Matrix<double, 1, Eigen::Dynamic>;

/// Gradients share the layout of the parameter list they belong to.
using Gradients = std::vector<Matrix>;

inline std::string shape_str(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

inline void require_cols(const Matrix& m, Eigen::Index cols, const char* what) {
  if (m.cols() != cols) {
    throw DimensionError(std::string(what) + ": expected " + std::to_string(cols) +
                         " columns, got " + shape_str(m));
  }
}

inline void require_same_shape(const Matrix& a, const Matrix& b, const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError(std::string(what) + ": shape mismatch " + shape_str(a) + " vs " +
                         shape_str(b));
  }
}

inline bool all_finite(const Matrix& m) {
  const double* d = m.data();
  for (Eigen::Index i = 0; i < m.size(); ++i)
    if (!std::isfinite(d[i])) return false;
  return true;
}

/// Index of the largest entry of row `r`; ties resolve to the smallest index.
inline int row_argmax(const Matrix& m, Eigen::Index r) {
  int best = 0;
  for (Eigen::Index k = 1; k < m.cols(); ++k) {
    if (m(r, k) > m(r, best)) best = static_cast<int>(k);
  }
  return best;
}

inline std::vector<int> argmax_rows(const Matrix& m) {
  std::vector<int> out(static_cast<std::size_t>(m.rows()));
  for (Eigen::Index r = 0; r < m.rows(); ++r) out[static_cast<std::size_t>(r)] = row_argmax(m, r);
  return out;
}

inline Gradients zeros_like(const std::vector<const Matrix*>& params) {
  Gradients g;
  g.reserve(params.size());
  for (const Matrix* p : params) g.push_back(Matrix::Zero(p->rows(), p->cols()));
  return g;
}

/// Row subset in the given order.
inline Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Eigen::Index>(i)) = m.row(static_cast<Eigen::Index>(rows[i]));
  }
  return out;
}

}  // namespace atta
