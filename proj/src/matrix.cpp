#include "coxplain/matrix.hpp"

#include <cmath>
#include <stdexcept>

namespace coxplain {

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(rows.size(), rows.size() ? rows.begin()->size() : 0);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != m.cols_) throw std::invalid_argument("Matrix::from_rows: ragged rows");
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

std::string Matrix::shape_str() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

Matrix matmul(const Matrix& a, const Matrix& b, bool trans_a, bool trans_b) {
  const std::size_t ar = trans_a ? a.cols() : a.rows();
  const std::size_t ac = trans_a ? a.rows() : a.cols();
  const std::size_t br = trans_b ? b.cols() : b.rows();
  const std::size_t bc = trans_b ? b.rows() : b.cols();
  if (ac != br)
    throw std::invalid_argument("matmul: inner dims differ (" + a.shape_str() + " vs " +
                                b.shape_str() + ")");
  Matrix c(ar, bc);
  if (!trans_a && !trans_b) {
    // i-k-j ordering keeps the inner loop contiguous on both b and c.
    for (std::size_t i = 0; i < ar; ++i)
      for (std::size_t k = 0; k < ac; ++k) {
        const double aik = a(i, k);
        if (aik == 0.0) continue;
        const std::size_t row_b = k * bc;
        const std::size_t row_c = i * bc;
        auto bd = b.data();
        auto cd = c.data();
        for (std::size_t j = 0; j < bc; ++j) cd[row_c + j] += aik * bd[row_b + j];
      }
  } else {
    for (std::size_t i = 0; i < ar; ++i)
      for (std::size_t j = 0; j < bc; ++j) {
        double acc = 0.0;
        for (std::size_t k = 0; k < ac; ++k) {
          const double av = trans_a ? a(k, i) : a(i, k);
          const double bv = trans_b ? b(j, k) : b(k, j);
          acc += av * bv;
        }
        c(i, j) = acc;
      }
  }
  return c;
}

Matrix gather_rows(const Matrix& src, std::span<const std::size_t> indices) {
  Matrix out(indices.size(), src.cols());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= src.rows()) throw std::out_of_range("gather_rows: index out of range");
    auto s = src.row(indices[i]);
    auto d = out.row(i);
    std::copy(s.begin(), s.end(), d.begin());
  }
  return out;
}

Matrix column_means(const Matrix& m) {
  if (m.rows() == 0) throw std::invalid_argument("column_means: empty matrix");
  Matrix out(1, m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r)
    for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) += m(r, c);
  for (std::size_t c = 0; c < m.cols(); ++c) out(0, c) /= static_cast<double>(m.rows());
  return out;
}

Matrix repeat_row(const Matrix& row, std::size_t rows) {
  if (row.rows() != 1) throw std::invalid_argument("repeat_row: expected 1-row matrix");
  Matrix out(rows, row.cols());
  for (std::size_t r = 0; r < rows; ++r) {
    auto d = out.row(r);
    auto s = row.row(0);
    std::copy(s.begin(), s.end(), d.begin());
  }
  return out;
}

}  // namespace coxplain
