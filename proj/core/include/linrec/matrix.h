// SPDX-License-Identifier: Apache-2.0
//
// Dense row-major matrices and the primitive operations the attention,
// autograd and model layers are built from.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace linrec {

/// Thrown whenever operand shapes violate an operation's precondition.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Dense 2-D array of doubles stored row-major. Always at least 1x1.
class Matrix {
 public:
  Matrix() : Matrix(1, 1) {}
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  Matrix(const Matrix& other);
  Matrix(Matrix&&) noexcept = default;
  Matrix& operator=(const Matrix& other);
  Matrix& operator=(Matrix&&) noexcept = default;

  static Matrix identity(std::size_t n);
  static Matrix row_vector(std::span<const double> values);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  bool all_finite() const;

  friend bool operator==(const Matrix& a, const Matrix& b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

/// Deterministic pseudo-random source. Single owner; never share across threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), engine_(seed) {}

  std::uint64_t seed() const { return seed_; }
  double gaussian(double mean, double stddev);
  double uniform(double lo, double hi);
  std::size_t index(std::size_t bound);
  /// Derive an independent generator, e.g. for a worker thread.
  Rng fork();
  std::mt19937_64& engine() { return engine_; }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

// Records the shape of every Matrix buffer allocated on the current thread
// while a scope is alive. Used to audit transient memory of attention paths.
class AllocationAudit {
 public:
  AllocationAudit();
  ~AllocationAudit();
  AllocationAudit(const AllocationAudit&) = delete;
  AllocationAudit& operator=(const AllocationAudit&) = delete;

  const std::vector<std::pair<std::size_t, std::size_t>>& shapes() const { return shapes_; }
  std::size_t largest_buffer_bytes() const;
  std::size_t count_with_shape(std::size_t rows, std::size_t cols) const;

  static void note(std::size_t rows, std::size_t cols);

 private:
  std::vector<std::pair<std::size_t, std::size_t>> shapes_;
  AllocationAudit* previous_;
};

inline constexpr double kNormEpsilon = 1e-12;

Matrix matmul(const Matrix& a, const Matrix& b);
/// a * b^T without materializing the transpose.
Matrix matmul_transposed(const Matrix& a, const Matrix& b);
/// a^T * b without materializing the transpose.
Matrix matmul_transposed_lhs(const Matrix& a, const Matrix& b);
Matrix transpose(const Matrix& x);
Matrix add(const Matrix& a, const Matrix& b);
Matrix subtract(const Matrix& a, const Matrix& b);
/// Adds a 1 x cols row to every row of x.
Matrix add_row(const Matrix& x, const Matrix& row);
Matrix scale(const Matrix& x, double factor);
Matrix hadamard(const Matrix& a, const Matrix& b);
Matrix concat_cols(std::span<const Matrix> parts);
Matrix concat_rows(std::span<const Matrix> parts);
Matrix slice_cols(const Matrix& x, std::size_t begin, std::size_t count);
Matrix slice_rows(const Matrix& x, std::size_t begin, std::size_t count);
double sum(const Matrix& x);
double max_abs(const Matrix& x);
double frobenius_norm(const Matrix& x);

/// Row-wise softmax with max subtraction. Columns whose `column_mask` entry
/// is zero receive exactly 0 probability; an empty mask keeps every column.
Matrix softmax_rows(const Matrix& x, std::span<const std::uint8_t> column_mask = {});
Matrix softmax_cols(const Matrix& x);
Matrix elu(const Matrix& x);
Matrix gelu(const Matrix& x);

/// Row i becomes row_i / (sqrt(scale_dim) * max(|row_i|_2, epsilon)).
Matrix l2_normalize_rows(const Matrix& x, std::size_t scale_dim, double epsilon = kNormEpsilon);
/// Column j becomes col_j / (sqrt(scale_len) * max(|col_j|_2, epsilon)).
Matrix l2_normalize_cols(const Matrix& x, std::size_t scale_len, double epsilon = kNormEpsilon);

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, double epsilon);

Matrix gaussian_init(Rng& rng, std::size_t rows, std::size_t cols, double mean, double stddev);
/// Inverted-dropout mask: entries are 0 with probability `rate`, else 1/(1-rate).
Matrix dropout_mask(Rng& rng, std::size_t rows, std::size_t cols, double rate);

}  // namespace linrec
