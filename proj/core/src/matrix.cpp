// SPDX-License-Identifier: Apache-2.0

#include "linrec/matrix.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace linrec {
namespace {

thread_local AllocationAudit* active_audit = nullptr;

void require_nonempty(std::size_t rows, std::size_t cols) {
  if (rows == 0 || cols == 0) {
    throw ShapeError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* op) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " +
                     b.shape_string());
  }
}

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill) : rows_(rows), cols_(cols) {
  require_nonempty(rows, cols);
  AllocationAudit::note(rows, cols);
  data_.assign(rows * cols, fill);
}

Matrix::Matrix(std::initializer_list<std::initializer_list<double>> rows)
    : rows_(rows.size()), cols_(rows.size() == 0 ? 0 : rows.begin()->size()) {
  require_nonempty(rows_, cols_);
  AllocationAudit::note(rows_, cols_);
  data_.reserve(rows_ * cols_);
  for (const auto& r : rows) {
    if (r.size() != cols_) throw ShapeError("ragged initializer list");
    data_.insert(data_.end(), r.begin(), r.end());
  }
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  require_nonempty(rows, cols);
  if (data_.size() != rows * cols) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match " +
                     std::to_string(rows) + "x" + std::to_string(cols));
  }
  AllocationAudit::note(rows, cols);
}

Matrix::Matrix(const Matrix& other)
    : rows_(other.rows_), cols_(other.cols_), data_(other.data_) {
  AllocationAudit::note(rows_, cols_);
}

Matrix& Matrix::operator=(const Matrix& other) {
  if (this != &other) {
    AllocationAudit::note(other.rows_, other.cols_);
    rows_ = other.rows_;
    cols_ = other.cols_;
    data_ = other.data_;
  }
  return *this;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) out(i, i) = 1.0;
  return out;
}

Matrix Matrix::row_vector(std::span<const double> values) {
  return Matrix(1, values.size(), std::vector<double>(values.begin(), values.end()));
}

std::string Matrix::shape_string() const {
  return std::to_string(rows_) + "x" + std::to_string(cols_);
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double Rng::gaussian(double mean, double stddev) {
  std::normal_distribution<double> dist(mean, stddev);
  return dist(engine_);
}

double Rng::uniform(double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  return dist(engine_);
}

std::size_t Rng::index(std::size_t bound) {
  std::uniform_int_distribution<std::size_t> dist(0, bound - 1);
  return dist(engine_);
}

Rng Rng::fork() { return Rng(engine_()); }

AllocationAudit::AllocationAudit() : previous_(active_audit) { active_audit = this; }

AllocationAudit::~AllocationAudit() { active_audit = previous_; }

void AllocationAudit::note(std::size_t rows, std::size_t cols) {
  if (active_audit != nullptr) active_audit->shapes_.emplace_back(rows, cols);
}

std::size_t AllocationAudit::largest_buffer_bytes() const {
  std::size_t best = 0;
  for (const auto& [r, c] : shapes_) best = std::max(best, r * c * sizeof(double));
  return best;
}

std::size_t AllocationAudit::count_with_shape(std::size_t rows, std::size_t cols) const {
  return static_cast<std::size_t>(std::count(shapes_.begin(), shapes_.end(),
                                             std::pair<std::size_t, std::size_t>{rows, cols}));
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + a.shape_string() + " * " +
                     b.shape_string());
  }
  Matrix out(a.rows(), b.cols());
  const std::size_t inner = a.cols();
  const std::size_t n = b.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double* out_row = out.row(i).data();
    const double* a_row = a.row(i).data();
    for (std::size_t k = 0; k < inner; ++k) {
      const double aik = a_row[k];
      if (aik == 0.0) continue;
      const double* b_row = b.row(k).data();
      for (std::size_t j = 0; j < n; ++j) out_row[j] += aik * b_row[j];
    }
  }
  return out;
}

Matrix matmul_transposed(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.cols()) {
    throw ShapeError("matmul_transposed: column counts differ, " + a.shape_string() + " * (" +
                     b.shape_string() + ")^T");
  }
  Matrix out(a.rows(), b.rows());
  const std::size_t inner = a.cols();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double* a_row = a.row(i).data();
    double* out_row = out.row(i).data();
    for (std::size_t j = 0; j < b.rows(); ++j) {
      const double* b_row = b.row(j).data();
      double acc = 0.0;
      for (std::size_t k = 0; k < inner; ++k) acc += a_row[k] * b_row[k];
      out_row[j] = acc;
    }
  }
  return out;
}

Matrix matmul_transposed_lhs(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) {
    throw ShapeError("matmul_transposed_lhs: row counts differ, (" + a.shape_string() + ")^T * " +
                     b.shape_string());
  }
  Matrix out(a.cols(), b.cols());
  const std::size_t n = b.cols();
  for (std::size_t m = 0; m < a.rows(); ++m) {
    const double* a_row = a.row(m).data();
    const double* b_row = b.row(m).data();
    for (std::size_t i = 0; i < a.cols(); ++i) {
      const double ami = a_row[i];
      if (ami == 0.0) continue;
      double* out_row = out.row(i).data();
      for (std::size_t j = 0; j < n; ++j) out_row[j] += ami * b_row[j];
    }
  }
  return out;
}

Matrix transpose(const Matrix& x) {
  Matrix out(x.cols(), x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(j, i) = x(i, j);
  return out;
}

Matrix add(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "add");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] += bd[i];
  return out;
}

Matrix subtract(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "subtract");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bd[i];
  return out;
}

Matrix add_row(const Matrix& x, const Matrix& row) {
  if (row.rows() != 1 || row.cols() != x.cols()) {
    throw ShapeError("add_row: expected 1x" + std::to_string(x.cols()) + " row, got " +
                     row.shape_string());
  }
  Matrix out = x;
  for (std::size_t i = 0; i < out.rows(); ++i)
    for (std::size_t j = 0; j < out.cols(); ++j) out(i, j) += row(0, j);
  return out;
}

Matrix scale(const Matrix& x, double factor) {
  Matrix out = x;
  for (double& v : out.data()) v *= factor;
  return out;
}

Matrix hadamard(const Matrix& a, const Matrix& b) {
  require_same_shape(a, b, "hadamard");
  Matrix out = a;
  auto o = out.data();
  auto bd = b.data();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bd[i];
  return out;
}

Matrix concat_cols(std::span<const Matrix> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const std::size_t rows = parts.front().rows();
  std::size_t cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) throw ShapeError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    for (std::size_t i = 0; i < rows; ++i)
      std::copy(p.row(i).begin(), p.row(i).end(), out.row(i).begin() + offset);
    offset += p.cols();
  }
  return out;
}

Matrix concat_rows(std::span<const Matrix> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no inputs");
  const std::size_t cols = parts.front().cols();
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != cols) throw ShapeError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  auto dst = out.data().begin();
  for (const auto& p : parts) dst = std::copy(p.data().begin(), p.data().end(), dst);
  return out;
}

Matrix slice_cols(const Matrix& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.cols()) throw ShapeError("slice_cols: range out of bounds");
  Matrix out(x.rows(), count);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < count; ++j) out(i, j) = x(i, begin + j);
  return out;
}

Matrix slice_rows(const Matrix& x, std::size_t begin, std::size_t count) {
  if (count == 0 || begin + count > x.rows()) throw ShapeError("slice_rows: range out of bounds");
  Matrix out(count, x.cols());
  for (std::size_t i = 0; i < count; ++i)
    std::copy(x.row(begin + i).begin(), x.row(begin + i).end(), out.row(i).begin());
  return out;
}

double sum(const Matrix& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v;
  return acc;
}

double max_abs(const Matrix& x) {
  double best = 0.0;
  for (double v : x.data()) best = std::max(best, std::abs(v));
  return best;
}

double frobenius_norm(const Matrix& x) {
  double acc = 0.0;
  for (double v : x.data()) acc += v * v;
  return std::sqrt(acc);
}

Matrix softmax_rows(const Matrix& x, std::span<const std::uint8_t> column_mask) {
  if (!column_mask.empty() && column_mask.size() != x.cols()) {
    throw ShapeError("softmax_rows: mask length " + std::to_string(column_mask.size()) +
                     " does not match " + std::to_string(x.cols()) + " columns");
  }
  const auto keep = [&](std::size_t j) { return column_mask.empty() || column_mask[j] != 0; };
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    double peak = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < x.cols(); ++j)
      if (keep(j)) peak = std::max(peak, x(i, j));
    if (!std::isfinite(peak)) continue;  // fully masked row stays zero
    double total = 0.0;
    for (std::size_t j = 0; j < x.cols(); ++j) {
      if (!keep(j)) continue;
      out(i, j) = std::exp(x(i, j) - peak);
      total += out(i, j);
    }
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) /= total;
  }
  return out;
}

Matrix softmax_cols(const Matrix& x) { return transpose(softmax_rows(transpose(x))); }

Matrix elu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = v >= 0.0 ? v : std::expm1(v);
  return out;
}

Matrix gelu(const Matrix& x) {
  Matrix out = x;
  for (double& v : out.data()) v = 0.5 * v * (1.0 + std::erf(v / std::numbers::sqrt2));
  return out;
}

Matrix l2_normalize_rows(const Matrix& x, std::size_t scale_dim, double epsilon) {
  if (scale_dim != x.cols()) {
    throw ShapeError("l2_normalize_rows: scale_dim " + std::to_string(scale_dim) +
                     " != cols " + std::to_string(x.cols()));
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("l2_normalize_rows: epsilon must be > 0");
  const double root = std::sqrt(static_cast<double>(scale_dim));
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = out.row(i);
    double sq = 0.0;
    for (double v : r) sq += v * v;
    const double denom = root * std::max(std::sqrt(sq), epsilon);
    for (double& v : r) v /= denom;
  }
  return out;
}

Matrix l2_normalize_cols(const Matrix& x, std::size_t scale_len, double epsilon) {
  if (scale_len != x.rows()) {
    throw ShapeError("l2_normalize_cols: scale_len " + std::to_string(scale_len) +
                     " != rows " + std::to_string(x.rows()));
  }
  if (!(epsilon > 0.0)) throw std::invalid_argument("l2_normalize_cols: epsilon must be > 0");
  const double root = std::sqrt(static_cast<double>(scale_len));
  std::vector<double> sq(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) sq[j] += x(i, j) * x(i, j);
  std::vector<double> inv(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j)
    inv[j] = 1.0 / (root * std::max(std::sqrt(sq[j]), epsilon));
  Matrix out = x;
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) out(i, j) *= inv[j];
  return out;
}

Matrix layer_norm(const Matrix& x, const Matrix& gain, const Matrix& bias, double epsilon) {
  if (gain.rows() != 1 || gain.cols() != x.cols() || !gain.same_shape(bias)) {
    throw ShapeError("layer_norm: gain/bias must be 1x" + std::to_string(x.cols()));
  }
  const double n = static_cast<double>(x.cols());
  Matrix out(x.rows(), x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    auto r = x.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= n;
    const double inv_std = 1.0 / std::sqrt(var + epsilon);
    for (std::size_t j = 0; j < x.cols(); ++j)
      out(i, j) = (r[j] - mean) * inv_std * gain(0, j) + bias(0, j);
  }
  return out;
}

Matrix gaussian_init(Rng& rng, std::size_t rows, std::size_t cols, double mean, double stddev) {
  Matrix out(rows, cols);
  for (double& v : out.data()) v = rng.gaussian(mean, stddev);
  return out;
}

Matrix dropout_mask(Rng& rng, std::size_t rows, std::size_t cols, double rate) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout rate must be in [0, 1)");
  Matrix out(rows, cols, 1.0);
  if (rate == 0.0) return out;
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& v : out.data()) v = rng.uniform(0.0, 1.0) < rate ? 0.0 : keep_scale;
  return out;
}

}  // namespace linrec
