#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace bmme {

/// Dense row-major matrix of doubles.
///
/// Nonnegativity is not a type-level invariant; it is checked at the
/// boundaries (file ingestion, solver entry) with `is_nonnegative`.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  std::span<double> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const double> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  std::vector<double> column(std::size_t j) const;
  Matrix transposed() const;

  bool same_shape(const Matrix& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

bool is_nonnegative(const Matrix& m);
bool all_finite(const Matrix& m);
double min_entry(const Matrix& m);
double max_entry(const Matrix& m);
double sum(const Matrix& m);
double frobenius_norm(const Matrix& m);
double frobenius_distance(const Matrix& a, const Matrix& b);
double inner(const Matrix& a, const Matrix& b);

/// Throws DimensionMismatch naming `what` unless the shapes agree.
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

}  // namespace bmme
