#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace tmn {

/// Dense row-major matrix of doubles. Vectors are 1×n rows; scalars are 1×1.
class Tensor {
 public:
  Tensor() = default;
  Tensor(std::size_t rows, std::size_t cols, double fill = 0.0);
  Tensor(std::size_t rows, std::size_t cols, std::vector<double> values);

  static Tensor scalar(double value);
  static Tensor row(std::initializer_list<double> values);
  static Tensor row(std::span<const double> values);
  static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool empty() const { return values_.empty(); }
  bool is_scalar() const { return rows_ == 1 && cols_ == 1; }
  bool same_shape(const Tensor& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }
  std::string shape_string() const;

  double operator()(std::size_t r, std::size_t c) const { return values_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return values_[r * cols_ + c]; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double item() const;

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  std::span<const double> row_span(std::size_t r) const {
    return {values_.data() + r * cols_, cols_};
  }
  std::span<double> row_span(std::size_t r) { return {values_.data() + r * cols_, cols_}; }
  const double* data() const { return values_.data(); }
  double* data() { return values_.data(); }

  void fill(double value);
  bool all_finite() const;

  /// Bitwise equality of shape and values.
  friend bool operator==(const Tensor& a, const Tensor& b);

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> values_;
};

double max_abs_difference(const Tensor& a, const Tensor& b);

}  // namespace tmn
