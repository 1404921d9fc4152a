#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace xraydet {

/// Dense row-major n-dimensional array of doubles.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
  /// Throws std::invalid_argument if data.size() != product of shape.
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const { return data_.size(); }

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  double& at(std::size_t i, std::size_t j) { return data_[i * shape_[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * shape_[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data_[(i * shape_[1] + j) * shape_[2] + k];
  }

  /// Same data viewed under a new shape with the same element count.
  Tensor reshaped(std::vector<std::size_t> shape) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::string shape_string(const std::vector<std::size_t>& shape);

/// Throws std::invalid_argument naming `what` when the shapes differ.
void require_shape(const Tensor& t, const std::vector<std::size_t>& shape,
                   const char* what);

/// Uniform doubles from std::mt19937_64: u = (v >> 11) * 2^-53, lo + (hi-lo)*u.
class UniformSource {
 public:
  explicit UniformSource(std::uint64_t seed) : gen_(seed) {}
  double next(double lo, double hi);
  Tensor tensor(std::vector<std::size_t> shape, double lo, double hi);

 private:
  std::mt19937_64 gen_;
};

/// (m x k) * (k x n).
Tensor matmul(const Tensor& a, const Tensor& b);
/// (m x k) * (n x k)^T.
Tensor matmul_transposed(const Tensor& a, const Tensor& b);
/// (k x m)^T * (k x n).
Tensor transposed_matmul(const Tensor& a, const Tensor& b);

Tensor add(const Tensor& a, const Tensor& b);
/// Sum of elementwise products.
double dot(const Tensor& a, const Tensor& b);
double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace xraydet
