#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace simvae {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Dense row-major array of doubles. Rank 1 and rank 2 are what the
/// networks use; a scalar is shape {1}.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  static Tensor scalar(double v) { return Tensor({1}, std::vector<double>{v}); }
  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  /// Rows/cols of a rank-2 tensor; a rank-1 tensor is one row.
  std::size_t rows() const noexcept { return rank() == 2 ? shape_[0] : 1; }
  std::size_t cols() const noexcept { return rank() == 2 ? shape_[1] : size(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }
  double& operator()(std::size_t r, std::size_t c) noexcept { return data_[r * cols() + c]; }
  double operator()(std::size_t r, std::size_t c) const noexcept { return data_[r * cols() + c]; }

  std::span<double> row(std::size_t r) noexcept { return data().subspan(r * cols(), cols()); }
  std::span<const double> row(std::size_t r) const noexcept {
    return data().subspan(r * cols(), cols());
  }

  double item() const;
  bool all_finite() const noexcept;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> data_;
};

}  // namespace simvae
