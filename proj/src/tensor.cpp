#include "simvae/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "simvae/errors.hpp"

namespace simvae {

std::size_t shape_size(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor: zero-length dimension in " + shape_string(shape_));
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  for (auto d : shape_)
    if (d == 0) throw ShapeError("tensor: zero-length dimension in " + shape_string(shape_));
  if (shape_size(shape_) != data_.size())
    throw ShapeError("tensor: shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::initializer_list<double> values) {
  return Tensor({rows, cols}, std::vector<double>(values));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item: tensor of shape " + shape_string(shape_) + " is not a scalar");
  return data_[0];
}

bool Tensor::all_finite() const noexcept {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

}  // namespace simvae
