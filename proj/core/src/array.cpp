#include "intermode/array.hpp"

#include <cmath>
#include <stdexcept>

namespace intermode {

std::size_t shape_size(const std::vector<std::size_t>& shp) {
  std::size_t n = 1;
  for (std::size_t d : shp) n *= d;
  return n;
}

Array::Array(std::vector<std::size_t> shp, std::vector<double> values)
    : shape(std::move(shp)), data(std::move(values)) {
  if (data.size() != shape_size(shape)) {
    throw std::invalid_argument("Array: data length does not match shape");
  }
}

Array Array::scalar(double v) { return Array({}, {v}); }

Array Array::zeros(std::vector<std::size_t> shp) {
  std::size_t n = shape_size(shp);
  return Array(std::move(shp), std::vector<double>(n, 0.0));
}

Array Array::full(std::vector<std::size_t> shp, double v) {
  std::size_t n = shape_size(shp);
  return Array(std::move(shp), std::vector<double>(n, v));
}

Array Array::vec(std::vector<double> values) {
  std::size_t n = values.size();
  return Array({n}, std::move(values));
}

Array Array::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Array({rows, cols}, std::move(values));
}

std::size_t Array::rows() const {
  if (shape.size() < 2) return shape.empty() ? 1 : 1;
  return shape[0];
}

std::size_t Array::cols() const {
  if (shape.empty()) return 1;
  if (shape.size() == 1) return shape[0];
  return shape[1];
}

bool Array::all_finite() const {
  for (double v : data) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace intermode
