#ifndef INTERMODE_ARRAY_HPP
#define INTERMODE_ARRAY_HPP

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace intermode {

// Dense real array, row-major. Rank 0 (scalar), 1 and 2 are what the models
// need; nothing here assumes more.
struct Array {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Array() = default;
  Array(std::vector<std::size_t> shp, std::vector<double> values);

  static Array scalar(double v);
  static Array zeros(std::vector<std::size_t> shp);
  static Array full(std::vector<std::size_t> shp, double v);
  static Array vec(std::vector<double> values);
  static Array matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  std::size_t size() const { return data.size(); }
  std::size_t rank() const { return shape.size(); }

  // Row/column view treating rank 0 as 1x1 and rank 1 as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t r, std::size_t c) { return data[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols() + c]; }

  std::span<double> row(std::size_t r) { return {data.data() + r * cols(), cols()}; }
  std::span<const double> row(std::size_t r) const { return {data.data() + r * cols(), cols()}; }

  bool same_shape(const Array& other) const { return shape == other.shape; }
  bool all_finite() const;
};

std::size_t shape_size(const std::vector<std::size_t>& shp);

}  // namespace intermode

#endif
