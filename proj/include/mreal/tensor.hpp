#pragma once

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "mreal/error.hpp"

namespace mreal {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape);

/// Dense row-major parameter tensor.
template <typename S>
struct Tensor {
  Shape shape;
  std::vector<S> data;

  Tensor() = default;
  explicit Tensor(Shape s, S fill = S(0)) : shape(std::move(s)), data(shape_size(shape), fill) {}

  std::size_t size() const { return data.size(); }
  std::span<S> span() { return data; }
  std::span<const S> span() const { return data; }
};

/// Activation batch laid out as [batch][channels][length].
template <typename S>
struct BatchTensor {
  int batch = 0;
  int channels = 0;
  int length = 0;
  std::vector<S> data;

  BatchTensor() = default;
  BatchTensor(int n, int c, int l, S fill = S(0))
      : batch(n), channels(c), length(l), data(static_cast<std::size_t>(n) * c * l, fill) {}

  std::size_t sample_size() const { return static_cast<std::size_t>(channels) * length; }
  S* sample(int b) { return data.data() + b * sample_size(); }
  const S* sample(int b) const { return data.data() + b * sample_size(); }
  S& at(int b, int c, int t) { return data[(b * sample_size()) + static_cast<std::size_t>(c) * length + t]; }
  S at(int b, int c, int t) const { return data[(b * sample_size()) + static_cast<std::size_t>(c) * length + t]; }
  bool same_shape(const BatchTensor& o) const {
    return batch == o.batch && channels == o.channels && length == o.length;
  }
};

template <typename To, typename From>
Tensor<To> cast_tensor(const Tensor<From>& t) {
  Tensor<To> out;
  out.shape = t.shape;
  out.data.assign(t.data.begin(), t.data.end());
  return out;
}

template <typename To, typename From>
BatchTensor<To> cast_batch(const BatchTensor<From>& t) {
  BatchTensor<To> out;
  out.batch = t.batch;
  out.channels = t.channels;
  out.length = t.length;
  out.data.assign(t.data.begin(), t.data.end());
  return out;
}

}  // namespace mreal
