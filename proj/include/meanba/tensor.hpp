#pragma once

// Dense activation containers.
//
// Tensor3 is (batch, channel, length) with length fastest-varying, so a
// sequential scan over one (b, d) lane walks contiguous memory. Tensor4 adds
// a trailing state axis: (batch, channel, length, state), state fastest.

#include <algorithm>
#include <array>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

namespace meanba {

enum class DType { f32, f64 };

template <typename T>
constexpr DType dtype_of() {
  static_assert(std::is_same_v<T, float> || std::is_same_v<T, double>,
                "only f32 and f64 tensors are supported");
  return std::is_same_v<T, float> ? DType::f32 : DType::f64;
}

inline std::size_t dtype_size(DType t) { return t == DType::f32 ? 4 : 8; }
inline const char* dtype_name(DType t) { return t == DType::f32 ? "f32" : "f64"; }

template <typename T>
class Tensor3 {
 public:
  using value_type = T;

  Tensor3() = default;
  Tensor3(std::size_t batch, std::size_t channels, std::size_t length, T fill = T(0))
      : shape_{batch, channels, length} {
    check_shape();
    data_.assign(batch * channels * length, fill);
  }
  Tensor3(std::size_t batch, std::size_t channels, std::size_t length, std::vector<T> data)
      : shape_{batch, channels, length}, data_(std::move(data)) {
    check_shape();
    if (data_.size() != batch * channels * length)
      throw std::invalid_argument("Tensor3: data length does not match shape");
  }

  std::size_t batch() const { return shape_[0]; }
  std::size_t channels() const { return shape_[1]; }
  std::size_t length() const { return shape_[2]; }
  std::array<std::size_t, 3> shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t b, std::size_t d, std::size_t l) const {
    return (b * shape_[1] + d) * shape_[2] + l;
  }
  T& operator()(std::size_t b, std::size_t d, std::size_t l) { return data_[index(b, d, l)]; }
  T operator()(std::size_t b, std::size_t d, std::size_t l) const { return data_[index(b, d, l)]; }

  // Contiguous length-L lane for (b, d).
  std::span<T> lane(std::size_t b, std::size_t d) { return {data_.data() + index(b, d, 0), shape_[2]}; }
  std::span<const T> lane(std::size_t b, std::size_t d) const {
    return {data_.data() + index(b, d, 0), shape_[2]};
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool operator==(const Tensor3&) const = default;

 private:
  void check_shape() const {
    if (shape_[0] == 0 || shape_[1] == 0 || shape_[2] == 0)
      throw std::invalid_argument("Tensor3: every dimension must be >= 1");
  }

  std::array<std::size_t, 3> shape_{};
  std::vector<T> data_;
};

template <typename T>
class Tensor4 {
 public:
  using value_type = T;

  Tensor4() = default;
  Tensor4(std::size_t batch, std::size_t channels, std::size_t length, std::size_t state,
          T fill = T(0))
      : shape_{batch, channels, length, state} {
    check_shape();
    data_.assign(batch * channels * length * state, fill);
  }
  Tensor4(std::size_t batch, std::size_t channels, std::size_t length, std::size_t state,
          std::vector<T> data)
      : shape_{batch, channels, length, state}, data_(std::move(data)) {
    check_shape();
    if (data_.size() != batch * channels * length * state)
      throw std::invalid_argument("Tensor4: data length does not match shape");
  }

  std::size_t batch() const { return shape_[0]; }
  std::size_t channels() const { return shape_[1]; }
  std::size_t length() const { return shape_[2]; }
  std::size_t state() const { return shape_[3]; }
  std::array<std::size_t, 4> shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t b, std::size_t d, std::size_t l, std::size_t n) const {
    return ((b * shape_[1] + d) * shape_[2] + l) * shape_[3] + n;
  }
  T& operator()(std::size_t b, std::size_t d, std::size_t l, std::size_t n) {
    return data_[index(b, d, l, n)];
  }
  T operator()(std::size_t b, std::size_t d, std::size_t l, std::size_t n) const {
    return data_[index(b, d, l, n)];
  }

  // The N state values at one (b, d, l) position.
  std::span<T> states(std::size_t b, std::size_t d, std::size_t l) {
    return {data_.data() + index(b, d, l, 0), shape_[3]};
  }
  std::span<const T> states(std::size_t b, std::size_t d, std::size_t l) const {
    return {data_.data() + index(b, d, l, 0), shape_[3]};
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool operator==(const Tensor4&) const = default;

 private:
  void check_shape() const {
    for (auto s : shape_)
      if (s == 0) throw std::invalid_argument("Tensor4: every dimension must be >= 1");
  }

  std::array<std::size_t, 4> shape_{};
  std::vector<T> data_;
};

// Channel mean. Accumulates in f64 whatever the element type, since D can be
// in the thousands.
namespace detail {

// out[i] = mean over r of src[r * stride + i] for i < len, accumulated in f64.
// The row is processed in chunks so the accumulator stays in L1 while the
// rows stream past it.
template <typename T>
void mean_rows(const T* src, std::size_t rows, std::size_t stride, std::size_t len, T* out) {
  constexpr std::size_t chunk = 512;
  double acc[chunk];
  const double denom = static_cast<double>(rows);
  for (std::size_t start = 0; start < len; start += chunk) {
    const std::size_t n = std::min(chunk, len - start);
    for (std::size_t i = 0; i < n; ++i) acc[i] = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
      const T* p = src + r * stride + start;
      for (std::size_t i = 0; i < n; ++i) acc[i] += static_cast<double>(p[i]);
    }
    for (std::size_t i = 0; i < n; ++i) out[start + i] = static_cast<T>(acc[i] / denom);
  }
}

}  // namespace detail

template <typename T>
Tensor3<T> mean_over_channels(const Tensor3<T>& x) {
  const std::size_t B = x.batch(), D = x.channels(), L = x.length();
  Tensor3<T> out(B, 1, L);
  for (std::size_t b = 0; b < B; ++b)
    detail::mean_rows(x.data().data() + b * D * L, D, L, L, out.data().data() + b * L);
  return out;
}

template <typename T>
Tensor4<T> mean_over_channels(const Tensor4<T>& x) {
  const std::size_t B = x.batch(), D = x.channels(), row = x.length() * x.state();
  Tensor4<T> out(B, 1, x.length(), x.state());
  for (std::size_t b = 0; b < B; ++b)
    detail::mean_rows(x.data().data() + b * D * row, D, row, row, out.data().data() + b * row);
  return out;
}

template <typename T>
Tensor3<T> broadcast_channels(const Tensor3<T>& x, std::size_t target_channels) {
  if (x.channels() != 1)
    throw std::invalid_argument("broadcast_channels: input channel dimension must be 1");
  if (target_channels == 0) throw std::invalid_argument("broadcast_channels: target must be >= 1");
  Tensor3<T> out(x.batch(), target_channels, x.length());
  for (std::size_t b = 0; b < x.batch(); ++b) {
    auto src = x.lane(b, 0);
    for (std::size_t d = 0; d < target_channels; ++d) std::copy(src.begin(), src.end(), out.lane(b, d).begin());
  }
  return out;
}

template <typename T>
Tensor4<T> broadcast_channels(const Tensor4<T>& x, std::size_t target_channels) {
  if (x.channels() != 1)
    throw std::invalid_argument("broadcast_channels: input channel dimension must be 1");
  if (target_channels == 0) throw std::invalid_argument("broadcast_channels: target must be >= 1");
  const std::size_t row = x.length() * x.state();
  Tensor4<T> out(x.batch(), target_channels, x.length(), x.state());
  for (std::size_t b = 0; b < x.batch(); ++b) {
    const T* src = x.data().data() + b * row;
    for (std::size_t d = 0; d < target_channels; ++d)
      std::copy(src, src + row, out.data().data() + (b * target_channels + d) * row);
  }
  return out;
}

}  // namespace meanba
