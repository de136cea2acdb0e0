#pragma once

// 2D selective scan. A (B, D, H, W) feature map is unfolded into four 1D
// sequences of length H*W, each sequence goes through its own selective scan,
// and the four results are folded back and summed.
//
// Directions:
//   row_forward   row-major traversal
//   col_forward   column-major traversal
//   row_backward  row_forward reversed
//   col_backward  col_forward reversed

#include <array>
#include <cstddef>
#include <functional>

#include "meanba/ssm.hpp"
#include "meanba/tensor.hpp"

namespace meanba::ss2d {

enum class Direction : std::size_t { row_forward = 0, col_forward = 1, row_backward = 2, col_backward = 3 };

inline constexpr std::array<Direction, 4> kDirections = {Direction::row_forward, Direction::col_forward,
                                                         Direction::row_backward, Direction::col_backward};

const char* to_string(Direction d);

template <typename T>
class FeatureMap {
 public:
  FeatureMap() = default;
  FeatureMap(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, T fill = T(0));
  FeatureMap(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width,
             std::vector<T> data);

  std::size_t batch() const { return shape_[0]; }
  std::size_t channels() const { return shape_[1]; }
  std::size_t height() const { return shape_[2]; }
  std::size_t width() const { return shape_[3]; }
  std::array<std::size_t, 4> shape() const { return shape_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::size_t b, std::size_t d, std::size_t h, std::size_t w) const {
    return ((b * shape_[1] + d) * shape_[2] + h) * shape_[3] + w;
  }
  T& operator()(std::size_t b, std::size_t d, std::size_t h, std::size_t w) { return data_[index(b, d, h, w)]; }
  T operator()(std::size_t b, std::size_t d, std::size_t h, std::size_t w) const {
    return data_[index(b, d, h, w)];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& values() const { return data_; }

  bool operator==(const FeatureMap&) const = default;

 private:
  std::array<std::size_t, 4> shape_{};
  std::vector<T> data_;
};

template <typename T>
struct DirectionalSequences {
  std::array<Tensor3<T>, 4> seq;  // indexed by Direction, each (B, D, H*W)

  Tensor3<T>& operator[](Direction d) { return seq[static_cast<std::size_t>(d)]; }
  const Tensor3<T>& operator[](Direction d) const { return seq[static_cast<std::size_t>(d)]; }
};

// Flat spatial offset h*W + w read at sequence position p for a direction.
inline std::size_t source_offset(Direction dir, std::size_t p, std::size_t height, std::size_t width) {
  const std::size_t hw = height * width;
  switch (dir) {
    case Direction::row_forward: return p;
    case Direction::col_forward: return (p % height) * width + p / height;
    case Direction::row_backward: return hw - 1 - p;
    case Direction::col_backward: {
      const std::size_t q = hw - 1 - p;
      return (q % height) * width + q / height;
    }
  }
  return p;
}

template <typename T>
DirectionalSequences<T> cross_scan(const FeatureMap<T>& x);

// Folds each sequence back through its traversal and sums the four maps.
template <typename T>
FeatureMap<T> cross_merge(const DirectionalSequences<T>& seqs, std::size_t height, std::size_t width);

enum class BlockScan { sequential, parallel, vmeanba };

const char* to_string(BlockScan s);

template <typename T>
using DirectionParams = std::array<ssm::SsmParams<T>, 4>;

// Called once per direction with the discretized inputs and the scan output.
template <typename T>
using ScanObserver = std::function<void(Direction, const ssm::DiscreteInputs<T>&, const Tensor3<T>&)>;

template <typename T>
FeatureMap<T> ss2d_block(const FeatureMap<T>& x, const DirectionParams<T>& params, BlockScan scan,
                         const ScanObserver<T>& observer = {});

}  // namespace meanba::ss2d
