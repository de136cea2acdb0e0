#include "meanba/ss2d.hpp"

#include <stdexcept>

#include "meanba/vmeanba.hpp"

namespace meanba::ss2d {

const char* to_string(Direction d) {
  switch (d) {
    case Direction::row_forward: return "row_forward";
    case Direction::col_forward: return "col_forward";
    case Direction::row_backward: return "row_backward";
    case Direction::col_backward: return "col_backward";
  }
  return "?";
}

const char* to_string(BlockScan s) {
  switch (s) {
    case BlockScan::sequential: return "sequential";
    case BlockScan::parallel: return "parallel";
    case BlockScan::vmeanba: return "vmeanba";
  }
  return "?";
}

template <typename T>
FeatureMap<T>::FeatureMap(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width, T fill)
    : FeatureMap(batch, channels, height, width, std::vector<T>(batch * channels * height * width, fill)) {}

template <typename T>
FeatureMap<T>::FeatureMap(std::size_t batch, std::size_t channels, std::size_t height, std::size_t width,
                          std::vector<T> data)
    : shape_{batch, channels, height, width}, data_(std::move(data)) {
  for (auto s : shape_)
    if (s == 0) throw std::invalid_argument("FeatureMap: every dimension must be >= 1");
  if (data_.size() != batch * channels * height * width)
    throw std::invalid_argument("FeatureMap: data length does not match shape");
}

template <typename T>
DirectionalSequences<T> cross_scan(const FeatureMap<T>& x) {
  const std::size_t B = x.batch(), D = x.channels(), H = x.height(), W = x.width(), HW = H * W;
  DirectionalSequences<T> out;
  for (Direction dir : kDirections) {
    Tensor3<T> s(B, D, HW);
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < D; ++d) {
        const T* src = x.data().data() + x.index(b, d, 0, 0);
        auto dst = s.lane(b, d);
        for (std::size_t p = 0; p < HW; ++p) dst[p] = src[source_offset(dir, p, H, W)];
      }
    out[dir] = std::move(s);
  }
  return out;
}

template <typename T>
FeatureMap<T> cross_merge(const DirectionalSequences<T>& seqs, std::size_t height, std::size_t width) {
  const auto& first = seqs[Direction::row_forward];
  const std::size_t B = first.batch(), D = first.channels(), HW = height * width;
  for (Direction dir : kDirections) {
    const auto& s = seqs[dir];
    if (s.batch() != B || s.channels() != D || s.length() != HW)
      throw std::invalid_argument(std::string("cross_merge: ") + to_string(dir) +
                                  " sequence does not have shape (B, D, H*W)");
  }
  FeatureMap<T> out(B, D, height, width);
  for (Direction dir : kDirections)
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < D; ++d) {
        T* dst = out.data().data() + out.index(b, d, 0, 0);
        auto src = seqs[dir].lane(b, d);
        for (std::size_t p = 0; p < HW; ++p) dst[source_offset(dir, p, height, width)] += src[p];
      }
  return out;
}

template <typename T>
FeatureMap<T> ss2d_block(const FeatureMap<T>& x, const DirectionParams<T>& params, BlockScan scan,
                         const ScanObserver<T>& observer) {
  for (const auto& p : params)
    if (p.channels != x.channels()) throw std::invalid_argument("ss2d_block: params channel count does not match input");

  auto seqs = cross_scan(x);
  DirectionalSequences<T> outputs;
  for (Direction dir : kDirections) {
    const auto inputs = ssm::discretize(seqs[dir], params[static_cast<std::size_t>(dir)]);
    switch (scan) {
      case BlockScan::sequential: outputs[dir] = ssm::scan_sequential(inputs); break;
      case BlockScan::parallel: outputs[dir] = ssm::scan_parallel(inputs); break;
      case BlockScan::vmeanba:
        outputs[dir] = vmeanba::scan_vmeanba(vmeanba::reduce_inputs(inputs), ssm::ScanImpl::parallel);
        break;
    }
    if (observer) observer(dir, inputs, outputs[dir]);
  }
  return cross_merge(outputs, x.height(), x.width());
}

#define MEANBA_INSTANTIATE(T)                                                                             \
  template class FeatureMap<T>;                                                                           \
  template DirectionalSequences<T> cross_scan(const FeatureMap<T>&);                                      \
  template FeatureMap<T> cross_merge(const DirectionalSequences<T>&, std::size_t, std::size_t);           \
  template FeatureMap<T> ss2d_block(const FeatureMap<T>&, const DirectionParams<T>&, BlockScan,           \
                                    const ScanObserver<T>&);

MEANBA_INSTANTIATE(float)
MEANBA_INSTANTIATE(double)

#undef MEANBA_INSTANTIATE

}  // namespace meanba::ss2d
