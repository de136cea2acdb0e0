#pragma once

#include <cstddef>

#include "meanba/ssm.hpp"

namespace meanba::ssm::detail {

// y = sum_n c[b, n, l] * h[n] + skip * u. Shared by both scan evaluators so a
// given state vector always reads out to the same bits.
template <typename T>
inline T readout(const Tensor3<T>& c, std::size_t b, std::size_t l, const T* h, std::size_t state,
                 T skip, T u) {
  T acc = T(0);
  for (std::size_t n = 0; n < state; ++n) acc += c(b, n, l) * h[n];
  return acc + skip * u;
}

}  // namespace meanba::ssm::detail
