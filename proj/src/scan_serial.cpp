#include <vector>

#include "meanba/ssm.hpp"
#include "scan_common.hpp"

namespace meanba::ssm {

template <typename T>
Tensor3<T> scan_sequential(const DiscreteInputs<T>& in) {
  in.validate();
  const std::size_t B = in.u.batch(), D = in.u.channels(), L = in.u.length(), N = in.a_bar.state();
  Tensor3<T> y(B, D, L);
  std::vector<T> h(N);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t d = 0; d < D; ++d) {
      std::fill(h.begin(), h.end(), T(0));
      for (std::size_t l = 0; l < L; ++l) {
        const T* a = in.a_bar.states(b, d, l).data();
        const T* bu = in.b_bar_u.states(b, d, l).data();
        for (std::size_t n = 0; n < N; ++n) h[n] = a[n] * h[n] + bu[n];
        y(b, d, l) = detail::readout(in.c, b, l, h.data(), N, in.skip_gain[d], in.u(b, d, l));
      }
    }
  }
  return y;
}

template Tensor3<float> scan_sequential(const DiscreteInputs<float>&);
template Tensor3<double> scan_sequential(const DiscreteInputs<double>&);

}  // namespace meanba::ssm
