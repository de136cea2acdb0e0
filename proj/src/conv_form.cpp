#include <stdexcept>

#include "meanba/ssm.hpp"

namespace meanba::ssm {

template <typename T>
LtiSystem<T> lti_from_series(const Tensor4<T>& a_bar, const Tensor4<T>& b_bar, const Tensor3<T>& c) {
  const std::size_t B = a_bar.batch(), D = a_bar.channels(), L = a_bar.length(), N = a_bar.state();
  if (b_bar.shape() != a_bar.shape()) throw std::invalid_argument("lti_from_series: a_bar/b_bar shapes differ");
  if (c.batch() != B || c.channels() != N || c.length() != L)
    throw std::invalid_argument("lti_from_series: c must be (B, N, L)");

  LtiSystem<T> sys{D, N, std::vector<T>(D * N), std::vector<T>(D * N), std::vector<T>(N)};
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t n = 0; n < N; ++n) {
      sys.a_bar[d * N + n] = a_bar(0, d, 0, n);
      sys.b_bar[d * N + n] = b_bar(0, d, 0, n);
    }
  for (std::size_t n = 0; n < N; ++n) sys.c[n] = c(0, n, 0);

  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t l = 0; l < L; ++l) {
      for (std::size_t d = 0; d < D; ++d)
        for (std::size_t n = 0; n < N; ++n)
          if (a_bar(b, d, l, n) != sys.a_bar[d * N + n] || b_bar(b, d, l, n) != sys.b_bar[d * N + n])
            throw std::invalid_argument("conv_form_lti: inputs are time-varying");
      for (std::size_t n = 0; n < N; ++n)
        if (c(b, n, l) != sys.c[n]) throw std::invalid_argument("conv_form_lti: inputs are time-varying");
    }
  return sys;
}

template <typename T>
DiscreteInputs<T> lti_inputs(const LtiSystem<T>& sys, const Tensor3<T>& u, std::vector<T> skip_gain) {
  const std::size_t B = u.batch(), D = u.channels(), L = u.length(), N = sys.state;
  if (D != sys.channels) throw std::invalid_argument("lti_inputs: channel mismatch");
  Tensor4<T> a_bar(B, D, L, N), b_bar_u(B, D, L, N);
  Tensor3<T> c(B, N, L);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t l = 0; l < L; ++l)
        for (std::size_t n = 0; n < N; ++n) {
          a_bar(b, d, l, n) = sys.a_bar[d * N + n];
          b_bar_u(b, d, l, n) = sys.b_bar[d * N + n] * u(b, d, l);
        }
    for (std::size_t n = 0; n < N; ++n)
      for (std::size_t l = 0; l < L; ++l) c(b, n, l) = sys.c[n];
  }
  return {std::move(a_bar), std::move(b_bar_u), std::move(c), std::move(skip_gain), u};
}

template <typename T>
std::vector<T> lti_kernel(const LtiSystem<T>& sys, std::size_t length) {
  const std::size_t D = sys.channels, N = sys.state;
  std::vector<T> kernel(D * length);
  std::vector<T> power(N);
  for (std::size_t d = 0; d < D; ++d) {
    std::fill(power.begin(), power.end(), T(1));
    for (std::size_t k = 0; k < length; ++k) {
      T acc = 0;
      for (std::size_t n = 0; n < N; ++n) acc += sys.c[n] * power[n] * sys.b_bar[d * N + n];
      kernel[d * length + k] = acc;
      for (std::size_t n = 0; n < N; ++n) power[n] *= sys.a_bar[d * N + n];
    }
  }
  return kernel;
}

template <typename T>
Tensor3<T> conv_form_lti(const LtiSystem<T>& sys, const Tensor3<T>& u, std::span<const T> skip_gain) {
  const std::size_t B = u.batch(), D = u.channels(), L = u.length();
  if (D != sys.channels || skip_gain.size() != D) throw std::invalid_argument("conv_form_lti: channel mismatch");
  if (sys.a_bar.size() != D * sys.state || sys.b_bar.size() != D * sys.state || sys.c.size() != sys.state)
    throw std::invalid_argument("conv_form_lti: malformed system");

  const auto kernel = lti_kernel(sys, L);
  Tensor3<T> y(B, D, L);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d) {
      const T* k = kernel.data() + d * L;
      auto x = u.lane(b, d);
      for (std::size_t l = 0; l < L; ++l) {
        T acc = 0;
        for (std::size_t j = 0; j <= l; ++j) acc += k[j] * x[l - j];
        y(b, d, l) = acc + skip_gain[d] * x[l];
      }
    }
  return y;
}

#define MEANBA_INSTANTIATE(T)                                                                            \
  template LtiSystem<T> lti_from_series(const Tensor4<T>&, const Tensor4<T>&, const Tensor3<T>&);        \
  template DiscreteInputs<T> lti_inputs(const LtiSystem<T>&, const Tensor3<T>&, std::vector<T>);         \
  template std::vector<T> lti_kernel(const LtiSystem<T>&, std::size_t);                                  \
  template Tensor3<T> conv_form_lti(const LtiSystem<T>&, const Tensor3<T>&, std::span<const T>);

MEANBA_INSTANTIATE(float)
MEANBA_INSTANTIATE(double)

#undef MEANBA_INSTANTIATE

}  // namespace meanba::ssm
