#pragma once

// Selective state-space kernel: the input-dependent selection, zero-order
// hold discretization, and the evaluators of the linear recurrence
//
//   h_l = a_bar_l * h_{l-1} + b_bar_u_l,   h_{-1} = 0
//   y_l = sum_n c_l[n] h_l[n] + skip * u_l
//
// run independently for every (batch, channel) lane with a diagonal A.
//
// scan_sequential is the serial reference. scan_parallel evaluates the same
// recurrence with a work-efficient up-sweep/down-sweep over ScanElement and
// fans out across lanes with OpenMP. conv_form_lti is the convolution-form
// oracle for the time-invariant case.

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "meanba/tensor.hpp"

namespace meanba::ssm {

template <typename T>
struct SsmParams {
  std::size_t channels = 0;  // D
  std::size_t state = 0;     // N
  std::vector<T> a;          // D x N, continuous diagonal state matrix, every entry < 0
  std::vector<T> b_proj;     // N x D, u -> B_t
  std::vector<T> c_proj;     // N x D, u -> C_t
  std::vector<T> delta_proj; // 1 x D, u -> scalar then broadcast over D
  std::vector<T> delta_bias; // D
  std::vector<T> skip_gain;  // D

  SsmParams() = default;
  SsmParams(std::size_t channels, std::size_t state, std::vector<T> a, std::vector<T> b_proj,
            std::vector<T> c_proj, std::vector<T> delta_proj, std::vector<T> delta_bias,
            std::vector<T> skip_gain);

  // Throws std::invalid_argument on inconsistent shapes, non-finite A or A >= 0.
  void validate() const;

  bool operator==(const SsmParams&) const = default;
};

template <typename T>
struct Selection {
  Tensor3<T> delta;  // (B, D, L), strictly positive
  Tensor3<T> b;      // (B, N, L)
  Tensor3<T> c;      // (B, N, L)
};

template <typename T>
struct DiscreteInputs {
  Tensor4<T> a_bar;      // (B, D, L, N)
  Tensor4<T> b_bar_u;    // (B, D, L, N)
  Tensor3<T> c;          // (B, N, L)
  std::vector<T> skip_gain;  // D
  Tensor3<T> u;          // (B, D, L)

  void validate() const;
};

template <typename T>
struct ScanElement {
  T mult = T(1);
  T add = T(0);

  static constexpr ScanElement identity() { return {T(1), T(0)}; }
  bool operator==(const ScanElement&) const = default;
};

// Applies `first` then `second`: h -> second.mult * (first.mult * h + first.add) + second.add.
template <typename T>
constexpr ScanElement<T> compose(const ScanElement<T>& first, const ScanElement<T>& second) {
  return {first.mult * second.mult, second.mult * first.add + second.add};
}

template <typename T>
T softplus(T x) {
  // log1p(exp(x)) without overflow for large x.
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

// (e^x - 1) / x, with the removable singularity at 0 replaced by its limit.
template <typename T>
T zoh_factor(T x) {
  return std::abs(x) < T(1e-8) ? T(1) : std::expm1(x) / x;
}

template <typename T>
Selection<T> selection(const Tensor3<T>& u, const SsmParams<T>& params);

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> discretize_zoh(const Tensor3<T>& delta, std::span<const T> a,
                                                 const Tensor3<T>& b_t, const Tensor3<T>& u);

// selection followed by discretize_zoh, packaged for a scan.
template <typename T>
DiscreteInputs<T> discretize(const Tensor3<T>& u, const SsmParams<T>& params);

template <typename T>
Tensor3<T> scan_sequential(const DiscreteInputs<T>& in);

template <typename T>
Tensor3<T> scan_parallel(const DiscreteInputs<T>& in);

enum class ScanImpl { sequential, parallel };

template <typename T>
Tensor3<T> scan(const DiscreteInputs<T>& in, ScanImpl impl) {
  return impl == ScanImpl::parallel ? scan_parallel(in) : scan_sequential(in);
}

// Time-invariant discrete system: a_bar, b_bar are (D x N), c is (N).
template <typename T>
struct LtiSystem {
  std::size_t channels = 0;
  std::size_t state = 0;
  std::vector<T> a_bar;
  std::vector<T> b_bar;
  std::vector<T> c;
};

// Extracts an LtiSystem from per-step series, a_bar/b_bar (B, D, L, N) and
// c (B, N, L). Throws std::invalid_argument if any value varies over b or l.
template <typename T>
LtiSystem<T> lti_from_series(const Tensor4<T>& a_bar, const Tensor4<T>& b_bar, const Tensor3<T>& c);

// The equivalent recurrence inputs, b_bar_u = b_bar * u.
template <typename T>
DiscreteInputs<T> lti_inputs(const LtiSystem<T>& sys, const Tensor3<T>& u, std::vector<T> skip_gain);

// Causal convolution kernel K[d][k] = sum_n c[n] a_bar[d,n]^k b_bar[d,n], k < length.
template <typename T>
std::vector<T> lti_kernel(const LtiSystem<T>& sys, std::size_t length);

template <typename T>
Tensor3<T> conv_form_lti(const LtiSystem<T>& sys, const Tensor3<T>& u, std::span<const T> skip_gain);

}  // namespace meanba::ssm
