#include <omp.h>

#include <bit>
#include <vector>

#include "meanba/ssm.hpp"
#include "scan_common.hpp"

namespace meanba::ssm {

namespace {

// Scratch for one (b, d) lane: P tree slots of N-wide ScanElements stored as
// two structure-of-arrays planes, P = bit_ceil(L).
template <typename T>
struct LaneScratch {
  std::vector<T> mult;
  std::vector<T> add;
};

// Level loops fan out only when a single lane carries enough work to pay for
// a parallel region.
constexpr std::size_t kInnerParallelMin = 1u << 14;

// Runs body(k) for k < count. A serial call never enters the OpenMP runtime;
// an `if` clause alone would still open a one-thread region per call.
template <typename Body>
void for_each_index(std::size_t count, bool parallel, Body&& body) {
  if (!parallel) {
    for (std::size_t k = 0; k < count; ++k) body(k);
    return;
  }
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t k = 0; k < static_cast<std::ptrdiff_t>(count); ++k) body(static_cast<std::size_t>(k));
}

template <typename T>
void scan_lane(const DiscreteInputs<T>& in, std::size_t b, std::size_t d, LaneScratch<T>& s,
               Tensor3<T>& y, bool inner_parallel) {
  const std::size_t L = in.u.length(), N = in.a_bar.state();
  const std::size_t P = std::bit_ceil(L);
  s.mult.resize(P * N);
  s.add.resize(P * N);
  T* mult = s.mult.data();
  T* add = s.add.data();

  std::copy_n(in.a_bar.states(b, d, 0).data(), L * N, mult);
  std::copy_n(in.b_bar_u.states(b, d, 0).data(), L * N, add);
  std::fill(mult + L * N, mult + P * N, T(1));
  std::fill(add + L * N, add + P * N, T(0));

  // Up-sweep: slot i accumulates the composition of its left sibling subtree
  // followed by itself.
  for (std::size_t stride = 1; stride < P; stride *= 2) {
    const std::size_t count = P / (2 * stride);
    for_each_index(count, inner_parallel && count * N >= kInnerParallelMin, [&](std::size_t k) {
      const std::size_t i = (2 * k + 2) * stride - 1;
      T* m_r = mult + i * N;
      T* a_r = add + i * N;
      const T* m_l = mult + (i - stride) * N;
      const T* a_l = add + (i - stride) * N;
      for (std::size_t n = 0; n < N; ++n) {
        a_r[n] = m_r[n] * a_l[n] + a_r[n];
        m_r[n] = m_l[n] * m_r[n];
      }
    });
  }

  // Down-sweep to an exclusive prefix: the root receives the identity, every
  // left child inherits its parent's prefix and every right child gets
  // parent-prefix followed by the left subtree.
  std::fill(mult + (P - 1) * N, mult + P * N, T(1));
  std::fill(add + (P - 1) * N, add + P * N, T(0));
  for (std::size_t stride = P / 2; stride >= 1; stride /= 2) {
    const std::size_t count = P / (2 * stride);
    for_each_index(count, inner_parallel && count * N >= kInnerParallelMin, [&](std::size_t k) {
      const std::size_t i = (2 * k + 2) * stride - 1;
      T* m_r = mult + i * N;
      T* a_r = add + i * N;
      T* m_l = mult + (i - stride) * N;
      T* a_l = add + (i - stride) * N;
      for (std::size_t n = 0; n < N; ++n) {
        const T pm = m_r[n], pa = a_r[n];
        const T lm = m_l[n], la = a_l[n];
        m_l[n] = pm;
        a_l[n] = pa;
        m_r[n] = pm * lm;
        a_r[n] = lm * pa + la;
      }
    });
  }

  // Inclusive state h_l = a_bar_l * prefix.add + b_bar_u_l (h_{-1} = 0), then readout.
  for_each_index(L, inner_parallel && L * N >= kInnerParallelMin, [&](std::size_t l) {
    const T* a = in.a_bar.states(b, d, l).data();
    const T* bu = in.b_bar_u.states(b, d, l).data();
    T* h = add + l * N;
    for (std::size_t n = 0; n < N; ++n) h[n] = a[n] * h[n] + bu[n];
    y(b, d, l) = detail::readout(in.c, b, l, h, N, in.skip_gain[d], in.u(b, d, l));
  });
}

}  // namespace

template <typename T>
Tensor3<T> scan_parallel(const DiscreteInputs<T>& in) {
  in.validate();
  const std::size_t B = in.u.batch(), D = in.u.channels();
  Tensor3<T> y(B, D, in.u.length());
  const std::size_t lanes = B * D;
  const std::size_t workers = static_cast<std::size_t>(omp_get_max_threads());

  if (lanes >= workers || omp_in_parallel()) {
#pragma omp parallel if (workers > 1 && lanes > 1 && !omp_in_parallel())
    {
      LaneScratch<T> scratch;
#pragma omp for schedule(static)
      for (std::ptrdiff_t lane = 0; lane < static_cast<std::ptrdiff_t>(lanes); ++lane)
        scan_lane(in, static_cast<std::size_t>(lane) / D, static_cast<std::size_t>(lane) % D, scratch, y,
                  false);
    }
  } else {
    LaneScratch<T> scratch;
    for (std::size_t lane = 0; lane < lanes; ++lane) scan_lane(in, lane / D, lane % D, scratch, y, true);
  }
  return y;
}

template Tensor3<float> scan_parallel(const DiscreteInputs<float>&);
template Tensor3<double> scan_parallel(const DiscreteInputs<double>&);

}  // namespace meanba::ssm
