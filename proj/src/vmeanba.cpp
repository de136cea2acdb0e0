#include "meanba/vmeanba.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace meanba::vmeanba {

namespace {

// Channel means of a_bar and b_bar_u in one pass over both tensors. Each
// chunk of the (L, N) row keeps its two f64 accumulators in L1 while the D
// channel rows stream past.
template <typename T>
void fused_channel_mean(const Tensor4<T>& a, const Tensor4<T>& bu, Tensor4<T>& a_out, Tensor4<T>& bu_out) {
  constexpr std::size_t chunk = 1024;
  const std::size_t B = a.batch(), D = a.channels(), row = a.length() * a.state();
  const double denom = static_cast<double>(D);
  double acc_a[chunk], acc_b[chunk];
  for (std::size_t b = 0; b < B; ++b) {
    const T* pa = a.data().data() + b * D * row;
    const T* pb = bu.data().data() + b * D * row;
    T* oa = a_out.data().data() + b * row;
    T* ob = bu_out.data().data() + b * row;
    for (std::size_t start = 0; start < row; start += chunk) {
      const std::size_t n = std::min(chunk, row - start);
      std::fill_n(acc_a, n, 0.0);
      std::fill_n(acc_b, n, 0.0);
      for (std::size_t d = 0; d < D; ++d) {
        const T* ra = pa + d * row + start;
        const T* rb = pb + d * row + start;
        for (std::size_t i = 0; i < n; ++i) {
          acc_a[i] += static_cast<double>(ra[i]);
          acc_b[i] += static_cast<double>(rb[i]);
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        oa[start + i] = static_cast<T>(acc_a[i] / denom);
        ob[start + i] = static_cast<T>(acc_b[i] / denom);
      }
    }
  }
}

}  // namespace

template <typename T>
ReducedInputs<T> reduce_inputs(const ssm::DiscreteInputs<T>& in) {
  in.validate();
  const std::size_t B = in.u.batch(), L = in.u.length(), N = in.a_bar.state();
  ReducedInputs<T> r{Tensor4<T>(B, 1, L, N), Tensor4<T>(B, 1, L, N), in.c, in.u.channels(), in.skip_gain, in.u};
  fused_channel_mean(in.a_bar, in.b_bar_u, r.a_bar, r.b_bar_u);
  return r;
}

template <typename T>
ReducedInputs<T> reduce_inputs(ssm::DiscreteInputs<T>&& in) {
  in.validate();
  const std::size_t B = in.u.batch(), L = in.u.length(), N = in.a_bar.state(), D = in.u.channels();
  ReducedInputs<T> r{Tensor4<T>(B, 1, L, N), Tensor4<T>(B, 1, L, N), std::move(in.c), D, std::move(in.skip_gain),
                     std::move(in.u)};
  fused_channel_mean(in.a_bar, in.b_bar_u, r.a_bar, r.b_bar_u);
  return r;
}

template <typename T>
Tensor3<T> scan_vmeanba(const ReducedInputs<T>& r, ssm::ScanImpl impl) {
  if (r.a_bar.channels() != 1 || r.b_bar_u.channels() != 1)
    throw std::invalid_argument("scan_vmeanba: reduced inputs must have one channel");
  if (r.u.channels() != r.channels || r.skip_gain.size() != r.channels)
    throw std::invalid_argument("scan_vmeanba: u/skip gain do not match the original channel count");

  const std::size_t B = r.u.batch(), L = r.u.length(), D = r.channels;
  // Zero skip and zero input make the D=1 scan return the pure state readout.
  ssm::DiscreteInputs<T> reduced{r.a_bar, r.b_bar_u, r.c, std::vector<T>{T(0)}, Tensor3<T>(B, 1, L)};
  const Tensor3<T> y_reduced = ssm::scan(reduced, impl);

  // Broadcast and skip term in one pass.
  Tensor3<T> y(B, D, L);
  for (std::size_t b = 0; b < B; ++b) {
    auto shared = y_reduced.lane(b, 0);
    for (std::size_t d = 0; d < D; ++d) {
      auto out = y.lane(b, d);
      auto in = r.u.lane(b, d);
      const T g = r.skip_gain[d];
      for (std::size_t l = 0; l < L; ++l) out[l] = shared[l] + g * in[l];
    }
  }
  return y;
}

template <typename T>
ChannelStats channel_stats(const Tensor3<T>& y) {
  const std::size_t B = y.batch(), D = y.channels(), L = y.length();
  ChannelStats s;
  s.mean.assign(L, 0.0);
  s.variance.assign(L, 0.0);
  s.max_deviation.assign(L, 0.0);

  // Welford over the channel axis for each (b, l).
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t l = 0; l < L; ++l) {
      double mean = 0, m2 = 0;
      double lo = static_cast<double>(y(b, 0, l)), hi = lo;
      for (std::size_t d = 0; d < D; ++d) {
        const double v = static_cast<double>(y(b, d, l));
        const double delta = v - mean;
        mean += delta / static_cast<double>(d + 1);
        m2 += delta * (v - mean);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      s.mean[l] += mean / static_cast<double>(B);
      if (D > 1) s.variance[l] += (m2 / static_cast<double>(D - 1)) / static_cast<double>(B);
      s.max_deviation[l] = std::max(s.max_deviation[l], hi - lo);
    }
  }
  for (auto& v : s.variance) v = std::max(v, 0.0);

  std::vector<double> sorted = s.variance;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
  };
  s.max_variance = sorted.back();
  double total = 0;
  for (double v : sorted) total += v;
  s.mean_variance = total / static_cast<double>(sorted.size());
  s.variance_p50 = quantile(0.5);
  s.variance_p90 = quantile(0.9);
  s.variance_p99 = quantile(0.99);
  s.max_abs_deviation = *std::max_element(s.max_deviation.begin(), s.max_deviation.end());
  return s;
}

template <typename T>
ApproximationError approximation_error(const ssm::DiscreteInputs<T>& in) {
  const Tensor3<T> exact = ssm::scan_sequential(in);
  const Tensor3<T> approx = scan_vmeanba(reduce_inputs(in));
  ApproximationError e;
  double diff2 = 0, ref2 = 0, sum_abs = 0;
  auto ex = exact.data();
  auto ap = approx.data();
  for (std::size_t i = 0; i < ex.size(); ++i) {
    const double diff = static_cast<double>(ap[i]) - static_cast<double>(ex[i]);
    e.max_abs = std::max(e.max_abs, std::abs(diff));
    sum_abs += std::abs(diff);
    diff2 += diff * diff;
    ref2 += static_cast<double>(ex[i]) * static_cast<double>(ex[i]);
  }
  e.mean_abs = sum_abs / static_cast<double>(ex.size());
  e.rel_l2 = ref2 > 0 ? std::sqrt(diff2 / ref2) : std::sqrt(diff2);
  return e;
}

#define MEANBA_INSTANTIATE(T)                                                          \
  template ReducedInputs<T> reduce_inputs(const ssm::DiscreteInputs<T>&);              \
  template ReducedInputs<T> reduce_inputs(ssm::DiscreteInputs<T>&&);                   \
  template Tensor3<T> scan_vmeanba(const ReducedInputs<T>&, ssm::ScanImpl);            \
  template ChannelStats channel_stats(const Tensor3<T>&);                              \
  template ApproximationError approximation_error(const ssm::DiscreteInputs<T>&);

MEANBA_INSTANTIATE(float)
MEANBA_INSTANTIATE(double)

#undef MEANBA_INSTANTIATE

}  // namespace meanba::vmeanba
