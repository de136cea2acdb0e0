#include <stdexcept>

#include "meanba/vmeanba.hpp"

namespace meanba::vmeanba {

const char* to_string(FlopMode m) { return m == FlopMode::original ? "original" : "vmeanba"; }

CostReport flop_count(std::uint64_t batch, std::uint64_t channels, std::uint64_t length, FlopMode mode) {
  if (batch == 0 || channels == 0 || length == 0)
    throw std::invalid_argument("flop_count: dimensions must be positive");
  const std::uint64_t positions = batch * length;
  CostReport r;
  r.flops_original = 9 * positions * channels;
  if (mode == FlopMode::original) {
    r.flops_reduced = r.flops_original;
  } else {
    r.flops_reduce_op = positions * channels + positions;
    r.flops_broadcast = 0;
    r.flops_reduced = 9 * positions + r.flops_reduce_op + r.flops_broadcast;
  }
  r.reduction_ratio =
      1.0 - static_cast<double>(r.flops_reduced) / static_cast<double>(r.flops_original);
  return r;
}

void to_json(nlohmann::json& j, const CostReport& r) {
  j = nlohmann::json{{"flops_original", r.flops_original},
                     {"flops_reduced", r.flops_reduced},
                     {"flops_reduce_op", r.flops_reduce_op},
                     {"flops_broadcast", r.flops_broadcast},
                     {"reduction_ratio", r.reduction_ratio}};
}

void from_json(const nlohmann::json& j, CostReport& r) {
  j.at("flops_original").get_to(r.flops_original);
  j.at("flops_reduced").get_to(r.flops_reduced);
  j.at("flops_reduce_op").get_to(r.flops_reduce_op);
  j.at("flops_broadcast").get_to(r.flops_broadcast);
  j.at("reduction_ratio").get_to(r.reduction_ratio);
}

namespace {

// Counted sequential scan. Charges follow the cost model's units: one unit
// per operation on a channel's state vector, so the state size N does not
// appear. Per (b, d, l) step the recurrence is charged 2 for each of the three
// scan inputs (a_bar, b_bar_u, c) and the readout 3 (the B_bar*u and C*h
// products, and the C*h + D*u sum).
template <typename T>
Tensor3<T> counted_scan(const Tensor4<T>& a_bar, const Tensor4<T>& b_bar_u, const Tensor3<T>& c,
                        const std::vector<T>& skip, const Tensor3<T>& u, FlopTally& tally) {
  const std::size_t B = a_bar.batch(), D = a_bar.channels(), L = a_bar.length(), N = a_bar.state();
  Tensor3<T> y(B, D, L);
  std::vector<T> h(N);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d) {
      std::fill(h.begin(), h.end(), T(0));
      for (std::size_t l = 0; l < L; ++l) {
        const T* a = a_bar.states(b, d, l).data();
        const T* bu = b_bar_u.states(b, d, l).data();
        for (std::size_t n = 0; n < N; ++n) h[n] = a[n] * h[n];  // a_bar stream
        tally.scan += 2;
        for (std::size_t n = 0; n < N; ++n) h[n] += bu[n];  // b_bar_u stream
        tally.scan += 2;
        T acc = 0;
        for (std::size_t n = 0; n < N; ++n) acc += c(b, n, l) * h[n];  // c stream
        tally.scan += 2;
        tally.readout += 2;  // B_bar*u and C*h products
        y(b, d, l) = acc + skip[d] * u(b, d, l);
        tally.readout += 1;  // C*h + D*u
      }
    }
  return y;
}

}  // namespace

template <typename T>
InstrumentedResult<T> instrumented_scan(const ssm::DiscreteInputs<T>& in, FlopMode mode) {
  in.validate();
  InstrumentedResult<T> out;
  if (mode == FlopMode::original) {
    out.y = counted_scan(in.a_bar, in.b_bar_u, in.c, in.skip_gain, in.u, out.flops);
    return out;
  }

  const std::size_t B = in.u.batch(), D = in.u.channels(), L = in.u.length(), N = in.a_bar.state();
  // Channel mean, one accumulate per channel and one divide per (b, l).
  Tensor4<T> a_r(B, 1, L, N), bu_r(B, 1, L, N);
  std::vector<double> acc_a(N), acc_bu(N);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t l = 0; l < L; ++l) {
      std::fill(acc_a.begin(), acc_a.end(), 0.0);
      std::fill(acc_bu.begin(), acc_bu.end(), 0.0);
      for (std::size_t d = 0; d < D; ++d) {
        for (std::size_t n = 0; n < N; ++n) {
          acc_a[n] += static_cast<double>(in.a_bar(b, d, l, n));
          acc_bu[n] += static_cast<double>(in.b_bar_u(b, d, l, n));
        }
        out.flops.reduce += 1;
      }
      for (std::size_t n = 0; n < N; ++n) {
        a_r(b, 0, l, n) = static_cast<T>(acc_a[n] / static_cast<double>(D));
        bu_r(b, 0, l, n) = static_cast<T>(acc_bu[n] / static_cast<double>(D));
      }
      out.flops.reduce += 1;
    }

  const Tensor3<T> y_r = counted_scan(a_r, bu_r, in.c, std::vector<T>{T(0)}, Tensor3<T>(B, 1, L), out.flops);
  // Broadcast and the per-channel skip term are outside the cost model.
  out.y = broadcast_channels(y_r, D);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t d = 0; d < D; ++d)
      for (std::size_t l = 0; l < L; ++l) out.y(b, d, l) += in.skip_gain[d] * in.u(b, d, l);
  return out;
}

template InstrumentedResult<float> instrumented_scan(const ssm::DiscreteInputs<float>&, FlopMode);
template InstrumentedResult<double> instrumented_scan(const ssm::DiscreteInputs<double>&, FlopMode);

}  // namespace meanba::vmeanba
