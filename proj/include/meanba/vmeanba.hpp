#pragma once

// Channel-mean compression of the scan inputs.
//
// The exact selective scan runs one recurrence per channel d. VMeanba
// replaces the per-channel inputs (a_bar, b_bar_u) with their mean over the
// channel axis, runs a single D=1 scan, and broadcasts the result back to
// every channel before adding the per-channel skip term:
//
//   y[b, d, l] = broadcast(scan(mean_d(a_bar), mean_d(b_bar_u), c))[b, l] + skip[d] * u[b, d, l]
//
// c has no channel axis, so it passes through unchanged.

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "meanba/ssm.hpp"
#include "meanba/tensor.hpp"

namespace meanba::vmeanba {

template <typename T>
struct ReducedInputs {
  Tensor4<T> a_bar;     // (B, 1, L, N)
  Tensor4<T> b_bar_u;   // (B, 1, L, N)
  Tensor3<T> c;         // (B, N, L)
  std::size_t channels = 0;  // D of the original inputs
  std::vector<T> skip_gain;  // D
  Tensor3<T> u;              // (B, D, L)
};

template <typename T>
ReducedInputs<T> reduce_inputs(const ssm::DiscreteInputs<T>& in);
// Same, taking over c, skip_gain and u instead of copying them.
template <typename T>
ReducedInputs<T> reduce_inputs(ssm::DiscreteInputs<T>&& in);

// Scan over the reduced inputs, broadcast to `channels`, then the skip term.
template <typename T>
Tensor3<T> scan_vmeanba(const ReducedInputs<T>& r, ssm::ScanImpl impl = ssm::ScanImpl::sequential);

struct ChannelStats {
  std::vector<double> mean;           // per l, over (b, d)
  std::vector<double> variance;       // per l, unbiased over d, averaged over b
  std::vector<double> max_deviation;  // per l, max over b of max_{d,d'} |y[b,d,l] - y[b,d',l]|
  double max_variance = 0;
  double mean_variance = 0;
  double variance_p50 = 0;
  double variance_p90 = 0;
  double variance_p99 = 0;
  double max_abs_deviation = 0;
};

template <typename T>
ChannelStats channel_stats(const Tensor3<T>& y);

struct ApproximationError {
  double max_abs = 0;
  double mean_abs = 0;
  double rel_l2 = 0;
};

// scan_vmeanba(reduce_inputs(in)) against scan_sequential(in).
template <typename T>
ApproximationError approximation_error(const ssm::DiscreteInputs<T>& in);

enum class FlopMode { original, vmeanba };

const char* to_string(FlopMode m);

struct CostReport {
  std::uint64_t flops_original = 0;
  std::uint64_t flops_reduced = 0;  // total for the chosen mode
  std::uint64_t flops_reduce_op = 0;
  std::uint64_t flops_broadcast = 0;
  double reduction_ratio = 0;  // 1 - flops_reduced / flops_original
};

// Closed-form cost model: the original scan block costs 9BLD; the reduced
// block costs 9BL for the D=1 scan plus BLD + BL for the channel mean, and the
// broadcast is a pure memory operation. Throws std::invalid_argument on a
// zero dimension.
CostReport flop_count(std::uint64_t batch, std::uint64_t channels, std::uint64_t length, FlopMode mode);

void to_json(nlohmann::json& j, const CostReport& r);
void from_json(const nlohmann::json& j, CostReport& r);

// Operation tally of an instrumented run, in cost-model units.
struct FlopTally {
  std::uint64_t scan = 0;
  std::uint64_t readout = 0;
  std::uint64_t reduce = 0;
  std::uint64_t total() const { return scan + readout + reduce; }
};

template <typename T>
struct InstrumentedResult {
  Tensor3<T> y;
  FlopTally flops;
};

template <typename T>
InstrumentedResult<T> instrumented_scan(const ssm::DiscreteInputs<T>& in, FlopMode mode);

}  // namespace meanba::vmeanba
