#include "meanba/bench.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "meanba/rng.hpp"
#include "meanba/ssm.hpp"
#include "meanba/vmeanba.hpp"

namespace meanba::bench {

const char* to_string(BenchMode m) {
  switch (m) {
    case BenchMode::original_sequential: return "original-sequential";
    case BenchMode::original_parallel: return "original-parallel";
    case BenchMode::vmeanba: return "vmeanba";
  }
  return "?";
}

BenchMode parse_bench_mode(const std::string& s) {
  for (auto m : {BenchMode::original_sequential, BenchMode::original_parallel, BenchMode::vmeanba})
    if (s == to_string(m)) return m;
  throw std::invalid_argument("unknown bench mode '" + s + "'");
}

std::vector<std::pair<std::size_t, std::size_t>> BenchConfig::default_shapes() {
  return {{384, 3136}, {768, 784}, {1536, 196}, {3072, 49}, {512, 3136}, {1024, 784}, {2048, 196}, {4096, 49}};
}

void BenchConfig::validate() const {
  if (shapes.empty()) throw std::invalid_argument("BenchConfig: no shapes");
  for (auto [d, l] : shapes)
    if (d == 0 || l == 0) throw std::invalid_argument("BenchConfig: shape dimensions must be >= 1");
  if (batch == 0 || state == 0) throw std::invalid_argument("BenchConfig: batch and state must be >= 1");
  if (warmup_iters < 1 || measure_iters < 1) throw std::invalid_argument("BenchConfig: iteration counts must be >= 1");
  if (threads < 1) throw std::invalid_argument("BenchConfig: threads must be >= 1");
  if (modes.empty()) throw std::invalid_argument("BenchConfig: no modes");
}

std::pair<std::uint64_t, std::uint64_t> estimate_bytes(BenchMode mode, std::size_t batch, std::size_t channels,
                                                       std::size_t length, std::size_t state, DType dtype) {
  const std::uint64_t B = batch, D = channels, L = length, N = state, size = dtype_size(dtype);
  std::uint64_t reads = 0, writes = 0;
  if (mode == BenchMode::vmeanba) {
    reads = 2 * B * D * L * N;              // mean over a_bar, b_bar_u
    writes = 2 * B * L * N;
    reads += 2 * B * L * N + B * N * L;     // D=1 scan
    writes += B * L;
    reads += B * L + B * D * L + D;         // broadcast + skip term
    writes += B * D * L;
  } else {
    reads = 2 * B * D * L * N + B * N * L + B * D * L + D;
    writes = B * D * L;
  }
  return {reads * size, writes * size};
}

namespace {

using Clock = std::chrono::steady_clock;

std::uint64_t elapsed_ns(Clock::time_point a, Clock::time_point b) {
  return static_cast<std::uint64_t>(
      std::max<std::int64_t>(std::chrono::duration_cast<std::chrono::nanoseconds>(b - a).count(), 1));
}

struct Timing {
  std::uint64_t median = 0, p10 = 0, p90 = 0;
};

Timing summarize(std::vector<std::uint64_t> samples) {
  std::sort(samples.begin(), samples.end());
  const std::size_t n = samples.size();
  auto at = [&](double q) { return samples[static_cast<std::size_t>(std::floor(q * static_cast<double>(n - 1)))]; };
  return {(samples[(n - 1) / 2] + samples[n / 2]) / 2, at(0.1), at(0.9)};
}

template <typename T>
struct ShapeInputs {
  Tensor3<T> u, delta, b_t, c;
  std::vector<T> a, skip;
};

template <typename T>
ShapeInputs<T> make_inputs(std::size_t B, std::size_t D, std::size_t L, std::size_t N, std::uint64_t seed) {
  Rng rng(seed);
  ShapeInputs<T> in{Tensor3<T>(B, D, L), Tensor3<T>(B, D, L), Tensor3<T>(B, N, L), Tensor3<T>(B, N, L),
                    std::vector<T>(D * N), std::vector<T>(D, T(1))};
  for (auto& v : in.u.data()) v = static_cast<T>(rng.uniform(-1, 1));
  for (auto& v : in.delta.data()) v = static_cast<T>(std::exp(rng.uniform(std::log(1e-3), std::log(1e-1))));
  for (auto& v : in.b_t.data()) v = static_cast<T>(rng.uniform(-1, 1));
  for (auto& v : in.c.data()) v = static_cast<T>(rng.uniform(-1, 1));
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t n = 0; n < N; ++n) in.a[d * N + n] = -static_cast<T>(n + 1);
  return in;
}

template <typename T>
ssm::DiscreteInputs<T> discretize_inputs(const ShapeInputs<T>& s) {
  auto [a_bar, b_bar_u] = ssm::discretize_zoh(s.delta, std::span<const T>(s.a), s.b_t, s.u);
  return {std::move(a_bar), std::move(b_bar_u), s.c, s.skip, s.u};
}

// Consumes the freshly discretized inputs; the reduced mode reuses their
// c, skip and u buffers.
template <typename T>
Tensor3<T> run_mode(BenchMode mode, ssm::DiscreteInputs<T>&& in) {
  switch (mode) {
    case BenchMode::original_sequential: return ssm::scan_sequential(in);
    case BenchMode::original_parallel: return ssm::scan_parallel(in);
    case BenchMode::vmeanba: return vmeanba::scan_vmeanba(vmeanba::reduce_inputs(std::move(in)));
  }
  return {};
}

template <typename T>
std::vector<BenchRecord> run_typed(const BenchConfig& cfg) {
  std::vector<BenchRecord> records;
  std::uint64_t shape_seed = cfg.seed;
  for (auto [D, L] : cfg.shapes) {
    const std::size_t B = cfg.batch, N = cfg.state;
    const auto inputs = make_inputs<T>(B, D, L, N, shape_seed++);
    const std::size_t first = records.size();

    for (auto mode : cfg.modes) {
      std::vector<std::uint64_t> scan_ns, total_ns;
      for (std::size_t it = 0; it < cfg.warmup_iters + cfg.measure_iters; ++it) {
        const auto t0 = Clock::now();
        auto disc = discretize_inputs(inputs);
        const auto t1 = Clock::now();
        const auto y = run_mode(mode, std::move(disc));
        const auto t2 = Clock::now();
        if (y.size() != B * D * L) throw std::logic_error("scan produced a wrong-sized output");
        if (it >= cfg.warmup_iters) {
          scan_ns.push_back(elapsed_ns(t1, t2));
          total_ns.push_back(elapsed_ns(t0, t2));
        }
      }
      const auto scan = summarize(scan_ns);
      const auto total = summarize(total_ns);
      const auto cost = vmeanba::flop_count(B, D, L,
                                            mode == BenchMode::vmeanba ? vmeanba::FlopMode::vmeanba
                                                                       : vmeanba::FlopMode::original);
      const auto [rd, wr] = estimate_bytes(mode, B, D, L, N, cfg.dtype);
      BenchRecord r;
      r.inner_dim = D;
      r.seq_len = L;
      r.batch = B;
      r.state_dim = N;
      r.mode = to_string(mode);
      r.median_time_ns = scan.median;
      r.p10_time_ns = scan.p10;
      r.p90_time_ns = scan.p90;
      r.median_total_time_ns = total.median;
      r.flops = cost.flops_reduced;
      r.flop_ratio = static_cast<double>(cost.flops_reduced) / static_cast<double>(cost.flops_original);
      r.bytes_read_est = rd;
      r.bytes_written_est = wr;
      records.push_back(std::move(r));
    }

    const auto original = std::find_if(records.begin() + static_cast<std::ptrdiff_t>(first), records.end(),
                                       [](const BenchRecord& r) { return r.mode == to_string(BenchMode::original_sequential); });
    for (auto it = records.begin() + static_cast<std::ptrdiff_t>(first); it != records.end(); ++it)
      it->speedup_vs_original = original == records.end()
                                    ? 0.0
                                    : static_cast<double>(original->median_time_ns) / static_cast<double>(it->median_time_ns);
  }
  return records;
}

}  // namespace

std::vector<BenchRecord> run_scan_bench(const BenchConfig& cfg) {
  cfg.validate();
  const int previous = omp_get_max_threads();
  omp_set_num_threads(cfg.threads);
  try {
    auto records = cfg.dtype == DType::f32 ? run_typed<float>(cfg) : run_typed<double>(cfg);
    omp_set_num_threads(previous);
    return records;
  } catch (...) {
    omp_set_num_threads(previous);
    throw;
  }
}

}  // namespace meanba::bench
