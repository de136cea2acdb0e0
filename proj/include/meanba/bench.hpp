#pragma once

// Scan benchmark harness.
//
// For each (D, L) shape the harness times three modes on the same seeded
// inputs:
//   original-sequential  scan_sequential over all D channels (serial reference)
//   original-parallel    scan_parallel over all D channels (OpenMP)
//   vmeanba              channel mean + D=1 scan + broadcast
//
// Two timed regions are recorded per iteration. The scan region excludes
// discretization (the reduced mode includes its mean and broadcast); the
// total region adds discretization in front of it.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "meanba/tensor.hpp"

namespace meanba::bench {

enum class BenchMode { original_sequential, original_parallel, vmeanba };

const char* to_string(BenchMode m);
BenchMode parse_bench_mode(const std::string& s);

struct BenchConfig {
  // (inner dimension D, sequence length L)
  std::vector<std::pair<std::size_t, std::size_t>> shapes = default_shapes();
  std::size_t batch = 1;
  std::size_t state = 16;
  std::size_t warmup_iters = 5;
  std::size_t measure_iters = 30;
  DType dtype = DType::f32;
  int threads = 1;
  std::uint64_t seed = 0;
  std::vector<BenchMode> modes = {BenchMode::original_sequential, BenchMode::original_parallel,
                                  BenchMode::vmeanba};

  // The eight (D, L) pairs of the reference kernel sweep: two backbone families.
  static std::vector<std::pair<std::size_t, std::size_t>> default_shapes();
  void validate() const;
};

struct BenchRecord {
  std::size_t inner_dim = 0;
  std::size_t seq_len = 0;
  std::size_t batch = 0;
  std::size_t state_dim = 0;
  std::string mode;
  std::uint64_t median_time_ns = 0;
  std::uint64_t p10_time_ns = 0;
  std::uint64_t p90_time_ns = 0;
  std::uint64_t median_total_time_ns = 0;  // including discretization
  std::uint64_t flops = 0;
  double flop_ratio = 0;  // flops / original flops
  std::uint64_t bytes_read_est = 0;
  std::uint64_t bytes_written_est = 0;
  double speedup_vs_original = 0;  // original-sequential median / this median

  bool operator==(const BenchRecord&) const = default;
};

// Analytic bytes touched by the scan region (elements x dtype size).
std::pair<std::uint64_t, std::uint64_t> estimate_bytes(BenchMode mode, std::size_t batch, std::size_t channels,
                                                       std::size_t length, std::size_t state, DType dtype);

std::vector<BenchRecord> run_scan_bench(const BenchConfig& cfg);

enum class ReportFormat { json, csv };

// Column order shared by the CSV header and the JSON objects.
const std::vector<std::string>& report_columns();
std::string to_csv(const std::vector<BenchRecord>& records);
nlohmann::json to_json_array(const std::vector<BenchRecord>& records);

// Throws std::invalid_argument on an empty record list and std::runtime_error
// on I/O failure.
void emit_report(const std::vector<BenchRecord>& records, ReportFormat format, const std::filesystem::path& path);

void to_json(nlohmann::json& j, const BenchRecord& r);
void from_json(const nlohmann::json& j, BenchRecord& r);

}  // namespace meanba::bench
