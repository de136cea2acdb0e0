#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "meanba/bench.hpp"
#include "meanba/vmeanba.hpp"

using namespace meanba;
using namespace meanba::bench;

#ifndef MEANBA_GOLDEN_DIR
#error "MEANBA_GOLDEN_DIR must point at tests/golden"
#endif

namespace {

BenchConfig tiny_config() {
  BenchConfig cfg;
  cfg.shapes = {{4, 8}, {2, 3}, {16, 5}};
  cfg.state = 2;
  cfg.warmup_iters = 1;
  cfg.measure_iters = 3;
  return cfg;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::vector<std::vector<std::string>> parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

// Drops the timing-dependent columns, keeping the rest in report order.
std::string non_timing_csv(const std::string& csv) {
  const auto rows = parse_csv(csv);
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    const auto& name = rows[0][i];
    if (name.find("time_ns") == std::string::npos && name != "speedup_vs_original") keep.push_back(i);
  }
  std::string out;
  for (const auto& row : rows) {
    for (std::size_t k = 0; k < keep.size(); ++k) out += (k ? "," : "") + row[keep[k]];
    out += '\n';
  }
  return out;
}

}  // namespace

TEST_CASE("bench modes parse and print") {
  for (auto m : {BenchMode::original_sequential, BenchMode::original_parallel, BenchMode::vmeanba})
    CHECK(parse_bench_mode(to_string(m)) == m);
  CHECK_THROWS_AS(parse_bench_mode("fast"), std::invalid_argument);
}

TEST_CASE("default config covers the two backbone families") {
  const BenchConfig cfg;
  REQUIRE(cfg.shapes.size() == 8);
  CHECK(cfg.shapes[0] == std::pair<std::size_t, std::size_t>{384, 3136});
  CHECK(cfg.shapes[7] == std::pair<std::size_t, std::size_t>{4096, 49});
  CHECK(cfg.warmup_iters == 5);
  CHECK(cfg.measure_iters == 30);
  BenchConfig bad = cfg;
  bad.measure_iters = 0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("record fields") {
  const auto records = run_scan_bench(tiny_config());
  REQUIRE(records.size() == 9);
  for (const auto& r : records) {
    CHECK(r.median_time_ns > 0);
    CHECK(r.p10_time_ns <= r.median_time_ns);
    CHECK(r.median_time_ns <= r.p90_time_ns);
    CHECK(r.median_total_time_ns >= r.median_time_ns);
    CHECK(r.speedup_vs_original > 0.0);
    if (r.mode == "vmeanba" && r.inner_dim > 1) CHECK(r.flop_ratio < 1.0);
    if (r.mode == "original-sequential") CHECK(r.speedup_vs_original == 1.0);
  }
}

TEST_CASE("reference shape flop ratio") {
  BenchConfig cfg;
  cfg.shapes = {{512, 3136}};
  cfg.state = 1;
  cfg.warmup_iters = 1;
  cfg.measure_iters = 1;
  cfg.modes = {BenchMode::original_sequential, BenchMode::vmeanba};
  const auto records = run_scan_bench(cfg);
  REQUIRE(records.size() == 2);
  CHECK(records[1].flop_ratio == doctest::Approx(522.0 / 4608.0).epsilon(1e-15));
  CHECK(records[1].flops == vmeanba::flop_count(1, 512, 3136, vmeanba::FlopMode::vmeanba).flops_reduced);
}

TEST_CASE("non-timing fields are reproducible") {
  auto a = run_scan_bench(tiny_config());
  auto b = run_scan_bench(tiny_config());
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].flops == b[i].flops);
    CHECK(a[i].flop_ratio == b[i].flop_ratio);
    CHECK(a[i].bytes_read_est == b[i].bytes_read_est);
    CHECK(a[i].bytes_written_est == b[i].bytes_written_est);
  }
}

TEST_CASE("golden report schema") {
  const auto csv = to_csv(run_scan_bench(tiny_config()));
  CHECK(non_timing_csv(csv) == read_file(std::filesystem::path(MEANBA_GOLDEN_DIR) / "bench_small.csv"));
}

TEST_CASE("emit_report") {
  const auto dir = std::filesystem::temp_directory_path();
  auto cfg = tiny_config();
  cfg.shapes = {{4, 8}};
  cfg.modes = {BenchMode::vmeanba};
  const auto records = run_scan_bench(cfg);

  SUBCASE("csv: header plus one row") {
    const auto path = dir / "meanba_test_report.csv";
    emit_report(records, ReportFormat::csv, path);
    const auto rows = parse_csv(read_file(path));
    REQUIRE(rows.size() == 2);
    CHECK(rows[0] == report_columns());
    CHECK(rows[1][4] == "vmeanba");
    std::filesystem::remove(path);
  }
  SUBCASE("json: ordered fields and exact round trip") {
    const auto path = dir / "meanba_test_report.json";
    emit_report(records, ReportFormat::json, path);
    const auto j = nlohmann::ordered_json::parse(read_file(path));
    REQUIRE(j.is_array());
    REQUIRE(j.size() == 1);
    std::vector<std::string> keys;
    for (const auto& item : j[0].items()) keys.push_back(item.key());
    CHECK(keys == report_columns());
    CHECK(nlohmann::json::parse(read_file(path))[0].get<BenchRecord>() == records[0]);
    std::filesystem::remove(path);
  }
  SUBCASE("empty record list is an error and writes nothing") {
    const auto path = dir / "meanba_test_empty.csv";
    std::filesystem::remove(path);
    CHECK_THROWS_AS(emit_report({}, ReportFormat::csv, path), std::invalid_argument);
    CHECK_FALSE(std::filesystem::exists(path));
  }
  SUBCASE("unwritable path") {
    CHECK_THROWS_AS(emit_report(records, ReportFormat::csv, dir / "no-such-dir" / "r.csv"), std::runtime_error);
  }
}
