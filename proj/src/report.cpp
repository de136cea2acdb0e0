#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "meanba/bench.hpp"

namespace meanba::bench {

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> columns = {
      "inner_dim",      "seq_len",        "batch",          "state_dim",           "mode",
      "median_time_ns", "p10_time_ns",    "p90_time_ns",    "median_total_time_ns", "flops",
      "flop_ratio",     "bytes_read_est", "bytes_written_est", "speedup_vs_original"};
  return columns;
}

namespace {

std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

}  // namespace

std::string to_csv(const std::vector<BenchRecord>& records) {
  std::ostringstream out;
  const auto& cols = report_columns();
  for (std::size_t i = 0; i < cols.size(); ++i) out << (i ? "," : "") << cols[i];
  out << '\n';
  for (const auto& r : records) {
    out << r.inner_dim << ',' << r.seq_len << ',' << r.batch << ',' << r.state_dim << ',' << r.mode << ','
        << r.median_time_ns << ',' << r.p10_time_ns << ',' << r.p90_time_ns << ',' << r.median_total_time_ns << ','
        << r.flops << ',' << format_real(r.flop_ratio) << ',' << r.bytes_read_est << ',' << r.bytes_written_est
        << ',' << format_real(r.speedup_vs_original) << '\n';
  }
  return out.str();
}

void to_json(nlohmann::json& j, const BenchRecord& r) {
  j = nlohmann::json::object();
  j["inner_dim"] = r.inner_dim;
  j["seq_len"] = r.seq_len;
  j["batch"] = r.batch;
  j["state_dim"] = r.state_dim;
  j["mode"] = r.mode;
  j["median_time_ns"] = r.median_time_ns;
  j["p10_time_ns"] = r.p10_time_ns;
  j["p90_time_ns"] = r.p90_time_ns;
  j["median_total_time_ns"] = r.median_total_time_ns;
  j["flops"] = r.flops;
  j["flop_ratio"] = r.flop_ratio;
  j["bytes_read_est"] = r.bytes_read_est;
  j["bytes_written_est"] = r.bytes_written_est;
  j["speedup_vs_original"] = r.speedup_vs_original;
}

void from_json(const nlohmann::json& j, BenchRecord& r) {
  j.at("inner_dim").get_to(r.inner_dim);
  j.at("seq_len").get_to(r.seq_len);
  j.at("batch").get_to(r.batch);
  j.at("state_dim").get_to(r.state_dim);
  j.at("mode").get_to(r.mode);
  j.at("median_time_ns").get_to(r.median_time_ns);
  j.at("p10_time_ns").get_to(r.p10_time_ns);
  j.at("p90_time_ns").get_to(r.p90_time_ns);
  j.at("median_total_time_ns").get_to(r.median_total_time_ns);
  j.at("flops").get_to(r.flops);
  j.at("flop_ratio").get_to(r.flop_ratio);
  j.at("bytes_read_est").get_to(r.bytes_read_est);
  j.at("bytes_written_est").get_to(r.bytes_written_est);
  j.at("speedup_vs_original").get_to(r.speedup_vs_original);
}

nlohmann::json to_json_array(const std::vector<BenchRecord>& records) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : records) arr.push_back(r);
  return arr;
}

void emit_report(const std::vector<BenchRecord>& records, ReportFormat format, const std::filesystem::path& path) {
  if (records.empty()) throw std::invalid_argument("emit_report: no records to write");
  std::string text;
  if (format == ReportFormat::csv) {
    text = to_csv(records);
  } else {
    // Field order follows report_columns().
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : records) {
      const nlohmann::json j = r;
      nlohmann::ordered_json o;
      for (const auto& c : report_columns()) o[c] = j.at(c);
      arr.push_back(std::move(o));
    }
    text = arr.dump(2) + "\n";
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("emit_report: cannot open " + path.string());
  f << text;
  if (!f) throw std::runtime_error("emit_report: write failed for " + path.string());
}

}  // namespace meanba::bench
