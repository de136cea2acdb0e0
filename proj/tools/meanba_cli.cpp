// meanba: command-line front end for the scan kernels, the layer-selection
// pipeline and the benchmark harness.
//
// Exit codes: 0 success, 1 usage error, 2 runtime error.

#include <omp.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "meanba/archive.hpp"
#include "meanba/bench.hpp"
#include "meanba/pipeline.hpp"
#include "meanba/vmeanba.hpp"

using namespace meanba;
using nlohmann::json;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

int default_threads() {
  const char* env = std::getenv("MEANBA_THREADS");
  if (env == nullptr || *env == '\0') return 1;
  try {
    std::size_t used = 0;
    const int n = std::stoi(env, &used);
    if (used != std::string(env).size() || n < 1) throw std::invalid_argument(env);
    return n;
  } catch (const std::exception&) {
    throw UsageError(std::string("MEANBA_THREADS must be a positive integer, got '") + env + "'");
  }
}

void write_text(const std::string& text, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path);
  f << text;
  if (!f) throw std::runtime_error("write failed for " + path);
}

// Config file keys mirror ModelConfig; absent keys keep their defaults.
model::ModelConfig load_config(const std::string& path) {
  model::ModelConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config " + path);
  const json j = json::parse(f);
  if (j.contains("depths")) j.at("depths").get_to(cfg.depths);
  if (j.contains("channels")) j.at("channels").get_to(cfg.channels);
  if (j.contains("height")) j.at("height").get_to(cfg.height);
  if (j.contains("width")) j.at("width").get_to(cfg.width);
  if (j.contains("state")) j.at("state").get_to(cfg.state);
  if (j.contains("num_classes")) j.at("num_classes").get_to(cfg.num_classes);
  cfg.validate();
  return cfg;
}

// Options shared by the model subcommands.
struct ModelOptions {
  std::uint64_t seed = 0;
  std::string config;
  std::string model;  // archive path; overrides seed/config when set
  std::uint64_t data_seed = 1;
  std::size_t samples = 256;
  std::optional<std::size_t> score_samples;
  int threads = 1;

  void attach(CLI::App* app) {
    app->add_option("--seed", seed, "model seed")->capture_default_str();
    app->add_option("--config", config, "JSON model config (depths, channels, height, width, state, num_classes)");
    app->add_option("--model", model, "load the model from a tensor archive instead of building it");
    app->add_option("--data-seed", data_seed, "teacher dataset seed")->capture_default_str();
    app->add_option("--samples", samples, "teacher dataset size")->check(CLI::PositiveNumber)->capture_default_str();
    app->add_option("--score-samples", score_samples, "score layers on the first N samples only")
        ->check(CLI::PositiveNumber);
    app->add_option("--threads", threads, "OpenMP threads (default: MEANBA_THREADS or 1)")
        ->check(CLI::PositiveNumber);
  }

  model::ToyModel build() const {
    omp_set_num_threads(threads);
    return model.empty() ? model::build_toy_model(seed, load_config(config)) : model::load_model(model);
  }
  model::ScoreOptions scoring() const { return {score_samples}; }
};

std::vector<std::pair<std::size_t, std::size_t>> parse_shapes(const std::vector<std::string>& specs) {
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  for (const auto& s : specs) {
    const auto colon = s.find(':');
    try {
      if (colon == std::string::npos) throw std::invalid_argument(s);
      shapes.emplace_back(std::stoull(s.substr(0, colon)), std::stoull(s.substr(colon + 1)));
    } catch (const std::exception&) {
      throw UsageError("shape must be D:L, got '" + s + "'");
    }
  }
  return shapes;
}

int run_flops(std::uint64_t b, std::uint64_t d, std::uint64_t l, bool as_json) {
  const auto r = vmeanba::flop_count(b, d, l, vmeanba::FlopMode::vmeanba);
  if (as_json) {
    std::cout << json(r).dump(2) << '\n';
  } else {
    std::printf("original %llu\nreduced %llu\nratio %.4f\n", static_cast<unsigned long long>(r.flops_original),
                static_cast<unsigned long long>(r.flops_reduced), r.reduction_ratio);
  }
  return 0;
}

// Reads the activations written by `eval --capture-layer`.
int run_analyze(const std::string& input, const std::string& out) {
  const auto set = archive_read(input);
  ssm::DiscreteInputs<double> in{require_tensor(set, "a_bar").as_tensor4<double>(),
                                 require_tensor(set, "b_bar_u").as_tensor4<double>(),
                                 require_tensor(set, "c").as_tensor3<double>(),
                                 require_tensor(set, "skip_gain").values_as<double>(),
                                 require_tensor(set, "u").as_tensor3<double>()};
  in.validate();
  const auto y = ssm::scan_sequential(in);
  const auto stats = vmeanba::channel_stats(y);
  const auto err = vmeanba::approximation_error(in);
  const auto cost = vmeanba::flop_count(in.u.batch(), in.u.channels(), in.u.length(), vmeanba::FlopMode::vmeanba);
  json j;
  j["shape"] = {{"batch", in.u.batch()}, {"channels", in.u.channels()}, {"length", in.u.length()},
                {"state", in.a_bar.state()}};
  j["channel_variance"] = {{"max", stats.max_variance}, {"mean", stats.mean_variance}, {"p50", stats.variance_p50},
                           {"p90", stats.variance_p90}, {"p99", stats.variance_p99}};
  j["max_abs_deviation"] = stats.max_abs_deviation;
  j["approximation_error"] = {{"max_abs", err.max_abs}, {"mean_abs", err.mean_abs}, {"rel_l2", err.rel_l2}};
  j["cost"] = cost;
  write_text(j.dump(2) + "\n", out);
  return 0;
}

int run_select(const ModelOptions& opt, std::size_t k, const std::string& out) {
  const auto m = opt.build();
  if (k > m.layer_count()) throw UsageError("--k exceeds the layer count " + std::to_string(m.layer_count()));
  const auto ds = model::make_teacher_dataset(m, opt.data_seed, opt.samples);
  const auto plan = model::select_layers(model::layer_impact_scores(m, ds, opt.scoring()), k);
  write_text(json(plan).dump(2) + "\n", out);
  return 0;
}

void capture_layer(const model::ToyModel& m, const model::EvalDataset& ds, std::size_t layer,
                   const std::string& path) {
  if (layer >= m.layer_count()) throw UsageError("--capture-layer out of range");
  TensorSet set;
  model::forward(m, ds.inputs.front(), nullptr,
                 [&](std::size_t l, ss2d::Direction dir, const ssm::DiscreteInputs<double>& in,
                     const Tensor3<double>&) {
                   if (l != layer || dir != ss2d::Direction::row_forward) return;
                   set = {NamedTensor::from("a_bar", in.a_bar), NamedTensor::from("b_bar_u", in.b_bar_u),
                          NamedTensor::from("c", in.c),
                          NamedTensor::from("skip_gain", {in.skip_gain.size()}, in.skip_gain),
                          NamedTensor::from("u", in.u)};
                 });
  archive_write(set, path);
}

int run_eval(const ModelOptions& opt, std::vector<std::size_t> ks, const std::string& out,
             std::optional<std::size_t> capture, const std::string& capture_out) {
  const auto m = opt.build();
  if (ks.empty())
    for (std::size_t k = 0; k <= m.layer_count(); ++k) ks.push_back(k);
  for (auto k : ks)
    if (k > m.layer_count()) throw UsageError("K value " + std::to_string(k) + " exceeds the layer count");
  const auto ds = model::make_teacher_dataset(m, opt.data_seed, opt.samples);
  if (capture) {
    if (capture_out.empty()) throw UsageError("--capture-layer needs --capture-out");
    capture_layer(m, ds, *capture, capture_out);
  }
  const auto rows = model::k_sweep(m, ds, ks, opt.scoring());
  write_text(json(rows).dump(2) + "\n", out);
  return 0;
}

int run_prune(const ModelOptions& opt, const std::string& target_name, double ratio, std::size_t k,
              const std::string& out) {
  model::PruneTarget target;
  if (target_name == "linear")
    target = model::PruneTarget::linear;
  else if (target_name == "all-projections")
    target = model::PruneTarget::all_projections;
  else
    throw UsageError("--target must be linear or all-projections");
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw UsageError("--ratio must be in [0, 1]");

  const auto m = opt.build();
  if (k > m.layer_count()) throw UsageError("--k exceeds the layer count");
  // Labels come from the unpruned model, so both accuracies measure agreement with it.
  const auto ds = model::make_teacher_dataset(m, opt.data_seed, opt.samples);
  const auto plan = model::select_layers(model::layer_impact_scores(m, ds, opt.scoring()), k);
  const auto pruned = model::prune_l1(m, target, ratio);

  json j;
  j["target"] = target_name;
  j["ratio"] = ratio;
  j["k"] = k;
  j["selected"] = plan.selected;
  j["accuracy_original"] = model::accuracy(m, nullptr, ds);
  j["accuracy_plan"] = model::accuracy(m, &plan, ds);
  j["accuracy_pruned"] = model::accuracy(pruned, nullptr, ds);
  j["accuracy_pruned_plan"] = model::accuracy(pruned, &plan, ds);
  write_text(j.dump(2) + "\n", out);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Channel-mean selective scan toolkit"};
  app.require_subcommand(1);
  app.fallthrough(false);

  // flops
  auto* flops = app.add_subcommand("flops", "cost model for the original and reduced scan blocks");
  std::uint64_t fb = 1, fd = 0, fl = 0;
  bool flops_json = false;
  flops->add_option("--b", fb, "batch")->check(CLI::PositiveNumber)->capture_default_str();
  flops->add_option("--d", fd, "inner channel dimension")->required()->check(CLI::PositiveNumber);
  flops->add_option("--l", fl, "sequence length")->required()->check(CLI::PositiveNumber);
  flops->add_flag("--json", flops_json, "print the full cost report as JSON");

  // scan-bench
  auto* bench_cmd = app.add_subcommand("scan-bench", "time the scan modes over a shape sweep");
  bench::BenchConfig bcfg;
  std::vector<std::string> shape_specs, mode_names;
  std::string dtype_name = "f32", format = "csv", bench_out;
  std::optional<int> bench_threads;
  bench_cmd->add_option("--shapes", shape_specs, "D:L pairs (default: the eight reference shapes)")->delimiter(',');
  bench_cmd->add_option("--modes", mode_names, "original-sequential,original-parallel,vmeanba")->delimiter(',');
  bench_cmd->add_option("--batch", bcfg.batch)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--state", bcfg.state, "state size N")->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--warmup", bcfg.warmup_iters)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--iters", bcfg.measure_iters)->check(CLI::PositiveNumber)->capture_default_str();
  bench_cmd->add_option("--dtype", dtype_name)->check(CLI::IsMember({"f32", "f64"}))->capture_default_str();
  bench_cmd->add_option("--threads", bench_threads, "OpenMP threads (default: MEANBA_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--seed", bcfg.seed)->capture_default_str();
  bench_cmd->add_option("--format", format)->check(CLI::IsMember({"csv", "json"}))->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "report path")->required();

  // analyze
  auto* analyze = app.add_subcommand("analyze", "channel statistics and reduction error of archived activations");
  std::string analyze_in, analyze_out;
  analyze->add_option("--input", analyze_in, "tensor archive with a_bar, b_bar_u, c, skip_gain, u")
      ->required()
      ->check(CLI::ExistingFile);
  analyze->add_option("--out", analyze_out, "JSON output path (default: stdout)");

  // select-layers
  auto* select = app.add_subcommand("select-layers", "score every layer and select the K cheapest");
  ModelOptions select_opt;
  std::size_t select_k = 0;
  std::string select_out;
  select->add_option("--k", select_k, "number of layers to switch")->required();
  select_opt.attach(select);
  select->add_option("--out", select_out, "plan JSON path (default: stdout)");

  // eval
  auto* eval = app.add_subcommand("eval", "accuracy and timing for a sweep of K");
  ModelOptions eval_opt;
  std::vector<std::size_t> eval_ks;
  std::string eval_out, capture_out;
  std::optional<std::size_t> capture;
  eval->add_option("--k-values", eval_ks, "K values (default: 0..layer count)")->delimiter(',');
  eval_opt.attach(eval);
  eval->add_option("--out", eval_out, "sweep JSON path (default: stdout)");
  eval->add_option("--capture-layer", capture, "archive one layer's row-forward scan inputs for the first sample");
  eval->add_option("--capture-out", capture_out, "archive path for --capture-layer");

  // prune
  auto* prune = app.add_subcommand("prune", "magnitude pruning combined with a layer plan");
  ModelOptions prune_opt;
  std::string prune_target = "linear", prune_out;
  double prune_ratio = 0.4;
  std::size_t prune_k = 0;
  prune->add_option("--target", prune_target, "linear or all-projections")->capture_default_str();
  prune->add_option("--ratio", prune_ratio, "fraction of entries zeroed per matrix")->capture_default_str();
  prune->add_option("--k", prune_k, "layers switched after pruning")->capture_default_str();
  prune_opt.attach(prune);
  prune->add_option("--out", prune_out, "JSON output path (default: stdout)");

  if (argc <= 1) {
    std::cerr << app.help();
    return kUsageError;
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    const int env_threads = default_threads();
    auto resolve = [&](ModelOptions& opt, CLI::App* sub) {
      if (sub->count("--threads") == 0) opt.threads = env_threads;
    };

    if (flops->parsed()) return run_flops(fb, fd, fl, flops_json);
    if (bench_cmd->parsed()) {
      if (!shape_specs.empty()) bcfg.shapes = parse_shapes(shape_specs);
      if (!mode_names.empty()) {
        bcfg.modes.clear();
        for (const auto& n : mode_names) {
          try {
            bcfg.modes.push_back(bench::parse_bench_mode(n));
          } catch (const std::invalid_argument& e) {
            throw UsageError(e.what());
          }
        }
      }
      bcfg.dtype = dtype_name == "f64" ? DType::f64 : DType::f32;
      bcfg.threads = bench_threads.value_or(env_threads);
      const auto records = bench::run_scan_bench(bcfg);
      bench::emit_report(records, format == "json" ? bench::ReportFormat::json : bench::ReportFormat::csv, bench_out);
      return 0;
    }
    if (analyze->parsed()) return run_analyze(analyze_in, analyze_out);
    if (select->parsed()) {
      resolve(select_opt, select);
      return run_select(select_opt, select_k, select_out);
    }
    if (eval->parsed()) {
      resolve(eval_opt, eval);
      return run_eval(eval_opt, eval_ks, eval_out, capture, capture_out);
    }
    if (prune->parsed()) {
      resolve(prune_opt, prune);
      return run_prune(prune_opt, prune_target, prune_ratio, prune_k, prune_out);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}
