#include "meanba/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <stdexcept>

#include "meanba/rng.hpp"

namespace meanba::model {

EvalDataset make_teacher_dataset(const ToyModel& model, std::uint64_t seed, std::size_t count) {
  if (count == 0) throw std::invalid_argument("make_teacher_dataset: count must be >= 1");
  const auto& cfg = model.config;
  Rng rng(seed);
  EvalDataset ds;
  ds.provenance = Provenance::teacher_labeled;
  ds.inputs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Image x(1, cfg.channels, cfg.height, cfg.width);
    for (auto& v : x.data()) v = rng.uniform(-1.0, 1.0);
    ds.inputs.push_back(std::move(x));
  }
  ds.labels.resize(count);
  const auto n = static_cast<std::ptrdiff_t>(count);
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) ds.labels[i] = forward(model, ds.inputs[i]).argmax(0);
  return ds;
}

double accuracy(const ToyModel& model, const LayerPlan* plan, const EvalDataset& dataset) {
  if (dataset.size() == 0) throw std::invalid_argument("accuracy: dataset is empty");
  if (dataset.labels.size() != dataset.size()) throw std::invalid_argument("accuracy: label count mismatch");
  const auto n = static_cast<std::ptrdiff_t>(dataset.size());
  std::size_t correct = 0;
#pragma omp parallel for schedule(dynamic) reduction(+ : correct)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto logits = forward(model, dataset.inputs[i], plan);
    for (std::size_t b = 0; b < logits.batch; ++b)
      if (logits.argmax(b) == dataset.labels[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(dataset.size());
}

namespace {

EvalDataset head_of(const EvalDataset& ds, std::size_t count) {
  EvalDataset out;
  out.provenance = ds.provenance;
  out.inputs.assign(ds.inputs.begin(), ds.inputs.begin() + static_cast<std::ptrdiff_t>(count));
  out.labels.assign(ds.labels.begin(), ds.labels.begin() + static_cast<std::ptrdiff_t>(count));
  return out;
}

}  // namespace

std::vector<LayerScore> layer_impact_scores(const ToyModel& model, const EvalDataset& dataset,
                                            const ScoreOptions& options) {
  if (dataset.size() == 0) throw std::invalid_argument("layer_impact_scores: dataset is empty");
  const EvalDataset* ds = &dataset;
  EvalDataset subset;
  if (options.max_samples && *options.max_samples < dataset.size()) {
    if (*options.max_samples == 0) throw std::invalid_argument("layer_impact_scores: max_samples must be >= 1");
    subset = head_of(dataset, *options.max_samples);
    ds = &subset;
  }

  const double base = accuracy(model, nullptr, *ds);
  std::vector<LayerScore> scores;
  for (std::size_t layer = 0; layer < model.layer_count(); ++layer) {
    LayerPlan single{{}, {layer}};
    scores.push_back({layer, base - accuracy(model, &single, *ds)});
  }
  return scores;
}

LayerPlan select_layers(std::vector<LayerScore> scores, std::size_t k) {
  if (k > scores.size()) throw std::invalid_argument("select_layers: K exceeds the layer count");
  std::vector<LayerScore> order = scores;
  std::stable_sort(order.begin(), order.end(), [](const LayerScore& a, const LayerScore& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.layer < b.layer;
  });
  LayerPlan plan;
  plan.scores = std::move(scores);
  for (std::size_t i = 0; i < k; ++i) plan.selected.push_back(order[i].layer);
  return plan;
}

std::vector<SweepRow> k_sweep(const ToyModel& model, const EvalDataset& dataset,
                              const std::vector<LayerScore>& scores, const std::vector<std::size_t>& k_values) {
  std::vector<SweepRow> rows;
  for (auto k : k_values) {
    const auto plan = select_layers(scores, k);
    const auto t0 = std::chrono::steady_clock::now();
    const double acc = accuracy(model, &plan, dataset);
    const auto t1 = std::chrono::steady_clock::now();
    const auto ns = std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count();
    rows.push_back({k, acc, static_cast<std::uint64_t>(std::max<std::int64_t>(ns, 1)), plan.selected});
  }
  return rows;
}

std::vector<SweepRow> k_sweep(const ToyModel& model, const EvalDataset& dataset,
                              const std::vector<std::size_t>& k_values, const ScoreOptions& options) {
  return k_sweep(model, dataset, layer_impact_scores(model, dataset, options), k_values);
}

void to_json(nlohmann::json& j, const LayerScore& s) { j = {{"layer", s.layer}, {"score", s.score}}; }

void from_json(const nlohmann::json& j, LayerScore& s) {
  j.at("layer").get_to(s.layer);
  j.at("score").get_to(s.score);
}

void to_json(nlohmann::json& j, const LayerPlan& p) { j = {{"scores", p.scores}, {"selected", p.selected}}; }

void from_json(const nlohmann::json& j, LayerPlan& p) {
  j.at("scores").get_to(p.scores);
  j.at("selected").get_to(p.selected);
}

void to_json(nlohmann::json& j, const SweepRow& r) {
  j = {{"k", r.k}, {"accuracy", r.accuracy}, {"wall_time_ns", r.wall_time_ns}, {"selected", r.selected}};
}

void from_json(const nlohmann::json& j, SweepRow& r) {
  j.at("k").get_to(r.k);
  j.at("accuracy").get_to(r.accuracy);
  j.at("wall_time_ns").get_to(r.wall_time_ns);
  j.at("selected").get_to(r.selected);
}

}  // namespace meanba::model
