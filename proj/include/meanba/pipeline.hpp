#pragma once

// Layer selection: score every layer by the accuracy lost when only that
// layer runs the reduced scan, then switch the K lowest-scoring layers.

#include <cstdint>
#include <optional>
#include <vector>

#include "json.hpp"
#include "meanba/model.hpp"

namespace meanba::model {

enum class Provenance { teacher_labeled, external };

struct EvalDataset {
  std::vector<Image> inputs;
  std::vector<std::size_t> labels;
  Provenance provenance = Provenance::external;

  std::size_t size() const { return inputs.size(); }
};

// Random inputs in [-1, 1) labelled by the unplanned model's argmax, so the
// original model scores exactly 1.0 on the result.
EvalDataset make_teacher_dataset(const ToyModel& model, std::uint64_t seed, std::size_t count);

// Fraction of samples whose argmax (lowest index on ties) equals the label.
// Samples are evaluated concurrently; the count is exact so the result does
// not depend on the thread count.
double accuracy(const ToyModel& model, const LayerPlan* plan, const EvalDataset& dataset);

struct ScoreOptions {
  // Score on the first `max_samples` samples only; nullopt uses the whole set.
  std::optional<std::size_t> max_samples;
};

// S_layer = Acc(original) - Acc(reduced scan on that layer only), each layer
// scored independently against the unplanned model.
std::vector<LayerScore> layer_impact_scores(const ToyModel& model, const EvalDataset& dataset,
                                            const ScoreOptions& options = {});

// Stable ascending sort by (score, layer); the first K become the selection.
LayerPlan select_layers(std::vector<LayerScore> scores, std::size_t k);

struct SweepRow {
  std::size_t k = 0;
  double accuracy = 0;
  std::uint64_t wall_time_ns = 0;  // evaluating the dataset under this plan
  std::vector<std::size_t> selected;
};

std::vector<SweepRow> k_sweep(const ToyModel& model, const EvalDataset& dataset,
                              const std::vector<std::size_t>& k_values, const ScoreOptions& options = {});
std::vector<SweepRow> k_sweep(const ToyModel& model, const EvalDataset& dataset,
                              const std::vector<LayerScore>& scores, const std::vector<std::size_t>& k_values);

void to_json(nlohmann::json& j, const LayerScore& s);
void from_json(const nlohmann::json& j, LayerScore& s);
void to_json(nlohmann::json& j, const LayerPlan& p);
void from_json(const nlohmann::json& j, LayerPlan& p);
void to_json(nlohmann::json& j, const SweepRow& r);
void from_json(const nlohmann::json& j, SweepRow& r);

}  // namespace meanba::model
