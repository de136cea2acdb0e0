#pragma once

// Toy VMamba-style backbone used to exercise layer selection at desk scale.
//
// Stage s has channels base*2^s on an (H/2^s, W/2^s) grid. Every block is a
// pre-norm residual SS2D block, x + 0.25 * ss2d(rms_norm(x)), where the 0.25
// offsets the sum over four directions and rms_norm scales each pixel to unit
// RMS over channels. The scan is cubic in its input (B_t and C_t are linear in
// u), so without the norm activations diverge within a few blocks.
// Consecutive stages are joined by 2x2 patch merging (concat the four
// neighbours on the channel axis, then a linear map 4D -> 2D). The head is
// global average pooling followed by a linear classifier.
//
// All parameters are f64.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include "meanba/archive.hpp"
#include "meanba/ss2d.hpp"

namespace meanba::model {

using Image = ss2d::FeatureMap<double>;

struct ModelConfig {
  std::vector<std::size_t> depths{2, 2, 8, 2};
  std::size_t channels = 8;  // stage-0 D
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t state = 4;  // N
  std::size_t num_classes = 10;

  // Throws std::invalid_argument if a dimension is zero or the grid cannot be
  // halved once per stage transition.
  void validate() const;
  std::size_t layer_count() const;

  bool operator==(const ModelConfig&) const = default;
};

struct Block {
  ss2d::DirectionParams<double> directions;
  bool vmeanba = false;

  bool operator==(const Block&) const = default;
};

struct Stage {
  std::size_t channels = 0;
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<Block> blocks;

  bool operator==(const Stage&) const = default;
};

struct ToyModel {
  ModelConfig config;
  std::vector<Stage> stages;
  std::vector<std::vector<double>> downsample;  // per transition, (2D x 4D) row-major
  std::vector<double> head_weight;              // (classes x D_last)
  std::vector<double> head_bias;                // classes

  std::size_t layer_count() const;
  Block& block(std::size_t layer);
  const Block& block(std::size_t layer) const;

  bool operator==(const ToyModel&) const = default;
};

struct LayerScore {
  std::size_t layer = 0;
  double score = 0;

  bool operator==(const LayerScore&) const = default;
};

struct LayerPlan {
  std::vector<LayerScore> scores;
  std::vector<std::size_t> selected;

  bool contains(std::size_t layer) const;
  bool operator==(const LayerPlan&) const = default;
};

struct Logits {
  std::size_t batch = 0;
  std::size_t classes = 0;
  std::vector<double> values;

  double operator()(std::size_t b, std::size_t k) const { return values[b * classes + k]; }
  // Index of the largest logit for item b; ties go to the lowest class.
  std::size_t argmax(std::size_t b) const;
};

// Deterministic parameters from the seed. A follows the S4D-real layout
// (a[d, n] = -(n + 1)); the timescale bias is drawn log-uniformly in
// [1e-3, 1e-1] through the inverse softplus; projections are uniform in
// +-1/sqrt(fan_in); skip gains start at 1.
ToyModel build_toy_model(std::uint64_t seed, const ModelConfig& config);

using LayerObserver = std::function<void(std::size_t layer, ss2d::Direction, const ssm::DiscreteInputs<double>&,
                                         const Tensor3<double>&)>;

// Blocks marked vmeanba in the model, or listed in plan->selected, run the
// reduced scan; all others run scan_parallel.
Logits forward(const ToyModel& model, const Image& x, const LayerPlan* plan = nullptr,
               const LayerObserver& observer = {});

// Copy of the model with the plan's layers permanently switched to vmeanba.
ToyModel apply_plan(ToyModel model, const LayerPlan& plan);

enum class PruneTarget { linear, all_projections };

const char* to_string(PruneTarget t);

// Zeroes the floor(ratio * n) smallest-magnitude entries of `weights`, ties
// broken by ascending index. Returns the number of entries zeroed.
std::size_t prune_l1_weights(std::span<double> weights, double ratio);

// linear: the classifier head weight only.
// all_projections: every B/C/delta projection, every patch-merging matrix and
// the head weight. Biases, A, delta biases and skip gains are never touched.
ToyModel prune_l1(const ToyModel& model, PruneTarget target, double ratio);

// Every matrix prune_l1 touches for a target, in a fixed order.
std::vector<std::span<double>> prunable_matrices(ToyModel& model, PruneTarget target);

TensorSet model_to_tensors(const ToyModel& model);
ToyModel model_from_tensors(const TensorSet& tensors);
void save_model(const ToyModel& model, const std::filesystem::path& path);
ToyModel load_model(const std::filesystem::path& path);

}  // namespace meanba::model
