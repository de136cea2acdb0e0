#include "meanba/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "meanba/rng.hpp"

namespace meanba::model {

namespace {

std::vector<double> uniform_vector(Rng& rng, std::size_t n, double bound) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-bound, bound);
  return v;
}

ssm::SsmParams<double> init_direction(Rng& rng, std::size_t D, std::size_t N) {
  std::vector<double> a(D * N);
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t n = 0; n < N; ++n) a[d * N + n] = -static_cast<double>(n + 1);

  const double bound = 1.0 / std::sqrt(static_cast<double>(D));
  auto b_proj = uniform_vector(rng, N * D, bound);
  auto c_proj = uniform_vector(rng, N * D, bound);
  auto delta_proj = uniform_vector(rng, D, bound);

  std::vector<double> delta_bias(D);
  const double lo = std::log(1e-3), hi = std::log(1e-1);
  for (auto& bias : delta_bias) {
    const double dt = std::exp(rng.uniform(lo, hi));
    bias = dt + std::log(-std::expm1(-dt));  // softplus(bias) == dt
  }
  return {D, N, std::move(a), std::move(b_proj), std::move(c_proj), std::move(delta_proj),
          std::move(delta_bias), std::vector<double>(D, 1.0)};
}

// (B, D, H, W) -> (B, 4D, H/2, W/2) -> linear to (B, 2D, H/2, W/2).
Image patch_merge(const Image& x, const std::vector<double>& weight) {
  const std::size_t B = x.batch(), D = x.channels(), H = x.height() / 2, W = x.width() / 2;
  const std::size_t in = 4 * D, out = 2 * D;
  Image y(B, out, H, W);
  std::vector<double> z(in);
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w) {
        for (std::size_t q = 0; q < 4; ++q)
          for (std::size_t d = 0; d < D; ++d) z[q * D + d] = x(b, d, 2 * h + q / 2, 2 * w + q % 2);
        for (std::size_t o = 0; o < out; ++o) {
          double acc = 0;
          const double* row = weight.data() + o * in;
          for (std::size_t i = 0; i < in; ++i) acc += row[i] * z[i];
          y(b, o, h, w) = acc;
        }
      }
  return y;
}

std::string block_prefix(std::size_t stage, std::size_t block, ss2d::Direction dir) {
  return "s" + std::to_string(stage) + ".b" + std::to_string(block) + "." + ss2d::to_string(dir) + ".";
}

}  // namespace

void ModelConfig::validate() const {
  if (depths.empty()) throw std::invalid_argument("ModelConfig: at least one stage is required");
  for (auto d : depths)
    if (d == 0) throw std::invalid_argument("ModelConfig: stage depths must be >= 1");
  if (channels == 0 || height == 0 || width == 0 || state == 0 || num_classes == 0)
    throw std::invalid_argument("ModelConfig: dimensions must be >= 1");
  const std::size_t halvings = depths.size() - 1;
  if (halvings >= 32) throw std::invalid_argument("ModelConfig: too many stages");
  const std::size_t factor = std::size_t{1} << halvings;
  if (height % factor != 0 || width % factor != 0)
    throw std::invalid_argument("ModelConfig: height and width must be divisible by 2^(stages-1)");
}

std::size_t ModelConfig::layer_count() const { return std::accumulate(depths.begin(), depths.end(), std::size_t{0}); }

std::size_t ToyModel::layer_count() const {
  std::size_t n = 0;
  for (const auto& s : stages) n += s.blocks.size();
  return n;
}

Block& ToyModel::block(std::size_t layer) {
  return const_cast<Block&>(static_cast<const ToyModel&>(*this).block(layer));
}

const Block& ToyModel::block(std::size_t layer) const {
  for (const auto& s : stages) {
    if (layer < s.blocks.size()) return s.blocks[layer];
    layer -= s.blocks.size();
  }
  throw std::out_of_range("ToyModel: layer index out of range");
}

bool LayerPlan::contains(std::size_t layer) const {
  return std::find(selected.begin(), selected.end(), layer) != selected.end();
}

std::size_t Logits::argmax(std::size_t b) const {
  std::size_t best = 0;
  for (std::size_t k = 1; k < classes; ++k)
    if ((*this)(b, k) > (*this)(b, best)) best = k;
  return best;
}

ToyModel build_toy_model(std::uint64_t seed, const ModelConfig& config) {
  config.validate();
  Rng rng(seed);
  ToyModel m;
  m.config = config;
  std::size_t D = config.channels, H = config.height, W = config.width;
  for (std::size_t s = 0; s < config.depths.size(); ++s) {
    if (s > 0) {
      m.downsample.push_back(uniform_vector(rng, 2 * D * 4 * D, 1.0 / std::sqrt(4.0 * static_cast<double>(D))));
      D *= 2;
      H /= 2;
      W /= 2;
    }
    Stage stage{D, H, W, {}};
    for (std::size_t k = 0; k < config.depths[s]; ++k) {
      Block blk;
      for (auto& p : blk.directions) p = init_direction(rng, D, config.state);
      stage.blocks.push_back(std::move(blk));
    }
    m.stages.push_back(std::move(stage));
  }
  m.head_weight = uniform_vector(rng, config.num_classes * D, 1.0 / std::sqrt(static_cast<double>(D)));
  m.head_bias = uniform_vector(rng, config.num_classes, 0.1);
  return m;
}

namespace {

// Per-pixel RMS normalization over channels, without mean subtraction so a
// channel-constant map stays channel-constant.
Image rms_norm(const Image& x) {
  constexpr double eps = 1e-6;
  Image out = x;
  const std::size_t D = x.channels(), HW = x.height() * x.width();
  for (std::size_t b = 0; b < x.batch(); ++b)
    for (std::size_t p = 0; p < HW; ++p) {
      double ss = 0;
      for (std::size_t d = 0; d < D; ++d) {
        const double v = x.data()[x.index(b, d, 0, 0) + p];
        ss += v * v;
      }
      const double scale = 1.0 / std::sqrt(ss / static_cast<double>(D) + eps);
      for (std::size_t d = 0; d < D; ++d) out.data()[x.index(b, d, 0, 0) + p] *= scale;
    }
  return out;
}

}  // namespace

Logits forward(const ToyModel& model, const Image& x, const LayerPlan* plan, const LayerObserver& observer) {
  const auto& cfg = model.config;
  if (x.channels() != cfg.channels || x.height() != cfg.height || x.width() != cfg.width)
    throw std::invalid_argument("forward: input does not match the model's (D, H, W)");

  Image act = x;
  std::size_t layer = 0;
  for (std::size_t s = 0; s < model.stages.size(); ++s) {
    if (s > 0) act = patch_merge(act, model.downsample[s - 1]);
    for (const auto& blk : model.stages[s].blocks) {
      const bool reduced = blk.vmeanba || (plan && plan->contains(layer));
      ss2d::ScanObserver<double> obs;
      if (observer)
        obs = [&, layer](ss2d::Direction dir, const ssm::DiscreteInputs<double>& in, const Tensor3<double>& y) {
          observer(layer, dir, in, y);
        };
      const Image mixed =
          ss2d::ss2d_block(rms_norm(act), blk.directions, reduced ? ss2d::BlockScan::vmeanba : ss2d::BlockScan::parallel, obs);
      auto a = act.data();
      auto m = mixed.data();
      for (std::size_t i = 0; i < a.size(); ++i) a[i] += 0.25 * m[i];
      ++layer;
    }
  }

  const std::size_t B = act.batch(), D = act.channels(), HW = act.height() * act.width();
  const std::size_t K = cfg.num_classes;
  Logits out{B, K, std::vector<double>(B * K)};
  std::vector<double> pooled(D);
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t d = 0; d < D; ++d) {
      const double* p = act.data().data() + act.index(b, d, 0, 0);
      double acc = 0;
      for (std::size_t i = 0; i < HW; ++i) acc += p[i];
      pooled[d] = acc / static_cast<double>(HW);
    }
    for (std::size_t k = 0; k < K; ++k) {
      double acc = model.head_bias[k];
      for (std::size_t d = 0; d < D; ++d) acc += model.head_weight[k * D + d] * pooled[d];
      out.values[b * K + k] = acc;
    }
  }
  return out;
}

ToyModel apply_plan(ToyModel model, const LayerPlan& plan) {
  for (auto layer : plan.selected) model.block(layer).vmeanba = true;
  return model;
}

const char* to_string(PruneTarget t) { return t == PruneTarget::linear ? "linear" : "all-projections"; }

std::size_t prune_l1_weights(std::span<double> weights, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("prune_l1: ratio must be in [0, 1]");
  const std::size_t n = weights.size();
  const auto count = static_cast<std::size_t>(std::floor(ratio * static_cast<double>(n)));
  if (count == 0) return 0;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t i, std::size_t j) { return std::abs(weights[i]) < std::abs(weights[j]); });
  for (std::size_t k = 0; k < count; ++k) weights[order[k]] = 0.0;
  return count;
}

std::vector<std::span<double>> prunable_matrices(ToyModel& model, PruneTarget target) {
  std::vector<std::span<double>> out;
  if (target == PruneTarget::all_projections) {
    for (auto& stage : model.stages)
      for (auto& blk : stage.blocks)
        for (auto& p : blk.directions) {
          out.emplace_back(p.b_proj);
          out.emplace_back(p.c_proj);
          out.emplace_back(p.delta_proj);
        }
    for (auto& w : model.downsample) out.emplace_back(w);
  }
  out.emplace_back(model.head_weight);
  return out;
}

ToyModel prune_l1(const ToyModel& model, PruneTarget target, double ratio) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw std::invalid_argument("prune_l1: ratio must be in [0, 1]");
  ToyModel pruned = model;
  for (auto w : prunable_matrices(pruned, target)) prune_l1_weights(w, ratio);
  return pruned;
}

TensorSet model_to_tensors(const ToyModel& model) {
  const auto& cfg = model.config;
  TensorSet set;
  std::vector<double> config{static_cast<double>(cfg.depths.size())};
  for (auto d : cfg.depths) config.push_back(static_cast<double>(d));
  for (auto v : {cfg.channels, cfg.height, cfg.width, cfg.state, cfg.num_classes})
    config.push_back(static_cast<double>(v));
  set.push_back(NamedTensor::from("config", {config.size()}, config));

  std::vector<double> flags;
  for (const auto& stage : model.stages)
    for (const auto& blk : stage.blocks) flags.push_back(blk.vmeanba ? 1.0 : 0.0);
  set.push_back(NamedTensor::from("vmeanba_flags", {flags.size()}, flags));

  for (std::size_t s = 0; s < model.stages.size(); ++s) {
    const auto& stage = model.stages[s];
    const std::size_t D = stage.channels, N = cfg.state;
    for (std::size_t k = 0; k < stage.blocks.size(); ++k)
      for (auto dir : ss2d::kDirections) {
        const auto& p = stage.blocks[k].directions[static_cast<std::size_t>(dir)];
        const auto prefix = block_prefix(s, k, dir);
        set.push_back(NamedTensor::from(prefix + "a", {D, N}, p.a));
        set.push_back(NamedTensor::from(prefix + "b_proj", {N, D}, p.b_proj));
        set.push_back(NamedTensor::from(prefix + "c_proj", {N, D}, p.c_proj));
        set.push_back(NamedTensor::from(prefix + "delta_proj", {1, D}, p.delta_proj));
        set.push_back(NamedTensor::from(prefix + "delta_bias", {D}, p.delta_bias));
        set.push_back(NamedTensor::from(prefix + "skip_gain", {D}, p.skip_gain));
      }
  }
  for (std::size_t s = 0; s < model.downsample.size(); ++s) {
    const std::size_t D = model.stages[s].channels;
    set.push_back(NamedTensor::from("down" + std::to_string(s), {2 * D, 4 * D}, model.downsample[s]));
  }
  const std::size_t D_last = model.stages.back().channels;
  set.push_back(NamedTensor::from("head.weight", {cfg.num_classes, D_last}, model.head_weight));
  set.push_back(NamedTensor::from("head.bias", {cfg.num_classes}, model.head_bias));
  return set;
}

ToyModel model_from_tensors(const TensorSet& tensors) {
  const auto config = require_tensor(tensors, "config").values_as<double>();
  if (config.empty()) throw std::invalid_argument("model archive: empty config");
  const auto stages = static_cast<std::size_t>(config[0]);
  if (config.size() != 1 + stages + 5) throw std::invalid_argument("model archive: malformed config");
  ModelConfig cfg;
  cfg.depths.assign(stages, 0);
  for (std::size_t s = 0; s < stages; ++s) cfg.depths[s] = static_cast<std::size_t>(config[1 + s]);
  cfg.channels = static_cast<std::size_t>(config[1 + stages]);
  cfg.height = static_cast<std::size_t>(config[2 + stages]);
  cfg.width = static_cast<std::size_t>(config[3 + stages]);
  cfg.state = static_cast<std::size_t>(config[4 + stages]);
  cfg.num_classes = static_cast<std::size_t>(config[5 + stages]);
  cfg.validate();

  // Shapes come from the config; values from the archive.
  ToyModel m = build_toy_model(0, cfg);
  auto load = [&](const std::string& name, std::vector<double>& dst) {
    auto v = require_tensor(tensors, name).values_as<double>();
    if (v.size() != dst.size()) throw std::invalid_argument("model archive: '" + name + "' has the wrong size");
    dst = std::move(v);
  };
  const auto flags = require_tensor(tensors, "vmeanba_flags").values_as<double>();
  if (flags.size() != m.layer_count()) throw std::invalid_argument("model archive: wrong flag count");
  std::size_t layer = 0;
  for (std::size_t s = 0; s < m.stages.size(); ++s)
    for (std::size_t k = 0; k < m.stages[s].blocks.size(); ++k) {
      auto& blk = m.stages[s].blocks[k];
      blk.vmeanba = flags[layer++] != 0.0;
      for (auto dir : ss2d::kDirections) {
        auto& p = blk.directions[static_cast<std::size_t>(dir)];
        const auto prefix = block_prefix(s, k, dir);
        load(prefix + "a", p.a);
        load(prefix + "b_proj", p.b_proj);
        load(prefix + "c_proj", p.c_proj);
        load(prefix + "delta_proj", p.delta_proj);
        load(prefix + "delta_bias", p.delta_bias);
        load(prefix + "skip_gain", p.skip_gain);
        p.validate();
      }
    }
  for (std::size_t s = 0; s < m.downsample.size(); ++s) load("down" + std::to_string(s), m.downsample[s]);
  load("head.weight", m.head_weight);
  load("head.bias", m.head_bias);
  return m;
}

void save_model(const ToyModel& model, const std::filesystem::path& path) {
  archive_write(model_to_tensors(model), path);
}

ToyModel load_model(const std::filesystem::path& path) { return model_from_tensors(archive_read(path)); }

}  // namespace meanba::model
