#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "gancircle/autodiff.hpp"
#include "gancircle/rng.hpp"

namespace gancircle {

enum class Direction { G, F };
enum class Mode { supervised, semi, unsupervised };

Mode parse_mode(const std::string& s);
std::string mode_name(Mode m);

struct ReconFilters {
  int a1 = 24, b1 = 8, b2 = 8, c1 = 32, c2 = 16, output = 1;
};

struct GeneratorConfig {
  Direction direction = Direction::G;
  Mode mode = Mode::supervised;
  std::array<int, 12> feature_filters = {64, 54, 48, 43, 39, 35, 31, 28, 25, 22, 18, 16};
  ReconFilters recon_filters;
  double leaky_slope = 0.1;
  double dropout_keep = 0.8;  // keep probability
  int upscale_factor = 2;
  bool use_bicubic_skip = true;

  void validate() const;  // throws on out-of-range fields
};

// Applies the derived invariants: the bicubic residual skip exists only for G
// outside the unsupervised geometry.
GeneratorConfig make_generator_config(Direction dir, Mode mode);

// Stride of each feature block. Default all 1; unsupervised nets use stride 2
// in block 1; supervised F uses stride 2 in blocks 1 and 2.
std::array<int, 12> feature_strides(const GeneratorConfig& cfg);

struct DiscriminatorConfig {
  std::array<int, 8> conv_filters = {64, 64, 128, 128, 256, 256, 512, 512};
  int kernel_size = 4;
  int fc_units = 1024;
  double leaky_slope = 0.1;
  // Spatial size the fully-connected head is sized for (64 for the HR domain,
  // 32 for the LR domain in the native-LR geometry). Must be divisible by 16.
  int input_hw = 64;

  void validate() const;
};

enum class InitKind { gaussian, zeros, ones };

struct ParamEntry {
  std::string id;       // stable layer id, e.g. "G.feat.03.conv.weight"
  ad::Value value;      // leaf with requires_grad
  InitKind init = InitKind::gaussian;
  double init_std = 0.0;
};

// Ordered named parameter tensors of one network; ordering is deterministic
// given the config and is part of the checkpoint format.
class ParamSet {
 public:
  ad::Value add(std::string id, Shape shape, InitKind init, double init_std);
  std::vector<ParamEntry>& entries() { return entries_; }
  const std::vector<ParamEntry>& entries() const { return entries_; }
  ad::Value find(const std::string& id) const;  // throws if absent
  std::int64_t total_parameters() const;

 private:
  std::vector<ParamEntry> entries_;
};

// Re-draws every parameter from its recorded init rule; weights are zero-mean
// gaussians with std sqrt(2/m), m = fs^2 * n_f, biases zero. Draw order is the
// entry order.
void init_weights(ParamSet& params, std::uint64_t seed);

class Generator {
 public:
  Generator(GeneratorConfig cfg, std::uint64_t seed, std::string name);

  // training=true enables dropout, drawing one mask per feature block from
  // rng (rng may be null only when training=false or dropout_keep == 1)
  ad::Value forward(const ad::Value& input, bool training = false, Rng* rng = nullptr) const;

  const GeneratorConfig& config() const { return cfg_; }
  const std::string& name() const { return name_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }

  // net effect of the stride schedule plus the x2 up-scaling layer
  std::pair<std::int64_t, std::int64_t> output_hw(std::int64_t h, std::int64_t w) const;
  int downsample_divisor() const;  // input sizes must divide by this
  void check_input(std::int64_t h, std::int64_t w) const;

 private:
  GeneratorConfig cfg_;
  std::string name_;
  ParamSet params_;
};

class Critic {
 public:
  Critic(DiscriminatorConfig cfg, std::uint64_t seed, std::string name);

  // batch (N,1,input_hw,input_hw) -> unbounded scores (N,1,1,1)
  ad::Value forward(const ad::Value& input) const;

  const DiscriminatorConfig& config() const { return cfg_; }
  const std::string& name() const { return name_; }
  ParamSet& params() { return params_; }
  const ParamSet& params() const { return params_; }
  void check_input(std::int64_t h, std::int64_t w) const;

 private:
  DiscriminatorConfig cfg_;
  std::string name_;
  ParamSet params_;
  std::int64_t flat_dim_ = 0;
};

std::int64_t count_parameters(const ParamSet& params);

}  // namespace gancircle
