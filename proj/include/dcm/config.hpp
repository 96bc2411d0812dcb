#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "dcm/core_ad.hpp"
#include "dcm/masking.hpp"
#include "dcm/model.hpp"
#include "dcm/noise.hpp"

namespace dcm {

enum class Schedule { constant, cosine };
Schedule parse_schedule(std::string_view name);
std::string_view to_string(Schedule s);

// All knobs of one training run. Defaults describe the standard noisy-blobs
// experiment with node-wise masking at p = 0.6.
struct ExperimentConfig {
  // data
  std::size_t classes = 10;
  std::size_t n_per_class = 200;
  std::size_t input_dim = 8;
  double separation = 4.0;
  double spread = 1.0;
  double test_fraction = 0.2;
  // backbone
  std::size_t hidden_dim = 32;
  std::size_t feature_dim = 16;
  Activation activation = Activation::relu;
  // noise
  NoiseKind noise = NoiseKind::symmetric;
  double noise_rate = 0.6;
  std::string noise_pairs;   // "src:dst,src:dst"; empty = CIFAR-10 table
  std::string noise_groups;  // "0 1 2;3 4 5"; empty = consecutive groups of 5
  // head
  HeadKind head = HeadKind::mlp;
  double kan_lower = -2.0;
  double kan_upper = 2.0;
  std::size_t kan_intervals = 8;
  std::size_t kan_order = 3;
  double head_init_scale = 1.0;  // multiplies the initial MLP head weights
  // masking
  MaskingPolicy masking{true, MaskStrategy::node_wise, 0.6, MaskInterval::per_iteration,
                        MaskStage::train_only};
  // optimisation
  LossKind loss = LossKind::ce;
  double learning_rate = 0.05;
  double weight_decay = 0.0;  // coupled L2, applied to every parameter
  Schedule schedule = Schedule::cosine;
  std::size_t epochs = 60;
  std::size_t batch_size = 64;
  // run
  std::uint64_t seed = 1;
  std::string out_dir;
  bool instrument = true;
  bool write_dataset = false;

  void set(std::string_view key, std::string_view value);
  void validate() const;

  NoiseSpec noise_spec(std::uint64_t noise_seed) const;
  SplineGrid kan_grid() const { return {kan_lower, kan_upper, kan_intervals, kan_order}; }

  // Canonical key = value listing of every field.
  std::string to_text() const;
};

std::vector<std::string> config_keys();

// Parses `key = value` lines; `#` starts a comment. Unknown keys throw.
ExperimentConfig parse_config(std::istream& is, ExperimentConfig base = {});
ExperimentConfig load_config(const std::string& path, ExperimentConfig base = {});

// "key=value" -> applies to cfg.
void apply_override(ExperimentConfig& cfg, std::string_view assignment);

}  // namespace dcm
