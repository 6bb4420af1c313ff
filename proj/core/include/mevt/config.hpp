#pragma once

#include "mevt/event_stream.hpp"
#include "mevt/losses_metrics.hpp"
#include "mevt/memory_mamba.hpp"
#include "mevt/template_memory.hpp"
#include "mevt/tokenizer.hpp"
#include "mevt/vim_block.hpp"

#include <cstdint>
#include <filesystem>
#include <string>

namespace mevt {

// Field names match the JSON keys.
struct TrackerConfig {
  int patch_size = 16;
  int embed_dim = 384;
  int depth = 24;
  int d_state = 16;
  int dt_rank = 24;
  int conv_width = 4;
  int expand = 2;

  int template_size = 128;
  int search_size = 256;
  double template_context = 2.0;
  double search_context = 4.0;

  int lt_capacity = 16;
  int st_capacity = 6;
  int interval = 5;
  MemoryMode memory_mode = MemoryMode::shared;
  bool regenerate_every_frame = false;
  int train_dynamic_templates = 7;  // K for training-sample simulation

  LossWeights loss_weights;
  std::int64_t window_us = 10000;
  std::uint64_t seed = 2024;
  int sensor_width = 0;  // 0: infer from the event file
  int sensor_height = 0;

  void validate() const;
  BlockShape block_shape() const;
  MemoryConfig memory() const;
  int template_tokens() const;
  int search_tokens() const;
  int score_map_side() const { return search_size / patch_size; }
};

// Unknown keys are rejected; missing keys keep their defaults.
TrackerConfig tracker_config_from_json(const std::string& text);
std::string to_json(const TrackerConfig& config);
TrackerConfig load_tracker_config(const std::filesystem::path& path);

// MEVT_SEED, when set, replaces config.seed.
void apply_env_overrides(TrackerConfig& config);

SynthConfig synth_config_from_json(const std::string& text);
std::string to_json(const SynthConfig& config);
SynthConfig load_synth_config(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path);

}  // namespace mevt
