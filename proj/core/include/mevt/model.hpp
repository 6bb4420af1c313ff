#pragma once

#include "mevt/config.hpp"
#include "mevt/memory_mamba.hpp"
#include "mevt/tokenizer.hpp"
#include "mevt/tracking_head.hpp"
#include "mevt/vim_block.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mevt {

struct Model {
  PatchEmbedParams embed;
  BackboneParams backbone;
  std::optional<BackboneParams> memory_backbone;  // set in separate mode
  HeadParams head;

  MemoryMode mode() const { return memory_backbone ? MemoryMode::separate : MemoryMode::shared; }
  const BackboneParams& memory_params() const { return memory_backbone ? *memory_backbone : backbone; }
};

// All-zero parameters with the configured shapes (identity norms, identity BN).
Model zero_model(const TrackerConfig& config);

// Seeded random initialization.
Model random_model(const TrackerConfig& config, std::uint64_t seed);

// Learned scalars only; batch-norm running statistics are excluded.
std::int64_t count_params(const Model& model);

struct ParamView {
  std::string name;
  std::vector<std::uint32_t> shape;
  std::span<float> data;
  bool learned = true;
};

// Every stored array of the model in a fixed order.
void visit_params(Model& model, const std::function<void(ParamView&)>& fn);
void visit_params(const Model& model, const std::function<void(const ParamView&)>& fn);

}  // namespace mevt
