#include "mevt/model.hpp"

#include <cmath>
#include <random>

namespace mevt {

namespace {

template <typename M>
std::span<float> span_of(M& m) {
  return {m.data(), static_cast<std::size_t>(m.size())};
}

std::uint32_t u32(Eigen::Index v) { return static_cast<std::uint32_t>(v); }

struct Visitor {
  const std::function<void(ParamView&)>& fn;

  void matrix(const std::string& name, MatrixF& m) {
    ParamView v{name, {u32(m.rows()), u32(m.cols())}, span_of(m), true};
    fn(v);
  }
  void vector(const std::string& name, VectorF& m, bool learned = true) {
    ParamView v{name, {u32(m.size())}, span_of(m), learned};
    fn(v);
  }
  void norm(const std::string& name, TokenNorm& n) {
    vector(name + ".scale", n.scale);
    vector(name + ".shift", n.shift);
  }
  void ssm(const std::string& name, SsmParams<float>& p) {
    matrix(name + ".a_log", p.a_log);
    vector(name + ".d_skip", p.d_skip);
    matrix(name + ".x_proj", p.x_proj);
    matrix(name + ".dt_proj", p.dt_proj);
    vector(name + ".dt_bias", p.dt_bias);
  }
  void backbone(const std::string& name, BackboneParams& p) {
    for (std::size_t l = 0; l < p.blocks.size(); ++l) {
      const std::string b = name + ".blocks." + std::to_string(l);
      VimBlockParams& blk = p.blocks[l];
      norm(b + ".norm", blk.pre_norm);
      matrix(b + ".in_proj", blk.in_proj);
      matrix(b + ".conv_fwd.weight", blk.conv_fwd.weight);
      vector(b + ".conv_fwd.bias", blk.conv_fwd.bias);
      matrix(b + ".conv_bwd.weight", blk.conv_bwd.weight);
      vector(b + ".conv_bwd.bias", blk.conv_bwd.bias);
      ssm(b + ".ssm_fwd", blk.ssm_fwd);
      ssm(b + ".ssm_bwd", blk.ssm_bwd);
      matrix(b + ".out_proj", blk.out_proj);
    }
    norm(name + ".final_norm", p.final_norm);
    matrix(name + ".mlp.weight", p.mlp);
    vector(name + ".mlp.bias", p.mlp_bias);
  }
  void conv(const std::string& name, Conv2d& c) {
    const auto k = static_cast<std::uint32_t>(c.kernel);
    ParamView v{name + ".weight",
                {u32(c.out_channels()), u32(c.in_channels()), k, k},
                span_of(c.weight),
                true};
    fn(v);
    vector(name + ".bias", c.bias);
  }
  void branch(const std::string& name, HeadBranch& b) {
    for (std::size_t l = 0; l < b.convs.size(); ++l) {
      const std::string i = std::to_string(l);
      conv(name + ".convs." + i, b.convs[l]);
      vector(name + ".norms." + i + ".gamma", b.norms[l].gamma);
      vector(name + ".norms." + i + ".beta", b.norms[l].beta);
      vector(name + ".norms." + i + ".running_mean", b.norms[l].running_mean, false);
      vector(name + ".norms." + i + ".running_var", b.norms[l].running_var, false);
    }
    conv(name + ".last", b.last);
  }
};

void fill_uniform(std::span<float> data, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (float& v : data) v = static_cast<float>(dist(rng));
}

}  // namespace

Model zero_model(const TrackerConfig& config) {
  config.validate();
  Model m;
  m.embed = PatchEmbedParams::zeros(config.patch_size, config.embed_dim, config.template_size,
                                    config.search_size);
  m.backbone = BackboneParams::zeros(config.block_shape(), config.depth);
  if (config.memory_mode == MemoryMode::separate) {
    m.memory_backbone = BackboneParams::zeros(config.block_shape(), config.depth);
  }
  m.head = HeadParams::zeros(config.embed_dim);
  return m;
}

Model random_model(const TrackerConfig& config, std::uint64_t seed) {
  Model m = zero_model(config);
  std::mt19937_64 rng(seed);
  fill_uniform(span_of(m.embed.projection),
               1.0 / std::sqrt(static_cast<double>(m.embed.projection.rows())), rng);
  fill_uniform(span_of(m.embed.pos_template), 0.02, rng);
  fill_uniform(span_of(m.embed.pos_search), 0.02, rng);
  m.backbone = BackboneParams::random(config.block_shape(), config.depth, rng);
  if (m.memory_backbone) m.memory_backbone = BackboneParams::random(config.block_shape(), config.depth, rng);
  m.head = HeadParams::random(config.embed_dim, rng);
  return m;
}

std::int64_t count_params(const Model& model) {
  std::int64_t n = 0;
  visit_params(model, [&n](const ParamView& v) {
    if (v.learned) n += static_cast<std::int64_t>(v.data.size());
  });
  return n;
}

void visit_params(Model& model, const std::function<void(ParamView&)>& fn) {
  Visitor v{fn};
  v.matrix("embed.projection", model.embed.projection);
  v.vector("embed.bias", model.embed.bias);
  v.matrix("embed.pos_template", model.embed.pos_template);
  v.matrix("embed.pos_search", model.embed.pos_search);
  v.backbone("backbone", model.backbone);
  if (model.memory_backbone) v.backbone("memory", *model.memory_backbone);
  v.branch("head.score", model.head.score);
  v.branch("head.offset", model.head.offset);
  v.branch("head.size", model.head.size);
}

void visit_params(const Model& model, const std::function<void(const ParamView&)>& fn) {
  // The visitor only hands out views; the const overload never writes through them.
  visit_params(const_cast<Model&>(model), [&fn](ParamView& v) { fn(v); });
}

}  // namespace mevt
