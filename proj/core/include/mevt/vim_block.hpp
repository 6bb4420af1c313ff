#pragma once

#include "mevt/common.hpp"
#include "mevt/ssm_core.hpp"

#include <cstdint>
#include <random>
#include <vector>

namespace mevt {

inline constexpr float kNormEpsilon = 1e-6f;

// Per-token zero-mean / unit-variance normalization with learned scale/shift.
struct TokenNorm {
  VectorF scale;
  VectorF shift;

  static TokenNorm identity(int dim);
  MatrixF apply(const MatrixF& x) const;
};

// Depthwise causal 1-D convolution: y_t = bias + sum_j weight(:, j) * x_{t-j}.
struct CausalConv1d {
  MatrixF weight;  // d_inner x width; column 0 taps the current token
  VectorF bias;

  static CausalConv1d zeros(int channels, int width);
  MatrixF apply(const MatrixF& x) const;
};

struct BlockShape {
  int dim = 384;       // C
  int d_inner = 768;   // expansion 2
  int d_state = 16;
  int dt_rank = 24;
  int conv_width = 4;
};

struct VimBlockParams {
  TokenNorm pre_norm;
  MatrixF in_proj;  // C x 2 * d_inner -> (x, z)
  CausalConv1d conv_fwd;
  CausalConv1d conv_bwd;
  SsmParams<float> ssm_fwd;
  SsmParams<float> ssm_bwd;
  MatrixF out_proj;  // d_inner x C

  static VimBlockParams zeros(const BlockShape& shape);
  static VimBlockParams random(const BlockShape& shape, int depth, std::mt19937_64& rng);

  int dim() const { return static_cast<int>(in_proj.rows()); }
  int d_inner() const { return static_cast<int>(out_proj.rows()); }
};

struct BackboneParams {
  std::vector<VimBlockParams> blocks;
  TokenNorm final_norm;
  MatrixF mlp;  // C x C
  VectorF mlp_bias;

  // Identity final stage (unit norm, identity MLP); with no blocks the
  // backbone reduces to per-token normalization.
  static BackboneParams zeros(const BlockShape& shape, int depth);
  static BackboneParams random(const BlockShape& shape, int depth, std::mt19937_64& rng);

  int depth() const { return static_cast<int>(blocks.size()); }
  int dim() const { return static_cast<int>(mlp.rows()); }
};

// Chunk length used by the blocked scan inside the backbone.
inline constexpr int kBackboneScanChunk = 64;

// out = in + out_proj([fwd(silu(conv_fwd(x))) + rev(bwd(silu(conv_bwd(rev(x)))))] * silu(z))
// with (x, z) = split(in_proj(pre_norm(in))).
MatrixF vim_block(const MatrixF& tokens, const VimBlockParams& params);

// L residual blocks followed by MLP(Norm(.)).
MatrixF backbone(const MatrixF& tokens, const BackboneParams& params);

std::int64_t count_params(const TokenNorm& p);
std::int64_t count_params(const CausalConv1d& p);
std::int64_t count_params(const SsmParams<float>& p);
std::int64_t count_params(const VimBlockParams& p);
std::int64_t count_params(const BackboneParams& p);

}  // namespace mevt
