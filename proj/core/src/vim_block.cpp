#include "mevt/vim_block.hpp"

#include <cmath>

namespace mevt {

namespace {

MatrixF silu(const MatrixF& x) {
  return (x.array() / (1.0f + (-x.array()).exp())).matrix();
}

void fill_uniform(MatrixF& m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<float>(dist(rng));
}

void fill_uniform(VectorF& v, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = static_cast<float>(dist(rng));
}

}  // namespace

TokenNorm TokenNorm::identity(int dim) {
  return {VectorF::Ones(dim), VectorF::Zero(dim)};
}

MatrixF TokenNorm::apply(const MatrixF& x) const {
  if (x.cols() != scale.size()) throw Error(ErrorCode::shape_mismatch, "norm width mismatch");
  MatrixF out(x.rows(), x.cols());
  const float inv_c = 1.0f / static_cast<float>(x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i).array();
    const float mean = row.sum() * inv_c;
    const float var = (row - mean).square().sum() * inv_c;
    const float inv_std = 1.0f / std::sqrt(var + kNormEpsilon);
    out.row(i).array() = (row - mean) * inv_std * scale.transpose().array() + shift.transpose().array();
  }
  return out;
}

CausalConv1d CausalConv1d::zeros(int channels, int width) {
  return {MatrixF::Zero(channels, width), VectorF::Zero(channels)};
}

MatrixF CausalConv1d::apply(const MatrixF& x) const {
  if (x.cols() != weight.rows()) throw Error(ErrorCode::shape_mismatch, "conv channel mismatch");
  const Eigen::Index L = x.rows();
  MatrixF y(L, x.cols());
  y.rowwise() = bias.transpose();
  for (Eigen::Index j = 0; j < weight.cols(); ++j) {
    if (j >= L) break;
    y.bottomRows(L - j).array() +=
        x.topRows(L - j).array().rowwise() * weight.col(j).transpose().array();
  }
  return y;
}

VimBlockParams VimBlockParams::zeros(const BlockShape& s) {
  return {TokenNorm::identity(s.dim),
          MatrixF::Zero(s.dim, 2 * s.d_inner),
          CausalConv1d::zeros(s.d_inner, s.conv_width),
          CausalConv1d::zeros(s.d_inner, s.conv_width),
          SsmParams<float>::zeros(s.d_inner, s.d_state, s.dt_rank),
          SsmParams<float>::zeros(s.d_inner, s.d_state, s.dt_rank),
          MatrixF::Zero(s.d_inner, s.dim)};
}

VimBlockParams VimBlockParams::random(const BlockShape& s, int depth, std::mt19937_64& rng) {
  VimBlockParams p = zeros(s);
  fill_uniform(p.in_proj, 1.0 / std::sqrt(static_cast<double>(s.dim)), rng);
  const double conv_bound = 1.0 / std::sqrt(static_cast<double>(s.conv_width));
  for (CausalConv1d* conv : {&p.conv_fwd, &p.conv_bwd}) {
    fill_uniform(conv->weight, conv_bound, rng);
    fill_uniform(conv->bias, conv_bound, rng);
  }
  p.ssm_fwd = SsmParams<float>::random(s.d_inner, s.d_state, s.dt_rank, rng);
  p.ssm_bwd = SsmParams<float>::random(s.d_inner, s.d_state, s.dt_rank, rng);
  // Residual branches shrink with depth so deep random stacks stay bounded.
  fill_uniform(p.out_proj,
               1.0 / std::sqrt(static_cast<double>(s.d_inner) * 2.0 * std::max(depth, 1)), rng);
  return p;
}

BackboneParams BackboneParams::zeros(const BlockShape& s, int depth) {
  BackboneParams p;
  p.blocks.assign(static_cast<std::size_t>(depth), VimBlockParams::zeros(s));
  p.final_norm = TokenNorm::identity(s.dim);
  p.mlp = MatrixF::Identity(s.dim, s.dim);
  p.mlp_bias = VectorF::Zero(s.dim);
  return p;
}

BackboneParams BackboneParams::random(const BlockShape& s, int depth, std::mt19937_64& rng) {
  BackboneParams p;
  p.blocks.reserve(static_cast<std::size_t>(depth));
  for (int l = 0; l < depth; ++l) p.blocks.push_back(VimBlockParams::random(s, depth, rng));
  p.final_norm = TokenNorm::identity(s.dim);
  p.mlp = MatrixF(s.dim, s.dim);
  fill_uniform(p.mlp, 1.0 / std::sqrt(static_cast<double>(s.dim)), rng);
  p.mlp_bias = VectorF::Zero(s.dim);
  return p;
}

MatrixF vim_block(const MatrixF& tokens, const VimBlockParams& p) {
  if (tokens.cols() != p.dim()) throw Error(ErrorCode::shape_mismatch, "token width != block dim");
  if (!all_finite(tokens)) throw Error(ErrorCode::non_finite, "non-finite tokens entering vim block");
  const int di = p.d_inner();

  const MatrixF xz = p.pre_norm.apply(tokens) * p.in_proj;
  const MatrixF x = xz.leftCols(di);
  const MatrixF z = xz.rightCols(di);

  MatrixF mixed = scan_forward_chunked<float>(silu(p.conv_fwd.apply(x)), p.ssm_fwd, kBackboneScanChunk);
  mixed += reverse_rows<float>(scan_forward_chunked<float>(
      silu(p.conv_bwd.apply(reverse_rows<float>(x))), p.ssm_bwd, kBackboneScanChunk));
  mixed.array() *= silu(z).array();

  MatrixF out = tokens;
  out.noalias() += mixed * p.out_proj;
  return out;
}

MatrixF backbone(const MatrixF& tokens, const BackboneParams& p) {
  if (tokens.cols() != p.dim()) throw Error(ErrorCode::shape_mismatch, "token width != backbone dim");
  if (!all_finite(tokens)) throw Error(ErrorCode::non_finite, "non-finite tokens entering backbone");
  MatrixF x = tokens;
  for (const auto& block : p.blocks) x = vim_block(x, block);
  MatrixF out = p.final_norm.apply(x) * p.mlp;
  out.rowwise() += p.mlp_bias.transpose();
  return out;
}

std::int64_t count_params(const TokenNorm& p) { return p.scale.size() + p.shift.size(); }

std::int64_t count_params(const CausalConv1d& p) { return p.weight.size() + p.bias.size(); }

std::int64_t count_params(const SsmParams<float>& p) {
  return p.a_log.size() + p.d_skip.size() + p.x_proj.size() + p.dt_proj.size() + p.dt_bias.size();
}

std::int64_t count_params(const VimBlockParams& p) {
  return count_params(p.pre_norm) + p.in_proj.size() + count_params(p.conv_fwd) +
         count_params(p.conv_bwd) + count_params(p.ssm_fwd) + count_params(p.ssm_bwd) +
         p.out_proj.size();
}

std::int64_t count_params(const BackboneParams& p) {
  std::int64_t n = count_params(p.final_norm) + p.mlp.size() + p.mlp_bias.size();
  for (const auto& b : p.blocks) n += count_params(b);
  return n;
}

}  // namespace mevt
