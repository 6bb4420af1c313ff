#include "mevt/tracking_head.hpp"

#include <cmath>

namespace mevt {

Conv2d Conv2d::zeros(int in, int out, int kernel) {
  return {MatrixF::Zero(out, in * kernel * kernel), VectorF::Zero(out), kernel};
}

MatrixF Conv2d::apply(const MatrixF& map, int height, int width) const {
  const int in = in_channels();
  if (map.rows() != in || map.cols() != static_cast<Eigen::Index>(height) * width) {
    throw Error(ErrorCode::shape_mismatch, "conv input shape mismatch");
  }
  MatrixF out;
  if (kernel == 1) {
    out.noalias() = weight * map;
  } else {
    const int pad = kernel / 2;
    MatrixF cols = MatrixF::Zero(static_cast<Eigen::Index>(in) * kernel * kernel, map.cols());
    for (int c = 0; c < in; ++c) {
      for (int ky = 0; ky < kernel; ++ky) {
        for (int kx = 0; kx < kernel; ++kx) {
          float* dst = cols.row((static_cast<Eigen::Index>(c) * kernel + ky) * kernel + kx).data();
          const float* src = map.row(c).data();
          for (int y = 0; y < height; ++y) {
            const int sy = y + ky - pad;
            if (sy < 0 || sy >= height) continue;
            for (int x = 0; x < width; ++x) {
              const int sx = x + kx - pad;
              if (sx >= 0 && sx < width) dst[y * width + x] = src[sy * width + sx];
            }
          }
        }
      }
    }
    out.noalias() = weight * cols;
  }
  out.colwise() += bias;
  return out;
}

BatchNorm2d BatchNorm2d::identity(int channels) {
  return {VectorF::Ones(channels), VectorF::Zero(channels), VectorF::Zero(channels),
          VectorF::Ones(channels)};
}

void BatchNorm2d::apply(MatrixF& map) const {
  for (Eigen::Index c = 0; c < map.rows(); ++c) {
    const float s = gamma(c) / std::sqrt(running_var(c) + kEpsilon);
    map.row(c).array() = (map.row(c).array() - running_mean(c)) * s + beta(c);
  }
}

HeadBranch HeadBranch::zeros(int dim, int out, int layers) {
  HeadBranch b;
  int ch = dim;
  for (int l = 0; l < layers; ++l) {
    if (ch % 2 != 0) throw Error(ErrorCode::invalid_argument, "head channels must halve evenly");
    b.convs.push_back(Conv2d::zeros(ch, ch / 2, 3));
    b.norms.push_back(BatchNorm2d::identity(ch / 2));
    ch /= 2;
  }
  b.last = Conv2d::zeros(ch, out, 1);
  return b;
}

MatrixF HeadBranch::apply(const MatrixF& map, int height, int width) const {
  MatrixF x = map;
  for (std::size_t l = 0; l < convs.size(); ++l) {
    x = convs[l].apply(x, height, width);
    norms[l].apply(x);
    x = x.cwiseMax(0.0f);
  }
  return last.apply(x, height, width);
}

HeadParams HeadParams::zeros(int dim, int layers) {
  return {HeadBranch::zeros(dim, 1, layers), HeadBranch::zeros(dim, 2, layers),
          HeadBranch::zeros(dim, 2, layers)};
}

HeadParams HeadParams::random(int dim, std::mt19937_64& rng, int layers) {
  HeadParams p = zeros(dim, layers);
  auto init = [&rng](Conv2d& conv) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(conv.weight.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index i = 0; i < conv.weight.size(); ++i) conv.weight.data()[i] = static_cast<float>(dist(rng));
    for (Eigen::Index i = 0; i < conv.bias.size(); ++i) conv.bias(i) = static_cast<float>(dist(rng));
  };
  for (HeadBranch* b : {&p.score, &p.offset, &p.size}) {
    for (auto& conv : b->convs) init(conv);
    init(b->last);
  }
  return p;
}

namespace {

MatrixF sigmoid(const MatrixF& x) {
  return (1.0f / (1.0f + (-x.array()).exp())).matrix();
}

MatrixF channel_map(const MatrixF& maps, int c, int h, int w) {
  return Eigen::Map<const MatrixF>(maps.row(c).data(), h, w);
}

}  // namespace

HeadOutputs head_forward(const MatrixF& search_tokens, const HeadParams& params) {
  const auto n = search_tokens.rows();
  const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  if (n == 0 || static_cast<Eigen::Index>(side) * side != n) {
    throw Error(ErrorCode::shape_mismatch, "search token count is not a square grid");
  }
  const MatrixF fmap = search_tokens.transpose();  // C x (H * W)

  HeadOutputs out;
  const MatrixF score = sigmoid(params.score.apply(fmap, side, side));
  const MatrixF offset = sigmoid(params.offset.apply(fmap, side, side));
  const MatrixF size = sigmoid(params.size.apply(fmap, side, side));
  out.score = channel_map(score, 0, side, side);
  out.offset = {channel_map(offset, 0, side, side), channel_map(offset, 1, side, side)};
  out.size = {channel_map(size, 0, side, side), channel_map(size, 1, side, side)};
  return out;
}

BBox decode_patch_box(const HeadOutputs& out, int stride, int search_size) {
  const Cell c = score_argmax(out.score);
  return {(c.col + static_cast<double>(out.offset[0](c.row, c.col))) * stride,
          (c.row + static_cast<double>(out.offset[1](c.row, c.col))) * stride,
          static_cast<double>(out.size[0](c.row, c.col)) * search_size,
          static_cast<double>(out.size[1](c.row, c.col)) * search_size};
}

BBox decode_bbox(const HeadOutputs& out, int stride, int search_size, const CropGeometry& crop) {
  return crop.to_frame(decode_patch_box(out, stride, search_size));
}

std::int64_t count_params(const HeadParams& p) {
  std::int64_t n = 0;
  for (const HeadBranch* b : {&p.score, &p.offset, &p.size}) {
    for (const auto& conv : b->convs) n += conv.weight.size() + conv.bias.size();
    for (const auto& bn : b->norms) n += bn.gamma.size() + bn.beta.size();
    n += b->last.weight.size() + b->last.bias.size();
  }
  return n;
}

}  // namespace mevt
