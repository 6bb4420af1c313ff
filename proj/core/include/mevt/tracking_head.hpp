#pragma once

#include "mevt/common.hpp"
#include "mevt/event_stream.hpp"

#include <array>
#include <cstdint>
#include <random>
#include <vector>

namespace mevt {

// Stride-1, size-preserving 2-D convolution over a channels x (H * W) map.
struct Conv2d {
  MatrixF weight;  // out x (in * k * k), columns ordered (in, ky, kx)
  VectorF bias;    // out
  int kernel = 3;

  static Conv2d zeros(int in, int out, int kernel);
  int in_channels() const { return static_cast<int>(weight.cols()) / (kernel * kernel); }
  int out_channels() const { return static_cast<int>(weight.rows()); }
  MatrixF apply(const MatrixF& map, int height, int width) const;
};

// Inference-mode batch norm.
struct BatchNorm2d {
  VectorF gamma;
  VectorF beta;
  VectorF running_mean;  // buffers, not learned
  VectorF running_var;
  static constexpr float kEpsilon = 1e-5f;

  static BatchNorm2d identity(int channels);
  void apply(MatrixF& map) const;
};

// Conv-BN-ReLU stack with halving channels, then a linear 1x1 conv.
struct HeadBranch {
  std::vector<Conv2d> convs;
  std::vector<BatchNorm2d> norms;
  Conv2d last;

  static HeadBranch zeros(int dim, int out, int layers);
  MatrixF apply(const MatrixF& map, int height, int width) const;  // pre-activation
};

inline constexpr int kHeadLayers = 3;

struct HeadParams {
  HeadBranch score;   // 1 channel
  HeadBranch offset;  // 2 channels (x, y)
  HeadBranch size;    // 2 channels (w, h)

  static HeadParams zeros(int dim, int layers = kHeadLayers);
  static HeadParams random(int dim, std::mt19937_64& rng, int layers = kHeadLayers);
};

template <typename T>
struct HeadMaps {
  Matrix<T> score;                 // H_s x W_s, in (0, 1)
  std::array<Matrix<T>, 2> offset;  // (x, y), in [0, 1)
  std::array<Matrix<T>, 2> size;    // (w, h) normalized by the search side

  int height() const { return static_cast<int>(score.rows()); }
  int width() const { return static_cast<int>(score.cols()); }

  template <typename U>
  HeadMaps<U> cast() const {
    return {score.template cast<U>(),
            {offset[0].template cast<U>(), offset[1].template cast<U>()},
            {size[0].template cast<U>(), size[1].template cast<U>()}};
  }
};

using HeadOutputs = HeadMaps<float>;

// Search tokens (N_x x C, row-major over an H_s x W_s grid) to the three maps.
HeadOutputs head_forward(const MatrixF& search_tokens, const HeadParams& params);

struct Cell {
  int row = 0;
  int col = 0;
};

// First maximum in row-major order.
template <typename T>
Cell score_argmax(const Matrix<T>& score) {
  Cell best;
  T best_v = score(0, 0);
  for (Eigen::Index i = 0; i < score.rows(); ++i) {
    for (Eigen::Index j = 0; j < score.cols(); ++j) {
      if (score(i, j) > best_v) {
        best_v = score(i, j);
        best = {static_cast<int>(i), static_cast<int>(j)};
      }
    }
  }
  return best;
}

// Box in search-patch pixels: center ((j + off_x) * stride, (i + off_y) * stride),
// size (size_w, size_h) * search_size at the score argmax (i, j).
BBox decode_patch_box(const HeadOutputs& out, int stride, int search_size);

// decode_patch_box mapped into frame coordinates through the crop geometry.
BBox decode_bbox(const HeadOutputs& out, int stride, int search_size, const CropGeometry& crop);

std::int64_t count_params(const HeadParams& p);

}  // namespace mevt
