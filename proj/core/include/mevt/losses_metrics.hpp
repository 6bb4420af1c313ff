#pragma once

#include "mevt/common.hpp"
#include "mevt/event_stream.hpp"
#include "mevt/tracking_head.hpp"

#include <array>
#include <span>
#include <vector>

namespace mevt {

struct LossWeights {
  double l1 = 5.0;
  double focal = 1.0;
  double giou = 2.0;
};

double iou(const BBox& a, const BBox& b);

// IoU - (|hull| - |union|) / |hull|, in (-1, 1]. Throws on degenerate boxes.
double giou(const BBox& a, const BBox& b);

struct GiouGradient {
  double value = 0.0;
  std::array<double, 4> d_pred{};  // d giou / d (cx, cy, w, h) of the first box
};

GiouGradient giou_with_gradient(const BBox& pred, const BBox& target);

// CenterNet radius for a box of the given size (in map cells) at min_overlap.
double gaussian_radius(double height, double width, double min_overlap = 0.3);

// Gaussian target with exactly 1 at the cell containing the box center.
MatrixD gaussian_heatmap(int height, int width, const BBox& gt_patch, int stride);

inline constexpr double kFocalAlpha = 2.0;
inline constexpr double kFocalBeta = 4.0;
inline constexpr double kScoreClamp = 1e-7;

struct FocalLoss {
  double value = 0.0;
  MatrixD grad;  // d loss / d score
};

// Penalty-reduced focal loss normalized by the number of cells with target == 1.
FocalLoss focal_loss(const MatrixD& score, const MatrixD& target);

struct LossComponents {
  double l1 = 0.0;
  double focal = 0.0;
  double giou = 0.0;  // 1 - giou
};

// l1 * L1 + focal * L_focal + giou * L_GIoU, correctly rounded.
double combine(const LossComponents& parts, const LossWeights& w);

struct LossResult {
  LossComponents parts;
  double total = 0.0;
  HeadMaps<double> grad;  // d total / d maps
  BBox pred_box;          // normalized by the search side
};

// The predicted box is read at the score argmax; coordinates are normalized by
// the search side stride * map width. gt_patch is in search-patch pixels.
LossResult total_loss(const HeadMaps<double>& pred, const BBox& gt_patch, int stride,
                      const LossWeights& w = {});

struct SuccessCurve {
  std::vector<double> thresholds;
  std::vector<double> success;
};

struct TrackingScores {
  double success = 0.0;               // SR
  double precision = 0.0;             // PR
  double normalized_precision = 0.0;  // NPR
  std::size_t frames = 0;
};

inline constexpr double kPrecisionThresholdPx = 20.0;

SuccessCurve success_curve(std::span<const BBox> pred, std::span<const BBox> gt);

// SR: mean over IoU thresholds 0, 0.05, ..., 1 of the fraction with IoU >= t.
// PR: fraction with center error <= 20 px.
// NPR: mean over thresholds 0, 0.025, ..., 0.5 of the fraction whose center
// error, normalized per axis by the ground-truth size, is <= t.
TrackingScores evaluate(std::span<const BBox> pred, std::span<const BBox> gt);

}  // namespace mevt
