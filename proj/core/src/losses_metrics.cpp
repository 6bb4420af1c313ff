#include "mevt/losses_metrics.hpp"

#include <algorithm>
#include <cmath>

namespace mevt {

namespace {

void require_valid(const BBox& b) {
  if (!b.valid() || !std::isfinite(b.cx) || !std::isfinite(b.cy) || !std::isfinite(b.w) ||
      !std::isfinite(b.h)) {
    throw Error(ErrorCode::degenerate_box, "degenerate box");
  }
}

double sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

// Areas come from the same corner differences as the intersection, so
// identical boxes give exactly 1.
double iou(const BBox& a, const BBox& b) {
  const double iw = std::max(0.0, std::min(a.right(), b.right()) - std::max(a.left(), b.left()));
  const double ih = std::max(0.0, std::min(a.bottom(), b.bottom()) - std::max(a.top(), b.top()));
  const double inter = iw * ih;
  const double uni = (a.right() - a.left()) * (a.bottom() - a.top()) +
                     (b.right() - b.left()) * (b.bottom() - b.top()) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

double giou(const BBox& a, const BBox& b) { return giou_with_gradient(a, b).value; }

GiouGradient giou_with_gradient(const BBox& a, const BBox& b) {
  require_valid(a);
  require_valid(b);
  const double ax1 = a.left(), ax2 = a.right(), ay1 = a.top(), ay2 = a.bottom();
  const double bx1 = b.left(), bx2 = b.right(), by1 = b.top(), by2 = b.bottom();

  const double iw_raw = std::min(ax2, bx2) - std::max(ax1, bx1);
  const double ih_raw = std::min(ay2, by2) - std::max(ay1, by1);
  const bool overlap = iw_raw > 0.0 && ih_raw > 0.0;
  const double iw = overlap ? iw_raw : 0.0;
  const double ih = overlap ? ih_raw : 0.0;
  const double inter = iw * ih;
  const double uni = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
  const double cw = std::max(ax2, bx2) - std::min(ax1, bx1);
  const double ch = std::max(ay2, by2) - std::min(ay1, by1);
  const double hull = cw * ch;

  GiouGradient g;
  g.value = inter / uni - std::max(0.0, hull - uni) / hull;  // rounding can push uni past hull
  if (a == b) return g;  // maximum: zero is a valid subgradient

  const double d_inter = 1.0 / uni + inter / (uni * uni) - 1.0 / hull;
  const double d_area = -inter / (uni * uni) + 1.0 / hull;
  const double d_hull = -uni / (hull * hull);

  // Derivatives of inter, area_a, hull w.r.t. the corners of a.
  const double di_x1 = overlap && ax1 > bx1 ? -ih : 0.0;
  const double di_x2 = overlap && ax2 < bx2 ? ih : 0.0;
  const double di_y1 = overlap && ay1 > by1 ? -iw : 0.0;
  const double di_y2 = overlap && ay2 < by2 ? iw : 0.0;
  const double dh_x1 = ax1 < bx1 ? -ch : 0.0;
  const double dh_x2 = ax2 > bx2 ? ch : 0.0;
  const double dh_y1 = ay1 < by1 ? -cw : 0.0;
  const double dh_y2 = ay2 > by2 ? cw : 0.0;

  const double gx1 = d_inter * di_x1 + d_area * -a.h + d_hull * dh_x1;
  const double gx2 = d_inter * di_x2 + d_area * a.h + d_hull * dh_x2;
  const double gy1 = d_inter * di_y1 + d_area * -a.w + d_hull * dh_y1;
  const double gy2 = d_inter * di_y2 + d_area * a.w + d_hull * dh_y2;

  g.d_pred = {gx1 + gx2, gy1 + gy2, 0.5 * (gx2 - gx1), 0.5 * (gy2 - gy1)};
  return g;
}

double gaussian_radius(double height, double width, double min_overlap) {
  const double m = min_overlap;
  const double b1 = height + width;
  const double c1 = width * height * (1.0 - m) / (1.0 + m);
  const double r1 = (b1 + std::sqrt(b1 * b1 - 4.0 * c1)) / 2.0;
  const double b2 = 2.0 * (height + width);
  const double c2 = (1.0 - m) * width * height;
  const double r2 = (b2 + std::sqrt(b2 * b2 - 16.0 * c2)) / 2.0;
  const double a3 = 4.0 * m;
  const double b3 = -2.0 * m * (height + width);
  const double c3 = (m - 1.0) * width * height;
  const double r3 = (b3 + std::sqrt(b3 * b3 - 4.0 * a3 * c3)) / 2.0;
  return std::min({r1, r2, r3});
}

MatrixD gaussian_heatmap(int height, int width, const BBox& gt, int stride) {
  require_valid(gt);
  const int ci = std::clamp(static_cast<int>(std::floor(gt.cy / stride)), 0, height - 1);
  const int cj = std::clamp(static_cast<int>(std::floor(gt.cx / stride)), 0, width - 1);
  const double radius = std::max(0.0, std::floor(gaussian_radius(gt.h / stride, gt.w / stride)));
  const double sigma = (2.0 * radius + 1.0) / 6.0;
  MatrixD t(height, width);
  for (int i = 0; i < height; ++i) {
    for (int j = 0; j < width; ++j) {
      const double d2 = static_cast<double>((i - ci) * (i - ci) + (j - cj) * (j - cj));
      t(i, j) = std::exp(-d2 / (2.0 * sigma * sigma));
    }
  }
  return t;
}

FocalLoss focal_loss(const MatrixD& score, const MatrixD& target) {
  if (score.rows() != target.rows() || score.cols() != target.cols()) {
    throw Error(ErrorCode::shape_mismatch, "focal loss: score/target shape mismatch");
  }
  FocalLoss out;
  out.grad = MatrixD::Zero(score.rows(), score.cols());
  double sum = 0.0;
  int n_pos = 0;
  for (Eigen::Index i = 0; i < score.rows(); ++i) {
    for (Eigen::Index j = 0; j < score.cols(); ++j) {
      const double raw = score(i, j);
      const double s = std::clamp(raw, kScoreClamp, 1.0 - kScoreClamp);
      const bool clamped = s != raw;
      if (target(i, j) == 1.0) {
        ++n_pos;
        sum += -std::pow(1.0 - s, kFocalAlpha) * std::log(s);
        if (!clamped) {
          out.grad(i, j) = kFocalAlpha * std::pow(1.0 - s, kFocalAlpha - 1.0) * std::log(s) -
                           std::pow(1.0 - s, kFocalAlpha) / s;
        }
      } else {
        const double wneg = std::pow(1.0 - target(i, j), kFocalBeta);
        sum += -wneg * std::pow(s, kFocalAlpha) * std::log(1.0 - s);
        if (!clamped) {
          out.grad(i, j) = -wneg * (kFocalAlpha * std::pow(s, kFocalAlpha - 1.0) * std::log(1.0 - s) -
                                    std::pow(s, kFocalAlpha) / (1.0 - s));
        }
      }
    }
  }
  const double norm = std::max(n_pos, 1);
  out.value = sum / norm;
  out.grad /= norm;
  return out;
}

double combine(const LossComponents& p, const LossWeights& w) {
  const long double total = static_cast<long double>(w.l1) * p.l1 +
                            static_cast<long double>(w.focal) * p.focal +
                            static_cast<long double>(w.giou) * p.giou;
  return static_cast<double>(total);
}

LossResult total_loss(const HeadMaps<double>& pred, const BBox& gt_patch, int stride,
                      const LossWeights& w) {
  const int H = pred.height();
  const int W = pred.width();
  if (H == 0 || W == 0 || stride <= 0) throw Error(ErrorCode::invalid_argument, "empty head maps");
  for (const auto* m : {&pred.offset[0], &pred.offset[1], &pred.size[0], &pred.size[1]}) {
    if (m->rows() != H || m->cols() != W) throw Error(ErrorCode::shape_mismatch, "head map shape mismatch");
  }
  const double side = static_cast<double>(stride) * W;

  LossResult r;
  const FocalLoss focal = focal_loss(pred.score, gaussian_heatmap(H, W, gt_patch, stride));
  r.parts.focal = focal.value;

  const Cell c = score_argmax(pred.score);
  const double scale = stride / side;
  r.pred_box = {(c.col + pred.offset[0](c.row, c.col)) * scale,
                (c.row + pred.offset[1](c.row, c.col)) * scale, pred.size[0](c.row, c.col),
                pred.size[1](c.row, c.col)};
  const BBox gt{gt_patch.cx / side, gt_patch.cy / side, gt_patch.w / side, gt_patch.h / side};

  const std::array<double, 4> p{r.pred_box.cx, r.pred_box.cy, r.pred_box.w, r.pred_box.h};
  const std::array<double, 4> g{gt.cx, gt.cy, gt.w, gt.h};
  double l1 = 0.0;
  for (int k = 0; k < 4; ++k) l1 += std::abs(p[k] - g[k]);
  r.parts.l1 = l1 / 4.0;

  const GiouGradient gg = giou_with_gradient(r.pred_box, gt);
  r.parts.giou = 1.0 - gg.value;
  r.total = combine(r.parts, w);

  std::array<double, 4> d_box{};
  for (int k = 0; k < 4; ++k) d_box[k] = w.l1 * sign(p[k] - g[k]) / 4.0 - w.giou * gg.d_pred[k];

  r.grad.score = w.focal * focal.grad;
  for (int k = 0; k < 2; ++k) {
    r.grad.offset[k] = MatrixD::Zero(H, W);
    r.grad.size[k] = MatrixD::Zero(H, W);
  }
  r.grad.offset[0](c.row, c.col) = d_box[0] * scale;
  r.grad.offset[1](c.row, c.col) = d_box[1] * scale;
  r.grad.size[0](c.row, c.col) = d_box[2];
  r.grad.size[1](c.row, c.col) = d_box[3];
  return r;
}

SuccessCurve success_curve(std::span<const BBox> pred, std::span<const BBox> gt) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::shape_mismatch, "prediction/ground-truth length mismatch");
  std::vector<double> ious(pred.size());
  for (std::size_t f = 0; f < pred.size(); ++f) ious[f] = iou(pred[f], gt[f]);
  SuccessCurve curve;
  for (int k = 0; k <= 20; ++k) {
    const double t = k / 20.0;
    const auto hits = std::count_if(ious.begin(), ious.end(), [t](double v) { return v >= t; });
    curve.thresholds.push_back(t);
    curve.success.push_back(ious.empty() ? 0.0 : static_cast<double>(hits) / ious.size());
  }
  return curve;
}

TrackingScores evaluate(std::span<const BBox> pred, std::span<const BBox> gt) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::shape_mismatch, "prediction/ground-truth length mismatch");
  TrackingScores s;
  s.frames = pred.size();
  if (pred.empty()) return s;

  const SuccessCurve curve = success_curve(pred, gt);
  double sr = 0.0;
  for (double v : curve.success) sr += v;
  s.success = sr / curve.success.size();

  const double n = static_cast<double>(pred.size());
  std::vector<double> norm_err(pred.size());
  std::size_t precise = 0;
  for (std::size_t f = 0; f < pred.size(); ++f) {
    const double dx = pred[f].cx - gt[f].cx;
    const double dy = pred[f].cy - gt[f].cy;
    if (std::hypot(dx, dy) <= kPrecisionThresholdPx) ++precise;
    norm_err[f] = std::hypot(dx / gt[f].w, dy / gt[f].h);
  }
  s.precision = precise / n;

  double npr = 0.0;
  for (int k = 0; k <= 20; ++k) {
    const double t = k / 40.0;
    const auto hits = std::count_if(norm_err.begin(), norm_err.end(), [t](double v) { return v <= t; });
    npr += hits / n;
  }
  s.normalized_precision = npr / 21.0;
  return s;
}

}  // namespace mevt
