#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace mevt {

struct EventPoint {
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int64_t t = 0;  // microseconds
  std::int8_t p = 1;   // +1 ON, -1 OFF
};

struct EventStream {
  std::vector<EventPoint> events;
  int width = 0;
  int height = 0;

  // Throws Error(invalid_argument) on out-of-sensor coordinates, bad polarity
  // or decreasing timestamps.
  void validate() const;
};

// Dense 3 x H x W image, channel-major.
class Image3 {
 public:
  Image3() = default;
  Image3(int height, int width);

  int height() const { return height_; }
  int width() const { return width_; }

  float& at(int c, int y, int x) { return values_[index(c, y, x)]; }
  float at(int c, int y, int x) const { return values_[index(c, y, x)]; }

  std::span<float> values() { return values_; }
  std::span<const float> values() const { return values_; }

  bool operator==(const Image3&) const = default;

 private:
  std::size_t index(int c, int y, int x) const {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<float> values_;
};

struct EventFrame {
  Image3 data;
  std::int64_t window_start = 0;
  std::int64_t window_end = 0;  // exclusive
};

// Axis-aligned box in center form, pixel units.
struct BBox {
  double cx = 0.0;
  double cy = 0.0;
  double w = 0.0;
  double h = 0.0;

  static BBox from_top_left(double x, double y, double w, double h) {
    return {x + 0.5 * w, y + 0.5 * h, w, h};
  }
  double left() const { return cx - 0.5 * w; }
  double top() const { return cy - 0.5 * h; }
  double right() const { return cx + 0.5 * w; }
  double bottom() const { return cy + 0.5 * h; }
  double area() const { return w * h; }
  bool valid() const { return w > 0.0 && h > 0.0; }

  bool operator==(const BBox&) const = default;
};

// Maps continuous patch coordinates q to frame coordinates: X = origin + q / resize_factor.
struct CropGeometry {
  double origin_x = 0.0;
  double origin_y = 0.0;
  double resize_factor = 1.0;

  double frame_x(double qx) const { return origin_x + qx / resize_factor; }
  double frame_y(double qy) const { return origin_y + qy / resize_factor; }
  double patch_x(double x) const { return (x - origin_x) * resize_factor; }
  double patch_y(double y) const { return (y - origin_y) * resize_factor; }
  BBox to_frame(const BBox& patch_box) const;
  BBox to_patch(const BBox& frame_box) const;
};

struct RegionPatch {
  Image3 data;  // 3 x S x S
  double resize_factor = 1.0;
  double crop_cx = 0.0;
  double crop_cy = 0.0;
  double crop_side = 0.0;

  int size() const { return data.width(); }
  CropGeometry geometry() const;
};

// One frame per consecutive window of `window_us`, starting at the first event.
// Channel 0/1: positive/negative counts normalized by the window's per-channel
// maximum. Channel 2: latest timestamp at the pixel, (t - window_start) / window_us.
std::vector<EventFrame> stack_events(const EventStream& stream, std::int64_t window_us);

// Square crop of side context_factor * sqrt(w * h) centered on the box,
// zero padded, bilinearly resampled to out_size x out_size.
RegionPatch crop_region(const EventFrame& frame, const BBox& box, double context_factor,
                        int out_size);

enum class Trajectory { linear, circular };

struct SynthConfig {
  int sensor_width = 346;
  int sensor_height = 260;
  double target_w = 48.0;
  double target_h = 32.0;
  Trajectory trajectory = Trajectory::linear;
  double start_cx = 120.0;
  double start_cy = 130.0;
  double velocity_x = 1.0;  // px per window
  double velocity_y = 0.0;
  double radius = 40.0;          // circular only, around (start_cx, start_cy)
  double angular_speed = 0.05;   // rad per window
  int events_per_window = 400;   // boundary events
  int noise_per_window = 40;
  std::int64_t window_us = 10000;
  std::int64_t duration_us = 1000000;
  std::uint64_t seed = 7;
};

struct SynthSequence {
  EventStream stream;
  std::vector<BBox> ground_truth;  // one per stacking window
};

SynthSequence synth_stream(const SynthConfig& config);

// CSV, header `t,x,y,p`, rows `t_us,x,y,p`.
EventStream read_events_csv(std::istream& in, int width = 0, int height = 0);
void write_events_csv(std::ostream& out, const EventStream& stream);

// One `x,y,w,h` line per frame, top-left convention.
std::vector<BBox> read_boxes(std::istream& in);
void write_boxes(std::ostream& out, std::span<const BBox> boxes);

}  // namespace mevt
