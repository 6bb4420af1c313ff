#include "mevt/event_stream.hpp"

#include "mevt/common.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <random>

namespace mevt {

void EventStream::validate() const {
  std::int64_t last_t = 0;
  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    if (e.x < 0 || e.y < 0 || e.x >= width || e.y >= height) {
      throw Error(ErrorCode::invalid_argument,
                  "event " + std::to_string(i) + " lies outside the sensor");
    }
    if (e.p != 1 && e.p != -1) {
      throw Error(ErrorCode::invalid_argument, "event " + std::to_string(i) + " has bad polarity");
    }
    if (e.t < 0 || (i > 0 && e.t < last_t)) {
      throw Error(ErrorCode::invalid_argument,
                  "event " + std::to_string(i) + " breaks timestamp order");
    }
    last_t = e.t;
  }
}

Image3::Image3(int height, int width)
    : height_(height), width_(width),
      values_(static_cast<std::size_t>(3) * height * width, 0.0f) {
  if (height < 0 || width < 0) throw Error(ErrorCode::invalid_argument, "negative image size");
}

BBox CropGeometry::to_frame(const BBox& b) const {
  return {frame_x(b.cx), frame_y(b.cy), b.w / resize_factor, b.h / resize_factor};
}

BBox CropGeometry::to_patch(const BBox& b) const {
  return {patch_x(b.cx), patch_y(b.cy), b.w * resize_factor, b.h * resize_factor};
}

CropGeometry RegionPatch::geometry() const {
  return {crop_cx - 0.5 * crop_side, crop_cy - 0.5 * crop_side, resize_factor};
}

std::vector<EventFrame> stack_events(const EventStream& stream, std::int64_t window_us) {
  if (window_us <= 0) throw Error(ErrorCode::invalid_argument, "window_us must be positive");
  std::vector<EventFrame> frames;
  if (stream.events.empty()) return frames;
  stream.validate();

  const std::int64_t t0 = stream.events.front().t;
  const std::int64_t span = stream.events.back().t - t0;
  const std::size_t n_frames = static_cast<std::size_t>(span / window_us) + 1;
  const int h = stream.height;
  const int w = stream.width;

  frames.reserve(n_frames);
  std::vector<float> pos(static_cast<std::size_t>(h) * w);
  std::vector<float> neg(pos.size());
  std::vector<std::int64_t> latest(pos.size());

  auto it = stream.events.begin();
  for (std::size_t k = 0; k < n_frames; ++k) {
    const std::int64_t ws = t0 + static_cast<std::int64_t>(k) * window_us;
    const std::int64_t we = ws + window_us;
    std::fill(pos.begin(), pos.end(), 0.0f);
    std::fill(neg.begin(), neg.end(), 0.0f);
    std::fill(latest.begin(), latest.end(), -1);

    for (; it != stream.events.end() && it->t < we; ++it) {
      const std::size_t px = static_cast<std::size_t>(it->y) * w + it->x;
      (it->p > 0 ? pos : neg)[px] += 1.0f;
      latest[px] = std::max(latest[px], it->t);
    }

    const float max_pos = *std::max_element(pos.begin(), pos.end());
    const float max_neg = *std::max_element(neg.begin(), neg.end());
    EventFrame frame{Image3(h, w), ws, we};
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::size_t px = static_cast<std::size_t>(y) * w + x;
        if (max_pos > 0.0f) frame.data.at(0, y, x) = pos[px] / max_pos;
        if (max_neg > 0.0f) frame.data.at(1, y, x) = neg[px] / max_neg;
        if (latest[px] >= 0) {
          frame.data.at(2, y, x) =
              static_cast<float>(static_cast<double>(latest[px] - ws) / static_cast<double>(window_us));
        }
      }
    }
    frames.push_back(std::move(frame));
  }
  return frames;
}

namespace {

float sample_bilinear(const Image3& img, int c, double x, double y) {
  // Pixel i covers [i, i+1); its value sits at the center i + 0.5.
  const double fx = x - 0.5;
  const double fy = y - 0.5;
  const double x0 = std::floor(fx);
  const double y0 = std::floor(fy);
  const double ax = fx - x0;
  const double ay = fy - y0;
  const int ix = static_cast<int>(x0);
  const int iy = static_cast<int>(y0);
  auto value = [&](int px, int py) -> double {
    if (px < 0 || py < 0 || px >= img.width() || py >= img.height()) return 0.0;
    return img.at(c, py, px);
  };
  double v = 0.0;
  if (ax < 1.0 && ay < 1.0) v += (1.0 - ax) * (1.0 - ay) * value(ix, iy);
  if (ax > 0.0 && ay < 1.0) v += ax * (1.0 - ay) * value(ix + 1, iy);
  if (ax < 1.0 && ay > 0.0) v += (1.0 - ax) * ay * value(ix, iy + 1);
  if (ax > 0.0 && ay > 0.0) v += ax * ay * value(ix + 1, iy + 1);
  return static_cast<float>(v);
}

}  // namespace

RegionPatch crop_region(const EventFrame& frame, const BBox& box, double context_factor,
                        int out_size) {
  if (!(box.w * box.h > 0.0) || !std::isfinite(box.w * box.h)) {
    throw Error(ErrorCode::degenerate_box, "degenerate box");
  }
  if (!(context_factor >= 1.0)) throw Error(ErrorCode::invalid_argument, "context_factor must be >= 1");
  if (out_size <= 0) throw Error(ErrorCode::invalid_argument, "out_size must be positive");

  RegionPatch patch;
  patch.crop_side = context_factor * std::sqrt(box.w * box.h);
  patch.resize_factor = out_size / patch.crop_side;
  patch.crop_cx = box.cx;
  patch.crop_cy = box.cy;
  patch.data = Image3(out_size, out_size);

  const CropGeometry g = patch.geometry();
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < out_size; ++i) {
      const double y = g.frame_y(i + 0.5);
      for (int j = 0; j < out_size; ++j) {
        patch.data.at(c, i, j) = sample_bilinear(frame.data, c, g.frame_x(j + 0.5), y);
      }
    }
  }
  return patch;
}

SynthSequence synth_stream(const SynthConfig& cfg) {
  if (cfg.duration_us <= 0) throw Error(ErrorCode::invalid_argument, "synth duration must be positive");
  if (cfg.window_us <= 0) throw Error(ErrorCode::invalid_argument, "synth window must be positive");
  if (cfg.duration_us < cfg.window_us) {
    throw Error(ErrorCode::invalid_argument, "synth duration shorter than one window");
  }
  if (cfg.sensor_width <= 0 || cfg.sensor_height <= 0 || !(cfg.target_w > 0.0) ||
      !(cfg.target_h > 0.0) || cfg.events_per_window < 1 || cfg.noise_per_window < 0) {
    throw Error(ErrorCode::invalid_argument, "invalid synth configuration");
  }

  const std::int64_t n_frames = cfg.duration_us / cfg.window_us;
  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&rng](double lo, double hi) {
    return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
  };
  auto pick = [&rng](std::int64_t n) { return static_cast<std::int64_t>(rng() % static_cast<std::uint64_t>(n)); };

  SynthSequence out;
  out.stream.width = cfg.sensor_width;
  out.stream.height = cfg.sensor_height;
  out.ground_truth.reserve(static_cast<std::size_t>(n_frames));

  auto center_at = [&cfg](double k) -> std::pair<double, double> {
    if (cfg.trajectory == Trajectory::linear) {
      return {cfg.start_cx + k * cfg.velocity_x, cfg.start_cy + k * cfg.velocity_y};
    }
    const double a = k * cfg.angular_speed;
    return {cfg.start_cx + cfg.radius * std::cos(a), cfg.start_cy + cfg.radius * std::sin(a)};
  };

  const double w = cfg.target_w;
  const double h = cfg.target_h;
  const double perimeter = 2.0 * (w + h);

  std::vector<EventPoint> window_events;
  for (std::int64_t k = 0; k < n_frames; ++k) {
    const auto [cx, cy] = center_at(static_cast<double>(k));
    const auto [nx, ny] = center_at(static_cast<double>(k + 1));
    const double vx = nx - cx;
    const double vy = ny - cy;
    const bool moving = vx != 0.0 || vy != 0.0;
    out.ground_truth.push_back({cx, cy, w, h});

    const std::int64_t ws = k * cfg.window_us;
    window_events.clear();
    for (int i = 0; i < cfg.events_per_window; ++i) {
      const std::int64_t t = ws + (static_cast<std::int64_t>(i) * cfg.window_us) / cfg.events_per_window;
      double s = uniform(0.0, perimeter);
      double px, py, normal_x = 0.0, normal_y = 0.0;
      if (s < w) {
        px = cx - 0.5 * w + s, py = cy - 0.5 * h, normal_y = -1.0;
      } else if ((s -= w) < h) {
        px = cx + 0.5 * w, py = cy - 0.5 * h + s, normal_x = 1.0;
      } else if ((s -= h) < w) {
        px = cx + 0.5 * w - s, py = cy + 0.5 * h, normal_y = 1.0;
      } else {
        s -= w;
        px = cx - 0.5 * w, py = cy + 0.5 * h - s, normal_x = -1.0;
      }
      std::int8_t polarity;
      if (moving) {
        polarity = (normal_x * vx + normal_y * vy) >= 0.0 ? 1 : -1;
      } else {
        polarity = (rng() & 1u) ? 1 : -1;
      }
      const auto ix = static_cast<std::int32_t>(std::floor(px));
      const auto iy = static_cast<std::int32_t>(std::floor(py));
      if (ix < 0 || iy < 0 || ix >= cfg.sensor_width || iy >= cfg.sensor_height) continue;
      window_events.push_back({ix, iy, t, polarity});
    }
    for (int i = 0; i < cfg.noise_per_window; ++i) {
      EventPoint e;
      e.t = ws + pick(cfg.window_us);
      e.x = static_cast<std::int32_t>(pick(cfg.sensor_width));
      e.y = static_cast<std::int32_t>(pick(cfg.sensor_height));
      e.p = (rng() & 1u) ? 1 : -1;
      window_events.push_back(e);
    }
    std::stable_sort(window_events.begin(), window_events.end(),
                     [](const EventPoint& a, const EventPoint& b) { return a.t < b.t; });
    out.stream.events.insert(out.stream.events.end(), window_events.begin(), window_events.end());
  }
  return out;
}

namespace {

std::vector<std::string_view> split_csv(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(line.substr(start, comma == std::string_view::npos ? line.npos : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view s, std::size_t line_no) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r')) s.remove_suffix(1);
  T value{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw Error(ErrorCode::parse_error,
                "line " + std::to_string(line_no) + ": bad number '" + std::string(s) + "'");
  }
  return value;
}

void append_number(std::string& out, double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  out.append(buf, res.ptr);
}

}  // namespace

EventStream read_events_csv(std::istream& in, int width, int height) {
  EventStream stream;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::int32_t max_x = -1;
  std::int32_t max_y = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!header_seen) {
      header_seen = true;
      if (line == "t,x,y,p") continue;
      throw Error(ErrorCode::parse_error, "event file must start with header 't,x,y,p'");
    }
    const auto f = split_csv(line);
    if (f.size() != 4) {
      throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": expected 4 fields");
    }
    EventPoint e;
    e.t = parse_number<std::int64_t>(f[0], line_no);
    e.x = parse_number<std::int32_t>(f[1], line_no);
    e.y = parse_number<std::int32_t>(f[2], line_no);
    e.p = static_cast<std::int8_t>(parse_number<int>(f[3], line_no));
    max_x = std::max(max_x, e.x);
    max_y = std::max(max_y, e.y);
    stream.events.push_back(e);
  }
  stream.width = width > 0 ? width : max_x + 1;
  stream.height = height > 0 ? height : max_y + 1;
  stream.validate();
  return stream;
}

void write_events_csv(std::ostream& out, const EventStream& stream) {
  std::string buf = "t,x,y,p\n";
  for (const auto& e : stream.events) {
    buf += std::to_string(e.t);
    buf += ',';
    buf += std::to_string(e.x);
    buf += ',';
    buf += std::to_string(e.y);
    buf += ',';
    buf += std::to_string(static_cast<int>(e.p));
    buf += '\n';
  }
  out << buf;
}

std::vector<BBox> read_boxes(std::istream& in) {
  std::vector<BBox> boxes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv(line);
    if (f.size() != 4) {
      throw Error(ErrorCode::parse_error, "line " + std::to_string(line_no) + ": expected x,y,w,h");
    }
    boxes.push_back(BBox::from_top_left(parse_number<double>(f[0], line_no),
                                        parse_number<double>(f[1], line_no),
                                        parse_number<double>(f[2], line_no),
                                        parse_number<double>(f[3], line_no)));
  }
  return boxes;
}

void write_boxes(std::ostream& out, std::span<const BBox> boxes) {
  std::string buf;
  for (const auto& b : boxes) {
    append_number(buf, b.left());
    buf += ',';
    append_number(buf, b.top());
    buf += ',';
    append_number(buf, b.w);
    buf += ',';
    append_number(buf, b.h);
    buf += '\n';
  }
  out << buf;
}

}  // namespace mevt
