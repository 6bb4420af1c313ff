#include "mevt/event_stream.hpp"
#include "mevt/common.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

namespace mevt {
namespace {

EventStream stream_of(std::vector<EventPoint> events, int w = 16, int h = 12) {
  EventStream s;
  s.events = std::move(events);
  s.width = w;
  s.height = h;
  return s;
}

TEST(StackEvents, EmptyStreamGivesNoFrames) {
  EXPECT_TRUE(stack_events(stream_of({}), 10000).empty());
}

TEST(StackEvents, SingleEvent) {
  const auto frames = stack_events(stream_of({{3, 4, 0, 1}}), 10000);
  ASSERT_EQ(frames.size(), 1u);
  const Image3& d = frames[0].data;
  EXPECT_EQ(d.at(0, 4, 3), 1.0f);
  EXPECT_EQ(d.at(2, 4, 3), 0.0f);
  for (int y = 0; y < d.height(); ++y)
    for (int x = 0; x < d.width(); ++x) EXPECT_EQ(d.at(1, y, x), 0.0f);
}

TEST(StackEvents, TwoPolaritiesSamePixel) {
  const auto frames = stack_events(stream_of({{5, 6, 0, 1}, {5, 6, 5000, -1}}), 10000);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].data.at(0, 6, 5), 1.0f);
  EXPECT_EQ(frames[0].data.at(1, 6, 5), 1.0f);
  EXPECT_EQ(frames[0].data.at(2, 6, 5), 0.5f);
}

TEST(StackEvents, GapWindowsAreZeroFrames) {
  const auto frames = stack_events(stream_of({{1, 1, 0, 1}, {2, 2, 35000, 1}}), 10000);
  ASSERT_EQ(frames.size(), 4u);
  for (float v : frames[1].data.values()) EXPECT_EQ(v, 0.0f);
  for (float v : frames[2].data.values()) EXPECT_EQ(v, 0.0f);
  EXPECT_EQ(frames[3].window_start, 30000);
  EXPECT_EQ(frames[3].window_end, 40000);
}

TEST(StackEvents, CountsNormalizedByWindowMax) {
  const auto frames = stack_events(stream_of({{1, 1, 0, 1}, {1, 1, 1, 1}, {1, 1, 2, 1}, {2, 1, 3, 1}}), 10000);
  ASSERT_EQ(frames.size(), 1u);
  EXPECT_EQ(frames[0].data.at(0, 1, 1), 1.0f);
  EXPECT_FLOAT_EQ(frames[0].data.at(0, 1, 2), 1.0f / 3.0f);
}

TEST(StackEvents, ValuesStayInUnitInterval) {
  SynthConfig cfg;
  cfg.duration_us = 100000;
  const auto frames = stack_events(synth_stream(cfg).stream, cfg.window_us);
  for (const auto& f : frames)
    for (float v : f.data.values()) {
      EXPECT_GE(v, 0.0f);
      EXPECT_LE(v, 1.0f);
    }
}

TEST(StackEvents, RejectsBadWindow) {
  EXPECT_THROW(stack_events(stream_of({{1, 1, 0, 1}}), 0), Error);
}

TEST(StreamValidate, RejectsOutOfSensorAndDecreasingTime) {
  EXPECT_THROW(stream_of({{16, 0, 0, 1}}).validate(), Error);
  EXPECT_THROW(stream_of({{0, 0, 5, 1}, {0, 0, 4, 1}}).validate(), Error);
  EXPECT_THROW(stream_of({{0, 0, 5, 0}}).validate(), Error);
  EXPECT_NO_THROW(stream_of({{15, 11, 5, -1}}).validate());
}

EventFrame ramp_frame(int w, int h) {
  EventFrame f;
  f.data = Image3(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) f.data.at(c, y, x) = static_cast<float>((c + 1) * (x + 100 * y)) / 1e5f;
  return f;
}

TEST(CropRegion, IdentityCropEqualsSubImage) {
  const EventFrame f = ramp_frame(32, 32);
  const RegionPatch p = crop_region(f, {16, 16, 8, 8}, 1.0, 8);
  EXPECT_EQ(p.resize_factor, 1.0);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 8; ++y)
      for (int x = 0; x < 8; ++x) EXPECT_FLOAT_EQ(p.data.at(c, y, x), f.data.at(c, 12 + y, 12 + x));
}

TEST(CropRegion, CornerBoxIsZeroPadded) {
  EventFrame f;
  f.data = Image3(16, 16);
  for (float& v : f.data.values()) v = 1.0f;
  const RegionPatch p = crop_region(f, {0, 0, 8, 8}, 1.0, 8);
  // Top-left quadrant lies outside the frame.
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 3; ++x) EXPECT_EQ(p.data.at(0, y, x), 0.0f);
  EXPECT_EQ(p.data.at(0, 6, 6), 1.0f);
}

TEST(CropRegion, SideAndResizeFactor) {
  EventFrame f;
  f.data = Image3(128, 128);
  const RegionPatch p = crop_region(f, {64, 64, 32, 32}, 2.0, 128);
  EXPECT_DOUBLE_EQ(p.crop_side, 64.0);
  EXPECT_DOUBLE_EQ(p.resize_factor, 2.0);
  EXPECT_EQ(p.size(), 128);
}

TEST(CropRegion, BackMappingRecoversFrameCoordinate) {
  EventFrame f;
  f.data = Image3(100, 120);
  const BBox box{47.3, 58.9, 21.0, 13.5};
  const RegionPatch p = crop_region(f, box, 4.0, 256);
  const CropGeometry g = p.geometry();
  for (double x : {10.0, 47.3, 80.25}) EXPECT_NEAR(g.frame_x(g.patch_x(x)), x, 0.5);
  for (double y : {3.0, 58.9, 99.0}) EXPECT_NEAR(g.frame_y(g.patch_y(y)), y, 0.5);
  EXPECT_NEAR(g.frame_x(128), box.cx, 1e-9);
  EXPECT_NEAR(g.frame_y(128), box.cy, 1e-9);
}

TEST(CropRegion, DegenerateBox) {
  EventFrame f;
  f.data = Image3(8, 8);
  try {
    crop_region(f, {4, 4, 0, 3}, 2.0, 16);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::degenerate_box);
    EXPECT_NE(std::string(e.what()).find("degenerate box"), std::string::npos);
  }
}

TEST(Synth, Deterministic) {
  SynthConfig cfg;
  cfg.duration_us = 200000;
  const auto a = synth_stream(cfg);
  const auto b = synth_stream(cfg);
  ASSERT_EQ(a.stream.events.size(), b.stream.events.size());
  for (std::size_t i = 0; i < a.stream.events.size(); ++i) {
    EXPECT_EQ(a.stream.events[i].x, b.stream.events[i].x);
    EXPECT_EQ(a.stream.events[i].y, b.stream.events[i].y);
    EXPECT_EQ(a.stream.events[i].t, b.stream.events[i].t);
    EXPECT_EQ(a.stream.events[i].p, b.stream.events[i].p);
  }
  EXPECT_EQ(a.ground_truth, b.ground_truth);
}

TEST(Synth, LinearVelocity) {
  SynthConfig cfg;
  cfg.velocity_x = 1.5;
  cfg.velocity_y = -0.5;
  cfg.duration_us = 300000;
  const auto seq = synth_stream(cfg);
  ASSERT_EQ(seq.ground_truth.size(), 30u);
  for (std::size_t i = 1; i < seq.ground_truth.size(); ++i) {
    EXPECT_DOUBLE_EQ(seq.ground_truth[i].cx - seq.ground_truth[i - 1].cx, 1.5);
    EXPECT_DOUBLE_EQ(seq.ground_truth[i].cy - seq.ground_truth[i - 1].cy, -0.5);
  }
}

TEST(Synth, NoiselessStaticTargetStaysOnBoundary) {
  SynthConfig cfg;
  cfg.velocity_x = 0.0;
  cfg.noise_per_window = 0;
  cfg.duration_us = 100000;
  const auto seq = synth_stream(cfg);
  const BBox& b = seq.ground_truth.front();
  ASSERT_FALSE(seq.stream.events.empty());
  for (const auto& e : seq.stream.events) {
    const double dx = std::min(std::abs(e.x - b.left()), std::abs(e.x - b.right()));
    const double dy = std::min(std::abs(e.y - b.top()), std::abs(e.y - b.bottom()));
    const bool on_vertical = dx <= 1.0 && e.y >= b.top() - 1 && e.y <= b.bottom() + 1;
    const bool on_horizontal = dy <= 1.0 && e.x >= b.left() - 1 && e.x <= b.right() + 1;
    EXPECT_TRUE(on_vertical || on_horizontal) << e.x << "," << e.y;
  }
}

TEST(Synth, ZeroDurationRejected) {
  SynthConfig cfg;
  cfg.duration_us = 0;
  EXPECT_THROW(synth_stream(cfg), Error);
}

TEST(Synth, StreamIsValidAndStacksToOneFramePerBox) {
  SynthConfig cfg;
  cfg.duration_us = 250000;
  const auto seq = synth_stream(cfg);
  EXPECT_NO_THROW(seq.stream.validate());
  EXPECT_EQ(stack_events(seq.stream, cfg.window_us).size(), seq.ground_truth.size());
}

TEST(EventsCsv, RoundTrip) {
  const EventStream s = stream_of({{1, 2, 0, 1}, {3, 4, 10, -1}});
  std::stringstream io;
  write_events_csv(io, s);
  const EventStream r = read_events_csv(io, 16, 12);
  ASSERT_EQ(r.events.size(), 2u);
  EXPECT_EQ(r.events[1].x, 3);
  EXPECT_EQ(r.events[1].t, 10);
  EXPECT_EQ(r.events[1].p, -1);
}

TEST(EventsCsv, RejectsGarbage) {
  std::stringstream io("t,x,y,p\n0,1,2,1\nnot,a,row\n");
  EXPECT_THROW(read_events_csv(io, 16, 12), Error);
}

TEST(Boxes, TopLeftRoundTrip) {
  const std::vector<BBox> boxes{BBox::from_top_left(10, 20, 30, 40), {5.5, 6.5, 3, 1}};
  std::stringstream io;
  write_boxes(io, boxes);
  const auto r = read_boxes(io);
  ASSERT_EQ(r.size(), 2u);
  EXPECT_EQ(r[0], boxes[0]);
  EXPECT_DOUBLE_EQ(r[1].cx, 5.5);
  EXPECT_DOUBLE_EQ(r[1].h, 1.0);
}

}  // namespace
}  // namespace mevt
