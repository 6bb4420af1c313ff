#include "mevt/config.hpp"
#include "mevt/model.hpp"
#include "mevt/tracker.hpp"
#include "mevt/weights.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <cstring>
#include <sstream>

namespace mevt {
namespace {

TrackerConfig small_config() {
  TrackerConfig c;
  c.embed_dim = 32;
  c.depth = 1;
  c.dt_rank = 2;
  c.d_state = 4;
  c.template_size = 32;
  c.search_size = 64;
  c.lt_capacity = 4;
  c.st_capacity = 2;
  return c;
}

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::invalid_argument;
}

TEST(Config, JsonRoundTrip) {
  TrackerConfig c = small_config();
  c.memory_mode = MemoryMode::separate;
  c.loss_weights = {4.0, 1.5, 0.5};
  c.template_context = 2.5;
  const TrackerConfig r = tracker_config_from_json(to_json(c));
  EXPECT_EQ(to_json(r), to_json(c));
  EXPECT_EQ(r.memory_mode, MemoryMode::separate);
  EXPECT_EQ(r.loss_weights.focal, 1.5);
}

TEST(Config, MissingKeysKeepDefaults) {
  const TrackerConfig c = tracker_config_from_json(R"({"depth": 8})");
  EXPECT_EQ(c.depth, 8);
  EXPECT_EQ(c.embed_dim, 384);
  EXPECT_EQ(c.interval, 5);
}

TEST(Config, Rejections) {
  EXPECT_EQ(code_of([] { tracker_config_from_json(R"({"depht": 8})"); }), ErrorCode::parse_error);
  EXPECT_EQ(code_of([] { tracker_config_from_json(R"({"memory_mode": "both"})"); }), ErrorCode::parse_error);
  EXPECT_EQ(code_of([] { tracker_config_from_json("[1, 2]"); }), ErrorCode::parse_error);
  EXPECT_EQ(code_of([] { tracker_config_from_json(R"({"depth": "x"})"); }), ErrorCode::parse_error);
  EXPECT_EQ(code_of([] { tracker_config_from_json(R"({"interval": 0})"); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([] { tracker_config_from_json(R"({"search_size": 250})"); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([] { synth_config_from_json(R"({"trajectory": "zigzag"})"); }), ErrorCode::parse_error);
}

TEST(Config, SeedFromEnvironment) {
  TrackerConfig c;
  ::setenv("MEVT_SEED", "99", 1);
  apply_env_overrides(c);
  EXPECT_EQ(c.seed, 99u);
  ::setenv("MEVT_SEED", "9x", 1);
  EXPECT_THROW(apply_env_overrides(c), Error);
  ::unsetenv("MEVT_SEED");
  apply_env_overrides(c);
  EXPECT_EQ(c.seed, 99u);
}

TEST(Config, DefaultParamsNearTable) {
  EXPECT_NEAR(count_params(zero_model(TrackerConfig{})) / 1e6, 29.3, 2.93);
}

TEST(Weights, BitwiseRoundTrip) {
  const TrackerConfig c = small_config();
  const Model m = random_model(c, 5);
  std::stringstream io;
  save_weights(m, io);
  Model r = zero_model(c);
  load_weights(r, io);
  std::vector<std::vector<float>> a, b;
  visit_params(m, [&](const ParamView& v) { a.emplace_back(v.data.begin(), v.data.end()); });
  visit_params(r, [&](const ParamView& v) { b.emplace_back(v.data.begin(), v.data.end()); });
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a[i].size(), b[i].size());
    EXPECT_EQ(std::memcmp(a[i].data(), b[i].data(), a[i].size() * sizeof(float)), 0);
  }
}

std::string saved(const Model& m) {
  std::stringstream io;
  save_weights(m, io);
  return io.str();
}

void append_u32(std::string& s, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) s.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

TEST(Weights, Truncated) {
  const Model m = random_model(small_config(), 1);
  const std::string bytes = saved(m);
  Model r = zero_model(small_config());
  std::stringstream io(bytes.substr(0, bytes.size() - 3));
  try {
    load_weights(r, io);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unexpected_eof);
    EXPECT_STREQ(e.what(), "unexpected end of file");
  }
}

TEST(Weights, ExtraParameterNamed) {
  std::string bytes = saved(random_model(small_config(), 1));
  const std::string name = "head.extra.weight";
  append_u32(bytes, static_cast<std::uint32_t>(name.size()));
  bytes += name;
  append_u32(bytes, 1);
  append_u32(bytes, 2);
  bytes.append(8, '\0');
  Model r = zero_model(small_config());
  std::stringstream io(bytes);
  try {
    load_weights(r, io);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::unexpected_parameter);
    EXPECT_NE(std::string(e.what()).find("unexpected parameter head.extra.weight"), std::string::npos);
  }
}

TEST(Weights, MagicShapeAndMissing) {
  const TrackerConfig c = small_config();
  Model r = zero_model(c);
  std::stringstream bad("NOTMEVT1rest");
  EXPECT_EQ(code_of([&] { load_weights(r, bad); }), ErrorCode::bad_magic);

  TrackerConfig wider = c;
  wider.embed_dim = 48;
  std::stringstream other(saved(zero_model(wider)));
  EXPECT_EQ(code_of([&] { load_weights(r, other); }), ErrorCode::shape_mismatch);

  TrackerConfig deeper = c;
  deeper.depth = 2;
  Model d = zero_model(deeper);
  std::stringstream shallow(saved(zero_model(c)));
  EXPECT_EQ(code_of([&] { load_weights(d, shallow); }), ErrorCode::missing_parameter);
}

std::vector<EventFrame> synth_frames(int count) {
  SynthConfig s;
  s.sensor_width = 120;
  s.sensor_height = 90;
  s.start_cx = 40;
  s.start_cy = 45;
  s.target_w = 20;
  s.target_h = 16;
  s.duration_us = count * s.window_us;
  const auto seq = synth_stream(s);
  auto frames = stack_events(seq.stream, s.window_us);
  frames.resize(static_cast<std::size_t>(count));
  return frames;
}

TEST(Tracker, OneFrameReturnsInitBox) {
  const TrackerConfig c = small_config();
  const BBox init{40, 45, 20, 16};
  const TrackResult r = track_frames(c, random_model(c, 1), synth_frames(1), init);
  ASSERT_EQ(r.boxes.size(), 1u);
  EXPECT_EQ(r.boxes[0], init);
  EXPECT_EQ(r.memory_updates, 0);
}

TEST(Tracker, CadenceAndOneBoxPerFrame) {
  const TrackerConfig c = small_config();
  const Model m = random_model(c, 2);
  for (int frames : {20, 21, 26}) {
    const TrackResult r = track_frames(c, m, synth_frames(frames), {40, 45, 20, 16});
    EXPECT_EQ(static_cast<int>(r.boxes.size()), frames);
    EXPECT_EQ(r.memory_updates, (frames - 1) / c.interval);
    EXPECT_EQ(r.regenerations, (frames - 1) / c.interval);
    ASSERT_EQ(static_cast<int>(r.memory_log.size()), r.memory_updates);
    for (int k = 0; k < r.memory_updates; ++k) EXPECT_EQ(r.memory_log[k].frame, (k + 1) * c.interval);
  }
}

TEST(Tracker, RegenerateEveryFrame) {
  TrackerConfig c = small_config();
  c.regenerate_every_frame = true;
  const TrackResult r = track_frames(c, random_model(c, 3), synth_frames(12), {40, 45, 20, 16});
  EXPECT_EQ(r.memory_updates, 2);
  EXPECT_EQ(r.regenerations, 11);
}

TEST(Tracker, DeterministicAndInsideFrame) {
  const TrackerConfig c = small_config();
  const Model m = random_model(c, 4);
  const auto frames = synth_frames(15);
  const TrackResult a = track_frames(c, m, frames, {40, 45, 20, 16});
  const TrackResult b = track_frames(c, m, frames, {40, 45, 20, 16});
  EXPECT_EQ(a.boxes, b.boxes);
  for (const BBox& box : a.boxes) {
    EXPECT_TRUE(box.valid());
    EXPECT_GE(box.cx, 0.0);
    EXPECT_LE(box.cx, 120.0);
  }
}

TEST(Tracker, Rejections) {
  TrackerConfig c = small_config();
  const Model m = random_model(c, 5);
  const auto frames = synth_frames(3);
  EXPECT_EQ(code_of([&] { track_frames(c, m, frames, {500, 45, 20, 16}); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { track_frames(c, m, frames, {40, 45, 0, 16}); }), ErrorCode::invalid_argument);
  EXPECT_EQ(code_of([&] { track_frames(c, m, {}, {40, 45, 20, 16}); }), ErrorCode::empty_input);
  c.memory_mode = MemoryMode::separate;
  EXPECT_EQ(code_of([&] { track_frames(c, m, frames, {40, 45, 20, 16}); }), ErrorCode::invalid_argument);
}

TEST(Tracker, SeparateMemoryRuns) {
  TrackerConfig c = small_config();
  c.memory_mode = MemoryMode::separate;
  const TrackResult r = track_frames(c, random_model(c, 6), synth_frames(11), {40, 45, 20, 16});
  EXPECT_EQ(r.memory_updates, 2);
}

TEST(MemoryLog, JsonLines) {
  const TrackerConfig c = small_config();
  const TrackResult r = track_frames(c, random_model(c, 7), synth_frames(11), {40, 45, 20, 16});
  std::stringstream out;
  write_memory_log(out, r.memory_log);
  std::string line;
  int lines = 0;
  while (std::getline(out, line)) {
    ++lines;
    EXPECT_NE(line.find("\"op\":\"st_push\""), std::string::npos);
    EXPECT_NE(line.find("\"routed\""), std::string::npos);
  }
  EXPECT_EQ(lines, 2);
}

}  // namespace
}  // namespace mevt
