#include "mevt/tracker.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <ostream>

namespace mevt {

namespace {

BBox clip_to_frame(const BBox& b, int width, int height) {
  BBox r;
  r.w = std::clamp(b.w, 1.0, static_cast<double>(width));
  r.h = std::clamp(b.h, 1.0, static_cast<double>(height));
  r.cx = std::clamp(b.cx, 0.0, static_cast<double>(width));
  r.cy = std::clamp(b.cy, 0.0, static_cast<double>(height));
  return r;
}

bool finite_box(const BBox& b) {
  return std::isfinite(b.cx) && std::isfinite(b.cy) && std::isfinite(b.w) && std::isfinite(b.h);
}

}  // namespace

TemplateFeature template_feature(const EventFrame& frame, const BBox& box, const TrackerConfig& config,
                                 const PatchEmbedParams& embed, int frame_index) {
  const RegionPatch patch = crop_region(frame, box, config.template_context, config.template_size);
  return {embed_template(patch, embed).tokens, frame_index};
}

TrackResult track_sequence(const TrackerConfig& config, const Model& model, const EventStream& stream,
                           const BBox& init_box) {
  stream.validate();
  return track_frames(config, model, stack_events(stream, config.window_us), init_box);
}

TrackResult track_frames(const TrackerConfig& config, const Model& model,
                         const std::vector<EventFrame>& frames, const BBox& init_box) {
  config.validate();
  if (frames.empty()) throw Error(ErrorCode::empty_input, "no frames to track");
  const int width = frames.front().data.width();
  const int height = frames.front().data.height();
  if (!init_box.valid() || !finite_box(init_box) || init_box.cx < 0.0 || init_box.cy < 0.0 ||
      init_box.cx >= width || init_box.cy >= height) {
    throw Error(ErrorCode::invalid_argument, "init box outside frame");
  }
  if ((config.memory_mode == MemoryMode::separate) != model.memory_backbone.has_value()) {
    throw Error(ErrorCode::invalid_argument, "model memory mode does not match the configuration");
  }

  const BackboneParams& mem_params = model.memory_params();
  const int stride = config.patch_size;

  TrackResult result;
  result.boxes.reserve(frames.size());
  result.boxes.push_back(init_box);

  const TemplateFeature initial = template_feature(frames[0], init_box, config, model.embed, 0);
  const TokenSeq static_t = TokenSeq::single(initial.tokens, Segment::static_template);
  MemoryLibrary memory(config.memory());
  memory.init(initial);
  TokenSeq dynamic_t = TokenSeq::single(
      generate_dynamic_template(memory, initial, mem_params).tokens, Segment::dynamic_template);

  BBox prev = init_box;
  for (int t = 1; t < static_cast<int>(frames.size()); ++t) {
    const EventFrame& frame = frames[static_cast<std::size_t>(t)];
    const RegionPatch search = crop_region(frame, prev, config.search_context, config.search_size);
    TokenSeq seq = assemble_input(static_t, dynamic_t, embed_search(search, model.embed));
    seq.tokens = backbone(seq.tokens, model.backbone);
    const HeadOutputs maps = head_forward(extract_search_tokens(seq), model.head);
    const BBox raw = decode_bbox(maps, stride, config.search_size, search.geometry());
    const BBox box = finite_box(raw) ? clip_to_frame(raw, width, height) : prev;
    result.boxes.push_back(box);
    prev = box;

    const bool tick = t % config.interval == 0;
    if (!tick && !config.regenerate_every_frame) continue;

    TemplateFeature z = template_feature(frame, box, config, model.embed, t);
    MemoryEvent ev;
    ev.frame = t;
    if (tick) {
      if (auto rec = memory.st_push(z)) {
        ev.lt = *rec;
        ev.lt_offered = true;
      }
      ++result.memory_updates;
    }
    const DynamicTemplate d = generate_dynamic_template(memory, z, mem_params);
    dynamic_t = TokenSeq::single(d.tokens, Segment::dynamic_template);
    ++result.regenerations;
    ev.routed = d.routed;
    if (tick) result.memory_log.push_back(ev);
  }
  return result;
}

void write_memory_log(std::ostream& out, const std::vector<MemoryEvent>& log) {
  for (const MemoryEvent& e : log) {
    nlohmann::json j;
    j["frame"] = e.frame;
    j["op"] = "st_push";
    j["routed"] = to_string(e.routed);
    if (e.lt_offered) {
      j["lt_accepted"] = e.lt.accepted;
      j["replaced_index"] = e.lt.replaced_index;
      j["det_before"] = e.lt.det_before;
      j["det_after"] = e.lt.det_after;
    }
    out << j.dump() << '\n';
  }
}

}  // namespace mevt
