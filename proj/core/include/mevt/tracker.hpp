#pragma once

#include "mevt/config.hpp"
#include "mevt/model.hpp"

#include <iosfwd>
#include <optional>
#include <vector>

namespace mevt {

struct MemoryEvent {
  int frame = 0;
  AdmissionRecord lt;            // valid when lt_offered
  bool lt_offered = false;       // ST overflowed and its oldest member went to lt_admit
  Library routed = Library::short_term;
};

struct TrackResult {
  std::vector<BBox> boxes;  // one per stacked frame; boxes[0] is the init box
  int memory_updates = 0;   // st_push calls
  int regenerations = 0;    // dynamic templates generated after initialization
  std::vector<MemoryEvent> memory_log;
};

// Embedded template tokens of the crop around `box`.
TemplateFeature template_feature(const EventFrame& frame, const BBox& box, const TrackerConfig& config,
                                 const PatchEmbedParams& embed, int frame_index);

// Runs the tracker over the stacked frames of `stream`. The init box must have
// positive size and its center inside the sensor.
TrackResult track_sequence(const TrackerConfig& config, const Model& model, const EventStream& stream,
                           const BBox& init_box);

// Same, over frames that are already stacked.
TrackResult track_frames(const TrackerConfig& config, const Model& model,
                         const std::vector<EventFrame>& frames, const BBox& init_box);

// One JSON object per line.
void write_memory_log(std::ostream& out, const std::vector<MemoryEvent>& log);

}  // namespace mevt
