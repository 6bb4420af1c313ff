#include "mevt/config.hpp"

#include <nlohmann/json.hpp>

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace mevt {

using nlohmann::json;

namespace {

template <typename Cfg>
using FieldTable = std::map<std::string, std::pair<std::function<void(Cfg&, const json&)>,
                                                   std::function<json(const Cfg&)>>>;

#define MEVT_FIELD(table, Cfg, name)                                          \
  table[#name] = {[](Cfg& c, const json& j) { j.get_to(c.name); },            \
                  [](const Cfg& c) { return json(c.name); }}

const FieldTable<TrackerConfig>& tracker_fields() {
  static const FieldTable<TrackerConfig> table = [] {
    FieldTable<TrackerConfig> t;
    MEVT_FIELD(t, TrackerConfig, patch_size);
    MEVT_FIELD(t, TrackerConfig, embed_dim);
    MEVT_FIELD(t, TrackerConfig, depth);
    MEVT_FIELD(t, TrackerConfig, d_state);
    MEVT_FIELD(t, TrackerConfig, dt_rank);
    MEVT_FIELD(t, TrackerConfig, conv_width);
    MEVT_FIELD(t, TrackerConfig, expand);
    MEVT_FIELD(t, TrackerConfig, template_size);
    MEVT_FIELD(t, TrackerConfig, search_size);
    MEVT_FIELD(t, TrackerConfig, template_context);
    MEVT_FIELD(t, TrackerConfig, search_context);
    MEVT_FIELD(t, TrackerConfig, lt_capacity);
    MEVT_FIELD(t, TrackerConfig, st_capacity);
    MEVT_FIELD(t, TrackerConfig, interval);
    MEVT_FIELD(t, TrackerConfig, regenerate_every_frame);
    MEVT_FIELD(t, TrackerConfig, train_dynamic_templates);
    MEVT_FIELD(t, TrackerConfig, window_us);
    MEVT_FIELD(t, TrackerConfig, seed);
    MEVT_FIELD(t, TrackerConfig, sensor_width);
    MEVT_FIELD(t, TrackerConfig, sensor_height);
    t["memory_mode"] = {
        [](TrackerConfig& c, const json& j) {
          const auto s = j.get<std::string>();
          if (s == "shared") {
            c.memory_mode = MemoryMode::shared;
          } else if (s == "separate") {
            c.memory_mode = MemoryMode::separate;
          } else {
            throw Error(ErrorCode::parse_error, "memory_mode must be 'shared' or 'separate'");
          }
        },
        [](const TrackerConfig& c) {
          return json(c.memory_mode == MemoryMode::shared ? "shared" : "separate");
        }};
    t["loss_weights"] = {
        [](TrackerConfig& c, const json& j) {
          const auto v = j.get<std::vector<double>>();
          if (v.size() != 3) throw Error(ErrorCode::parse_error, "loss_weights needs three values");
          c.loss_weights = {v[0], v[1], v[2]};
        },
        [](const TrackerConfig& c) {
          return json::array({c.loss_weights.l1, c.loss_weights.focal, c.loss_weights.giou});
        }};
    return t;
  }();
  return table;
}

const FieldTable<SynthConfig>& synth_fields() {
  static const FieldTable<SynthConfig> table = [] {
    FieldTable<SynthConfig> t;
    MEVT_FIELD(t, SynthConfig, sensor_width);
    MEVT_FIELD(t, SynthConfig, sensor_height);
    MEVT_FIELD(t, SynthConfig, target_w);
    MEVT_FIELD(t, SynthConfig, target_h);
    MEVT_FIELD(t, SynthConfig, start_cx);
    MEVT_FIELD(t, SynthConfig, start_cy);
    MEVT_FIELD(t, SynthConfig, velocity_x);
    MEVT_FIELD(t, SynthConfig, velocity_y);
    MEVT_FIELD(t, SynthConfig, radius);
    MEVT_FIELD(t, SynthConfig, angular_speed);
    MEVT_FIELD(t, SynthConfig, events_per_window);
    MEVT_FIELD(t, SynthConfig, noise_per_window);
    MEVT_FIELD(t, SynthConfig, window_us);
    MEVT_FIELD(t, SynthConfig, duration_us);
    MEVT_FIELD(t, SynthConfig, seed);
    t["trajectory"] = {
        [](SynthConfig& c, const json& j) {
          const auto s = j.get<std::string>();
          if (s == "linear") {
            c.trajectory = Trajectory::linear;
          } else if (s == "circular") {
            c.trajectory = Trajectory::circular;
          } else {
            throw Error(ErrorCode::parse_error, "trajectory must be 'linear' or 'circular'");
          }
        },
        [](const SynthConfig& c) {
          return json(c.trajectory == Trajectory::linear ? "linear" : "circular");
        }};
    return t;
  }();
  return table;
}

#undef MEVT_FIELD

template <typename Cfg>
Cfg from_json_text(const std::string& text, const FieldTable<Cfg>& fields) {
  Cfg cfg;
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::parse_error, std::string("invalid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw Error(ErrorCode::parse_error, "configuration must be a JSON object");
  for (const auto& [key, value] : doc.items()) {
    const auto it = fields.find(key);
    if (it == fields.end()) throw Error(ErrorCode::parse_error, "unknown configuration key '" + key + "'");
    try {
      it->second.first(cfg, value);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::parse_error, "bad value for '" + key + "': " + e.what());
    }
  }
  return cfg;
}

template <typename Cfg>
std::string to_json_text(const Cfg& cfg, const FieldTable<Cfg>& fields) {
  json doc = json::object();
  for (const auto& [key, accessors] : fields) doc[key] = accessors.second(cfg);
  return doc.dump(2);
}

}  // namespace

void TrackerConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorCode::invalid_argument, std::string("invalid config: ") + what);
  };
  require(patch_size > 0 && embed_dim > 0 && depth >= 0 && d_state > 0 && dt_rank > 0 &&
              conv_width > 0 && expand > 0,
          "model sizes must be positive");
  require(embed_dim % 8 == 0, "embed_dim must be divisible by 8 (head channel schedule)");
  require(template_size % patch_size == 0 && search_size % patch_size == 0,
          "region sizes must be multiples of patch_size");
  require(template_context >= 1.0 && search_context >= 1.0, "context factors must be >= 1");
  require(lt_capacity > 0 && st_capacity > 0 && interval > 0, "memory capacities must be positive");
  require(train_dynamic_templates > 0, "train_dynamic_templates must be positive");
  require(loss_weights.l1 >= 0 && loss_weights.focal >= 0 && loss_weights.giou >= 0,
          "loss weights must be non-negative");
  require(window_us > 0, "window_us must be positive");
  require(sensor_width >= 0 && sensor_height >= 0, "sensor size must be non-negative");
}

BlockShape TrackerConfig::block_shape() const {
  return {embed_dim, expand * embed_dim, d_state, dt_rank, conv_width};
}

MemoryConfig TrackerConfig::memory() const { return {lt_capacity, st_capacity, interval}; }

int TrackerConfig::template_tokens() const { return token_count(template_size, patch_size); }

int TrackerConfig::search_tokens() const { return token_count(search_size, patch_size); }

TrackerConfig tracker_config_from_json(const std::string& text) {
  TrackerConfig cfg = from_json_text(text, tracker_fields());
  cfg.validate();
  return cfg;
}

std::string to_json(const TrackerConfig& config) { return to_json_text(config, tracker_fields()); }

TrackerConfig load_tracker_config(const std::filesystem::path& path) {
  return tracker_config_from_json(read_text_file(path));
}

void apply_env_overrides(TrackerConfig& config) {
  if (const char* s = std::getenv("MEVT_SEED"); s != nullptr && *s != '\0') {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(s, &end, 10);
    if (end == s || *end != '\0') throw Error(ErrorCode::parse_error, "MEVT_SEED must be an unsigned integer");
    config.seed = v;
  }
}

SynthConfig synth_config_from_json(const std::string& text) {
  return from_json_text(text, synth_fields());
}

std::string to_json(const SynthConfig& config) { return to_json_text(config, synth_fields()); }

SynthConfig load_synth_config(const std::filesystem::path& path) {
  return synth_config_from_json(read_text_file(path));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_error, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace mevt
