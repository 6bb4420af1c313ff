// mevt: event-camera tracker command line.
// Exit status: 0 success, 1 runtime failure, 2 bad arguments.
#include "mevt/acceptance.hpp"
#include "mevt/config.hpp"
#include "mevt/model.hpp"
#include "mevt/tracker.hpp"
#include "mevt/weights.hpp"

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace {

constexpr int kOk = 0;
constexpr int kRuntime = 1;
constexpr int kUsage = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

mevt::BBox parse_init_box(const std::string& text) {
  std::vector<double> v;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(item, &used));
      if (used != item.size()) throw UsageError("--init-bbox: bad number '" + item + "'");
    } catch (const std::logic_error&) {
      throw UsageError("--init-bbox: bad number '" + item + "'");
    }
  }
  if (v.size() != 4) throw UsageError("--init-bbox expects x,y,w,h");
  return mevt::BBox::from_top_left(v[0], v[1], v[2], v[3]);
}

mevt::TrackerConfig tracker_config(const std::string& path) {
  mevt::TrackerConfig config = path.empty() ? mevt::TrackerConfig{} : mevt::load_tracker_config(path);
  mevt::apply_env_overrides(config);
  config.validate();
  return config;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw mevt::Error(mevt::ErrorCode::io_error, "cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw mevt::Error(mevt::ErrorCode::io_error, "cannot write " + path);
  return out;
}

std::vector<mevt::BBox> read_box_file(const std::string& path) {
  auto in = open_in(path);
  return mevt::read_boxes(in);
}

struct TrackArgs {
  std::string weights, events, init_bbox, config, out, memory_log;
};

int run_track(const TrackArgs& a) {
  const mevt::BBox init = parse_init_box(a.init_bbox);
  const mevt::TrackerConfig config = tracker_config(a.config);
  mevt::Model model;
  if (a.weights.empty()) {
    model = mevt::random_model(config, config.seed);
  } else {
    model = mevt::zero_model(config);
    mevt::load_weights(model, a.weights);
  }
  auto in = open_in(a.events);
  const mevt::EventStream stream = mevt::read_events_csv(in, config.sensor_width, config.sensor_height);
  const mevt::TrackResult result = mevt::track_sequence(config, model, stream, init);

  auto out = open_out(a.out);
  mevt::write_boxes(out, result.boxes);
  if (!a.memory_log.empty()) {
    auto log = open_out(a.memory_log);
    mevt::write_memory_log(log, result.memory_log);
  }
  std::cerr << result.boxes.size() << " frames, " << result.memory_updates << " memory updates\n";
  return kOk;
}

struct EvalArgs {
  std::string pred, gt, report;
};

int run_eval(const EvalArgs& a) {
  const auto pred = read_box_file(a.pred);
  const auto gt = read_box_file(a.gt);
  const mevt::TrackingScores s = mevt::evaluate(pred, gt);
  const nlohmann::json report = {
      {"SR", s.success}, {"PR", s.precision}, {"NPR", s.normalized_precision}, {"frames", s.frames}};
  if (a.report.empty() || a.report == "-") {
    std::cout << report.dump(2) << '\n';
  } else {
    auto out = open_out(a.report);
    out << report.dump(2) << '\n';
  }
  return kOk;
}

struct SynthArgs {
  std::string config, out_events, out_gt;
};

int run_synth(const SynthArgs& a) {
  const mevt::SynthConfig config = a.config.empty() ? mevt::SynthConfig{} : mevt::load_synth_config(a.config);
  const mevt::SynthSequence seq = mevt::synth_stream(config);
  auto ev = open_out(a.out_events);
  mevt::write_events_csv(ev, seq.stream);
  auto gt = open_out(a.out_gt);
  mevt::write_boxes(gt, seq.ground_truth);
  std::cerr << seq.stream.events.size() << " events, " << seq.ground_truth.size() << " frames\n";
  return kOk;
}

int run_selftest(std::uint64_t seed, int only) {
  mevt::AcceptanceOptions opt;
  opt.seed = seed;
  bool all = true;
  mevt::run_acceptance(opt, only, [&all](const mevt::CriterionResult& r) {
    std::cout << mevt::format_result(r) << std::endl;
    all = all && r.passed;
  });
  return all ? kOk : kRuntime;
}

int run_bench(mevt::ScanBenchConfig bc) {
  const auto rows = mevt::bench_scan(bc);
  std::printf("d_inner %d, d_state %d, chunk %d, best of %d\n", bc.d_inner, bc.d_state, bc.chunk, bc.repeats);
  std::printf("%8s %16s %16s %8s\n", "L", "sequential tok/s", "chunked tok/s", "speedup");
  for (const auto& r : rows) {
    std::printf("%8d %16.0f %16.0f %7.2fx\n", r.length, r.sequential_tokens_per_s, r.chunked_tokens_per_s,
                r.speedup());
  }
  return kOk;
}

int run_params(const std::string& config_path) {
  const mevt::TrackerConfig config = tracker_config(config_path);
  const std::int64_t n = mevt::count_params(mevt::zero_model(config));
  std::printf("%lld parameters (%.2f M)\n", static_cast<long long>(n), n / 1e6);
  return kOk;
}

int run_init_weights(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out) {
  const mevt::TrackerConfig config = tracker_config(config_path);
  mevt::save_weights(mevt::random_model(config, seed.value_or(config.seed)), out);
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Event-camera single-object tracker"};
  app.require_subcommand(1);

  TrackArgs track;
  auto* cmd_track = app.add_subcommand("track", "Track one object through an event stream");
  cmd_track->add_option("--weights", track.weights, "Weights file (random weights from config.seed if omitted)")
      ->check(CLI::ExistingFile);
  cmd_track->add_option("--events", track.events, "Events CSV (t,x,y,p)")->required()->check(CLI::ExistingFile);
  cmd_track->add_option("--init-bbox", track.init_bbox, "Initial box x,y,w,h (top-left)")->required();
  cmd_track->add_option("--config", track.config, "Tracker config JSON")->check(CLI::ExistingFile);
  cmd_track->add_option("--out", track.out, "Results file, one x,y,w,h line per frame")->required();
  cmd_track->add_option("--memory-log", track.memory_log, "JSON-lines log of memory updates");

  EvalArgs eval;
  auto* cmd_eval = app.add_subcommand("eval", "Score predicted boxes against ground truth");
  cmd_eval->add_option("--pred", eval.pred, "Predicted boxes")->required()->check(CLI::ExistingFile);
  cmd_eval->add_option("--gt", eval.gt, "Ground-truth boxes")->required()->check(CLI::ExistingFile);
  cmd_eval->add_option("--report", eval.report, "JSON report path (stdout if omitted)");

  SynthArgs synth;
  auto* cmd_synth = app.add_subcommand("synth", "Generate a synthetic event stream with ground truth");
  cmd_synth->add_option("--config", synth.config, "Synth config JSON")->check(CLI::ExistingFile);
  cmd_synth->add_option("--out-events", synth.out_events, "Events CSV")->required();
  cmd_synth->add_option("--out-gt", synth.out_gt, "Ground-truth boxes")->required();

  std::uint64_t selftest_seed = mevt::AcceptanceOptions{}.seed;
  int selftest_only = 0;
  auto* cmd_selftest = app.add_subcommand("selftest", "Run the invariant and oracle checks");
  cmd_selftest->add_option("--seed", selftest_seed, "Base seed");
  cmd_selftest->add_option("--only", selftest_only, "Single check by number")->check(CLI::Range(0, 11));

  mevt::ScanBenchConfig bench;
  auto* cmd_bench = app.add_subcommand("bench", "Sequential vs chunked scan throughput");
  cmd_bench->add_option("--lengths", bench.lengths, "Sequence lengths")->capture_default_str();
  cmd_bench->add_option("--d-inner", bench.d_inner)->capture_default_str()->check(CLI::PositiveNumber);
  cmd_bench->add_option("--d-state", bench.d_state)->capture_default_str()->check(CLI::PositiveNumber);
  cmd_bench->add_option("--chunk", bench.chunk)->capture_default_str()->check(CLI::PositiveNumber);
  cmd_bench->add_option("--repeats", bench.repeats)->capture_default_str()->check(CLI::PositiveNumber);

  std::string params_config;
  auto* cmd_params = app.add_subcommand("params", "Print the learned parameter count");
  cmd_params->add_option("--config", params_config, "Tracker config JSON")->check(CLI::ExistingFile);

  std::string init_config, init_out;
  std::optional<std::uint64_t> init_seed;
  auto* cmd_init = app.add_subcommand("init-weights", "Write randomly initialized weights");
  cmd_init->add_option("--config", init_config, "Tracker config JSON")->check(CLI::ExistingFile);
  cmd_init->add_option("--seed", init_seed, "Seed (default: config.seed)");
  cmd_init->add_option("--out", init_out, "Weights file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*cmd_track) return run_track(track);
    if (*cmd_eval) return run_eval(eval);
    if (*cmd_synth) return run_synth(synth);
    if (*cmd_selftest) return run_selftest(selftest_seed, selftest_only);
    if (*cmd_bench) return run_bench(bench);
    if (*cmd_params) return run_params(params_config);
    if (*cmd_init) return run_init_weights(init_config, init_seed, init_out);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
