#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace mevt {

struct CheckResult {
  bool passed = false;
  std::string detail;
};

struct CriterionResult {
  int id = 0;
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::uint64_t seed = 20240611;
};

CheckResult check_scan_equivalence(const AcceptanceOptions& opt);   // 1
CheckResult check_zoh(const AcceptanceOptions& opt);                // 2
CheckResult check_gradients(const AcceptanceOptions& opt);          // 3
CheckResult check_param_counts(const AcceptanceOptions& opt);       // 4
CheckResult check_memory_oracles(const AcceptanceOptions& opt);     // 5
CheckResult check_pearson(const AcceptanceOptions& opt);            // 6
CheckResult check_giou(const AcceptanceOptions& opt);               // 7
CheckResult check_loss_weighting(const AcceptanceOptions& opt);     // 8
CheckResult check_shapes_cadence(const AcceptanceOptions& opt);     // 9
CheckResult check_metrics(const AcceptanceOptions& opt);            // 10
CheckResult check_throughput(const AcceptanceOptions& opt);         // 11

struct Criterion {
  int id;
  const char* name;
  CheckResult (*run)(const AcceptanceOptions&);
};

const std::vector<Criterion>& acceptance_criteria();

// Runs every criterion (or only `only` when non-zero), timing each one and
// turning exceptions into failures.
std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt, int only = 0,
                                            const std::function<void(const CriterionResult&)>& on_done = {});

std::string format_result(const CriterionResult& r);

// Sequential vs chunked selective-scan throughput.
struct ScanBenchRow {
  int length = 0;
  double sequential_tokens_per_s = 0.0;
  double chunked_tokens_per_s = 0.0;
  double speedup() const { return chunked_tokens_per_s / sequential_tokens_per_s; }
};

struct ScanBenchConfig {
  std::vector<int> lengths{256, 1024, 4096};
  int d_inner = 768;
  int d_state = 16;
  int chunk = 64;
  int repeats = 3;  // best of
  std::uint64_t seed = 1;
};

std::vector<ScanBenchRow> bench_scan(const ScanBenchConfig& config);

}  // namespace mevt
