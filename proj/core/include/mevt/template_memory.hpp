#pragma once

#include "mevt/common.hpp"

#include <deque>
#include <optional>
#include <span>
#include <vector>

namespace mevt {

// Patch-embedded tokens (N_z x C) of the crop around one tracking result.
struct TemplateFeature {
  MatrixF tokens;
  int frame_index = 0;
};

// Pearson linear correlation of the flattened token matrices. Zero-variance
// inputs are defined as 1 when the two vectors are identical and 0 otherwise.
double pearson(std::span<const float> a, std::span<const float> b);
double pearson(std::span<const double> a, std::span<const double> b);
double pearson(const TemplateFeature& a, const TemplateFeature& b);

// Determinant by LU with partial pivoting.
double determinant(const MatrixD& m);

// det of G with G(i, j) = pearson(z_i, z_j).
double gram_det(std::span<const TemplateFeature> set);

enum class Library { long_term, short_term };

const char* to_string(Library lib);

struct AdmissionRecord {
  bool accepted = false;
  int replaced_index = -1;
  double det_before = 0.0;
  double det_after = 0.0;
};

struct MemoryConfig {
  int lt_capacity = 16;
  int st_capacity = 6;
  int interval = 5;
};

// Long-term (diversity-curated) and short-term (FIFO) template stores.
class MemoryLibrary {
 public:
  explicit MemoryLibrary(MemoryConfig config = {});

  // Fills both stores to capacity with copies of `initial`.
  void init(const TemplateFeature& initial);

  // Builds a library from explicit contents; `short_term` is oldest first.
  static MemoryLibrary from_contents(MemoryConfig config, std::vector<TemplateFeature> long_term,
                                     std::deque<TemplateFeature> short_term);

  // Enqueue into ST. When ST overflows, the oldest member is offered to
  // lt_admit and its record returned.
  std::optional<AdmissionRecord> st_push(TemplateFeature z);

  // Replaces the LT member whose substitution maximizes det(G) if that
  // maximum strictly exceeds the current det; otherwise discards z.
  AdmissionRecord lt_admit(TemplateFeature z);

  // Library holding the stored feature most correlated with `incoming`; ties go to ST.
  Library route(const TemplateFeature& incoming) const;

  // Members of one store in chronological order (LT by ascending frame_index).
  std::vector<TemplateFeature> snapshot(Library lib) const;

  const std::vector<TemplateFeature>& long_term() const { return lt_; }
  const std::deque<TemplateFeature>& short_term() const { return st_; }
  const MemoryConfig& config() const { return config_; }
  bool initialized() const { return initialized_; }
  double lt_det() const { return lt_det_; }

 private:
  void rebuild_lt_cache();

  MemoryConfig config_;
  std::vector<TemplateFeature> lt_;
  std::deque<TemplateFeature> st_;
  MatrixD lt_corr_;
  double lt_det_ = 0.0;
  bool initialized_ = false;
};

}  // namespace mevt
