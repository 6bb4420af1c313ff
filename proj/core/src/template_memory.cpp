#include "mevt/template_memory.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace mevt {

namespace {

template <typename T>
double pearson_impl(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::shape_mismatch, "pearson: length mismatch");
  if (a.empty()) throw Error(ErrorCode::empty_input, "pearson: empty input");
  if (std::equal(a.begin(), a.end(), b.begin())) return 1.0;

  const double n = static_cast<double>(a.size());
  double mean_a = 0.0;
  double mean_b = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    mean_a += a[i];
    mean_b += b[i];
  }
  mean_a /= n;
  mean_b /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - mean_a;
    const double db = b[i] - mean_b;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

std::span<const float> flat(const TemplateFeature& z) {
  return {z.tokens.data(), static_cast<std::size_t>(z.tokens.size())};
}

}  // namespace

double pearson(std::span<const float> a, std::span<const float> b) { return pearson_impl(a, b); }

double pearson(std::span<const double> a, std::span<const double> b) { return pearson_impl(a, b); }

double pearson(const TemplateFeature& a, const TemplateFeature& b) {
  return pearson(flat(a), flat(b));
}

double determinant(const MatrixD& m) {
  if (m.rows() != m.cols()) throw Error(ErrorCode::shape_mismatch, "determinant of non-square matrix");
  if (m.rows() == 0) return 1.0;
  return Eigen::PartialPivLU<Eigen::MatrixXd>(m).determinant();
}

double gram_det(std::span<const TemplateFeature> set) {
  const auto n = static_cast<Eigen::Index>(set.size());
  MatrixD g(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    g(i, i) = pearson(set[i], set[i]);
    for (Eigen::Index j = i + 1; j < n; ++j) g(i, j) = g(j, i) = pearson(set[i], set[j]);
  }
  return determinant(g);
}

const char* to_string(Library lib) {
  return lib == Library::long_term ? "LT" : "ST";
}

MemoryLibrary::MemoryLibrary(MemoryConfig config) : config_(config) {
  if (config_.lt_capacity < 1 || config_.st_capacity < 1 || config_.interval < 1) {
    throw Error(ErrorCode::invalid_argument, "memory capacities and interval must be positive");
  }
}

void MemoryLibrary::init(const TemplateFeature& initial) {
  if (initialized_ || !lt_.empty() || !st_.empty()) {
    throw Error(ErrorCode::already_initialized, "memory library already initialized");
  }
  lt_.assign(static_cast<std::size_t>(config_.lt_capacity), initial);
  st_.assign(static_cast<std::size_t>(config_.st_capacity), initial);
  initialized_ = true;
  rebuild_lt_cache();
}

MemoryLibrary MemoryLibrary::from_contents(MemoryConfig config, std::vector<TemplateFeature> long_term,
                                           std::deque<TemplateFeature> short_term) {
  MemoryLibrary lib(config);
  if (static_cast<int>(long_term.size()) > config.lt_capacity ||
      static_cast<int>(short_term.size()) > config.st_capacity) {
    throw Error(ErrorCode::invalid_argument, "library contents exceed capacity");
  }
  lib.lt_ = std::move(long_term);
  lib.st_ = std::move(short_term);
  lib.initialized_ = true;
  lib.rebuild_lt_cache();
  return lib;
}

void MemoryLibrary::rebuild_lt_cache() {
  const auto n = static_cast<Eigen::Index>(lt_.size());
  lt_corr_.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    lt_corr_(i, i) = pearson(lt_[i], lt_[i]);
    for (Eigen::Index j = i + 1; j < n; ++j) lt_corr_(i, j) = lt_corr_(j, i) = pearson(lt_[i], lt_[j]);
  }
  lt_det_ = determinant(lt_corr_);
}

std::optional<AdmissionRecord> MemoryLibrary::st_push(TemplateFeature z) {
  st_.push_back(std::move(z));
  if (static_cast<int>(st_.size()) <= config_.st_capacity) return std::nullopt;
  TemplateFeature evicted = std::move(st_.front());
  st_.pop_front();
  return lt_admit(std::move(evicted));
}

AdmissionRecord MemoryLibrary::lt_admit(TemplateFeature z) {
  AdmissionRecord rec;
  rec.det_before = lt_det_;
  rec.det_after = lt_det_;

  // Below capacity the candidate is simply stored.
  if (static_cast<int>(lt_.size()) < config_.lt_capacity) {
    lt_.push_back(std::move(z));
    rebuild_lt_cache();
    rec.accepted = true;
    rec.replaced_index = -1;
    rec.det_after = lt_det_;
    return rec;
  }

  const auto n = static_cast<Eigen::Index>(lt_.size());
  VectorD corr(n);
  for (Eigen::Index i = 0; i < n; ++i) corr(i) = pearson(z, lt_[i]);
  const double self = pearson(z, z);

  double best_det = 0.0;
  Eigen::Index best = -1;
  MatrixD candidate;
  for (Eigen::Index j = 0; j < n; ++j) {
    candidate = lt_corr_;
    candidate.row(j) = corr.transpose();
    candidate.col(j) = corr;
    candidate(j, j) = self;
    const double det = determinant(candidate);
    if (best < 0 || det > best_det) {
      best_det = det;
      best = j;
    }
  }

  if (best >= 0 && best_det > lt_det_) {
    lt_[best] = std::move(z);
    lt_corr_.row(best) = corr.transpose();
    lt_corr_.col(best) = corr;
    lt_corr_(best, best) = self;
    lt_det_ = best_det;
    rec.accepted = true;
    rec.replaced_index = static_cast<int>(best);
    rec.det_after = best_det;
  }
  return rec;
}

Library MemoryLibrary::route(const TemplateFeature& incoming) const {
  if (lt_.empty() || st_.empty()) throw Error(ErrorCode::empty_input, "route needs both libraries non-empty");
  double best_st = -2.0;
  for (const auto& z : st_) best_st = std::max(best_st, pearson(incoming, z));
  double best_lt = -2.0;
  for (const auto& z : lt_) best_lt = std::max(best_lt, pearson(incoming, z));
  return best_st >= best_lt ? Library::short_term : Library::long_term;
}

std::vector<TemplateFeature> MemoryLibrary::snapshot(Library lib) const {
  if (lib == Library::short_term) return {st_.begin(), st_.end()};
  std::vector<TemplateFeature> out = lt_;
  std::stable_sort(out.begin(), out.end(), [](const TemplateFeature& a, const TemplateFeature& b) {
    return a.frame_index < b.frame_index;
  });
  return out;
}

}  // namespace mevt
