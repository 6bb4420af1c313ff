#include "mevt/acceptance.hpp"

#include "mevt/config.hpp"
#include "mevt/losses_metrics.hpp"
#include "mevt/memory_mamba.hpp"
#include "mevt/model.hpp"
#include "mevt/oracles.hpp"
#include "mevt/tracker.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <deque>
#include <numbers>
#include <random>

namespace mevt {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

template <typename M>
double mat_rel_err(const M& got, const M& ref) {
  const double scale = ref.template cast<double>().cwiseAbs().maxCoeff();
  const double diff = (got.template cast<double>() - ref.template cast<double>()).cwiseAbs().maxCoeff();
  return scale > 0.0 ? diff / scale : diff;
}

double rel_err(std::span<const double> got, std::span<const double> ref) {
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < ref.size(); ++i) {
    scale = std::max(scale, std::abs(ref[i]));
    diff = std::max(diff, std::abs(got[i] - ref[i]));
  }
  return diff / std::max(scale, 1e-8);
}

struct Rng {
  std::mt19937_64 gen;
  explicit Rng(std::uint64_t seed) : gen(seed) {}
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(gen); }
  double normal() { return std::normal_distribution<double>(0.0, 1.0)(gen); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(gen); }
  double log_uniform(double lo, double hi) { return std::exp(uniform(std::log(lo), std::log(hi))); }
  MatrixD normal(Eigen::Index r, Eigen::Index c) {
    MatrixD m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal();
    return m;
  }
};

// ---------------------------------------------------------------- scan inputs

struct ScanCase {
  MatrixD u;
  ScanInputs<double> in;
  MatrixD a;
  VectorD d_skip;
};

ScanCase random_scan_case(Rng& rng, int L, int D, int N) {
  ScanCase c;
  c.u = rng.normal(L, D);
  c.in.delta = MatrixD(L, D);
  for (Eigen::Index i = 0; i < c.in.delta.size(); ++i) c.in.delta.data()[i] = rng.log_uniform(1e-3, 1.0);
  c.in.b = rng.normal(L, N);
  c.in.c = rng.normal(L, N);
  c.a = MatrixD(D, N);
  // Wide range of |a| so both ZOH branches are exercised.
  for (Eigen::Index i = 0; i < c.a.size(); ++i) c.a.data()[i] = -std::exp(rng.uniform(-12.0, 2.5));
  c.d_skip = rng.normal(D, 1);
  return c;
}

// ---------------------------------------------------------------- SSM packing

std::vector<double> pack(const MatrixD& u, const SsmParams<double>& p) {
  std::vector<double> x;
  for (const auto* m : {&u, &p.a_log, &p.x_proj, &p.dt_proj}) x.insert(x.end(), m->data(), m->data() + m->size());
  for (const auto* v : {&p.d_skip, &p.dt_bias}) x.insert(x.end(), v->data(), v->data() + v->size());
  return x;
}

void unpack(std::span<const double> x, MatrixD& u, SsmParams<double>& p) {
  std::size_t o = 0;
  for (auto* m : {&u, &p.a_log, &p.x_proj, &p.dt_proj}) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o), m->size(), m->data());
    o += static_cast<std::size_t>(m->size());
  }
  for (auto* v : {&p.d_skip, &p.dt_bias}) {
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o), v->size(), v->data());
    o += static_cast<std::size_t>(v->size());
  }
}

// ---------------------------------------------------------------- memory features

TemplateFeature random_feature(Rng& rng, int rows, int cols, int frame) {
  TemplateFeature z{MatrixF(rows, cols), frame};
  for (Eigen::Index i = 0; i < z.tokens.size(); ++i) z.tokens.data()[i] = static_cast<float>(rng.normal());
  return z;
}

// Mixture of a shared direction and noise: correlations spread over (-1, 1).
TemplateFeature correlated_feature(Rng& rng, const MatrixF& base, int frame) {
  TemplateFeature z = random_feature(rng, static_cast<int>(base.rows()), static_cast<int>(base.cols()), frame);
  const float w = static_cast<float>(rng.uniform(-1.5, 1.5));
  z.tokens += w * base;
  return z;
}

// Rows of an 8x8 Sylvester Hadamard matrix: zero-mean and mutually orthogonal
// apart from row 0.
TemplateFeature hadamard_feature(int row, int frame) {
  TemplateFeature z{MatrixF(2, 4), frame};
  for (int j = 0; j < 8; ++j) z.tokens.data()[j] = (std::popcount(static_cast<unsigned>(row & j)) % 2) ? -1.0f : 1.0f;
  return z;
}

std::string box_str(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

}  // namespace

// ================================================================ 1

CheckResult check_scan_equivalence(const AcceptanceOptions& opt) {
  const auto t0 = Clock::now();
  Rng rng(opt.seed + 1);
  double worst_f = 0.0, worst_d = 0.0;
  int cases = 0;
  for (int L : {1, 2, 64, 1024, 4096}) {
    for (int D : {1, 4, 16}) {
      for (int N : {1, 16}) {
        for (int chunk : {1, 7, 64, L}) {
          const ScanCase c = random_scan_case(rng, L, D, N);
          const MatrixD ref_d = selective_scan(c.u, c.in, c.a, c.d_skip);
          worst_d = std::max(worst_d, mat_rel_err(selective_scan_chunked(c.u, c.in, c.a, c.d_skip, chunk), ref_d));

          const MatrixF uf = c.u.cast<float>();
          const ScanInputs<float> inf{c.in.delta.cast<float>(), c.in.b.cast<float>(), c.in.c.cast<float>()};
          const MatrixF af = c.a.cast<float>();
          const VectorF df = c.d_skip.cast<float>();
          const MatrixF ref_f = selective_scan(uf, inf, af, df);
          worst_f = std::max(worst_f, mat_rel_err(selective_scan_chunked(uf, inf, af, df, chunk), ref_f));
          ++cases;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = worst_f < 1e-5 && worst_d < 1e-10 && secs < 60.0;
  return {ok, fmt("%d instances, max rel err f32 %.2e (<1e-5), f64 %.2e (<1e-10), %.1fs (<60s)", cases, worst_f,
                  worst_d, secs)};
}

// ================================================================ 2

CheckResult check_zoh(const AcceptanceOptions& opt) {
  Rng rng(opt.seed + 2);
  using R = long double;

  double closed_worst = 0.0;
  for (int i = 0; i < 20000; ++i) {
    const double mag = rng.log_uniform(kSeriesThreshold, 50.0);
    const double delta = rng.log_uniform(1e-3, 10.0);
    const double a = -mag / delta;
    const double b = rng.normal();
    const auto [ab, bb] = discretize(a, b, delta);
    const R u = static_cast<R>(delta) * a;
    if (std::abs(static_cast<double>(u)) < kSeriesThreshold) continue;  // rounding put it under the switch
    const R ab_ref = std::exp(u);
    const R bb_ref = std::expm1(u) / a * b;
    closed_worst = std::max(closed_worst, static_cast<double>(std::abs((ab - ab_ref) / ab_ref)));
    if (bb_ref != 0) closed_worst = std::max(closed_worst, static_cast<double>(std::abs((bb - bb_ref) / bb_ref)));
  }

  // Continuity across |delta * a| = threshold.
  double jump = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double delta = rng.log_uniform(1e-3, 10.0);
    const double b = rng.uniform(-10.0, 10.0);
    const double a_in = -kSeriesThreshold * (1.0 - 1e-9) / delta;
    const double a_out = -kSeriesThreshold * (1.0 + 1e-9) / delta;
    const double below = discretize(a_in, b, delta).b_bar;
    const double above = discretize(a_out, b, delta).b_bar;
    jump = std::max(jump, std::abs(below - above));
  }

  // a -> 0: b_bar = delta * b.
  double limit = 0.0;
  for (double a : {0.0, -1e-300, -1e-200, -1e-100, -1e-20}) {
    for (int i = 0; i < 100; ++i) {
      const double delta = rng.log_uniform(1e-3, 10.0);
      const double b = rng.normal();
      const double bb = discretize(a, b, delta).b_bar;
      limit = std::max(limit, std::abs(bb - delta * b) / std::abs(delta * b));
    }
  }

  const auto half = discretize(-1.0, 1.0, std::numbers::ln2);
  const double example = std::max(std::abs(half.a_bar - 0.5), std::abs(half.b_bar - 0.5));

  const bool ok = closed_worst < 1e-12 && jump < 1e-10 && limit < 1e-12 && example < 1e-15;
  return {ok, fmt("closed form rel %.1e (<1e-12), switch jump %.1e (<1e-10), a->0 rel %.1e (<1e-12), "
                  "ln2 example %.1e",
                  closed_worst, jump, limit, example)};
}

// ================================================================ 3

namespace {

double scan_gradient_case(Rng& rng) {
  const int L = rng.integer(1, 16), D = rng.integer(1, 4), N = rng.integer(1, 4), R = rng.integer(1, 3);
  SsmParams<double> p = SsmParams<double>::zeros(D, N, R);
  for (Eigen::Index i = 0; i < p.a_log.size(); ++i) p.a_log.data()[i] = rng.uniform(-1.0, 1.5);
  for (Eigen::Index i = 0; i < p.x_proj.size(); ++i) p.x_proj.data()[i] = 0.5 * rng.normal();
  for (Eigen::Index i = 0; i < p.dt_proj.size(); ++i) p.dt_proj.data()[i] = 0.5 * rng.normal();
  for (Eigen::Index i = 0; i < D; ++i) {
    p.d_skip(i) = rng.normal();
    p.dt_bias(i) = rng.uniform(-2.0, 0.5);
  }
  const MatrixD u0 = rng.normal(L, D);
  const MatrixD dy = rng.normal(L, D);
  const int checkpoint = std::array{1, 3, 64}[static_cast<std::size_t>(rng.integer(0, 2))];

  const ScanGradients<double> g = scan_backward(u0, p, dy, checkpoint);
  std::vector<double> analytic = pack(g.du, g.dparams);

  auto f = [&](std::span<const double> x) {
    MatrixD u = u0;
    SsmParams<double> q = p;
    unpack(x, u, q);
    return dy.cwiseProduct(scan_forward(u, q)).sum();
  };
  const std::vector<double> fd = oracle::central_difference(f, pack(u0, p), 1e-4);

  // Block-wise comparison so small blocks are not hidden by large ones.
  double worst = 0.0;
  std::size_t o = 0;
  for (Eigen::Index n : {u0.size(), p.a_log.size(), p.x_proj.size(), p.dt_proj.size(), p.d_skip.size(),
                         p.dt_bias.size()}) {
    const auto len = static_cast<std::size_t>(n);
    worst = std::max(worst, rel_err(std::span<const double>(analytic).subspan(o, len),
                                    std::span<const double>(fd).subspan(o, len)));
    o += len;
  }
  return worst;
}

struct LossCase {
  HeadMaps<double> maps;
  BBox gt;
};

bool away_from_kinks(const LossCase& c, int stride) {
  const MatrixD& s = c.maps.score;
  std::vector<double> v(s.data(), s.data() + s.size());
  std::sort(v.rbegin(), v.rend());
  if (v[0] - v[1] < 1e-2) return false;
  const Cell cell = score_argmax(s);
  const double side = static_cast<double>(stride) * s.cols();
  const BBox p{(cell.col + c.maps.offset[0](cell.row, cell.col)) * stride / side,
               (cell.row + c.maps.offset[1](cell.row, cell.col)) * stride / side, c.maps.size[0](cell.row, cell.col),
               c.maps.size[1](cell.row, cell.col)};
  const BBox g{c.gt.cx / side, c.gt.cy / side, c.gt.w / side, c.gt.h / side};
  const double m = 1e-3;
  for (double d : {p.cx - g.cx, p.cy - g.cy, p.w - g.w, p.h - g.h, p.left() - g.left(), p.right() - g.right(),
                   p.top() - g.top(), p.bottom() - g.bottom(), std::min(p.right(), g.right()) - std::max(p.left(), g.left()),
                   std::min(p.bottom(), g.bottom()) - std::max(p.top(), g.top())}) {
    if (std::abs(d) < m) return false;
  }
  return true;
}

double loss_gradient_case(Rng& rng) {
  constexpr int H = 4, W = 4, stride = 16;
  LossCase c;
  do {
    c.maps.score = MatrixD(H, W);
    for (Eigen::Index i = 0; i < c.maps.score.size(); ++i) c.maps.score.data()[i] = rng.uniform(0.05, 0.95);
    for (int k = 0; k < 2; ++k) {
      c.maps.offset[k] = MatrixD(H, W);
      c.maps.size[k] = MatrixD(H, W);
      for (Eigen::Index i = 0; i < H * W; ++i) {
        c.maps.offset[k].data()[i] = rng.uniform(0.0, 1.0);
        c.maps.size[k].data()[i] = rng.uniform(0.1, 0.8);
      }
    }
    const double side = stride * W;
    c.gt = {rng.uniform(0.2, 0.8) * side, rng.uniform(0.2, 0.8) * side, rng.uniform(0.1, 0.7) * side,
            rng.uniform(0.1, 0.7) * side};
  } while (!away_from_kinks(c, stride));

  const LossResult r = total_loss(c.maps, c.gt, stride);
  auto to_vec = [](const HeadMaps<double>& m) {
    std::vector<double> x;
    for (const MatrixD* p : {&m.score, &m.offset[0], &m.offset[1], &m.size[0], &m.size[1]}) {
      x.insert(x.end(), p->data(), p->data() + p->size());
    }
    return x;
  };
  auto f = [&](std::span<const double> x) {
    HeadMaps<double> m = c.maps;
    std::size_t o = 0;
    for (MatrixD* p : {&m.score, &m.offset[0], &m.offset[1], &m.size[0], &m.size[1]}) {
      std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(o), p->size(), p->data());
      o += static_cast<std::size_t>(p->size());
    }
    return total_loss(m, c.gt, stride).total;
  };
  const std::vector<double> analytic = to_vec(r.grad);
  const std::vector<double> fd = oracle::central_difference(f, to_vec(c.maps), 1e-4);
  return rel_err(std::span<const double>(analytic), std::span<const double>(fd));
}

}  // namespace

CheckResult check_gradients(const AcceptanceOptions& opt) {
  const auto t0 = Clock::now();
  Rng rng(opt.seed + 3);
  constexpr int kCases = 24;
  double scan_worst = 0.0, loss_worst = 0.0;
  for (int i = 0; i < kCases; ++i) scan_worst = std::max(scan_worst, scan_gradient_case(rng));
  for (int i = 0; i < kCases; ++i) loss_worst = std::max(loss_worst, loss_gradient_case(rng));
  const double secs = seconds_since(t0);
  const bool ok = scan_worst < 1e-4 && loss_worst < 1e-4 && secs < 120.0;
  return {ok, fmt("%d+%d instances, scan_backward rel %.1e, total_loss rel %.1e (<1e-4), %.1fs (<120s)", kCases,
                  kCases, scan_worst, loss_worst, secs)};
}

// ================================================================ 4

CheckResult check_param_counts(const AcceptanceOptions&) {
  TrackerConfig cfg;
  std::vector<std::int64_t> n;
  for (int L : {8, 16, 24, 32}) {
    cfg.depth = L;
    n.push_back(count_params(zero_model(cfg)));
  }
  const bool affine = n[1] - n[0] == n[2] - n[1] && n[2] - n[1] == n[3] - n[2];
  const double slope = static_cast<double>(n[3] - n[0]) / 24.0;
  const double slope_err = std::abs(slope - 1.044e6) / 1.044e6;
  const double total_err = std::abs(static_cast<double>(n[2]) - 29.30e6) / 29.30e6;

  cfg.depth = 24;
  cfg.memory_mode = MemoryMode::separate;
  const Model sep = zero_model(cfg);
  const std::int64_t n_sep = count_params(sep);
  const bool one_backbone = n_sep - n[2] == count_params(sep.backbone);
  const double sep_err = std::abs(static_cast<double>(n_sep) - 54.7e6) / 54.7e6;

  const bool ok = affine && slope_err < 0.02 && total_err < 0.10 && one_backbone && sep_err < 0.15;
  return {ok, fmt("L=8/16/24/32: %.2f/%.2f/%.2f/%.2fM (table 12.60/20.96/29.30/37.65), slope %.4fM (%.2f%%), "
                  "L=24 off %.1f%%, separate %.2fM (off %.1f%% of 54.7M)%s",
                  n[0] / 1e6, n[1] / 1e6, n[2] / 1e6, n[3] / 1e6, slope / 1e6, 100 * slope_err, 100 * total_err,
                  n_sep / 1e6, 100 * sep_err, affine && one_backbone ? "" : ", structure mismatch")};
}

// ================================================================ 5

CheckResult check_memory_oracles(const AcceptanceOptions& opt) {
  Rng rng(opt.seed + 5);
  std::vector<std::string> failures;

  // Closed forms.
  {
    std::vector<TemplateFeature> same(4, random_feature(rng, 2, 4, 0));
    std::vector<TemplateFeature> ortho, equi;
    for (int r = 1; r <= 5; ++r) ortho.push_back(hadamard_feature(r, r));
    for (int r = 2; r <= 4; ++r) {
      TemplateFeature z = hadamard_feature(1, r);
      z.tokens += hadamard_feature(r, r).tokens;
      equi.push_back(z);
    }
    const double d_same = gram_det(same), d_ortho = gram_det(ortho), d_equi = gram_det(equi);
    if (std::abs(d_same) > 1e-12) failures.push_back(fmt("identical det %.3g", d_same));
    if (std::abs(d_ortho - 1.0) > 1e-12) failures.push_back(fmt("orthogonal det %.17g", d_ortho));
    if (std::abs(d_equi - 0.5) > 1e-12) failures.push_back(fmt("rho=0.5 det %.17g", d_equi));
  }

  // lt_admit against exhaustive enumeration.
  int admit_mismatch = 0, accepted = 0;
  for (int s = 0; s < 1000; ++s) {
    const int n = rng.integer(2, 8);
    const MatrixF base = random_feature(rng, 4, 4, 0).tokens;
    std::vector<TemplateFeature> lt;
    for (int i = 0; i < n; ++i) lt.push_back(correlated_feature(rng, base, i));
    TemplateFeature z = rng.integer(0, 9) == 0 ? lt[static_cast<std::size_t>(rng.integer(0, n - 1))]
                                               : correlated_feature(rng, base, n);
    z.frame_index = n;
    const oracle::Admission want = oracle::lt_admit(lt, z);
    auto lib = MemoryLibrary::from_contents({n, 6, 5}, lt, {});
    const AdmissionRecord got = lib.lt_admit(z);
    const bool same = got.accepted == want.accepted && (!got.accepted || got.replaced_index == want.replaced_index);
    admit_mismatch += !same;
    accepted += got.accepted;
  }
  if (admit_mismatch) failures.push_back(fmt("lt_admit mismatches %d/1000", admit_mismatch));

  // Monotone det(LT).
  int decreases = 0;
  {
    const MatrixF base = random_feature(rng, 8, 8, 0).tokens;
    std::vector<TemplateFeature> lt;
    for (int i = 0; i < 16; ++i) lt.push_back(correlated_feature(rng, base, i));
    auto lib = MemoryLibrary::from_contents({16, 6, 5}, lt, {});
    double prev = lib.lt_det();
    for (int step = 0; step < 10000; ++step) {
      if (auto rec = lib.st_push(correlated_feature(rng, base, 16 + step))) {
        decreases += rec->det_after < rec->det_before;
      }
      decreases += lib.lt_det() < prev || lib.lt_det() < -1e-9;
      prev = lib.lt_det();
    }
    const double fresh = gram_det(lib.long_term());
    if (std::abs(fresh - lib.lt_det()) > 1e-9 * std::max(1.0, std::abs(fresh))) {
      failures.push_back(fmt("cached det %.6g vs recomputed %.6g", lib.lt_det(), fresh));
    }
  }
  if (decreases) failures.push_back(fmt("det decreased %d times", decreases));

  // route against brute-force argmax.
  int route_mismatch = 0, routed_lt = 0;
  for (int s = 0; s < 1000; ++s) {
    const MatrixF base = random_feature(rng, 4, 4, 0).tokens;
    std::vector<TemplateFeature> lt;
    std::deque<TemplateFeature> st;
    const int n_lt = rng.integer(1, 16), n_st = rng.integer(1, 6);
    for (int i = 0; i < n_lt; ++i) lt.push_back(correlated_feature(rng, base, i));
    for (int i = 0; i < n_st; ++i) st.push_back(correlated_feature(rng, base, n_lt + i));
    TemplateFeature in;
    switch (rng.integer(0, 3)) {
      case 0: in = lt[static_cast<std::size_t>(rng.integer(0, n_lt - 1))]; break;
      case 1: in = st[static_cast<std::size_t>(rng.integer(0, n_st - 1))]; break;
      default: in = correlated_feature(rng, base, 99); break;
    }
    const auto lib = MemoryLibrary::from_contents({16, 6, 5}, lt, st);
    const Library got = lib.route(in);
    const Library want = oracle::route(lt, {st.begin(), st.end()}, in);
    route_mismatch += got != want;
    routed_lt += got == Library::long_term;
  }
  if (route_mismatch) failures.push_back(fmt("route mismatches %d/1000", route_mismatch));

  std::string detail = fmt("closed forms, 1000 lt_admit states (%d accepted), 10000 det steps, 1000 route states "
                           "(%d to LT)",
                           accepted, routed_lt);
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// ================================================================ 6

CheckResult check_pearson(const AcceptanceOptions& opt) {
  Rng rng(opt.seed + 6);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const int n = rng.integer(3, 256);
    std::vector<double> a(static_cast<std::size_t>(n)), b(a.size()), neg(a.size()), t(a.size());
    for (auto& v : a) v = rng.normal();
    const double mix = rng.uniform(-1.0, 1.0);
    for (std::size_t k = 0; k < b.size(); ++k) b[k] = mix * a[k] + rng.normal();
    const double alpha = (rng.integer(0, 1) ? 1.0 : -1.0) * rng.log_uniform(1e-3, 1e3);
    const double beta = rng.uniform(-100.0, 100.0);
    for (std::size_t k = 0; k < a.size(); ++k) {
      neg[k] = -a[k];
      t[k] = alpha * a[k] + beta;
    }
    const double ab = pearson(std::span<const double>(a), b);
    worst = std::max({worst, std::abs(ab - pearson(std::span<const double>(b), a)),
                      std::abs(pearson(std::span<const double>(a), a) - 1.0),
                      std::abs(pearson(std::span<const double>(a), neg) + 1.0),
                      std::abs(pearson(std::span<const double>(t), b) - std::copysign(1.0, alpha) * ab),
                      std::abs(ab - static_cast<double>(oracle::pearson(std::span<const double>(a), b)))});
  }
  return {worst < 1e-10, fmt("100 random vector pairs, max deviation %.1e (<1e-10)", worst)};
}

// ================================================================ 7

CheckResult check_giou(const AcceptanceOptions& opt) {
  Rng rng(opt.seed + 7);
  auto random_box = [&rng] {
    return BBox{rng.uniform(-50, 50), rng.uniform(-50, 50), rng.log_uniform(0.5, 60), rng.log_uniform(0.5, 60)};
  };
  double ident = 0.0;
  for (int i = 0; i < 100; ++i) {
    const BBox b = random_box();
    ident = std::max(ident, std::abs(giou(b, b) - 1.0));
  }
  const double disjoint = giou({0.5, 0.5, 1.0, 1.0}, {1.5, 0.5, 1.0, 1.0});

  double above = 0.0, invariance = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const BBox a = random_box(), b = random_box();
    const double g = giou(a, b);
    above = std::max(above, g - iou(a, b));
    const double dx = rng.uniform(-1000, 1000), dy = rng.uniform(-1000, 1000);
    const double s = rng.log_uniform(0.01, 100);
    const BBox at{a.cx + dx, a.cy + dy, a.w, a.h}, bt{b.cx + dx, b.cy + dy, b.w, b.h};
    const BBox as{a.cx * s, a.cy * s, a.w * s, a.h * s}, bs{b.cx * s, b.cy * s, b.w * s, b.h * s};
    invariance = std::max({invariance, std::abs(giou(at, bt) - g), std::abs(giou(as, bs) - g)});
  }
  const bool ok = ident == 0.0 && disjoint == 0.0 && above <= 0.0 && invariance < 1e-9;
  return {ok, fmt("identity dev %.1e, disjoint unit boxes %.17g, max(giou-iou) %.1e over 10000 pairs, "
                  "translation/scale dev %.1e (<1e-9)",
                  ident, disjoint, above, invariance)};
}

// ================================================================ 8

CheckResult check_loss_weighting(const AcceptanceOptions&) {
  const LossWeights w;
  const double total = combine({0.1, 0.2, 0.3}, w);
  const bool ok = w.l1 == 5.0 && w.focal == 1.0 && w.giou == 2.0 && total == 1.3;
  return {ok, fmt("weights (%g, %g, %g), combine(0.1, 0.2, 0.3) = %.17g", w.l1, w.focal, w.giou, total)};
}

// ================================================================ 9

CheckResult check_shapes_cadence(const AcceptanceOptions& opt) {
  std::vector<std::string> failures;
  const TrackerConfig cfg;
  const Model model = random_model(cfg, opt.seed);

  EventFrame frame{Image3(260, 346), 0, cfg.window_us};
  const BBox box{170, 130, 40, 30};
  const TemplateFeature z = template_feature(frame, box, cfg, model.embed, 0);
  const RegionPatch search = crop_region(frame, box, cfg.search_context, cfg.search_size);
  const TokenSeq seq = assemble_input(TokenSeq::single(z.tokens, Segment::static_template),
                                      TokenSeq::single(z.tokens, Segment::dynamic_template),
                                      embed_search(search, model.embed));
  const std::vector<int> counts{seq.count(Segment::static_template), seq.count(Segment::dynamic_template),
                                seq.count(Segment::search)};
  if (counts != std::vector<int>{64, 64, 256}) failures.push_back("token counts " + box_str(counts));

  const HeadOutputs maps = head_forward(extract_search_tokens(seq), model.head);
  if (maps.height() != 16 || maps.width() != 16) failures.push_back(fmt("head %dx%d", maps.height(), maps.width()));

  Rng rng(opt.seed + 9);
  std::vector<TemplateFeature> mem;
  for (int m = 1; m <= 16; ++m) {
    TemplateFeature t = z;
    t.tokens += 0.1f * rng.normal(z.tokens.rows(), z.tokens.cols()).cast<float>();
    t.frame_index = m;
    mem.push_back(t);
    const MatrixF e_d = fuse(mem, model.backbone);
    if (e_d.rows() != 64 || e_d.cols() != cfg.embed_dim) {
      failures.push_back(fmt("E_d for m=%d is %ldx%ld", m, static_cast<long>(e_d.rows()), static_cast<long>(e_d.cols())));
    }
  }

  // Cadence and determinism on a narrow model with the default geometry.
  TrackerConfig small = cfg;
  small.embed_dim = 32;
  small.depth = 2;
  small.dt_rank = 2;
  SynthConfig sc;
  sc.window_us = small.window_us;
  sc.duration_us = 100 * small.window_us;
  const SynthSequence seqs = synth_stream(sc);
  const Model tiny = random_model(small, opt.seed);
  const BBox init = seqs.ground_truth.front();
  const TrackResult r1 = track_sequence(small, tiny, seqs.stream, init);
  const TrackResult r2 = track_sequence(small, tiny, seqs.stream, init);
  if (r1.boxes.size() != 100) failures.push_back(fmt("%zu frames", r1.boxes.size()));
  if (r1.memory_updates != 19) failures.push_back(fmt("%d memory updates", r1.memory_updates));
  if (r1.regenerations != 19) failures.push_back(fmt("%d regenerations", r1.regenerations));
  if (r1.boxes != r2.boxes) failures.push_back("runs differ");

  std::string detail = fmt("tokens %s, head %dx%d, E_d 64x%d for m=1..16, %zu frames -> %d updates, "
                           "deterministic %s",
                           box_str(counts).c_str(), maps.height(), maps.width(), cfg.embed_dim, r1.boxes.size(),
                           r1.memory_updates, r1.boxes == r2.boxes ? "yes" : "no");
  for (const auto& f : failures) detail += "; " + f;
  return {failures.empty(), detail};
}

// ================================================================ 10

CheckResult check_metrics(const AcceptanceOptions& opt) {
  Rng rng(opt.seed + 10);
  std::vector<BBox> gt;
  for (int i = 0; i < 50; ++i) gt.push_back({rng.uniform(50, 300), rng.uniform(50, 200), rng.uniform(5, 80), rng.uniform(5, 80)});
  const TrackingScores perfect = evaluate(gt, gt);
  const bool perfect_ok = perfect.success == 1.0 && perfect.precision == 1.0 && perfect.normalized_precision == 1.0;

  double worst = 0.0;
  for (int c = 0; c < 200; ++c) {
    std::vector<BBox> g, p;
    for (int i = 0; i < 50; ++i) {
      const BBox b{rng.uniform(50, 300), rng.uniform(50, 200), rng.uniform(5, 80), rng.uniform(5, 80)};
      const double spread = rng.log_uniform(0.1, 100);
      g.push_back(b);
      p.push_back({b.cx + spread * rng.normal(), b.cy + spread * rng.normal(), b.w * rng.log_uniform(0.5, 2),
                   b.h * rng.log_uniform(0.5, 2)});
    }
    const TrackingScores s = evaluate(p, g);
    const oracle::Tally t = oracle::tally(p, g);
    worst = std::max({worst, std::abs(s.success - t.sr), std::abs(s.precision - t.pr),
                      std::abs(s.normalized_precision - t.npr)});
  }
  return {perfect_ok && worst < 1e-12,
          fmt("perfect (%g, %g, %g); 200 random 50-frame cases, max diff vs tally %.1e (<1e-12)", perfect.success,
              perfect.precision, perfect.normalized_precision, worst)};
}

// ================================================================ 11

std::vector<ScanBenchRow> bench_scan(const ScanBenchConfig& config) {
  Rng rng(config.seed);
  std::vector<ScanBenchRow> rows;
  for (int L : config.lengths) {
    const ScanCase c = random_scan_case(rng, L, config.d_inner, config.d_state);
    const MatrixF u = c.u.cast<float>();
    const ScanInputs<float> in{c.in.delta.cast<float>(), c.in.b.cast<float>(), c.in.c.cast<float>()};
    const MatrixF a = c.a.cast<float>();
    const VectorF d = c.d_skip.cast<float>();
    double best_seq = 1e300, best_chk = 1e300;
    float sink = 0.0f;
    for (int r = 0; r < std::max(config.repeats, 1); ++r) {
      auto t0 = Clock::now();
      sink += selective_scan(u, in, a, d)(0, 0);
      best_seq = std::min(best_seq, seconds_since(t0));
      t0 = Clock::now();
      sink += selective_scan_chunked(u, in, a, d, config.chunk)(0, 0);
      best_chk = std::min(best_chk, seconds_since(t0));
    }
    if (!std::isfinite(sink)) throw Error(ErrorCode::non_finite, "benchmark produced non-finite output");
    rows.push_back({L, L / best_seq, L / best_chk});
  }
  return rows;
}

CheckResult check_throughput(const AcceptanceOptions& opt) {
  ScanBenchConfig bc;
  bc.seed = opt.seed + 11;
  const auto rows = bench_scan(bc);
  bool ok = true;
  std::string detail = fmt("d_inner %d, d_state %d, chunk %d:", bc.d_inner, bc.d_state, bc.chunk);
  for (const auto& r : rows) {
    ok = ok && r.speedup() >= 1.0;
    detail += fmt(" L=%d %.0f vs %.0f tok/s (x%.2f)", r.length, r.sequential_tokens_per_s, r.chunked_tokens_per_s,
                  r.speedup());
  }
  return {ok, detail};
}

// ================================================================ runner

const std::vector<Criterion>& acceptance_criteria() {
  static const std::vector<Criterion> list{
      {1, "scan-oracle equivalence", check_scan_equivalence},
      {2, "ZOH correctness", check_zoh},
      {3, "gradient checks", check_gradients},
      {4, "parameter counts", check_param_counts},
      {5, "Gram/memory oracle suite", check_memory_oracles},
      {6, "Pearson properties", check_pearson},
      {7, "GIoU properties", check_giou},
      {8, "loss weighting", check_loss_weighting},
      {9, "shape/cadence contract", check_shapes_cadence},
      {10, "metric sanity", check_metrics},
      {11, "scan throughput", check_throughput},
  };
  return list;
}

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& opt, int only,
                                            const std::function<void(const CriterionResult&)>& on_done) {
  std::vector<CriterionResult> out;
  for (const Criterion& c : acceptance_criteria()) {
    if (only != 0 && c.id != only) continue;
    CriterionResult r{c.id, c.name, false, "", 0.0};
    const auto t0 = Clock::now();
    try {
      const CheckResult cr = c.run(opt);
      r.passed = cr.passed;
      r.detail = cr.detail;
    } catch (const std::exception& e) {
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = seconds_since(t0);
    if (on_done) on_done(r);
    out.push_back(std::move(r));
  }
  return out;
}

std::string format_result(const CriterionResult& r) {
  return fmt("%s %2d %-26s %6.1fs  ", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.seconds) + r.detail;
}

}  // namespace mevt
