#include "mevt/oracles.hpp"

#include <algorithm>
#include <cmath>

namespace mevt::oracle {

namespace {

Real softplus(Real x) { return x > 40 ? x : std::log1p(std::exp(x)); }

template <typename T>
Real pearson_impl(std::span<const T> a, std::span<const T> b) {
  const std::size_t n = a.size();
  bool same = true;
  for (std::size_t i = 0; i < n; ++i) same = same && a[i] == b[i];
  if (same) return 1;
  Real ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  Real sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const Real da = a[i] - ma, db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa == 0 || sbb == 0) return 0;
  return std::clamp<Real>(sab / std::sqrt(saa * sbb), -1, 1);
}

std::span<const float> flat(const TemplateFeature& z) {
  return {z.tokens.data(), static_cast<std::size_t>(z.tokens.size())};
}

Real gram_det_with(const std::vector<const TemplateFeature*>& set) {
  const std::size_t n = set.size();
  std::vector<std::vector<Real>> g(n, std::vector<Real>(n));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) g[i][j] = pearson(flat(*set[i]), flat(*set[j]));
  }
  return determinant(std::move(g));
}

}  // namespace

MatrixD scan(const MatrixD& u, const ScanInputs<double>& in, const MatrixD& a, const VectorD& d_skip) {
  const auto L = u.rows(), D = u.cols(), N = a.cols();
  MatrixD y(L, D);
  std::vector<Real> h(static_cast<std::size_t>(D * N), 0);
  for (Eigen::Index t = 0; t < L; ++t) {
    for (Eigen::Index d = 0; d < D; ++d) {
      const Real x = u(t, d);
      const Real dt = in.delta(t, d);
      Real acc = static_cast<Real>(d_skip(d)) * x;
      for (Eigen::Index n = 0; n < N; ++n) {
        const Real an = a(d, n);
        const Real bn = in.b(t, n);
        const Real a_bar = std::exp(dt * an);
        const Real b_bar = an == 0 ? dt * bn : std::expm1(dt * an) / an * bn;
        Real& hs = h[static_cast<std::size_t>(d * N + n)];
        hs = a_bar * hs + b_bar * x;
        acc += static_cast<Real>(in.c(t, n)) * hs;
      }
      y(t, d) = static_cast<double>(acc);
    }
  }
  return y;
}

MatrixD scan_forward(const MatrixD& u, const SsmParams<double>& p) {
  const auto L = u.rows(), D = u.cols();
  const auto R = p.dt_proj.rows(), N = p.a_log.cols();
  ScanInputs<double> in{MatrixD(L, D), MatrixD(L, N), MatrixD(L, N)};
  std::vector<Real> proj(static_cast<std::size_t>(R + 2 * N));
  for (Eigen::Index t = 0; t < L; ++t) {
    for (Eigen::Index k = 0; k < R + 2 * N; ++k) {
      Real s = 0;
      for (Eigen::Index d = 0; d < D; ++d) s += static_cast<Real>(u(t, d)) * p.x_proj(d, k);
      proj[static_cast<std::size_t>(k)] = s;
    }
    for (Eigen::Index d = 0; d < D; ++d) {
      Real z = p.dt_bias(d);
      for (Eigen::Index r = 0; r < R; ++r) z += proj[static_cast<std::size_t>(r)] * p.dt_proj(r, d);
      in.delta(t, d) = static_cast<double>(softplus(z));
    }
    for (Eigen::Index n = 0; n < N; ++n) {
      in.b(t, n) = static_cast<double>(proj[static_cast<std::size_t>(R + n)]);
      in.c(t, n) = static_cast<double>(proj[static_cast<std::size_t>(R + N + n)]);
    }
  }
  MatrixD a(p.a_log.rows(), N);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = -std::exp(p.a_log.data()[i]);
  return scan(u, in, a, p.d_skip);
}

Real pearson(std::span<const double> a, std::span<const double> b) { return pearson_impl(a, b); }
Real pearson(std::span<const float> a, std::span<const float> b) { return pearson_impl(a, b); }

Real determinant(std::vector<std::vector<Real>> m) {
  const std::size_t n = m.size();
  Real det = 1;
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    for (std::size_t r = col + 1; r < n; ++r) {
      if (std::abs(m[r][col]) > std::abs(m[piv][col])) piv = r;
    }
    if (m[piv][col] == 0) return 0;
    if (piv != col) {
      std::swap(m[piv], m[col]);
      det = -det;
    }
    det *= m[col][col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const Real f = m[r][col] / m[col][col];
      for (std::size_t c = col; c < n; ++c) m[r][c] -= f * m[col][c];
    }
  }
  return det;
}

Admission lt_admit(const std::vector<TemplateFeature>& lt, const TemplateFeature& z) {
  std::vector<const TemplateFeature*> set;
  for (const auto& m : lt) set.push_back(&m);
  const Real current = gram_det_with(set);
  Admission out;
  Real best = 0;
  for (std::size_t j = 0; j < lt.size(); ++j) {
    auto trial = set;
    trial[j] = &z;
    const Real d = gram_det_with(trial);
    if (out.replaced_index < 0 || d > best) {
      best = d;
      out.replaced_index = static_cast<int>(j);
    }
  }
  if (!(best > current)) return {};
  out.accepted = true;
  return out;
}

Library route(const std::vector<TemplateFeature>& lt, const std::vector<TemplateFeature>& st,
              const TemplateFeature& incoming) {
  Real best = -2;
  Library lib = Library::short_term;
  // ST first so that an exact tie keeps ST.
  for (const auto& m : st) {
    const Real r = pearson(flat(incoming), flat(m));
    if (r > best) best = r;
  }
  for (const auto& m : lt) {
    const Real r = pearson(flat(incoming), flat(m));
    if (r > best) {
      best = r;
      lib = Library::long_term;
    }
  }
  return lib;
}

Tally tally(std::span<const BBox> pred, std::span<const BBox> gt) {
  const std::size_t n = pred.size();
  std::vector<int> success(21, 0), normalized(21, 0);
  int precise = 0;
  for (std::size_t f = 0; f < n; ++f) {
    const BBox& p = pred[f];
    const BBox& g = gt[f];
    const double x1 = std::max(p.cx - p.w / 2, g.cx - g.w / 2);
    const double x2 = std::min(p.cx + p.w / 2, g.cx + g.w / 2);
    const double y1 = std::max(p.cy - p.h / 2, g.cy - g.h / 2);
    const double y2 = std::min(p.cy + p.h / 2, g.cy + g.h / 2);
    const double inter = (x2 > x1 && y2 > y1) ? (x2 - x1) * (y2 - y1) : 0.0;
    const double pw = (p.cx + p.w / 2) - (p.cx - p.w / 2), ph = (p.cy + p.h / 2) - (p.cy - p.h / 2);
    const double gw = (g.cx + g.w / 2) - (g.cx - g.w / 2), gh = (g.cy + g.h / 2) - (g.cy - g.h / 2);
    const double overlap = inter / (pw * ph + gw * gh - inter);
    const double ex = p.cx - g.cx, ey = p.cy - g.cy;
    if (std::sqrt(ex * ex + ey * ey) <= 20.0) ++precise;
    const double nx = ex / g.w, ny = ey / g.h;
    const double ne = std::sqrt(nx * nx + ny * ny);
    for (int k = 0; k <= 20; ++k) {
      if (overlap >= k / 20.0) ++success[k];
      if (ne <= k / 40.0) ++normalized[k];
    }
  }
  Tally t;
  if (n == 0) return t;
  for (int k = 0; k <= 20; ++k) {
    t.sr += static_cast<double>(success[k]) / n;
    t.npr += static_cast<double>(normalized[k]) / n;
  }
  t.sr /= 21;
  t.npr /= 21;
  t.pr = static_cast<double>(precise) / n;
  return t;
}

double focal_sum(const MatrixD& score, const MatrixD& target) {
  Real sum = 0;
  int positives = 0;
  for (Eigen::Index i = 0; i < score.rows(); ++i) {
    for (Eigen::Index j = 0; j < score.cols(); ++j) {
      Real s = score(i, j);
      s = std::min<Real>(std::max<Real>(s, 1e-7L), 1 - 1e-7L);
      const Real t = target(i, j);
      if (t == 1) {
        ++positives;
        sum -= (1 - s) * (1 - s) * std::log(s);
      } else {
        const Real w = (1 - t) * (1 - t) * (1 - t) * (1 - t);
        sum -= w * s * s * std::log(1 - s);
      }
    }
  }
  return static_cast<double>(sum / std::max(positives, 1));
}

std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> x, double step) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + step;
    const double fp = f(x);
    x[i] = x0 - step;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace mevt::oracle
