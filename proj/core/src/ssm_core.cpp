#include "mevt/ssm_core.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <type_traits>

namespace mevt {

namespace {

template <typename T>
using Array2 = Eigen::Array<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using ArrayRow = Eigen::Array<T, 1, Eigen::Dynamic>;

// (e^u - 1) / u truncated after the cubic term.
template <typename T>
T phi_series(T u) {
  return T(1) + u * (T(0.5) + u * (T(1) / T(6) + u * (T(1) / T(24))));
}

// d/da of (e^{delta a} - 1) / a, divided by delta^2: (u e^u - e^u + 1) / u^2.
template <typename T>
T psi(T u) {
  if (std::abs(u) < T(1e-2)) {
    return T(0.5) + u * (T(1) / T(3) + u * (T(1) / T(8) + u * (T(1) / T(30) +
           u * (T(1) / T(144) + u * (T(1) / T(840) + u * (T(1) / T(5760)))))));
  }
  return (u * std::exp(u) - std::expm1(u)) / (u * u);
}

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

template <typename T>
void check_scan_shapes(const Matrix<T>& u, const ScanInputs<T>& in, const Matrix<T>& a,
                       const Vector<T>& d_skip) {
  const auto L = u.rows();
  const auto d = u.cols();
  if (in.delta.rows() != L || in.delta.cols() != d || a.rows() != d || d_skip.size() != d ||
      in.b.rows() != L || in.c.rows() != L || in.b.cols() != a.cols() || in.c.cols() != a.cols()) {
    throw Error(ErrorCode::shape_mismatch, "selective scan operand shapes disagree");
  }
  if (!all_finite(u)) throw Error(ErrorCode::non_finite, "non-finite scan input");
}

template <typename T>
Matrix<T> delta_logits(const Matrix<T>& u, const SsmParams<T>& p, Matrix<T>* proj_out) {
  Matrix<T> proj = u * p.x_proj;
  Matrix<T> z = proj.leftCols(p.dt_rank()) * p.dt_proj;
  z.rowwise() += p.dt_bias.transpose();
  if (proj_out) *proj_out = std::move(proj);
  return z;
}

}  // namespace

template <typename T>
SsmParams<T> SsmParams<T>::zeros(int d_inner, int d_state, int dt_rank) {
  return {Matrix<T>::Zero(d_inner, d_state), Vector<T>::Zero(d_inner),
          Matrix<T>::Zero(d_inner, dt_rank + 2 * d_state), Matrix<T>::Zero(dt_rank, d_inner),
          Vector<T>::Zero(d_inner)};
}

template <typename T>
SsmParams<T> SsmParams<T>::random(int d_inner, int d_state, int dt_rank, std::mt19937_64& rng) {
  SsmParams p = zeros(d_inner, d_state, dt_rank);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double x_bound = 1.0 / std::sqrt(static_cast<double>(d_inner));
  const double dt_bound = 1.0 / std::sqrt(static_cast<double>(std::max(dt_rank, 1)));
  for (int d = 0; d < d_inner; ++d) {
    for (int n = 0; n < d_state; ++n) p.a_log(d, n) = static_cast<T>(std::log(n + 1.0));
    p.d_skip(d) = T(1);
    const double dt = std::exp(std::log(1e-3) + unit(rng) * (std::log(1e-1) - std::log(1e-3)));
    p.dt_bias(d) = static_cast<T>(dt + std::log(-std::expm1(-dt)));  // inverse softplus
  }
  for (Eigen::Index i = 0; i < p.x_proj.size(); ++i) {
    p.x_proj.data()[i] = static_cast<T>((2.0 * unit(rng) - 1.0) * x_bound);
  }
  for (Eigen::Index i = 0; i < p.dt_proj.size(); ++i) {
    p.dt_proj.data()[i] = static_cast<T>((2.0 * unit(rng) - 1.0) * dt_bound);
  }
  return p;
}

template <typename T>
void SsmParams<T>::validate() const {
  const auto d = a_log.rows();
  const auto n = a_log.cols();
  const auto r = dt_proj.rows();
  if (d_skip.size() != d || x_proj.rows() != d || x_proj.cols() != r + 2 * n ||
      dt_proj.cols() != d || dt_bias.size() != d) {
    throw Error(ErrorCode::shape_mismatch, "inconsistent SSM parameter shapes");
  }
}

template <typename T>
Discretized<T> discretize(T a, T b, T delta) {
  const T u = delta * a;
  const T a_bar = std::exp(u);
  if (std::abs(u) < T(kSeriesThreshold)) {
    return {a_bar, delta * phi_series(u) * b};
  }
  return {a_bar, std::expm1(u) / a * b};
}

template <typename T>
T softplus(T x) {
  return x > T(20) ? x : std::log1p(std::exp(x));
}

template <typename T>
ScanInputs<T> select_inputs(const Matrix<T>& u, const SsmParams<T>& p) {
  p.validate();
  if (u.cols() != p.d_inner()) throw Error(ErrorCode::shape_mismatch, "scan input width != d_inner");
  if (!all_finite(u)) throw Error(ErrorCode::non_finite, "non-finite scan input");
  Matrix<T> proj;
  Matrix<T> z = delta_logits(u, p, &proj);
  ScanInputs<T> in;
  in.delta = z.unaryExpr([](T v) { return softplus(v); });
  in.b = proj.middleCols(p.dt_rank(), p.d_state());
  in.c = proj.rightCols(p.d_state());
  return in;
}

template <typename T>
Matrix<T> selective_scan(const Matrix<T>& u, const ScanInputs<T>& in, const Matrix<T>& a,
                         const Vector<T>& d_skip) {
  check_scan_shapes(u, in, a, d_skip);
  const Eigen::Index L = u.rows();
  const Eigen::Index D = u.cols();
  const Eigen::Index N = a.cols();
  Matrix<T> y(L, D);
  Matrix<T> h = Matrix<T>::Zero(D, N);
  for (Eigen::Index t = 0; t < L; ++t) {
    for (Eigen::Index d = 0; d < D; ++d) {
      const T x = u(t, d);
      const T dt = in.delta(t, d);
      T acc = d_skip(d) * x;
      for (Eigen::Index n = 0; n < N; ++n) {
        const auto [a_bar, b_bar] = discretize(a(d, n), in.b(t, n), dt);
        h(d, n) = a_bar * h(d, n) + b_bar * x;
        acc += in.c(t, n) * h(d, n);
      }
      y(t, d) = acc;
    }
  }
  return y;
}

template <typename T>
Matrix<T> selective_scan_chunked(const Matrix<T>& u, const ScanInputs<T>& in, const Matrix<T>& a,
                                 const Vector<T>& d_skip, int chunk) {
  if (chunk < 1) throw Error(ErrorCode::invalid_argument, "chunk must be >= 1");
  check_scan_shapes(u, in, a, d_skip);
  const Eigen::Index L = u.rows();
  const Eigen::Index D = u.cols();
  const Eigen::Index N = a.cols();
  const Eigen::Index DN = D * N;
  const Eigen::Index K = std::min<Eigen::Index>(chunk, std::max<Eigen::Index>(L, 1));

  const Eigen::Map<const ArrayRow<T>> a_flat(a.data(), DN);
  const T* a_ptr = a.data();
  // Working rows stay O(d_inner * d_state) so they remain cache resident.
  ArrayRow<T> v(DN), e(DN), lg(DN), bx(DN), dt_row(DN), x_row(DN), b_row(DN);
  // For float, exp is taken in double; float rounding bias in e compounds over
  // long sequences. e - 1 in double is then accurate enough to skip Kahan's log.
  constexpr bool widen = std::is_same_v<T, float>;
  ArrayRow<double> e_wide(widen ? DN : 0);
  ArrayRow<T> carry = ArrayRow<T>::Zero(DN);
  ArrayRow<T> local(DN), prod(DN), h(DN);
  Matrix<T> y(L, D);

  for (Eigen::Index t0 = 0; t0 < L; t0 += K) {
    const Eigen::Index len = std::min(K, L - t0);
    local.setZero();
    prod.setOnes();
    for (Eigen::Index t = t0; t < t0 + len; ++t) {
      for (Eigen::Index d = 0; d < D; ++d) {
        dt_row.segment(d * N, N).setConstant(in.delta(t, d));
        x_row.segment(d * N, N).setConstant(u(t, d));
        b_row.segment(d * N, N) = in.b.row(t).array();
      }
      v = a_flat * dt_row;
      if constexpr (widen) {
        e_wide = v.template cast<double>().exp();
        e = e_wide.template cast<T>();
        lg = (e_wide - 1.0).template cast<T>();  // holds e - 1
      } else {
        e = v.exp();
        lg = e.log();
      }
      // Both branches are evaluated and blended so the loop vectorizes.
      const T* vp = v.data();
      const T* ep = e.data();
      const T* lp = lg.data();
      const T* dp = dt_row.data();
      const T* xp = x_row.data();
      const T* bp = b_row.data();
      T* out = bx.data();
      for (Eigen::Index i = 0; i < DN; ++i) {
        const T vn = vp[i];
        const T av = std::abs(vn);
        const T kahan = (ep[i] - T(1)) * vn / lp[i];  // expm1 near zero
        const T em1 = widen ? lp[i] : av > T(0.5) ? ep[i] - T(1) : kahan;
        const T closed = em1 / a_ptr[i];
        const T ser = dp[i] * (T(1) + vn * (T(0.5) + vn * (T(1) / T(6) + vn * (T(1) / T(24)))));
        out[i] = (av < T(kSeriesThreshold) ? ser : closed) * bp[i] * xp[i];
      }
      // Local scan from zero, composed with the carried state.
      local = e * local + bx;
      prod *= e;
      h = prod * carry + local;
      const Eigen::Map<const Matrix<T>> h_mat(h.data(), D, N);
      y.row(t).noalias() = (h_mat * in.c.row(t).transpose()).transpose();
      y.row(t).array() += d_skip.transpose().array() * u.row(t).array();
    }
    carry = h;
  }
  return y;
}

template <typename T>
Matrix<T> scan_forward(const Matrix<T>& u, const SsmParams<T>& params) {
  return selective_scan(u, select_inputs(u, params), params.a(), params.d_skip);
}

template <typename T>
Matrix<T> scan_forward_chunked(const Matrix<T>& u, const SsmParams<T>& params, int chunk) {
  return selective_scan_chunked(u, select_inputs(u, params), params.a(), params.d_skip, chunk);
}

template <typename T>
ScanGradients<T> scan_backward(const Matrix<T>& u, const SsmParams<T>& p, const Matrix<T>& dy,
                               int checkpoint) {
  p.validate();
  if (u.cols() != p.d_inner() || dy.rows() != u.rows() || dy.cols() != u.cols()) {
    throw Error(ErrorCode::shape_mismatch, "scan_backward operand shapes disagree");
  }
  if (!all_finite(u) || !all_finite(dy)) throw Error(ErrorCode::non_finite, "non-finite scan input");
  if (checkpoint < 1) throw Error(ErrorCode::invalid_argument, "checkpoint interval must be >= 1");

  const Eigen::Index L = u.rows();
  const Eigen::Index D = p.d_inner();
  const Eigen::Index N = p.d_state();
  const Eigen::Index R = p.dt_rank();
  const Matrix<T> a = p.a();

  Matrix<T> proj;
  const Matrix<T> z = delta_logits(u, p, &proj);
  const Matrix<T> delta = z.unaryExpr([](T v) { return softplus(v); });
  const Matrix<T> B = proj.middleCols(R, N);
  const Matrix<T> C = proj.rightCols(N);

  // Forward sweep keeping only the state entering each checkpoint block.
  const Eigen::Index K = checkpoint;
  const Eigen::Index n_blocks = (L + K - 1) / K;
  std::vector<Matrix<T>> entry_state(static_cast<std::size_t>(n_blocks));
  Matrix<T> h = Matrix<T>::Zero(D, N);
  for (Eigen::Index t = 0; t < L; ++t) {
    if (t % K == 0) entry_state[static_cast<std::size_t>(t / K)] = h;
    for (Eigen::Index d = 0; d < D; ++d) {
      for (Eigen::Index n = 0; n < N; ++n) {
        const auto [a_bar, b_bar] = discretize(a(d, n), B(t, n), delta(t, d));
        h(d, n) = a_bar * h(d, n) + b_bar * u(t, d);
      }
    }
  }

  ScanGradients<T> g;
  g.du = Matrix<T>::Zero(L, D);
  g.dparams = SsmParams<T>::zeros(static_cast<int>(D), static_cast<int>(N), static_cast<int>(R));
  Matrix<T> d_delta = Matrix<T>::Zero(L, D);
  Matrix<T> dB = Matrix<T>::Zero(L, N);
  Matrix<T> dC = Matrix<T>::Zero(L, N);
  Matrix<T> dA = Matrix<T>::Zero(D, N);
  Matrix<T> dh = Matrix<T>::Zero(D, N);
  std::vector<Matrix<T>> states;

  for (Eigen::Index blk = n_blocks - 1; blk >= 0; --blk) {
    const Eigen::Index t0 = blk * K;
    const Eigen::Index len = std::min(K, L - t0);
    // states[k] = h_{t0 + k - 1}; states[0] is the block's entry state.
    states.assign(static_cast<std::size_t>(len + 1), Matrix<T>());
    states[0] = entry_state[static_cast<std::size_t>(blk)];
    for (Eigen::Index k = 0; k < len; ++k) {
      const Eigen::Index t = t0 + k;
      Matrix<T>& next = states[static_cast<std::size_t>(k + 1)];
      next.resize(D, N);
      const Matrix<T>& prev = states[static_cast<std::size_t>(k)];
      for (Eigen::Index d = 0; d < D; ++d) {
        for (Eigen::Index n = 0; n < N; ++n) {
          const auto [a_bar, b_bar] = discretize(a(d, n), B(t, n), delta(t, d));
          next(d, n) = a_bar * prev(d, n) + b_bar * u(t, d);
        }
      }
    }

    for (Eigen::Index k = len - 1; k >= 0; --k) {
      const Eigen::Index t = t0 + k;
      const Matrix<T>& h_t = states[static_cast<std::size_t>(k + 1)];
      const Matrix<T>& h_prev = states[static_cast<std::size_t>(k)];
      for (Eigen::Index d = 0; d < D; ++d) {
        const T x = u(t, d);
        const T dt = delta(t, d);
        const T gy = dy(t, d);
        g.dparams.d_skip(d) += gy * x;
        g.du(t, d) += gy * p.d_skip(d);
        for (Eigen::Index n = 0; n < N; ++n) {
          dC(t, n) += gy * h_t(d, n);
          const T dh_dn = dh(d, n) + gy * C(t, n);
          const T an = a(d, n);
          const T un = dt * an;
          const T a_bar = std::exp(un);
          const T coef = std::abs(un) < T(kSeriesThreshold) ? dt * phi_series(un) : std::expm1(un) / an;
          const T d_abar = dh_dn * h_prev(d, n);
          const T d_coef = dh_dn * B(t, n) * x;
          dB(t, n) += dh_dn * coef * x;
          g.du(t, d) += dh_dn * coef * B(t, n);
          d_delta(t, d) += d_abar * a_bar * an + d_coef * a_bar;
          dA(d, n) += d_abar * a_bar * dt + d_coef * dt * dt * psi(un);
          dh(d, n) = dh_dn * a_bar;
        }
      }
    }
  }

  // A = -exp(a_log) => dA/da_log = A.
  g.dparams.a_log = dA.cwiseProduct(a);
  const Matrix<T> dz = d_delta.cwiseProduct(z.unaryExpr([](T v) { return sigmoid(v); }));
  g.dparams.dt_bias = dz.colwise().sum().transpose();
  g.dparams.dt_proj.noalias() = proj.leftCols(R).transpose() * dz;
  Matrix<T> dproj(L, R + 2 * N);
  dproj.leftCols(R).noalias() = dz * p.dt_proj.transpose();
  dproj.middleCols(R, N) = dB;
  dproj.rightCols(N) = dC;
  g.dparams.x_proj.noalias() = u.transpose() * dproj;
  g.du.noalias() += dproj * p.x_proj.transpose();
  return g;
}

template <typename T>
Matrix<T> scan_bidirectional(const Matrix<T>& u, const SsmParams<T>& fwd, const SsmParams<T>& bwd,
                             int chunk) {
  auto run = [chunk](const Matrix<T>& x, const SsmParams<T>& p) {
    return chunk > 0 ? scan_forward_chunked(x, p, chunk) : scan_forward(x, p);
  };
  Matrix<T> y = run(u, fwd);
  y += reverse_rows<T>(run(reverse_rows(u), bwd));
  return y;
}

#define MEVT_INSTANTIATE_SSM(T)                                                                  \
  template struct SsmParams<T>;                                                                  \
  template Discretized<T> discretize<T>(T, T, T);                                                \
  template T softplus<T>(T);                                                                     \
  template ScanInputs<T> select_inputs<T>(const Matrix<T>&, const SsmParams<T>&);                \
  template Matrix<T> selective_scan<T>(const Matrix<T>&, const ScanInputs<T>&, const Matrix<T>&, \
                                       const Vector<T>&);                                        \
  template Matrix<T> selective_scan_chunked<T>(const Matrix<T>&, const ScanInputs<T>&,           \
                                               const Matrix<T>&, const Vector<T>&, int);         \
  template Matrix<T> scan_forward<T>(const Matrix<T>&, const SsmParams<T>&);                     \
  template Matrix<T> scan_forward_chunked<T>(const Matrix<T>&, const SsmParams<T>&, int);        \
  template ScanGradients<T> scan_backward<T>(const Matrix<T>&, const SsmParams<T>&,              \
                                             const Matrix<T>&, int);                             \
  template Matrix<T> scan_bidirectional<T>(const Matrix<T>&, const SsmParams<T>&,                \
                                           const SsmParams<T>&, int);

MEVT_INSTANTIATE_SSM(float)
MEVT_INSTANTIATE_SSM(double)

}  // namespace mevt
