#pragma once

#include "mevt/common.hpp"

#include <random>

namespace mevt {

// Parameters of one selective-scan direction. A is diagonal per channel and
// kept negative through A = -exp(a_log).
template <typename T>
struct SsmParams {
  Matrix<T> a_log;    // d_inner x d_state
  Vector<T> d_skip;   // d_inner
  Matrix<T> x_proj;   // d_inner x (dt_rank + 2 * d_state) -> (dt logits, B, C)
  Matrix<T> dt_proj;  // dt_rank x d_inner
  Vector<T> dt_bias;  // d_inner

  static SsmParams zeros(int d_inner, int d_state, int dt_rank);
  // Mamba-style initialization: A = -(1..d_state), dt in [1e-3, 1e-1], D = 1.
  static SsmParams random(int d_inner, int d_state, int dt_rank, std::mt19937_64& rng);

  int d_inner() const { return static_cast<int>(a_log.rows()); }
  int d_state() const { return static_cast<int>(a_log.cols()); }
  int dt_rank() const { return static_cast<int>(dt_proj.rows()); }
  Matrix<T> a() const { return -a_log.array().exp().matrix(); }

  void validate() const;

  template <typename U>
  SsmParams<U> cast() const {
    return {a_log.template cast<U>(), d_skip.template cast<U>(), x_proj.template cast<U>(),
            dt_proj.template cast<U>(), dt_bias.template cast<U>()};
  }
};

template <typename T>
struct Discretized {
  T a_bar;
  T b_bar;
};

// Zero-order hold: a_bar = exp(delta * a), b_bar = (exp(delta * a) - 1) / a * b,
// with a 4-term series for (e^u - 1) / u when |delta * a| < kSeriesThreshold.
inline constexpr double kSeriesThreshold = 1e-4;

template <typename T>
Discretized<T> discretize(T a, T b, T delta);

template <typename T>
T softplus(T x);

// Per-token selection values: delta (L x d_inner), B and C (L x d_state).
template <typename T>
struct ScanInputs {
  Matrix<T> delta;
  Matrix<T> b;
  Matrix<T> c;
};

template <typename T>
ScanInputs<T> select_inputs(const Matrix<T>& u, const SsmParams<T>& params);

// Reference recurrence with explicit selection values:
//   h_t = a_bar_t * h_{t-1} + b_bar_t * u_t,  y_t = C_t . h_t + d_skip * u_t,  h_0 = 0.
// `a` is the d_inner x d_state continuous state matrix (entries <= 0).
template <typename T>
Matrix<T> selective_scan(const Matrix<T>& u, const ScanInputs<T>& in, const Matrix<T>& a,
                         const Vector<T>& d_skip);

// Same recurrence evaluated chunk by chunk: each chunk runs a local scan from a
// zero state while accumulating the product of a_bar, then the carried state is
// folded in through the associative composition (a2 a1, a2 b1 + b2).
template <typename T>
Matrix<T> selective_scan_chunked(const Matrix<T>& u, const ScanInputs<T>& in, const Matrix<T>& a,
                                 const Vector<T>& d_skip, int chunk);

template <typename T>
Matrix<T> scan_forward(const Matrix<T>& u, const SsmParams<T>& params);

template <typename T>
Matrix<T> scan_forward_chunked(const Matrix<T>& u, const SsmParams<T>& params, int chunk);

template <typename T>
struct ScanGradients {
  Matrix<T> du;
  SsmParams<T> dparams;
};

// Reverse-mode gradients of sum(dy .* scan_forward(u, params)). Hidden states
// are recomputed from checkpoints taken every `checkpoint` steps.
template <typename T>
ScanGradients<T> scan_backward(const Matrix<T>& u, const SsmParams<T>& params, const Matrix<T>& dy,
                               int checkpoint = 64);

// y = scan(u, fwd) + reverse(scan(reverse(u), bwd)). chunk <= 0 selects the
// sequential reference path.
template <typename T>
Matrix<T> scan_bidirectional(const Matrix<T>& u, const SsmParams<T>& fwd, const SsmParams<T>& bwd,
                             int chunk = 0);

template <typename T>
Matrix<T> reverse_rows(const Matrix<T>& m) {
  return m.colwise().reverse();
}

}  // namespace mevt
