#pragma once

#include <Eigen/Core>

#include <stdexcept>
#include <string>

namespace mevt {

// Token matrices are row-major: one row per token.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

using MatrixF = Matrix<float>;
using VectorF = Vector<float>;
using MatrixD = Matrix<double>;
using VectorD = Vector<double>;

enum class ErrorCode {
  invalid_argument,
  degenerate_box,
  non_finite,
  shape_mismatch,
  empty_input,
  already_initialized,
  bad_magic,
  unexpected_eof,
  unexpected_parameter,
  missing_parameter,
  io_error,
  parse_error,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

}  // namespace mevt
