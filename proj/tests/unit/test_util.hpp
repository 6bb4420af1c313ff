#pragma once

#include "mevt/common.hpp"
#include "mevt/template_memory.hpp"

#include <random>

namespace mevt::test {

inline MatrixD normal_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  std::normal_distribution<double> nd(0.0, scale);
  MatrixD m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = nd(rng);
  return m;
}

inline MatrixF normal_matrix_f(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols, double scale = 1.0) {
  return normal_matrix(rng, rows, cols, scale).cast<float>();
}

inline TemplateFeature random_feature(std::mt19937_64& rng, int frame, int rows = 4, int cols = 8) {
  return {normal_matrix_f(rng, rows, cols), frame};
}

inline double max_rel_err(const MatrixD& got, const MatrixD& want) {
  const double scale = std::max(want.cwiseAbs().maxCoeff(), 1e-300);
  return (got - want).cwiseAbs().maxCoeff() / scale;
}

}  // namespace mevt::test
