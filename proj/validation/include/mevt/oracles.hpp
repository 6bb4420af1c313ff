#pragma once

// Reference implementations used to check the library. They share no code
// with mevt_core beyond the plain data types.

#include "mevt/event_stream.hpp"
#include "mevt/ssm_core.hpp"
#include "mevt/template_memory.hpp"

#include <functional>
#include <span>
#include <vector>

namespace mevt::oracle {

using Real = long double;

// Sequential selective scan in extended precision with closed-form ZOH.
MatrixD scan(const MatrixD& u, const ScanInputs<double>& in, const MatrixD& a, const VectorD& d_skip);

// Same with Delta, B, C derived from SSM parameters.
MatrixD scan_forward(const MatrixD& u, const SsmParams<double>& p);

Real pearson(std::span<const double> a, std::span<const double> b);
Real pearson(std::span<const float> a, std::span<const float> b);

// Gaussian elimination with partial pivoting.
Real determinant(std::vector<std::vector<Real>> m);

struct Admission {
  bool accepted = false;
  int replaced_index = -1;
};

// Full-LT admission by enumerating every single replacement.
Admission lt_admit(const std::vector<TemplateFeature>& lt, const TemplateFeature& z);

// Library holding the most similar member; ties favor ST.
Library route(const std::vector<TemplateFeature>& lt, const std::vector<TemplateFeature>& st,
              const TemplateFeature& incoming);

struct Tally {
  double sr = 0.0;
  double pr = 0.0;
  double npr = 0.0;
};

// Per-frame, per-threshold counting from box corners.
Tally tally(std::span<const BBox> pred, std::span<const BBox> gt);

// Penalty-reduced focal loss summed cell by cell.
double focal_sum(const MatrixD& score, const MatrixD& target);

// Central difference of f along every coordinate of x.
std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                       std::vector<double> x, double step);

}  // namespace mevt::oracle
