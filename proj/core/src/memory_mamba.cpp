#include "mevt/memory_mamba.hpp"

namespace mevt {

MatrixF fuse(std::span<const TemplateFeature> templates, const BackboneParams& params) {
  if (templates.empty()) throw Error(ErrorCode::empty_input, "fuse needs at least one template");
  const Eigen::Index nz = templates.front().tokens.rows();
  const Eigen::Index c = templates.front().tokens.cols();
  MatrixF seq(nz * static_cast<Eigen::Index>(templates.size()), c);
  for (std::size_t i = 0; i < templates.size(); ++i) {
    const auto& t = templates[i].tokens;
    if (t.rows() != nz || t.cols() != c) {
      throw Error(ErrorCode::shape_mismatch, "templates in one library must share a shape");
    }
    seq.middleRows(static_cast<Eigen::Index>(i) * nz, nz) = t;
  }
  const MatrixF out = backbone(seq, params);
  return out.bottomRows(nz);
}

DynamicTemplate generate_dynamic_template(const MemoryLibrary& lib, const TemplateFeature& incoming,
                                          const BackboneParams& params) {
  DynamicTemplate d;
  d.routed = lib.route(incoming);
  const auto members = lib.snapshot(d.routed);
  d.tokens = fuse(members, params);
  return d;
}

}  // namespace mevt
