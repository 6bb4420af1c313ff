#include "mevt/tokenizer.hpp"

namespace mevt {

TokenSeq TokenSeq::single(MatrixF tokens, Segment segment) {
  TokenSeq seq;
  const int n = static_cast<int>(tokens.rows());
  seq.tokens = std::move(tokens);
  switch (segment) {
    case Segment::static_template: seq.n_static = n; break;
    case Segment::dynamic_template: seq.n_dynamic = n; break;
    case Segment::search: seq.n_search = n; break;
  }
  return seq;
}

Segment TokenSeq::segment(int i) const {
  if (i < n_static) return Segment::static_template;
  if (i < n_static + n_dynamic) return Segment::dynamic_template;
  return Segment::search;
}

int TokenSeq::count(Segment s) const {
  switch (s) {
    case Segment::static_template: return n_static;
    case Segment::dynamic_template: return n_dynamic;
    case Segment::search: return n_search;
  }
  return 0;
}

PatchEmbedParams PatchEmbedParams::zeros(int patch, int dim, int template_size, int search_size) {
  PatchEmbedParams p;
  p.patch = patch;
  p.projection = MatrixF::Zero(3 * patch * patch, dim);
  p.bias = VectorF::Zero(dim);
  p.pos_template = MatrixF::Zero(token_count(template_size, patch), dim);
  p.pos_search = MatrixF::Zero(token_count(search_size, patch), dim);
  return p;
}

int token_count(int side, int patch) {
  if (patch <= 0 || side <= 0 || side % patch != 0) {
    throw Error(ErrorCode::invalid_argument,
                "region side " + std::to_string(side) + " not divisible by patch " +
                    std::to_string(patch));
  }
  const int g = side / patch;
  return g * g;
}

TokenSeq patch_embed(const RegionPatch& patch, const PatchEmbedParams& params, Segment segment) {
  const int side = patch.size();
  if (patch.data.height() != side) throw Error(ErrorCode::invalid_argument, "region patch must be square");
  const int P = params.patch;
  const int n = token_count(side, P);
  const int grid = side / P;
  if (params.projection.rows() != 3 * P * P || params.bias.size() != params.projection.cols()) {
    throw Error(ErrorCode::shape_mismatch, "patch projection shape does not match patch size");
  }

  MatrixF flat(n, 3 * P * P);
  for (int gy = 0; gy < grid; ++gy) {
    for (int gx = 0; gx < grid; ++gx) {
      float* row = flat.row(gy * grid + gx).data();
      for (int c = 0; c < 3; ++c) {
        for (int py = 0; py < P; ++py) {
          for (int px = 0; px < P; ++px) {
            *row++ = patch.data.at(c, gy * P + py, gx * P + px);
          }
        }
      }
    }
  }
  MatrixF tokens = flat * params.projection;
  tokens.rowwise() += params.bias.transpose();
  return TokenSeq::single(std::move(tokens), segment);
}

namespace {

TokenSeq embed_with(const RegionPatch& patch, const PatchEmbedParams& params, const MatrixF& pos,
                    Segment segment) {
  TokenSeq seq = patch_embed(patch, params, segment);
  if (pos.rows() != seq.tokens.rows() || pos.cols() != seq.tokens.cols()) {
    throw Error(ErrorCode::shape_mismatch, "positional embedding shape does not match token count");
  }
  seq.tokens += pos;
  return seq;
}

}  // namespace

TokenSeq embed_template(const RegionPatch& patch, const PatchEmbedParams& params) {
  return embed_with(patch, params, params.pos_template, Segment::static_template);
}

TokenSeq embed_search(const RegionPatch& patch, const PatchEmbedParams& params) {
  return embed_with(patch, params, params.pos_search, Segment::search);
}

TokenSeq assemble_input(const TokenSeq& static_t, const TokenSeq& dynamic_t,
                        const TokenSeq& search_t) {
  const int c = static_t.dim();
  for (const TokenSeq* s : {&dynamic_t, &search_t}) {
    if (s->size() > 0 && s->dim() != c) {
      throw Error(ErrorCode::shape_mismatch, "token dimension mismatch in assemble_input");
    }
  }
  TokenSeq out;
  out.n_static = static_t.size();
  out.n_dynamic = dynamic_t.size();
  out.n_search = search_t.size();
  out.tokens.resize(out.n_static + out.n_dynamic + out.n_search, c);
  out.tokens.topRows(out.n_static) = static_t.tokens;
  out.tokens.middleRows(out.n_static, out.n_dynamic) = dynamic_t.tokens;
  out.tokens.bottomRows(out.n_search) = search_t.tokens;
  return out;
}

MatrixF extract_search_tokens(const TokenSeq& seq) {
  if (seq.n_search <= 0) throw Error(ErrorCode::empty_input, "sequence has no SEARCH tokens");
  if (seq.n_static + seq.n_dynamic + seq.n_search != seq.size()) {
    throw Error(ErrorCode::shape_mismatch, "segment counts do not cover the token matrix");
  }
  return seq.tokens.bottomRows(seq.n_search);
}

}  // namespace mevt
