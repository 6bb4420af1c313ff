#pragma once

#include "mevt/common.hpp"
#include "mevt/event_stream.hpp"

#include <cstdint>

namespace mevt {

enum class Segment : std::uint8_t { static_template, dynamic_template, search };

// Token matrix (m x C) with contiguous segment runs [STATIC | DYNAMIC | SEARCH].
struct TokenSeq {
  MatrixF tokens;
  int n_static = 0;
  int n_dynamic = 0;
  int n_search = 0;

  static TokenSeq single(MatrixF tokens, Segment segment);

  int size() const { return static_cast<int>(tokens.rows()); }
  int dim() const { return static_cast<int>(tokens.cols()); }
  Segment segment(int i) const;
  int count(Segment s) const;
};

struct PatchEmbedParams {
  int patch = 16;
  MatrixF projection;  // (3 * P * P) x C
  VectorF bias;        // C
  MatrixF pos_template;  // N_z x C
  MatrixF pos_search;    // N_x x C

  static PatchEmbedParams zeros(int patch, int dim, int template_size, int search_size);
  int dim() const { return static_cast<int>(projection.cols()); }
};

// Tokens produced from a side x side region: (side / patch)^2.
int token_count(int side, int patch);

// Non-overlapping P x P patches in row-major order; each patch flattened
// channel-major (c, then row, then column) and projected to C. No positional
// embedding is added.
TokenSeq patch_embed(const RegionPatch& patch, const PatchEmbedParams& params,
                     Segment segment = Segment::static_template);

// patch_embed plus the template / search positional embedding.
TokenSeq embed_template(const RegionPatch& patch, const PatchEmbedParams& params);
TokenSeq embed_search(const RegionPatch& patch, const PatchEmbedParams& params);

TokenSeq assemble_input(const TokenSeq& static_t, const TokenSeq& dynamic_t,
                        const TokenSeq& search_t);

MatrixF extract_search_tokens(const TokenSeq& seq);

}  // namespace mevt
