#include "mevt/tokenizer.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

namespace mevt {
namespace {

RegionPatch patch_of(int side, std::mt19937_64& rng) {
  RegionPatch p;
  p.data = Image3(side, side);
  std::uniform_real_distribution<float> ud(0.0f, 1.0f);
  for (float& v : p.data.values()) v = ud(rng);
  return p;
}

TEST(TokenCount, DefaultSizes) {
  EXPECT_EQ(token_count(128, 16), 64);
  EXPECT_EQ(token_count(256, 16), 256);
  EXPECT_THROW(token_count(100, 16), Error);
}

TEST(PatchEmbed, ZeroInputZeroBias) {
  RegionPatch p;
  p.data = Image3(32, 32);
  std::mt19937_64 rng(1);
  PatchEmbedParams params = PatchEmbedParams::zeros(16, 8, 32, 64);
  params.projection = test::normal_matrix_f(rng, 3 * 16 * 16, 8);
  const TokenSeq t = patch_embed(p, params);
  EXPECT_EQ(t.size(), 4);
  EXPECT_EQ(t.tokens.cwiseAbs().maxCoeff(), 0.0f);
}

TEST(PatchEmbed, FlattenOrderIsChannelThenRowThenColumn) {
  // P = 2, side 4: token 1 is the patch at rows 0-1, columns 2-3.
  RegionPatch p;
  p.data = Image3(4, 4);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 4; ++y)
      for (int x = 0; x < 4; ++x) p.data.at(c, y, x) = static_cast<float>(100 * c + 10 * y + x);
  PatchEmbedParams params = PatchEmbedParams::zeros(2, 12, 4, 8);
  params.projection = MatrixF::Identity(12, 12);
  const TokenSeq t = patch_embed(p, params);
  ASSERT_EQ(t.size(), 4);
  const float want[12] = {2, 3, 12, 13, 102, 103, 112, 113, 202, 203, 212, 213};
  for (int k = 0; k < 12; ++k) EXPECT_EQ(t.tokens(1, k), want[k]);
}

TEST(PatchEmbed, LinearWithoutBias) {
  std::mt19937_64 rng(2);
  const RegionPatch x = patch_of(32, rng), y = patch_of(32, rng);
  RegionPatch mix;
  mix.data = Image3(32, 32);
  for (std::size_t i = 0; i < mix.data.values().size(); ++i)
    mix.data.values()[i] = 2.0f * x.data.values()[i] - 0.5f * y.data.values()[i];
  PatchEmbedParams params = PatchEmbedParams::zeros(16, 6, 32, 64);
  params.projection = test::normal_matrix_f(rng, 3 * 16 * 16, 6);
  const MatrixF want = 2.0f * patch_embed(x, params).tokens - 0.5f * patch_embed(y, params).tokens;
  EXPECT_LT((patch_embed(mix, params).tokens - want).cwiseAbs().maxCoeff(), 1e-4f);
}

TEST(PatchEmbed, IndivisibleSide) {
  std::mt19937_64 rng(3);
  EXPECT_THROW(patch_embed(patch_of(24, rng), PatchEmbedParams::zeros(16, 4, 32, 64)), Error);
}

TEST(PatchEmbed, PositionalEmbeddingsPerRegion) {
  RegionPatch z;
  z.data = Image3(32, 32);
  RegionPatch x;
  x.data = Image3(64, 64);
  PatchEmbedParams params = PatchEmbedParams::zeros(16, 4, 32, 64);
  params.pos_template.setConstant(1.0f);
  params.pos_search.setConstant(2.0f);
  EXPECT_EQ(embed_template(z, params).tokens, params.pos_template);
  EXPECT_EQ(embed_search(x, params).tokens, params.pos_search);
  EXPECT_EQ(embed_search(x, params).n_search, 16);
}

TokenSeq constant_seq(int rows, int dim, float v, Segment s) {
  return TokenSeq::single(MatrixF::Constant(rows, dim, v), s);
}

TEST(AssembleInput, DefaultCounts) {
  const TokenSeq seq = assemble_input(constant_seq(64, 8, 1, Segment::static_template),
                                      constant_seq(64, 8, 2, Segment::dynamic_template),
                                      constant_seq(256, 8, 3, Segment::search));
  EXPECT_EQ(seq.size(), 384);
  EXPECT_EQ(seq.segment(0), Segment::static_template);
  EXPECT_EQ(seq.segment(64), Segment::dynamic_template);
  EXPECT_EQ(seq.segment(128), Segment::search);
  EXPECT_EQ(seq.count(Segment::search), 256);
}

TEST(AssembleInput, EmptyDynamic) {
  const TokenSeq seq = assemble_input(constant_seq(64, 8, 1, Segment::static_template),
                                      constant_seq(0, 8, 0, Segment::dynamic_template),
                                      constant_seq(256, 8, 3, Segment::search));
  EXPECT_EQ(seq.size(), 320);
  EXPECT_EQ(seq.n_static, 64);
  EXPECT_EQ(seq.n_dynamic, 0);
  EXPECT_EQ(seq.n_search, 256);
}

TEST(AssembleInput, DimensionMismatch) {
  EXPECT_THROW(assemble_input(constant_seq(4, 8, 1, Segment::static_template),
                              constant_seq(4, 6, 2, Segment::dynamic_template),
                              constant_seq(4, 8, 3, Segment::search)),
               Error);
}

TEST(ExtractSearch, InverseOfAssemble) {
  std::mt19937_64 rng(4);
  const MatrixF search = test::normal_matrix_f(rng, 256, 8);
  const TokenSeq seq = assemble_input(constant_seq(64, 8, 1, Segment::static_template),
                                      constant_seq(64, 8, 2, Segment::dynamic_template),
                                      TokenSeq::single(search, Segment::search));
  const MatrixF out = extract_search_tokens(seq);
  EXPECT_EQ(out.rows(), 256);
  EXPECT_EQ(out, search);
  EXPECT_EQ(out.rowwise().sum(), search.rowwise().sum());
}

TEST(ExtractSearch, NoSearchRun) {
  EXPECT_THROW(extract_search_tokens(constant_seq(4, 8, 1, Segment::static_template)), Error);
}

}  // namespace
}  // namespace mevt
