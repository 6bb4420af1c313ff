#include "mevt/oracles.hpp"
#include "mevt/template_memory.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

namespace mevt {
namespace {

using test::random_feature;

TemplateFeature feature_of(std::vector<float> values, int frame = 0) {
  TemplateFeature z;
  z.tokens = Eigen::Map<MatrixF>(values.data(), 1, static_cast<Eigen::Index>(values.size()));
  z.frame_index = frame;
  return z;
}

TEST(Pearson, Examples) {
  std::mt19937_64 rng(1);
  const TemplateFeature z = random_feature(rng, 0);
  EXPECT_EQ(pearson(z, z), 1.0);
  EXPECT_NEAR(pearson(feature_of({1, 2, 3}), feature_of({3, 2, 1})), -1.0, 1e-15);
  const std::vector<double> a{1, 2, 3, 4}, b{1, 2, 3, 5};
  const double got = pearson(std::span<const double>(a), std::span<const double>(b));
  EXPECT_NEAR(got, 0.9827, 1e-3);
  EXPECT_NEAR(got, static_cast<double>(oracle::pearson(std::span<const double>(a), std::span<const double>(b))),
              1e-14);
}

TEST(Pearson, ZeroVarianceConvention) {
  EXPECT_EQ(pearson(feature_of({2, 2, 2}), feature_of({2, 2, 2})), 1.0);
  EXPECT_EQ(pearson(feature_of({2, 2, 2}), feature_of({1, 2, 3})), 0.0);
  EXPECT_EQ(pearson(feature_of({2, 2, 2}), feature_of({3, 3, 3})), 0.0);
}

TEST(Pearson, SymmetricAndAffineInvariant) {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const TemplateFeature a = random_feature(rng, 0), b = random_feature(rng, 1);
    EXPECT_EQ(pearson(a, b), pearson(b, a));
    for (float alpha : {2.5f, -0.75f}) {
      TemplateFeature s = a;
      s.tokens = (alpha * a.tokens.array() + 3.0f).matrix();
      EXPECT_NEAR(pearson(s, b), (alpha > 0 ? 1 : -1) * pearson(a, b), 1e-6);
    }
  }
}

TEST(Pearson, LengthMismatch) {
  EXPECT_THROW(pearson(feature_of({1, 2}), feature_of({1, 2, 3})), Error);
}

TEST(Determinant, MatchesEliminationOracle) {
  std::mt19937_64 rng(3);
  for (int n : {1, 2, 5, 9}) {
    const MatrixD m = test::normal_matrix(rng, n, n);
    std::vector<std::vector<oracle::Real>> rows(n, std::vector<oracle::Real>(n));
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) rows[i][j] = m(i, j);
    const double want = static_cast<double>(oracle::determinant(rows));
    EXPECT_NEAR(determinant(m), want, 1e-12 * std::max(1.0, std::abs(want)));
  }
}

// Rows 1..7 of the 8 x 8 Hadamard matrix: zero mean, mutually orthogonal.
std::vector<float> hadamard_row(int r) {
  std::vector<float> v(8);
  for (int c = 0; c < 8; ++c) v[c] = (__builtin_popcount(r & c) % 2) ? -1.0f : 1.0f;
  return v;
}

TEST(GramDet, Closedforms) {
  std::mt19937_64 rng(4);
  const TemplateFeature z = random_feature(rng, 0);
  for (int n : {2, 3, 6}) {
    std::vector<TemplateFeature> same(n, z);
    EXPECT_NEAR(gram_det(same), 0.0, 1e-12);
  }
  std::vector<TemplateFeature> orth;
  for (int r = 1; r <= 4; ++r) orth.push_back(feature_of(hadamard_row(r)));
  EXPECT_NEAR(gram_det(orth), 1.0, 1e-12);

  // z_i = shared + own_i with equal norms: pairwise correlation 1/2.
  std::vector<TemplateFeature> half;
  const auto shared = hadamard_row(1);
  for (int r = 2; r <= 4; ++r) {
    auto own = hadamard_row(r);
    for (int k = 0; k < 8; ++k) own[k] += shared[k];
    half.push_back(feature_of(own));
  }
  EXPECT_NEAR(pearson(half[0], half[1]), 0.5, 1e-12);
  EXPECT_NEAR(gram_det(half), 1 - 3 * 0.25 + 2 * 0.125, 1e-12);
}

TEST(GramDet, PermutationInvariantAndBounded) {
  std::mt19937_64 rng(5);
  std::vector<TemplateFeature> set;
  for (int i = 0; i < 6; ++i) set.push_back(random_feature(rng, i, 2, 3));
  const double d = gram_det(set);
  EXPECT_GE(d, -1e-9);
  EXPECT_LE(d, 1.0 + 1e-12);
  std::shuffle(set.begin(), set.end(), rng);
  EXPECT_NEAR(gram_det(set), d, 1e-12);
}

MemoryConfig cfg(int lt, int st) { return {lt, st, 5}; }

TEST(LtAdmit, IdenticalPairAcceptsDistinct) {
  std::mt19937_64 rng(6);
  const TemplateFeature z = random_feature(rng, 0);
  auto lib = MemoryLibrary::from_contents(cfg(2, 2), {z, z}, {});
  const auto rec = lib.lt_admit(random_feature(rng, 9));
  EXPECT_TRUE(rec.accepted);
  EXPECT_NEAR(rec.det_before, 0.0, 1e-12);
  EXPECT_GT(rec.det_after, 0.0);
}

TEST(LtAdmit, ThreeIdenticalCannotBeImprovedByOneReplacement) {
  std::mt19937_64 rng(7);
  const TemplateFeature z = random_feature(rng, 0);
  auto lib = MemoryLibrary::from_contents(cfg(3, 2), {z, z, z}, {});
  EXPECT_FALSE(lib.lt_admit(random_feature(rng, 9)).accepted);
}

TEST(LtAdmit, DuplicateRejected) {
  std::mt19937_64 rng(8);
  std::vector<TemplateFeature> lt;
  for (int i = 0; i < 4; ++i) lt.push_back(random_feature(rng, i));
  auto lib = MemoryLibrary::from_contents(cfg(4, 2), lt, {});
  const auto rec = lib.lt_admit(lt[2]);
  EXPECT_FALSE(rec.accepted);
  EXPECT_EQ(rec.replaced_index, -1);
}

TEST(LtAdmit, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> mix(0.0, 1.0);
  int accepted = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<TemplateFeature> lt;
    const TemplateFeature base = random_feature(rng, 0, 3, 5);
    // Correlated members so that both outcomes occur.
    for (int i = 0; i < 5; ++i) {
      TemplateFeature m = random_feature(rng, i, 3, 5);
      m.tokens = m.tokens * static_cast<float>(mix(rng)) + base.tokens;
      lt.push_back(m);
    }
    TemplateFeature z = random_feature(rng, 10, 3, 5);
    z.tokens = z.tokens * static_cast<float>(mix(rng)) + base.tokens;
    const oracle::Admission want = oracle::lt_admit(lt, z);
    auto lib = MemoryLibrary::from_contents(cfg(5, 2), lt, {});
    const auto got = lib.lt_admit(z);
    ASSERT_EQ(got.accepted, want.accepted) << "trial " << trial;
    if (want.accepted) {
      EXPECT_EQ(got.replaced_index, want.replaced_index);
      EXPECT_EQ(lib.long_term()[got.replaced_index].frame_index, 10);
      ++accepted;
    }
  }
  EXPECT_GT(accepted, 0);
  EXPECT_LT(accepted, 200);
}

TEST(LtAdmit, DeterminantNeverDecreases) {
  std::mt19937_64 rng(10);
  std::vector<TemplateFeature> lt;
  for (int i = 0; i < 4; ++i) lt.push_back(random_feature(rng, i, 2, 4));
  auto lib = MemoryLibrary::from_contents(cfg(4, 2), lt, {});
  double prev = lib.lt_det();
  for (int i = 0; i < 50; ++i) {
    lib.lt_admit(random_feature(rng, 10 + i, 2, 4));
    EXPECT_GE(lib.lt_det(), prev);
    EXPECT_NEAR(lib.lt_det(), gram_det(lib.long_term()), 1e-9);
    prev = lib.lt_det();
  }
}

TEST(StPush, BelowCapacityNoEviction) {
  std::mt19937_64 rng(11);
  auto lib = MemoryLibrary::from_contents(cfg(4, 3), {random_feature(rng, 0)}, {});
  EXPECT_FALSE(lib.st_push(random_feature(rng, 1)).has_value());
  EXPECT_FALSE(lib.st_push(random_feature(rng, 2)).has_value());
  EXPECT_EQ(lib.short_term().size(), 2u);
}

TEST(StPush, EvictsOldestAndOffersInOrder) {
  std::mt19937_64 rng(12);
  const int c_st = 4;
  auto lib = MemoryLibrary::from_contents(cfg(16, c_st), {random_feature(rng, -1)}, {});
  int offers = 0;
  for (int i = 0; i < c_st + 3; ++i) {
    if (lib.st_push(random_feature(rng, i))) ++offers;
    EXPECT_LE(static_cast<int>(lib.short_term().size()), c_st);
  }
  EXPECT_EQ(offers, 3);
  // Below LT capacity every offer is stored, so LT shows the evictions in order.
  ASSERT_EQ(lib.long_term().size(), 4u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(lib.long_term()[i + 1].frame_index, i);
  for (int i = 0; i < c_st; ++i) EXPECT_EQ(lib.short_term()[i].frame_index, 3 + i);
}

TEST(Route, ExactMatches) {
  std::mt19937_64 rng(13);
  std::vector<TemplateFeature> lt;
  std::deque<TemplateFeature> st;
  for (int i = 0; i < 3; ++i) lt.push_back(random_feature(rng, i));
  for (int i = 0; i < 3; ++i) st.push_back(random_feature(rng, 10 + i));
  const auto lib = MemoryLibrary::from_contents(cfg(3, 3), lt, st);
  EXPECT_EQ(lib.route(st[1]), Library::short_term);
  EXPECT_EQ(lib.route(lt[2]), Library::long_term);
}

TEST(Route, MatchesArgmaxOracle) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<TemplateFeature> lt;
    std::deque<TemplateFeature> st;
    for (int i = 0; i < 4; ++i) lt.push_back(random_feature(rng, i, 2, 3));
    for (int i = 0; i < 3; ++i) st.push_back(random_feature(rng, 10 + i, 2, 3));
    const TemplateFeature in = random_feature(rng, 20, 2, 3);
    const auto lib = MemoryLibrary::from_contents(cfg(4, 3), lt, st);
    EXPECT_EQ(lib.route(in), oracle::route(lt, {st.begin(), st.end()}, in));
  }
}

TEST(Init, FillsBothStores) {
  std::mt19937_64 rng(15);
  const TemplateFeature z = random_feature(rng, 0);
  MemoryLibrary lib(cfg(16, 6));
  lib.init(z);
  EXPECT_EQ(lib.long_term().size(), 16u);
  EXPECT_EQ(lib.short_term().size(), 6u);
  EXPECT_NEAR(gram_det(lib.long_term()), 0.0, 1e-12);
  EXPECT_EQ(lib.route(z), Library::short_term);
  try {
    lib.init(z);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::already_initialized);
  }
}

TEST(Snapshot, LongTermInFrameOrder) {
  std::mt19937_64 rng(16);
  const auto lib = MemoryLibrary::from_contents(
      cfg(3, 1), {random_feature(rng, 9), random_feature(rng, 2), random_feature(rng, 5)}, {});
  const auto snap = lib.snapshot(Library::long_term);
  EXPECT_EQ(snap[0].frame_index, 2);
  EXPECT_EQ(snap[1].frame_index, 5);
  EXPECT_EQ(snap[2].frame_index, 9);
}

}  // namespace
}  // namespace mevt
