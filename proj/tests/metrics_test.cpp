// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "mht/assignment.hpp"
#include "mht/error.hpp"
#include "mht/metrics.hpp"
#include "test_support.hpp"

namespace mht {
namespace {

using testing::gens;
using testing::refs;

TEST(CosineTest, Examples) {
  EXPECT_DOUBLE_EQ(cosine_similarity(Embedding({1, 0}), Embedding({1, 0})), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(Embedding({1, 0}), Embedding({0, 1})), 0.0);
  const double c = cosine_similarity(Embedding({1, 1}), Embedding({1, 0}));
  EXPECT_NEAR(c, 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(c, 0.70710678, 5e-9);
}

TEST(CosineTest, Errors) {
  EXPECT_THROW(cosine_similarity(Embedding({1, 0}), Embedding({1, 0, 0})), ValidationError);
  EXPECT_THROW(cosine_similarity(Embedding({1, 0}), Embedding::degenerate({0, 0})),
               ValidationError);
}

TEST(CosineTest, StaysWithinUnitInterval) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 2000; ++t) {
    const Embedding a(testing::random_vector(rng, 1 + rng() % 8));
    const Embedding b(std::vector<double>(a.values().begin(), a.values().end()));
    EXPECT_LE(cosine_similarity(a, b), 1.0);
    std::vector<double> neg(a.values().begin(), a.values().end());
    for (auto& x : neg) x = -3.0 * x;
    EXPECT_GE(cosine_similarity(a, Embedding(neg)), -1.0);
  }
}

TEST(SimilarityMatrixTest, Examples) {
  const auto swap = similarity_matrix(refs({{1, 0}, {0, 1}}, 2), gens({{0, 1}, {1, 0}}, 2));
  EXPECT_EQ(swap.data, (std::vector<double>{0, 1, 1, 0}));
  const auto empty = similarity_matrix(refs({{1, 0}, {0, 1}}, 2), gens({}, 2));
  EXPECT_EQ(empty.rows, 2u);
  EXPECT_EQ(empty.cols, 0u);
  const double h = 1.0 / std::sqrt(2.0);
  const auto row = similarity_matrix(refs({{1, 0}}, 2), gens({{1, 0}, {h, h}}, 2));
  EXPECT_DOUBLE_EQ(row.at(0, 0), 1.0);
  EXPECT_NEAR(row.at(0, 1), 0.70710678, 5e-9);
}

TEST(SimilarityMatrixTest, ErrorNamesLocation) {
  const EmbeddingSet g(EmbeddingRole::kGenerated, 2,
                       {Embedding({1, 0}), Embedding::degenerate({0, 0})});
  try {
    similarity_matrix(refs({{1, 0}}, 2), g);
    FAIL();
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("(0, 1)"), std::string::npos) << e.what();
  }
}

TEST(IdSimilarityTest, TwoByTwo) {
  EmbeddingSet r(EmbeddingRole::kReference, 1), g(EmbeddingRole::kGenerated, 1);
  testing::realize_similarity({{0.9, 0.1}, {0.2, 0.8}}, r, g);
  const auto res = hungarian_id_similarity(r, g);
  EXPECT_NEAR(res.s_id, 0.85, 1e-12);
  ASSERT_EQ(res.matches.size(), 2u);
  EXPECT_EQ(res.matches[0].ref_index, 0u);
  EXPECT_EQ(res.matches[0].gen_index, 0u);
  EXPECT_EQ(res.matches[1].gen_index, 1u);
  EXPECT_TRUE(res.unmatched_refs.empty());
}

TEST(IdSimilarityTest, IdentityAndMissingFaces) {
  EXPECT_DOUBLE_EQ(
      hungarian_id_similarity(refs({{1, 0}, {0, 1}}, 2), gens({{1, 0}, {0, 1}}, 2)).s_id,
      1.0);
  EmbeddingSet r(EmbeddingRole::kReference, 1), g(EmbeddingRole::kGenerated, 1);
  testing::realize_similarity({{0.6}, {0.4}}, r, g);
  const auto res = hungarian_id_similarity(r, g);
  EXPECT_NEAR(res.s_id, 0.30, 1e-12);
  EXPECT_EQ(res.unmatched_refs, (std::vector<std::size_t>{1}));
  EXPECT_EQ(res.per_reference[1], 0.0);
}

TEST(IdSimilarityTest, EmptyGenerationScoresZero) {
  const auto res =
      hungarian_id_similarity(refs({{1, 0}, {0, 1}, {1, 1}}, 2), gens({}, 2));
  EXPECT_EQ(res.s_id, 0.0);
  EXPECT_EQ(res.unmatched_refs.size(), 3u);
}

TEST(IdSimilarityTest, NegativeMatchesAreClamped) {
  // The only available face points away from the reference.
  const auto res = hungarian_id_similarity(refs({{1, 0}}, 2), gens({{-1, 0.2}}, 2));
  ASSERT_EQ(res.matches.size(), 1u);
  EXPECT_LT(res.matches[0].similarity, 0.0);
  EXPECT_EQ(res.s_id, 0.0);
}

TEST(IdSimilarityTest, Errors) {
  EXPECT_THROW(hungarian_id_similarity(refs({}, 2), gens({{1, 0}}, 2)), ValidationError);
  EXPECT_THROW(hungarian_id_similarity(refs({{1, 0}}, 2), gens({{1, 0, 0}}, 3)),
               ValidationError);
}

// Maximum total similarity over every pairing of size min(N, M).
double exhaustive_s_id(const DenseMatrix& s) {
  const std::size_t n = s.rows, m = s.cols;
  std::vector<std::size_t> perm(std::max(n, m));
  std::iota(perm.begin(), perm.end(), 0);
  double best = -std::numeric_limits<double>::infinity();
  do {
    // Ref i takes gen perm[i] when perm[i] < m.
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (perm[i] < m) total += s.at(i, perm[i]);
    }
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST(IdSimilarityPropertyTest, AssignmentSolvedOnUnclampedScores) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng() % 6, m = rng() % 7, d = 1 + rng() % 16;
    const auto r = testing::random_set(rng, EmbeddingRole::kReference, n, d);
    const auto g = testing::random_set(rng, EmbeddingRole::kGenerated, m, d);
    const auto res = hungarian_id_similarity(r, g);
    const DenseMatrix s = similarity_matrix(r, g);
    double unclamped = 0.0;
    for (const auto& match : res.matches) unclamped += match.similarity;
    std::vector<double> neg(s.data.size());
    for (std::size_t k = 0; k < neg.size(); ++k) neg[k] = -s.data[k];
    if (m > 0) {
      EXPECT_NEAR(unclamped, exhaustive_s_id(s), 1e-9);
      const auto oracle = brute_force_assignment(CostMatrix(n, m, neg));
      EXPECT_NEAR(-unclamped, oracle.total_cost, 1e-9);
    }
    EXPECT_EQ(res.matches.size() + res.unmatched_refs.size(), n);
    EXPECT_EQ(res.unmatched_refs.size(), m >= n ? 0 : n - m);
    double clamped = 0.0;
    for (double v : res.per_reference) clamped += v;
    EXPECT_DOUBLE_EQ(res.s_id, clamped / static_cast<double>(n));
    EXPECT_GE(res.s_id, 0.0);
    EXPECT_LE(res.s_id, 1.0);
  }
}

TEST(IdSimilarityPropertyTest, PermutationAndScalingInvariance) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> scale(0.01, 100.0);
  for (int t = 0; t < 500; ++t) {
    const std::size_t n = 1 + rng() % 6, m = rng() % 7, d = 1 + rng() % 16;
    const auto r = testing::random_set(rng, EmbeddingRole::kReference, n, d);
    const auto g = testing::random_set(rng, EmbeddingRole::kGenerated, m, d);
    const double base = hungarian_id_similarity(r, g).s_id;

    std::vector<Embedding> ri(r.items()), gi(g.items());
    std::shuffle(ri.begin(), ri.end(), rng);
    std::shuffle(gi.begin(), gi.end(), rng);
    for (auto* set : {&ri, &gi}) {
      for (auto& e : *set) {
        std::vector<double> v(e.values().begin(), e.values().end());
        const double k = scale(rng);
        for (auto& x : v) x *= k;
        e = Embedding(v);
      }
    }
    const double moved = hungarian_id_similarity(
        EmbeddingSet(EmbeddingRole::kReference, d, ri),
        EmbeddingSet(EmbeddingRole::kGenerated, d, gi)).s_id;
    EXPECT_NEAR(base, moved, 1e-9);
  }
}

TEST(CountAccuracyTest, Examples) {
  EXPECT_EQ(count_accuracy(3, 3), 1);
  EXPECT_EQ(count_accuracy(3, 2), 0);
  EXPECT_EQ(count_accuracy(5, 6), 0);
  for (std::size_t n = 1; n <= 6; ++n) {
    for (std::size_t m = 1; m <= 6; ++m) EXPECT_EQ(count_accuracy(n, m), count_accuracy(m, n));
  }
}

TEST(ActionScoreTest, Examples) {
  EXPECT_DOUBLE_EQ(action_score(std::vector<int>{10, 10}), 1.0);
  EXPECT_DOUBLE_EQ(action_score(std::vector<int>{1}), 0.1);
  EXPECT_NEAR(action_score(std::vector<int>{10, 5, 1}), 0.53333333333, 1e-9);
  EXPECT_THROW(action_score(std::vector<int>{}), ValidationError);
  EXPECT_THROW(action_score(std::vector<int>{0}), ValidationError);
  EXPECT_THROW(action_score(std::vector<int>{11}), ValidationError);
}

TEST(AlignmentScoreTest, Examples) {
  EXPECT_DOUBLE_EQ(alignment_score(1.0, 1.0, 1.0, 1), 1.0);
  EXPECT_NEAR(alignment_score(0.262, 0.875, 0.713, 1), (0.262 + 0.794 + 1.0) / 3.0, 1e-9);
  EXPECT_NEAR(alignment_score(0.5, 0.8, std::nullopt, 0), 1.3 / 3.0, 1e-12);
  EXPECT_NEAR(alignment_score(0.5, std::nullopt, 0.8, 0), 1.3 / 3.0, 1e-12);
  EXPECT_THROW(alignment_score(0.5, std::nullopt, std::nullopt, 1), ValidationError);
  EXPECT_THROW(alignment_score(1.5, 0.5, std::nullopt, 1), ValidationError);
}

TEST(UnifiedScoreTest, Examples) {
  EXPECT_EQ(unified_score(0.0, 0.9), 0.0);
  EXPECT_EQ(unified_score(1.0, 1.0), 1.0);
  // Direct evaluation gives 0.533019; the often-quoted 0.53294 is within 1e-4.
  EXPECT_NEAR(unified_score(0.494, 0.55367), std::cbrt(0.494 * 0.55367 * 0.55367), 1e-12);
  EXPECT_NEAR(unified_score(0.494, 0.55367), 0.53294, 1e-4);
  EXPECT_THROW(unified_score(-0.1, 0.5), ValidationError);
  EXPECT_THROW(unified_score(0.5, 1.1), ValidationError);
}

TEST(UnifiedScoreTest, GeometricMeanBoundsOnGrid) {
  for (int i = 1; i <= 20; ++i) {
    for (int j = 1; j <= 20; ++j) {
      const double s = i * 0.05, a = j * 0.05;
      const double u = unified_score(s, a);
      EXPECT_LE(u, std::max(s, a) + 1e-12);
      EXPECT_GE(u, std::min(s, a) - 1e-12);
      EXPECT_NEAR(u * u * u, s * a * a, 1e-12);
    }
  }
}

}  // namespace
}  // namespace mht
