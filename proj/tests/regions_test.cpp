// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <random>

#include "mht/error.hpp"
#include "mht/io.hpp"
#include "mht/regions.hpp"
#include "test_support.hpp"

namespace mht {
namespace {

namespace fs = std::filesystem;

// L=9: text {0}, one image {1,2}, timestep {3}, latent {4..7} on a 2x2 grid,
// token 8 unassigned.
AttentionProbe example_probe() {
  AttentionProbe p;
  p.layout = {9, {0}, {{1, 2}}, {3}, {4, 5, 6, 7}, 2};
  DenseMatrix m(9, 9);
  m.at(4, 1) = 0.1;
  m.at(4, 2) = 0.2;
  m.at(6, 1) = 0.5;
  m.at(7, 2) = 0.4;
  p.layers.push_back(m);
  return p;
}

void expect_map(const SimilarityMap& s, const std::vector<double>& expected) {
  ASSERT_EQ(s.values().size(), expected.size());
  for (std::size_t i = 0; i < expected.size(); ++i) {
    EXPECT_NEAR(s.values()[i], expected[i], 1e-12) << "cell " << i;
  }
}

TEST(AggregateAttentionTest, HandSummedExample) {
  const auto maps = aggregate_attention_maps(example_probe());
  ASSERT_EQ(maps.size(), 1u);
  expect_map(maps[0], {0.3, 0.0, 0.5, 0.4});
}

TEST(AggregateAttentionTest, ZeroAttentionAndLayerAdditivity) {
  AttentionProbe zero = example_probe();
  zero.layers[0] = DenseMatrix(9, 9);
  expect_map(aggregate_attention_maps(zero)[0], {0, 0, 0, 0});

  AttentionProbe twice = example_probe();
  twice.layers.push_back(twice.layers[0]);
  expect_map(aggregate_attention_maps(twice)[0], {0.6, 0.0, 1.0, 0.8});
}

TEST(AggregateAttentionTest, Errors) {
  AttentionProbe p = example_probe();
  p.layers[0] = DenseMatrix(8, 8);
  EXPECT_THROW(aggregate_attention_maps(p), ValidationError);
  p = example_probe();
  p.layout.images.clear();
  EXPECT_THROW(aggregate_attention_maps(p), ValidationError);
  p = example_probe();
  p.layers.clear();
  EXPECT_THROW(aggregate_attention_maps(p), ValidationError);
  p = example_probe();
  p.layers[0].at(0, 0) = -1.0;
  EXPECT_THROW(aggregate_attention_maps(p), ValidationError);
}

TEST(AggregateAttentionTest, LinearInLayers) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    AttentionProbe a = example_probe();
    a.layers.clear();
    AttentionProbe b = a;
    for (auto* probe : {&a, &b}) {
      for (std::size_t l = 0; l < 1 + rng() % 3; ++l) {
        DenseMatrix m(9, 9);
        for (auto& x : m.data) x = u(rng);
        probe->layers.push_back(m);
      }
    }
    AttentionProbe joined = a;
    joined.layers.insert(joined.layers.end(), b.layers.begin(), b.layers.end());
    auto sum = aggregate_attention_maps(a)[0];
    sum += aggregate_attention_maps(b)[0];
    const auto whole = aggregate_attention_maps(joined)[0];
    for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(sum.values()[i], whole.values()[i], 1e-9);
  }
}

TEST(LoadProbeTest, ReadsLayerFiles) {
  const fs::path dir = fs::temp_directory_path() / "mht_regions_probe";
  fs::create_directories(dir);
  const auto probe = example_probe();
  io::write_f32_file(dir / "l0.f32", probe.layers[0].data);
  const io::json j = {{"L", 9},
                      {"layers", {{{"file", "l0.f32"}}}},
                      {"layout", io::to_json(probe.layout)},
                      {"timestep", "t500"}};
  io::write_text_file(dir / "probe.json", j.dump());
  const auto loaded = load_attention_probe(dir / "probe.json");
  EXPECT_EQ(loaded.timestep_tag, "t500");
  const auto maps = aggregate_attention_maps(loaded);
  // Values pass through f32 storage.
  const std::vector<double> expected = {0.3, 0, 0.5, 0.4};
  for (std::size_t i = 0; i < 4; ++i) EXPECT_NEAR(maps[0].values()[i], expected[i], 1e-7);
  fs::remove(dir / "l0.f32");
  EXPECT_THROW(load_attention_probe(dir / "probe.json"), IoError);
  fs::remove_all(dir);
}

RegionMap map_with_area(std::size_t side, std::vector<std::size_t> cells) {
  RegionMap m(side, side);
  for (std::size_t c : cells) m.set_flat(c, true);
  return m;
}

TEST(NmsTest, Examples) {
  const auto a = map_with_area(4, {0, 1, 2, 3, 4, 5});
  EXPECT_EQ(nms_masks(std::vector<RegionMap>{a, a}, 0.5).size(), 1u);

  const auto left = map_with_area(4, {0, 1});
  const auto right = map_with_area(4, {14, 15});
  EXPECT_EQ(nms_masks(std::vector<RegionMap>{left, right}, 0.0).size(), 2u);

  // A has area 6, B area 4, intersection 3: IoU 3/7.
  const auto b = map_with_area(4, {3, 4, 5, 6});
  EXPECT_DOUBLE_EQ(iou(a, b), 3.0 / 7.0);
  EXPECT_EQ(nms_masks(std::vector<RegionMap>{a, b}, 0.42).size(), 1u);
  EXPECT_EQ(nms_masks(std::vector<RegionMap>{a, b}, 3.0 / 7.0).size(), 2u);
  EXPECT_EQ(nms_masks(std::vector<RegionMap>{a, b}, 0.43).size(), 2u);
}

TEST(NmsTest, VisitsByAreaThenIndex) {
  const auto small = map_with_area(3, {0});
  const auto big = map_with_area(3, {0, 1, 2});
  const auto twin = map_with_area(3, {0, 1, 2});
  EXPECT_EQ(nms_indices(std::vector<RegionMap>{small, big, twin}, 0.5),
            (std::vector<std::size_t>{1, 0}));
}

TEST(NmsTest, Errors) {
  EXPECT_THROW(nms_masks(std::vector<RegionMap>{RegionMap(2, 2), RegionMap(3, 3)}, 0.5),
               ValidationError);
  EXPECT_THROW(nms_masks(std::vector<RegionMap>{}, 1.5), ValidationError);
}

RegionMap random_map(std::mt19937_64& rng, std::size_t side) {
  RegionMap m(side, side);
  for (std::size_t c = 0; c < side * side; ++c) m.set_flat(c, rng() % 2);
  return m;
}

TEST(NmsPropertyTest, KeptMasksArePairwiseSeparatedAndStable) {
  std::mt19937_64 rng(32);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 500; ++t) {
    std::vector<RegionMap> cand;
    for (std::size_t q = 0; q < rng() % 8; ++q) cand.push_back(random_map(rng, 3));
    const double theta = u(rng);
    const auto kept = nms_masks(cand, theta);
    for (std::size_t i = 0; i < kept.size(); ++i) {
      for (std::size_t j = i + 1; j < kept.size(); ++j) EXPECT_LE(iou(kept[i], kept[j]), theta);
    }
    EXPECT_EQ(nms_masks(kept, theta), kept);
  }
}

TEST(OverlapCostTest, Examples) {
  const SimilarityMap peak(2, {1, 0, 0, 0});
  EXPECT_EQ(overlap_cost(std::vector<SimilarityMap>{peak},
                         std::vector<RegionMap>{RegionMap::from_rows({{1, 0}, {0, 0}})})(0, 0),
            -1.0);
  EXPECT_EQ(overlap_cost(std::vector<SimilarityMap>{peak},
                         std::vector<RegionMap>{RegionMap::from_rows({{0, 1}, {1, 1}})})(0, 0),
            0.0);
  const SimilarityMap s(2, {0.3, 0, 0.5, 0.4});
  EXPECT_NEAR(overlap_cost(std::vector<SimilarityMap>{s},
                           std::vector<RegionMap>{RegionMap::from_rows({{1, 1}, {0, 0}})})(0, 0),
              -0.3, 1e-12);
  EXPECT_THROW(overlap_cost(std::vector<SimilarityMap>{s}, std::vector<RegionMap>{RegionMap(3, 3)}),
               ValidationError);
}

TEST(AttentionAssignTest, NoSegmentsGivesOnes) {
  const std::vector<SimilarityMap> sims = {SimilarityMap(2, {1, 0, 0, 0}),
                                           SimilarityMap(2, {0, 0, 0, 1})};
  const auto r = assign_regions_by_attention(sims, {});
  EXPECT_TRUE(r.matched.empty());
  EXPECT_EQ(r.fill_policy, FillPolicy::kOnes);
  for (const auto& m : r.maps) EXPECT_EQ(m, RegionMap::ones(2, 2));
}

TEST(AttentionAssignTest, ConcentratedMapsPickTheirSegments) {
  const std::vector<SimilarityMap> sims = {SimilarityMap(2, {1, 0, 0, 0}),
                                           SimilarityMap(2, {0, 0, 0, 1})};
  const std::vector<RegionMap> segs = {RegionMap::from_rows({{1, 1}, {0, 0}}),
                                       RegionMap::from_rows({{0, 0}, {1, 1}})};
  const auto r = assign_regions_by_attention(sims, segs);
  EXPECT_EQ(r.matched, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}}));
  EXPECT_EQ(r.maps[0], segs[0]);
  EXPECT_EQ(r.maps[1], segs[1]);
}

TEST(AttentionAssignTest, SingleSegmentGoesToLargerOverlap) {
  const std::vector<SimilarityMap> sims = {SimilarityMap(2, {0.2, 0, 0, 0}),
                                           SimilarityMap(2, {0.7, 0, 0, 0})};
  const std::vector<RegionMap> segs = {RegionMap::from_rows({{1, 0}, {0, 0}})};
  const auto r = assign_regions_by_attention(sims, segs);
  EXPECT_EQ(r.matched, (std::vector<std::pair<std::size_t, std::size_t>>{{1, 0}}));
  EXPECT_EQ(r.maps[0], RegionMap::ones(2, 2));
  EXPECT_EQ(r.maps[1], segs[0]);
}

TEST(AttentionAssignTest, UnfilteredSegmentsGoThroughNms) {
  const std::vector<SimilarityMap> sims = {SimilarityMap(2, {0, 0, 0, 1})};
  const auto a = RegionMap::from_rows({{1, 1}, {0, 0}});
  const auto b = RegionMap::from_rows({{0, 0}, {1, 1}});
  // The duplicate of b (index 2) is suppressed; matched indices refer to the
  // caller's list.
  const auto r = assign_regions_by_attention(sims, std::vector<RegionMap>{a, b, b},
                                             {false, 0.5});
  EXPECT_EQ(r.matched, (std::vector<std::pair<std::size_t, std::size_t>>{{0, 1}}));
}

// Largest total overlap over all injective pairings of size min(K, Q).
double best_overlap(const std::vector<SimilarityMap>& s, const std::vector<RegionMap>& g) {
  const std::size_t k = s.size(), q = g.size();
  auto overlap = [&](std::size_t a, std::size_t b) {
    double v = 0.0;
    for (std::size_t c = 0; c < g[b].cell_count(); ++c) {
      if (g[b].flat(c)) v += s[a].values()[c];
    }
    return v;
  };
  std::vector<std::size_t> perm(std::max(k, q));
  std::iota(perm.begin(), perm.end(), 0);
  double best = 0.0;
  do {
    double total = 0.0;
    for (std::size_t a = 0; a < k; ++a) {
      if (perm[a] < q) total += overlap(a, perm[a]);
    }
    best = std::max(best, total);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

TEST(AttentionAssignPropertyTest, MaximizesOverlap) {
  std::mt19937_64 rng(33);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 300; ++t) {
    const std::size_t k = 1 + rng() % 5, q = rng() % 6, d = 1 + rng() % 4;
    std::vector<SimilarityMap> sims;
    for (std::size_t i = 0; i < k; ++i) {
      std::vector<double> v(d * d);
      for (auto& x : v) x = u(rng);
      sims.emplace_back(d, v);
    }
    std::vector<RegionMap> segs;
    for (std::size_t i = 0; i < q; ++i) segs.push_back(random_map(rng, d));
    const auto r = assign_regions_by_attention(sims, segs);
    double total = 0.0;
    for (const auto& [a, b] : r.matched) {
      for (std::size_t c = 0; c < d * d; ++c) {
        if (segs[b].flat(c)) total += sims[a].values()[c];
      }
      EXPECT_EQ(r.maps[a], segs[b]);
    }
    EXPECT_NEAR(total, best_overlap(sims, segs), 1e-9);
    EXPECT_EQ(r.matched.size(), std::min(k, q));
    for (std::size_t a = 0; a < k; ++a) {
      const bool matched = std::any_of(r.matched.begin(), r.matched.end(),
                                       [&](const auto& p) { return p.first == a; });
      if (!matched) EXPECT_EQ(r.maps[a], RegionMap::ones(d, d));
    }
  }
}

TEST(IdentityCostTest, OneMinusCosine) {
  const auto refs = testing::refs({{1, 0}}, 2);
  const double h = 1.0 / std::sqrt(2.0);
  const auto c = identity_cost(refs, std::vector<Embedding>{Embedding({h, h})});
  EXPECT_NEAR(c(0, 0), 1.0 - 1.0 / std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(c(0, 0), 0.29289322, 5e-9);
}

TEST(IdentityAssignTest, DiagonalMatching) {
  const auto refs = testing::refs({{1, 0}, {0, 1}}, 2);
  const std::vector<FaceCandidate> faces = {
      {RegionMap::from_rows({{1, 0, 0}}), Embedding({1, 0})},
      {RegionMap::from_rows({{0, 0, 1}}), Embedding({0, 1})}};
  const auto r = assign_regions_by_identity(refs, faces, 1, 3);
  EXPECT_EQ(r.fill_policy, FillPolicy::kZeros);
  EXPECT_EQ(r.maps[0], faces[0].mask);
  EXPECT_EQ(r.maps[1], faces[1].mask);
}

TEST(IdentityAssignTest, UnmatchedReferenceGetsZeros) {
  const auto refs = testing::refs({{1, 0}, {0, 1}}, 2);
  const std::vector<FaceCandidate> faces = {
      {RegionMap::from_rows({{1, 1}, {0, 0}}), Embedding({0.1, 1})}};
  const auto r = assign_regions_by_identity(refs, faces, 2, 2);
  EXPECT_EQ(r.matched, (std::vector<std::pair<std::size_t, std::size_t>>{{1, 0}}));
  EXPECT_EQ(r.maps[0], RegionMap::zeros(2, 2));
  EXPECT_EQ(r.maps[1], faces[0].mask);
  const auto none = assign_regions_by_identity(refs, {}, 2, 2);
  for (const auto& m : none.maps) EXPECT_EQ(m, RegionMap::zeros(2, 2));
}

TEST(IdentityAssignTest, Errors) {
  const auto refs = testing::refs({{1, 0}}, 2);
  EXPECT_THROW(assign_regions_by_identity(
                   refs, std::vector<FaceCandidate>{{RegionMap(2, 2), Embedding({1, 0, 0})}}, 2, 2),
               ValidationError);
  EXPECT_THROW(assign_regions_by_identity(
                   refs, std::vector<FaceCandidate>{{RegionMap(3, 2), Embedding({1, 0})}}, 2, 2),
               ValidationError);
  EXPECT_THROW(assign_regions_by_identity(
                   refs,
                   std::vector<FaceCandidate>{{RegionMap(2, 2), Embedding::degenerate({0, 0})}},
                   2, 2),
               ValidationError);
}

}  // namespace
}  // namespace mht
