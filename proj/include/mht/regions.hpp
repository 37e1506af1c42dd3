// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "mht/assignment.hpp"
#include "mht/core.hpp"

namespace mht {

/// Head-averaged self-attention maps P^(l) captured from the probed layers of
/// a unified model at one denoising timestep.
struct AttentionProbe {
  std::vector<DenseMatrix> layers;  // each L x L, finite, >= 0
  TokenLayout layout;
  std::string timestep_tag;
};

/// Loads {"L", "layers": [{"file": "x.f32"}...], "layout": {...}}. Layer
/// files are L*L little-endian f32, resolved relative to the probe file.
AttentionProbe load_attention_probe(const std::filesystem::path& path);

/// Per reference image k, sums the attention every latent query pays to the
/// tokens of image k, over all probed layers, laid out on the D x D grid
/// (row-major over the sorted latent indices).
std::vector<SimilarityMap> aggregate_attention_maps(const AttentionProbe& probe);

inline constexpr double kDefaultNmsTheta = 0.5;

/// Greedy mask NMS. Candidates are visited by area (descending, ties by
/// index); one is kept iff its IoU with every kept mask is <= theta. Returns
/// the original indices of kept masks in visiting order.
std::vector<std::size_t> nms_indices(std::span<const RegionMap> candidates,
                                     double theta);

std::vector<RegionMap> nms_masks(std::span<const RegionMap> candidates,
                                 double theta);

/// C[k][q] = -sum(S_k * G_q).
CostMatrix overlap_cost(std::span<const SimilarityMap> sim_maps,
                        std::span<const RegionMap> segments);

/// C[k][q] = 1 - cos(e_ref_k, e_gen_q).
CostMatrix identity_cost(const EmbeddingSet& refs,
                         std::span<const Embedding> faces);

enum class FillPolicy { kOnes, kZeros };

std::string_view to_string(FillPolicy policy);

struct RegionAssignment {
  std::vector<RegionMap> maps;  // one per reference image
  /// (k, q): reference k received segment q. q indexes the segment list the
  /// caller passed in.
  std::vector<std::pair<std::size_t, std::size_t>> matched;
  FillPolicy fill_policy = FillPolicy::kOnes;
};

struct AttentionAssignOptions {
  /// When false, nms_masks(segments, nms_theta) runs first.
  bool segments_filtered = true;
  double nms_theta = kDefaultNmsTheta;
};

/// Attention-guided region assignment. Unmatched references (including the
/// Q = 0 case) get an all-ones D x D map.
RegionAssignment assign_regions_by_attention(
    std::span<const SimilarityMap> sim_maps, std::span<const RegionMap> segments,
    const AttentionAssignOptions& options = {});

struct FaceCandidate {
  RegionMap mask;
  Embedding embedding;
};

/// Identity-guided region assignment for pixel-space face masks. Unmatched
/// references get an all-zeros height x width map.
RegionAssignment assign_regions_by_identity(const EmbeddingSet& refs,
                                            std::span<const FaceCandidate> faces,
                                            std::size_t height, std::size_t width);

}  // namespace mht
