// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#include "mht/regions.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mht/error.hpp"
#include "mht/io.hpp"
#include "mht/metrics.hpp"

namespace mht {

namespace fs = std::filesystem;

AttentionProbe load_attention_probe(const fs::path& path) {
  const io::json j = io::read_json_file(path);
  AttentionProbe probe;
  try {
    const std::size_t length = j.at("L").get<std::size_t>();
    probe.layout = io::layout_from_json(j.at("layout"));
    if (probe.layout.length != length) {
      throw ValidationError("probe L=" + std::to_string(length) +
                            " disagrees with layout L=" +
                            std::to_string(probe.layout.length));
    }
    if (j.contains("timestep")) probe.timestep_tag = j["timestep"].get<std::string>();
    const auto& layers = j.at("layers");
    if (!layers.is_array()) throw ValidationError("layers must be an array");
    for (const auto& layer : layers) {
      const fs::path file = path.parent_path() / layer.at("file").get<std::string>();
      DenseMatrix m(length, length);
      m.data = io::read_f32_file(file, length * length);
      probe.layers.push_back(std::move(m));
    }
  } catch (const io::json::exception& e) {
    throw ValidationError("malformed attention probe " + path.string() + ": " +
                          e.what());
  }
  return probe;
}

std::vector<SimilarityMap> aggregate_attention_maps(const AttentionProbe& probe) {
  const TokenLayout& layout = probe.layout;
  validate_layout(layout);
  if (layout.image_count() == 0) {
    throw ValidationError("attention aggregation needs at least one image group");
  }
  if (probe.layers.empty()) throw ValidationError("attention probe has no layers");

  const std::size_t length = layout.length;
  const std::size_t d = layout.grid_side;
  IndexSet latent = layout.latent;
  std::sort(latent.begin(), latent.end());

  std::vector<SimilarityMap> maps(layout.image_count(), SimilarityMap(d));
  for (std::size_t l = 0; l < probe.layers.size(); ++l) {
    const DenseMatrix& p = probe.layers[l];
    if (p.rows != length || p.cols != length || p.data.size() != length * length) {
      throw ValidationError("layer " + std::to_string(l) + " is " +
                            std::to_string(p.rows) + "x" + std::to_string(p.cols) +
                            ", expected " + std::to_string(length) + "x" +
                            std::to_string(length));
    }
    for (double v : p.data) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError("layer " + std::to_string(l) +
                              " has a negative or non-finite attention entry");
      }
    }
    for (std::size_t k = 0; k < layout.image_count(); ++k) {
      auto values = maps[k].values();
      for (std::size_t cell = 0; cell < latent.size(); ++cell) {
        double v = 0.0;
        for (std::size_t j : layout.images[k]) v += p.at(latent[cell], j);
        values[cell] += v;
      }
    }
  }
  return maps;
}

std::vector<std::size_t> nms_indices(std::span<const RegionMap> candidates,
                                     double theta) {
  if (!(theta >= 0.0 && theta <= 1.0)) {
    throw ValidationError("NMS threshold must lie in [0, 1]");
  }
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (!candidates[i].same_shape(candidates[0])) {
      throw ValidationError("NMS candidate " + std::to_string(i) +
                            " has different dimensions");
    }
  }
  std::vector<std::uint64_t> areas(candidates.size());
  for (std::size_t i = 0; i < candidates.size(); ++i) areas[i] = candidates[i].area();
  std::vector<std::size_t> order(candidates.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return areas[a] > areas[b]; });

  std::vector<std::size_t> kept;
  for (std::size_t idx : order) {
    const bool keep = std::all_of(kept.begin(), kept.end(), [&](std::size_t other) {
      return iou(candidates[idx], candidates[other]) <= theta;
    });
    if (keep) kept.push_back(idx);
  }
  return kept;
}

std::vector<RegionMap> nms_masks(std::span<const RegionMap> candidates,
                                 double theta) {
  std::vector<RegionMap> out;
  for (std::size_t idx : nms_indices(candidates, theta)) out.push_back(candidates[idx]);
  return out;
}

CostMatrix overlap_cost(std::span<const SimilarityMap> sim_maps,
                        std::span<const RegionMap> segments) {
  if (sim_maps.empty()) throw ValidationError("overlap cost needs K >= 1");
  const std::size_t d = sim_maps[0].side();
  for (const auto& s : sim_maps) {
    if (s.side() != d) throw ValidationError("similarity maps differ in size");
  }
  for (std::size_t q = 0; q < segments.size(); ++q) {
    if (segments[q].height() != d || segments[q].width() != d) {
      throw ValidationError("segment " + std::to_string(q) + " is " +
                            std::to_string(segments[q].height()) + "x" +
                            std::to_string(segments[q].width()) +
                            ", similarity maps are " + std::to_string(d) + "x" +
                            std::to_string(d));
    }
  }
  std::vector<double> cells(sim_maps.size() * segments.size());
  for (std::size_t k = 0; k < sim_maps.size(); ++k) {
    const auto values = sim_maps[k].values();
    for (std::size_t q = 0; q < segments.size(); ++q) {
      double overlap = 0.0;
      for (std::size_t cell = 0; cell < d * d; ++cell) {
        if (segments[q].flat(cell)) overlap += values[cell];
      }
      cells[k * segments.size() + q] = -overlap;
    }
  }
  return CostMatrix(sim_maps.size(), segments.size(), std::move(cells));
}

CostMatrix identity_cost(const EmbeddingSet& refs, std::span<const Embedding> faces) {
  if (refs.empty()) throw ValidationError("identity cost needs K >= 1");
  std::vector<double> cells(refs.size() * faces.size());
  for (std::size_t k = 0; k < refs.size(); ++k) {
    for (std::size_t q = 0; q < faces.size(); ++q) {
      cells[k * faces.size() + q] = 1.0 - cosine_similarity(refs[k], faces[q]);
    }
  }
  return CostMatrix(refs.size(), faces.size(), std::move(cells));
}

std::string_view to_string(FillPolicy policy) {
  return policy == FillPolicy::kOnes ? "ones" : "zeros";
}

RegionAssignment assign_regions_by_attention(std::span<const SimilarityMap> sim_maps,
                                             std::span<const RegionMap> segments,
                                             const AttentionAssignOptions& options) {
  if (sim_maps.empty()) throw ValidationError("region assignment needs K >= 1");
  const std::size_t d = sim_maps[0].side();

  std::vector<std::size_t> candidate_ids;
  if (options.segments_filtered) {
    candidate_ids.resize(segments.size());
    std::iota(candidate_ids.begin(), candidate_ids.end(), 0);
  } else {
    candidate_ids = nms_indices(segments, options.nms_theta);
  }
  std::vector<RegionMap> kept;
  kept.reserve(candidate_ids.size());
  for (std::size_t id : candidate_ids) kept.push_back(segments[id]);

  RegionAssignment out;
  out.fill_policy = FillPolicy::kOnes;
  out.maps.assign(sim_maps.size(), RegionMap::ones(d, d));
  const CostMatrix cost = overlap_cost(sim_maps, kept);
  if (kept.empty()) return out;

  for (const auto& [k, q] : solve_assignment(cost).pairs) {
    out.maps[k] = kept[q];
    out.matched.emplace_back(k, candidate_ids[q]);
  }
  return out;
}

RegionAssignment assign_regions_by_identity(const EmbeddingSet& refs,
                                            std::span<const FaceCandidate> faces,
                                            std::size_t height, std::size_t width) {
  RegionAssignment out;
  out.fill_policy = FillPolicy::kZeros;
  out.maps.assign(refs.size(), RegionMap::zeros(height, width));
  if (refs.empty()) return out;

  std::vector<Embedding> face_embs;
  face_embs.reserve(faces.size());
  for (std::size_t q = 0; q < faces.size(); ++q) {
    if (faces[q].mask.height() != height || faces[q].mask.width() != width) {
      throw ValidationError("face mask " + std::to_string(q) + " is " +
                            std::to_string(faces[q].mask.height()) + "x" +
                            std::to_string(faces[q].mask.width()) + ", expected " +
                            std::to_string(height) + "x" + std::to_string(width));
    }
    if (faces[q].embedding.dim() != refs.dim()) {
      throw ValidationError("dimension mismatch: face " + std::to_string(q) +
                            " embedding has dim " +
                            std::to_string(faces[q].embedding.dim()) +
                            ", references " + std::to_string(refs.dim()));
    }
    face_embs.push_back(faces[q].embedding);
  }
  const CostMatrix cost = identity_cost(refs, face_embs);
  if (faces.empty()) return out;

  for (const auto& [k, q] : solve_assignment(cost).pairs) {
    out.maps[k] = faces[q].mask;
    out.matched.emplace_back(k, q);
  }
  return out;
}

}  // namespace mht
