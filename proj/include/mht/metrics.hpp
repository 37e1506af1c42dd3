// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "mht/core.hpp"

namespace mht {

/// (a . b) / (|a| |b|), clamped to [-1, 1] against rounding. Throws on zero
/// norm or dimension mismatch.
double cosine_similarity(const Embedding& a, const Embedding& b);

/// N x M matrix of reference-vs-generated cosine similarities.
DenseMatrix similarity_matrix(const EmbeddingSet& refs, const EmbeddingSet& gens);

struct IdMatch {
  std::size_t ref_index = 0;
  std::size_t gen_index = 0;
  double similarity = 0.0;  // unclamped s_ij

  friend bool operator==(const IdMatch&, const IdMatch&) = default;
};

struct IdSimilarityResult {
  double s_id = 0.0;
  std::vector<IdMatch> matches;
  std::vector<std::size_t> unmatched_refs;

  /// max(s_ij, 0) for each reference; 0 when unmatched. Size N.
  std::vector<double> per_reference;
};

/// Hungarian ID similarity: optimal one-to-one matching of references to
/// generated faces on -S, then the sum of matched similarities (each clamped
/// below at 0) divided by the number of references N.
IdSimilarityResult hungarian_id_similarity(const EmbeddingSet& refs,
                                           const EmbeddingSet& gens);

/// Kronecker delta of reference and detected face counts.
int count_accuracy(std::size_t n_refs, std::size_t n_gen_faces);

/// Mean of raw / 10 over MLLM answers on the 1..10 choice scale.
double action_score(std::span<const int> raw_scores);

/// HPS as it enters the alignment mean. Identity today; kept separate so a
/// rescaling can be slotted in without touching the aggregate.
double hps_alignment_term(double hps);

/// (hps + S_act + count) / 3 where S_act is the mean of whichever action
/// scores are present.
double alignment_score(double hps, std::optional<double> action_simple,
                       std::optional<double> action_complex, int count);

/// (s_id * s_align^2)^(1/3).
double unified_score(double s_id, double s_align);

}  // namespace mht
