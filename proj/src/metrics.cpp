// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#include "mht/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mht/assignment.hpp"
#include "mht/error.hpp"

namespace mht {

double cosine_similarity(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) {
    throw ValidationError("dimension mismatch: " + std::to_string(a.dim()) +
                          " vs " + std::to_string(b.dim()));
  }
  if (a.is_degenerate() || b.is_degenerate()) {
    throw ValidationError("cosine similarity of a zero-norm vector");
  }
  double dot = 0.0;
  for (std::size_t i = 0; i < a.dim(); ++i) dot += a[i] * b[i];
  return std::clamp(dot / (a.norm() * b.norm()), -1.0, 1.0);
}

DenseMatrix similarity_matrix(const EmbeddingSet& refs, const EmbeddingSet& gens) {
  DenseMatrix s(refs.size(), gens.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    for (std::size_t j = 0; j < gens.size(); ++j) {
      try {
        s.at(i, j) = cosine_similarity(refs[i], gens[j]);
      } catch (const ValidationError& e) {
        throw ValidationError(std::string(e.what()) + " at (" + std::to_string(i) +
                              ", " + std::to_string(j) + ")");
      }
    }
  }
  return s;
}

IdSimilarityResult hungarian_id_similarity(const EmbeddingSet& refs,
                                           const EmbeddingSet& gens) {
  if (refs.empty()) throw ValidationError("hungarian_id_similarity needs N >= 1");
  if (refs.dim() != gens.dim()) {
    throw ValidationError("dimension mismatch: references have dim " +
                          std::to_string(refs.dim()) + ", generated faces " +
                          std::to_string(gens.dim()));
  }
  const DenseMatrix s = similarity_matrix(refs, gens);
  const std::size_t n = refs.size();

  IdSimilarityResult out;
  out.per_reference.assign(n, 0.0);

  std::vector<double> neg(s.data.size());
  std::transform(s.data.begin(), s.data.end(), neg.begin(),
                 [](double v) { return -v; });
  const Assignment assignment = solve_assignment(CostMatrix(n, gens.size(), neg));

  std::vector<char> matched(n, 0);
  double total = 0.0;
  for (const auto& [i, j] : assignment.pairs) {
    const double sim = s.at(i, j);
    out.matches.push_back({i, j, sim});
    out.per_reference[i] = std::max(sim, 0.0);
    total += out.per_reference[i];
    matched[i] = 1;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!matched[i]) out.unmatched_refs.push_back(i);
  }
  out.s_id = total / static_cast<double>(n);
  return out;
}

int count_accuracy(std::size_t n_refs, std::size_t n_gen_faces) {
  return n_refs == n_gen_faces ? 1 : 0;
}

double action_score(std::span<const int> raw_scores) {
  if (raw_scores.empty()) throw ValidationError("action_score of an empty list");
  double sum = 0.0;
  for (int raw : raw_scores) {
    if (raw < 1 || raw > 10) {
      throw ValidationError("score out of range: " + std::to_string(raw));
    }
    sum += static_cast<double>(raw) / 10.0;
  }
  return sum / static_cast<double>(raw_scores.size());
}

double hps_alignment_term(double hps) { return hps; }

namespace {

void check_unit(double v, const char* what) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ValidationError(std::string(what) + " outside [0, 1]: " + std::to_string(v));
  }
}

}  // namespace

double alignment_score(double hps, std::optional<double> action_simple,
                       std::optional<double> action_complex, int count) {
  check_unit(hps, "hps");
  if (count != 0 && count != 1) throw ValidationError("count must be 0 or 1");
  double act;
  if (action_simple && action_complex) {
    check_unit(*action_simple, "action_simple");
    check_unit(*action_complex, "action_complex");
    act = (*action_simple + *action_complex) / 2.0;
  } else if (action_simple) {
    check_unit(*action_simple, "action_simple");
    act = *action_simple;
  } else if (action_complex) {
    check_unit(*action_complex, "action_complex");
    act = *action_complex;
  } else {
    throw ValidationError("alignment needs at least one action score");
  }
  return (hps_alignment_term(hps) + act + static_cast<double>(count)) / 3.0;
}

double unified_score(double s_id, double s_align) {
  check_unit(s_id, "s_id");
  check_unit(s_align, "s_align");
  return std::cbrt(s_id * s_align * s_align);
}

}  // namespace mht
