// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mht/core.hpp"

namespace mht {

/// Name recorded next to every seeded output so runs can be reproduced.
inline constexpr const char* kRngName = "mt19937_64";
using Rng = std::mt19937_64;

/// Uniform integer in [0, bound) by rejection sampling. Unlike
/// std::uniform_int_distribution the draw sequence is identical on every
/// standard library.
std::uint64_t uniform_below(Rng& rng, std::uint64_t bound);

/// Per-attribute bucket weights. An absent attribute is not stratified.
struct TargetDistribution {
  std::optional<std::vector<double>> ethnicity;  // kEthnicityCount weights
  std::optional<std::vector<double>> gender;     // kGenderCount weights
  std::optional<std::vector<double>> age;        // kAgeBucketCount weights

  const std::optional<std::vector<double>>& weights(Attribute a) const;
};

/// Weights >= 0 and summing to 1 within 1e-9 per attribute.
void validate_targets(const TargetDistribution& targets);

/// {"ethnicity": {"white": w, ...}, "gender": {...}, "age": {...}}. Every
/// bucket of a present attribute must be listed.
TargetDistribution targets_from_json(const nlohmann::json& j);

struct PoolEntry {
  std::string id;
  AttributeLabel label;
};

/// Accepts {"pool": [...]} or a bare array of {"id", "attributes"}.
std::vector<PoolEntry> pool_from_json(const nlohmann::json& j);

/// Largest-remainder rounding of `expected` to integers summing to `total`.
/// Ties go to the lower index.
std::vector<std::size_t> largest_remainder(std::span<const double> expected,
                                           std::size_t total);

struct BucketQuota {
  std::string bucket;  // e.g. "white/female/aged"; "all" when unstratified
  double expected = 0.0;
  std::size_t quota = 0;
  std::size_t supply = 0;
};

struct StratifiedSample {
  std::vector<std::string> ids;
  std::vector<BucketQuota> quotas;
  std::vector<std::string> warnings;
};

struct SampleOptions {
  /// Downgrade infeasible quotas to warnings and hand the deficit to the
  /// remaining buckets.
  bool best_effort = false;
};

/// Quota-based selection over the joint buckets of the stratified attributes.
/// Joint weights are products of the marginals, renormalized over buckets
/// that have supply. Quotas are rounded by largest remainder, constrained so
/// each marginal stays within its ceiling. Members are drawn uniformly
/// without replacement within each bucket. Deterministic in `seed`.
StratifiedSample stratified_sample(std::span<const PoolEntry> pool,
                                   const TargetDistribution& targets, std::size_t n,
                                   std::uint64_t seed, const SampleOptions& options = {});

struct PromptSlot {
  std::string prompt_id;
  std::size_t persons = 1;  // 1..5
};

struct PromptAssignment {
  std::string prompt_id;
  std::size_t iteration = 0;
  std::vector<std::string> ids;

  friend bool operator==(const PromptAssignment&, const PromptAssignment&) = default;
};

inline constexpr std::size_t kMaxPersonsPerPrompt = 5;

/// Deals ids to every (prompt, iteration) slot round-robin over one seeded
/// shuffle of `ids`: every id is used once before any is reused, and no
/// slot holds the same id twice.
std::vector<PromptAssignment> assign_ids_to_prompts(std::span<const std::string> ids,
                                                    std::span<const PromptSlot> prompts,
                                                    std::size_t iterations_per_prompt,
                                                    std::uint64_t seed);

nlohmann::json to_json(const StratifiedSample& sample);
nlohmann::json to_json(std::span<const PromptAssignment> assignments);

}  // namespace mht
