// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <map>
#include <nlohmann/json.hpp>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mht/core.hpp"
#include "mht/io.hpp"

namespace mht {

/// Per-sample metrics, all on [0, 1].
struct SampleScores {
  int count = 0;
  double s_id = 0.0;
  std::optional<double> hps;
  std::optional<double> action_simple;
  std::optional<double> action_complex;
  std::optional<double> s_align;
  std::optional<double> s_unified;

  friend bool operator==(const SampleScores&, const SampleScores&) = default;
};

enum class Metric : std::uint8_t {
  kCount,
  kIdSimilarity,
  kHps,
  kActionSimple,
  kActionComplex,
  kAlignment,
  kUnified,
};

inline constexpr std::size_t kMetricCount = 7;
inline constexpr Metric kAllMetrics[kMetricCount] = {
    Metric::kCount,        Metric::kIdSimilarity,  Metric::kHps,
    Metric::kActionSimple, Metric::kActionComplex, Metric::kAlignment,
    Metric::kUnified};

/// JSON / CSV key, e.g. "s_id".
std::string_view to_string(Metric m);
/// Column header for the text table, e.g. "Multi-ID".
std::string_view display_name(Metric m);
std::optional<double> metric_value(const SampleScores& scores, Metric m);

/// Everything aggregation needs from one evaluated sample.
struct SampleResult {
  std::string sample_id;
  std::size_t n_gen = 0;
  std::vector<AttributeLabel> ref_attributes;  // size N
  SampleScores scores;
  /// Clamped matched similarity per reference, 0 when unmatched.
  std::vector<double> per_reference;

  std::size_t n_refs() const noexcept { return ref_attributes.size(); }
};

SampleResult evaluate_record(const SampleRecord& record);
SampleScores evaluate_sample(const SampleRecord& record);

struct EvalOptions {
  std::size_t jobs = 1;
  /// Record failing samples in `skipped` instead of aborting.
  bool skip_invalid = false;
};

/// Evaluates every record, `jobs` at a time. Results keep input order. On
/// failure (without skip_invalid) the error of the first failing record in
/// input order is raised, whatever the thread schedule.
std::vector<SampleResult> evaluate_samples(std::span<const SampleRecord> records,
                                           const EvalOptions& options,
                                           std::vector<io::SkippedSample>* skipped = nullptr);

/// Mean on the 0..100 scale over the samples that define the metric.
struct MetricCell {
  std::optional<double> mean;
  std::size_t n = 0;

  friend bool operator==(const MetricCell&, const MetricCell&) = default;
};

struct ScoreRow {
  std::size_t sample_count = 0;
  std::array<MetricCell, kMetricCount> metrics;

  const MetricCell& operator[](Metric m) const {
    return metrics[static_cast<std::size_t>(m)];
  }
};

struct AttributeCell {
  Attribute attribute = Attribute::kEthnicity;
  std::size_t bucket = 0;
  double mean = 0.0;       // 0..100
  double deviation = 0.0;  // mean minus the reference-weighted row mean
  std::size_t n = 0;       // references in the bucket
};

struct BenchReport {
  ScoreRow overall;
  std::map<std::size_t, ScoreRow> by_person_count;
  /// Nonempty cells, ordered by attribute (kAllAttributes order) then bucket.
  std::vector<AttributeCell> by_attribute;
  /// Sorted by sample_id.
  std::vector<SampleResult> samples;
  std::vector<io::SkippedSample> skipped;
};

/// Deterministic fold over the results sorted by sample_id. Throws on empty
/// input.
BenchReport aggregate_report(std::vector<SampleResult> results);

enum class BiasTier : std::uint8_t { kNone, kLight, kMedium, kHeavy };

std::string_view to_string(BiasTier tier);

/// Lower bounds of |deviation| (points) for light, medium and heavy.
struct BiasTiers {
  double light = 1.0;
  double medium = 2.5;
  double heavy = 4.0;
};

struct BiasFlag {
  Attribute attribute = Attribute::kEthnicity;
  std::size_t bucket = 0;
  double deviation = 0.0;
  BiasTier tier = BiasTier::kNone;
};

/// Throws unless 0 <= light < medium < heavy, all finite.
void validate_tiers(const BiasTiers& tiers);
BiasTier bias_tier(double deviation, const BiasTiers& tiers = {});
std::vector<BiasFlag> flag_bias(const BenchReport& report, const BiasTiers& tiers = {});

inline constexpr double kPoseMinAction = 0.97;
inline constexpr int kPoseRequiredCount = 1;

struct PoseCandidate {
  std::string image_id;
  double action_score = 0.0;
  int count = 0;
};

/// Per prompt, the best candidate with action_score >= 0.97 and count == 1
/// (highest action, then smallest image_id), or nullopt when none qualifies
/// and a text-to-pose fallback is needed.
std::map<std::string, std::optional<std::string>> select_pose_sources(
    const std::map<std::string, std::vector<PoseCandidate>>& per_prompt);

std::map<std::string, std::vector<PoseCandidate>> pose_candidates_from_json(
    const nlohmann::json& j);

// Report emitters. JSON is canonical and keeps full precision; the text table
// rounds to one decimal.
nlohmann::json report_to_json(const BenchReport& report, const BiasTiers& tiers = {});
std::string report_to_csv(const BenchReport& report);
std::string report_to_table(const BenchReport& report);

/// Parses, evaluates and aggregates a manifest file.
BenchReport run_benchmark(const std::filesystem::path& manifest, const EvalOptions& options);

}  // namespace mht
