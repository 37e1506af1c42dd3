// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#include "mht/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <thread>

#include "mht/error.hpp"
#include "mht/metrics.hpp"

namespace mht {

using nlohmann::json;

std::string_view to_string(Metric m) {
  switch (m) {
    case Metric::kCount: return "count";
    case Metric::kIdSimilarity: return "s_id";
    case Metric::kHps: return "hps";
    case Metric::kActionSimple: return "action_simple";
    case Metric::kActionComplex: return "action_complex";
    case Metric::kAlignment: return "s_align";
    case Metric::kUnified: return "s_unified";
  }
  return "?";
}

std::string_view display_name(Metric m) {
  switch (m) {
    case Metric::kCount: return "Count";
    case Metric::kIdSimilarity: return "Multi-ID";
    case Metric::kHps: return "HPS";
    case Metric::kActionSimple: return "Simple";
    case Metric::kActionComplex: return "Complex";
    case Metric::kAlignment: return "Align";
    case Metric::kUnified: return "Unified";
  }
  return "?";
}

std::optional<double> metric_value(const SampleScores& s, Metric m) {
  switch (m) {
    case Metric::kCount: return static_cast<double>(s.count);
    case Metric::kIdSimilarity: return s.s_id;
    case Metric::kHps: return s.hps;
    case Metric::kActionSimple: return s.action_simple;
    case Metric::kActionComplex: return s.action_complex;
    case Metric::kAlignment: return s.s_align;
    case Metric::kUnified: return s.s_unified;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

SampleResult evaluate_unchecked(const SampleRecord& record) {
  validate_record(record);
  SampleResult out;
  out.sample_id = record.sample_id;
  out.n_gen = record.n_gen();
  out.ref_attributes = record.ref_attributes;

  SampleScores& s = out.scores;
  s.count = count_accuracy(record.n_refs(), record.n_gen());
  const IdSimilarityResult id = hungarian_id_similarity(record.ref_embeddings,
                                                        record.gen_embeddings);
  s.s_id = id.s_id;
  out.per_reference = id.per_reference;

  std::vector<int> simple;
  std::vector<int> complex;
  for (const auto& item : record.qa_items) {
    (item.kind == QaKind::kSimple ? simple : complex).push_back(item.raw_score);
  }
  if (!simple.empty()) s.action_simple = action_score(simple);
  if (!complex.empty()) s.action_complex = action_score(complex);
  s.hps = record.hps;
  if (s.hps && (s.action_simple || s.action_complex)) {
    s.s_align = alignment_score(*s.hps, s.action_simple, s.action_complex, s.count);
    s.s_unified = unified_score(s.s_id, *s.s_align);
  }
  return out;
}

}  // namespace

SampleResult evaluate_record(const SampleRecord& record) {
  try {
    return evaluate_unchecked(record);
  } catch (const Error& e) {
    const std::string what = "sample " + record.sample_id + ": " + e.what();
    if (e.kind() == ErrorKind::kIo) throw IoError(what);
    throw ValidationError(what);
  }
}

SampleScores evaluate_sample(const SampleRecord& record) {
  return evaluate_record(record).scores;
}

std::vector<SampleResult> evaluate_samples(std::span<const SampleRecord> records,
                                           const EvalOptions& options,
                                           std::vector<io::SkippedSample>* skipped) {
  if (options.jobs == 0) throw ValidationError("jobs must be at least 1");
  const std::size_t n = records.size();
  std::vector<std::optional<SampleResult>> results(n);
  std::vector<std::optional<Error>> errors(n);

  auto work = [&](std::size_t i) {
    try {
      results[i] = evaluate_record(records[i]);
    } catch (const Error& e) {
      errors[i] = e;
    }
  };
  const std::size_t jobs = std::min(options.jobs, std::max<std::size_t>(n, 1));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::jthread> pool;
    pool.reserve(jobs);
    for (std::size_t t = 0; t < jobs; ++t) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < n; i = next++) work(i);
      });
    }
  }

  std::vector<SampleResult> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (errors[i]) {
      if (!options.skip_invalid) {
        if (errors[i]->kind() == ErrorKind::kIo) throw IoError(errors[i]->what());
        throw ValidationError(errors[i]->what());
      }
      if (skipped) skipped->push_back({records[i].sample_id, errors[i]->what()});
      continue;
    }
    out.push_back(std::move(*results[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Aggregation
// ---------------------------------------------------------------------------

namespace {

struct Accumulator {
  std::size_t samples = 0;
  std::array<double, kMetricCount> sum{};
  std::array<std::size_t, kMetricCount> n{};

  void add(const SampleScores& s) {
    ++samples;
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      if (const auto v = metric_value(s, kAllMetrics[m])) {
        sum[m] += *v;
        ++n[m];
      }
    }
  }

  ScoreRow row() const {
    ScoreRow r;
    r.sample_count = samples;
    for (std::size_t m = 0; m < kMetricCount; ++m) {
      r.metrics[m].n = n[m];
      if (n[m] > 0) r.metrics[m].mean = 100.0 * sum[m] / static_cast<double>(n[m]);
    }
    return r;
  }
};

}  // namespace

BenchReport aggregate_report(std::vector<SampleResult> results) {
  if (results.empty()) throw ValidationError("cannot aggregate an empty result set");
  std::sort(results.begin(), results.end(),
            [](const SampleResult& a, const SampleResult& b) {
              return a.sample_id < b.sample_id;
            });
  for (std::size_t i = 1; i < results.size(); ++i) {
    if (results[i].sample_id == results[i - 1].sample_id) {
      throw ValidationError("duplicate sample_id \"" + results[i].sample_id + "\"");
    }
  }

  Accumulator overall;
  std::map<std::size_t, Accumulator> by_count;
  constexpr std::size_t kAttrs = std::size(kAllAttributes);
  std::array<std::vector<double>, kAttrs> attr_sum;
  std::array<std::vector<std::size_t>, kAttrs> attr_n;
  for (std::size_t a = 0; a < kAttrs; ++a) {
    attr_sum[a].assign(bucket_count(kAllAttributes[a]), 0.0);
    attr_n[a].assign(bucket_count(kAllAttributes[a]), 0);
  }

  for (const auto& r : results) {
    if (r.per_reference.size() != r.n_refs()) {
      throw ValidationError("sample " + r.sample_id +
                            ": per-reference similarities do not match N");
    }
    overall.add(r.scores);
    by_count[r.n_refs()].add(r.scores);
    for (std::size_t k = 0; k < r.n_refs(); ++k) {
      for (std::size_t a = 0; a < kAttrs; ++a) {
        const std::size_t b = bucket_of(r.ref_attributes[k], kAllAttributes[a]);
        attr_sum[a][b] += r.per_reference[k];
        ++attr_n[a][b];
      }
    }
  }

  BenchReport report;
  report.overall = overall.row();
  for (const auto& [n, acc] : by_count) report.by_person_count[n] = acc.row();
  for (std::size_t a = 0; a < kAttrs; ++a) {
    double row_sum = 0.0;
    std::size_t row_n = 0;
    for (std::size_t b = 0; b < attr_sum[a].size(); ++b) {
      row_sum += attr_sum[a][b];
      row_n += attr_n[a][b];
    }
    if (row_n == 0) continue;
    const double row_mean = 100.0 * row_sum / static_cast<double>(row_n);
    for (std::size_t b = 0; b < attr_sum[a].size(); ++b) {
      if (attr_n[a][b] == 0) continue;
      const double mean = 100.0 * attr_sum[a][b] / static_cast<double>(attr_n[a][b]);
      report.by_attribute.push_back(
          {kAllAttributes[a], b, mean, mean - row_mean, attr_n[a][b]});
    }
  }
  report.samples = std::move(results);
  return report;
}

// ---------------------------------------------------------------------------
// Bias flags
// ---------------------------------------------------------------------------

std::string_view to_string(BiasTier tier) {
  switch (tier) {
    case BiasTier::kNone: return "none";
    case BiasTier::kLight: return "light";
    case BiasTier::kMedium: return "medium";
    case BiasTier::kHeavy: return "heavy";
  }
  return "?";
}

void validate_tiers(const BiasTiers& t) {
  if (!std::isfinite(t.light) || !std::isfinite(t.medium) || !std::isfinite(t.heavy) ||
      t.light < 0.0 || !(t.light < t.medium) || !(t.medium < t.heavy)) {
    throw ValidationError("bias tiers must satisfy 0 <= light < medium < heavy");
  }
}

BiasTier bias_tier(double deviation, const BiasTiers& tiers) {
  validate_tiers(tiers);
  const double d = std::abs(deviation);
  if (d >= tiers.heavy) return BiasTier::kHeavy;
  if (d >= tiers.medium) return BiasTier::kMedium;
  if (d >= tiers.light) return BiasTier::kLight;
  return BiasTier::kNone;
}

std::vector<BiasFlag> flag_bias(const BenchReport& report, const BiasTiers& tiers) {
  validate_tiers(tiers);
  std::vector<BiasFlag> out;
  out.reserve(report.by_attribute.size());
  for (const auto& c : report.by_attribute) {
    out.push_back({c.attribute, c.bucket, c.deviation, bias_tier(c.deviation, tiers)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pose sources
// ---------------------------------------------------------------------------

std::map<std::string, std::optional<std::string>> select_pose_sources(
    const std::map<std::string, std::vector<PoseCandidate>>& per_prompt) {
  std::map<std::string, std::optional<std::string>> out;
  for (const auto& [prompt, candidates] : per_prompt) {
    const PoseCandidate* best = nullptr;
    for (const auto& c : candidates) {
      if (!(c.action_score >= kPoseMinAction) || c.count != kPoseRequiredCount) continue;
      if (!best || c.action_score > best->action_score ||
          (c.action_score == best->action_score && c.image_id < best->image_id)) {
        best = &c;
      }
    }
    out[prompt] = best ? std::optional<std::string>(best->image_id) : std::nullopt;
  }
  return out;
}

std::map<std::string, std::vector<PoseCandidate>> pose_candidates_from_json(
    const json& j) {
  const json& root = j.is_object() && j.contains("prompts") ? j["prompts"] : j;
  if (!root.is_object()) {
    throw ValidationError("pose candidates must map prompt ids to candidate lists");
  }
  std::map<std::string, std::vector<PoseCandidate>> out;
  for (const auto& [prompt, list] : root.items()) {
    if (!list.is_array()) {
      throw ValidationError("candidates for prompt " + prompt + " must be an array");
    }
    auto& dst = out[prompt];
    for (std::size_t i = 0; i < list.size(); ++i) {
      const json& c = list[i];
      const std::string where = prompt + "[" + std::to_string(i) + "]";
      if (!c.is_object() || !c.contains("image_id") || !c["image_id"].is_string() ||
          !c.contains("action") || !c["action"].is_number() || !c.contains("count") ||
          !c["count"].is_number_integer()) {
        throw ValidationError("candidate " + where +
                              " needs \"image_id\", \"action\" and integer \"count\"");
      }
      const double action = c["action"].get<double>();
      if (!std::isfinite(action)) {
        throw ValidationError("candidate " + where + " has a non-finite action score");
      }
      dst.push_back({c["image_id"].get<std::string>(), action, c["count"].get<int>()});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Emitters
// ---------------------------------------------------------------------------

namespace {

json optional_json(const std::optional<double>& v) {
  return v ? json(*v) : json(nullptr);
}

json row_to_json(const ScoreRow& row) {
  json metrics = json::object();
  for (Metric m : kAllMetrics) {
    const MetricCell& c = row[m];
    metrics[std::string(to_string(m))] = {{"mean", optional_json(c.mean)}, {"n", c.n}};
  }
  return {{"sample_count", row.sample_count}, {"metrics", std::move(metrics)}};
}

json scores_to_json(const SampleScores& s) {
  json j = json::object();
  for (Metric m : kAllMetrics) {
    j[std::string(to_string(m))] = optional_json(metric_value(s, m));
  }
  return j;
}

// Shortest round-trip representation; identical on every run.
std::string format_number(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string format_fixed1(std::optional<double> v) {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.1f", *v);
  return buf;
}

std::string pad(std::string s, std::size_t width) {
  if (s.size() < width) s.insert(0, width - s.size(), ' ');
  return s;
}

}  // namespace

json report_to_json(const BenchReport& report, const BiasTiers& tiers) {
  json by_count = json::object();
  for (const auto& [n, row] : report.by_person_count) {
    by_count[std::to_string(n)] = row_to_json(row);
  }
  json by_attr = json::object();
  for (const auto& c : report.by_attribute) {
    by_attr[std::string(to_string(c.attribute))]
           [std::string(bucket_name(c.attribute, c.bucket))] = {
               {"mean", c.mean}, {"deviation", c.deviation}, {"n", c.n}};
  }
  json flags = json::array();
  for (const auto& f : flag_bias(report, tiers)) {
    flags.push_back({{"attribute", to_string(f.attribute)},
                     {"bucket", bucket_name(f.attribute, f.bucket)},
                     {"deviation", f.deviation},
                     {"tier", to_string(f.tier)}});
  }
  json samples = json::array();
  for (const auto& s : report.samples) {
    samples.push_back({{"sample_id", s.sample_id},
                       {"n_refs", s.n_refs()},
                       {"n_gen", s.n_gen},
                       {"scores", scores_to_json(s.scores)},
                       {"per_reference", s.per_reference}});
  }
  json skipped = json::array();
  for (const auto& s : report.skipped) {
    skipped.push_back({{"sample_id", s.sample_id}, {"reason", s.reason}});
  }
  return {{"version", 1},
          {"scale", "percent"},
          {"overall", row_to_json(report.overall)},
          {"by_person_count", std::move(by_count)},
          {"by_attribute", std::move(by_attr)},
          {"bias_tiers", {tiers.light, tiers.medium, tiers.heavy}},
          {"bias_flags", std::move(flags)},
          {"samples", std::move(samples)},
          {"skipped", std::move(skipped)}};
}

std::string report_to_csv(const BenchReport& report) {
  std::string out = "section,group,metric,mean,deviation,n\n";
  auto emit_row = [&](const std::string& section, const std::string& group,
                      const ScoreRow& row) {
    for (Metric m : kAllMetrics) {
      const MetricCell& c = row[m];
      out += section + ',' + group + ',' + std::string(to_string(m)) + ',' +
             (c.mean ? format_number(*c.mean) : "") + ",," + std::to_string(c.n) + '\n';
    }
  };
  emit_row("overall", "all", report.overall);
  for (const auto& [n, row] : report.by_person_count) {
    emit_row("person_count", std::to_string(n), row);
  }
  for (const auto& c : report.by_attribute) {
    out += "attribute," + std::string(to_string(c.attribute)) + ':' +
           std::string(bucket_name(c.attribute, c.bucket)) + ",s_id," +
           format_number(c.mean) + ',' + format_number(c.deviation) + ',' +
           std::to_string(c.n) + '\n';
  }
  return out;
}

std::string report_to_table(const BenchReport& report) {
  constexpr std::size_t kWidth = 9;
  std::string out = pad("People", 7);
  for (Metric m : kAllMetrics) out += pad(std::string(display_name(m)), kWidth);
  out += pad("Samples", kWidth) + '\n';
  auto emit_row = [&](const std::string& label, const ScoreRow& row) {
    out += pad(label, 7);
    for (Metric m : kAllMetrics) out += pad(format_fixed1(row[m].mean), kWidth);
    out += pad(std::to_string(row.sample_count), kWidth) + '\n';
  };
  for (const auto& [n, row] : report.by_person_count) emit_row(std::to_string(n), row);
  emit_row("All", report.overall);

  const auto flags = flag_bias(report);
  std::optional<Attribute> current;
  for (std::size_t i = 0; i < report.by_attribute.size(); ++i) {
    const auto& c = report.by_attribute[i];
    if (current != c.attribute) {
      out += '\n' + std::string(to_string(c.attribute)) + " (Multi-ID, deviation)\n";
      current = c.attribute;
    }
    char dev[32];
    std::snprintf(dev, sizeof dev, "%+.1f", c.deviation);
    out += "  " + std::string(bucket_name(c.attribute, c.bucket));
    out += pad(format_fixed1(c.mean), 24 - std::min<std::size_t>(
                                              22, bucket_name(c.attribute, c.bucket).size()));
    out += pad(dev, 8) + pad(std::to_string(c.n), 7);
    if (flags[i].tier != BiasTier::kNone) out += "  " + std::string(to_string(flags[i].tier));
    out += '\n';
  }
  return out;
}

BenchReport run_benchmark(const std::filesystem::path& manifest, const EvalOptions& options) {
  io::Manifest parsed =
      io::parse_manifest(manifest, io::ManifestOptions{options.skip_invalid});
  std::vector<io::SkippedSample> skipped = std::move(parsed.skipped);
  std::vector<SampleResult> results = evaluate_samples(parsed.samples, options, &skipped);
  BenchReport report = aggregate_report(std::move(results));
  report.skipped = std::move(skipped);
  return report;
}

}  // namespace mht
