// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#include "mht/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_set>

#include "mht/error.hpp"
#include "mht/io.hpp"

namespace mht {

using nlohmann::json;

std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
  if (bound == 0) throw ValidationError("uniform_below with bound 0");
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t x = rng();
    if (x >= threshold) return x % bound;
  }
}

// ---------------------------------------------------------------------------
// Targets and pool
// ---------------------------------------------------------------------------

const std::optional<std::vector<double>>& TargetDistribution::weights(Attribute a) const {
  static const std::optional<std::vector<double>> kNone;
  switch (a) {
    case Attribute::kEthnicity: return ethnicity;
    case Attribute::kGender: return gender;
    case Attribute::kAge: return age;
    default: return kNone;
  }
}

namespace {

constexpr Attribute kStratifiable[] = {Attribute::kEthnicity, Attribute::kGender,
                                       Attribute::kAge};

}  // namespace

void validate_targets(const TargetDistribution& targets) {
  for (Attribute a : kStratifiable) {
    const auto& w = targets.weights(a);
    if (!w) continue;
    const std::string name(to_string(a));
    if (w->size() != bucket_count(a)) {
      throw ValidationError(name + " targets need " + std::to_string(bucket_count(a)) +
                            " weights, got " + std::to_string(w->size()));
    }
    double sum = 0.0;
    for (double v : *w) {
      if (!std::isfinite(v) || v < 0.0) {
        throw ValidationError(name + " target weights must be finite and >= 0");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError(name + " target weights sum to " + std::to_string(sum) +
                            ", expected 1");
    }
  }
}

TargetDistribution targets_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("targets must be a JSON object");
  TargetDistribution t;
  for (const auto& [key, value] : j.items()) {
    const auto attr = parse_attribute(key);
    if (!attr || std::find(std::begin(kStratifiable), std::end(kStratifiable), *attr) ==
                     std::end(kStratifiable)) {
      throw ValidationError("unknown target attribute \"" + key + "\"");
    }
    if (!value.is_object()) {
      throw ValidationError("targets." + key + " must map bucket names to weights");
    }
    std::vector<double> weights(bucket_count(*attr), -1.0);
    for (const auto& [bucket, w] : value.items()) {
      const auto idx = parse_bucket(*attr, bucket);
      if (!idx) throw ValidationError("unknown " + key + " bucket \"" + bucket + "\"");
      if (!w.is_number()) {
        throw ValidationError("targets." + key + "." + bucket + " must be a number");
      }
      weights[*idx] = w.get<double>();
    }
    for (std::size_t b = 0; b < weights.size(); ++b) {
      if (weights[b] < 0.0 && weights[b] == -1.0) {
        throw ValidationError("targets." + key + " is missing bucket \"" +
                              std::string(bucket_name(*attr, b)) + "\"");
      }
    }
    switch (*attr) {
      case Attribute::kEthnicity: t.ethnicity = weights; break;
      case Attribute::kGender: t.gender = weights; break;
      case Attribute::kAge: t.age = weights; break;
      default: break;
    }
  }
  validate_targets(t);
  return t;
}

std::vector<PoolEntry> pool_from_json(const json& j) {
  const json& arr = j.is_object() && j.contains("pool") ? j["pool"] : j;
  if (!arr.is_array()) throw ValidationError("pool must be an array");
  std::vector<PoolEntry> pool;
  pool.reserve(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) {
    const json& e = arr[i];
    const std::string where = "pool[" + std::to_string(i) + "]";
    if (!e.is_object() || !e.contains("id") || !e["id"].is_string() ||
        !e.contains("attributes")) {
      throw ValidationError(where + " needs \"id\" and \"attributes\"");
    }
    try {
      pool.push_back({e["id"].get<std::string>(),
                      io::attribute_label_from_json(e["attributes"])});
    } catch (const ValidationError& err) {
      throw ValidationError(std::string(err.what()) + " at " + where);
    }
  }
  return pool;
}

// ---------------------------------------------------------------------------
// Quotas
// ---------------------------------------------------------------------------

std::vector<std::size_t> largest_remainder(std::span<const double> expected,
                                           std::size_t total) {
  std::vector<std::size_t> out(expected.size());
  std::vector<double> rem(expected.size());
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < expected.size(); ++i) {
    const double f = std::floor(expected[i] + 1e-9);
    out[i] = static_cast<std::size_t>(std::max(f, 0.0));
    rem[i] = expected[i] - static_cast<double>(out[i]);
    assigned += out[i];
  }
  std::vector<std::size_t> order(expected.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return rem[a] > rem[b]; });
  for (std::size_t i = 0; assigned < total && !order.empty(); ++i, ++assigned) {
    ++out[order[i % order.size()]];
  }
  return out;
}

namespace {

// Joint buckets over the stratified attributes, mixed-radix indexed in the
// order ethnicity, gender, age.
struct Strata {
  std::vector<Attribute> attrs;
  std::size_t count = 1;

  explicit Strata(const TargetDistribution& t) {
    for (Attribute a : kStratifiable) {
      if (t.weights(a)) {
        attrs.push_back(a);
        count *= bucket_count(a);
      }
    }
  }

  std::size_t bucket_of(const AttributeLabel& label) const {
    std::size_t b = 0;
    for (Attribute a : attrs) b = b * bucket_count(a) + mht::bucket_of(label, a);
    return b;
  }

  std::vector<std::size_t> digits(std::size_t b) const {
    std::vector<std::size_t> d(attrs.size());
    for (std::size_t i = attrs.size(); i-- > 0;) {
      d[i] = b % bucket_count(attrs[i]);
      b /= bucket_count(attrs[i]);
    }
    return d;
  }

  std::string name(std::size_t b) const {
    if (attrs.empty()) return "all";
    const auto d = digits(b);
    std::string out;
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      if (i) out += '/';
      out += bucket_name(attrs[i], d[i]);
    }
    return out;
  }

  double weight(const TargetDistribution& t, std::size_t b) const {
    const auto d = digits(b);
    double w = 1.0;
    for (std::size_t i = 0; i < attrs.size(); ++i) w *= (*t.weights(attrs[i]))[d[i]];
    return w;
  }
};

// Largest-remainder rounding that keeps every marginal count at or below the
// ceiling of its expected value while any bucket still allows it.
std::vector<std::size_t> round_quotas(const Strata& strata,
                                      std::span<const double> expected,
                                      std::size_t total) {
  const std::size_t nb = expected.size();
  std::vector<std::size_t> quota(nb);
  std::size_t assigned = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    quota[b] = static_cast<std::size_t>(std::max(std::floor(expected[b] + 1e-9), 0.0));
    assigned += quota[b];
  }

  std::vector<std::vector<std::size_t>> digits(nb);
  for (std::size_t b = 0; b < nb; ++b) digits[b] = strata.digits(b);
  std::vector<std::vector<double>> target(strata.attrs.size());
  std::vector<std::vector<std::size_t>> realized(strata.attrs.size());
  for (std::size_t a = 0; a < strata.attrs.size(); ++a) {
    target[a].assign(bucket_count(strata.attrs[a]), 0.0);
    realized[a].assign(bucket_count(strata.attrs[a]), 0);
  }
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t a = 0; a < strata.attrs.size(); ++a) {
      target[a][digits[b][a]] += expected[b];
      realized[a][digits[b][a]] += quota[b];
    }
  }
  auto under_cap = [&](std::size_t b) {
    for (std::size_t a = 0; a < strata.attrs.size(); ++a) {
      const std::size_t v = digits[b][a];
      if (static_cast<double>(realized[a][v] + 1) > std::ceil(target[a][v] - 1e-9)) {
        return false;
      }
    }
    return true;
  };

  std::vector<std::size_t> order;
  for (std::size_t b = 0; b < nb; ++b) {
    if (expected[b] > 0.0) order.push_back(b);
  }
  while (assigned < total && !order.empty()) {
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
      return expected[x] - static_cast<double>(quota[x]) >
             expected[y] - static_cast<double>(quota[y]);
    });
    auto pick = std::find_if(order.begin(), order.end(), under_cap);
    const std::size_t b = pick != order.end() ? *pick : order.front();
    ++quota[b];
    ++assigned;
    for (std::size_t a = 0; a < strata.attrs.size(); ++a) ++realized[a][digits[b][a]];
  }
  return quota;
}

}  // namespace

StratifiedSample stratified_sample(std::span<const PoolEntry> pool,
                                   const TargetDistribution& targets, std::size_t n,
                                   std::uint64_t seed, const SampleOptions& options) {
  validate_targets(targets);
  if (n > pool.size()) {
    throw ValidationError("requested " + std::to_string(n) + " ids from a pool of " +
                          std::to_string(pool.size()));
  }
  const Strata strata(targets);

  std::vector<std::vector<const PoolEntry*>> members(strata.count);
  {
    std::unordered_set<std::string> seen;
    for (const auto& e : pool) {
      if (!seen.insert(e.id).second) {
        throw ValidationError("duplicate pool id \"" + e.id + "\"");
      }
      members[strata.bucket_of(e.label)].push_back(&e);
    }
  }
  for (auto& m : members) {
    std::sort(m.begin(), m.end(),
              [](const PoolEntry* a, const PoolEntry* b) { return a->id < b->id; });
  }

  std::vector<double> weight(strata.count);
  for (std::size_t b = 0; b < strata.count; ++b) weight[b] = strata.weight(targets, b);

  StratifiedSample out;
  std::vector<char> capped(strata.count, 0);
  std::vector<std::size_t> quota(strata.count, 0);
  std::vector<double> first_expected;
  while (true) {
    std::size_t remaining = n;
    double active_weight = 0.0;
    for (std::size_t b = 0; b < strata.count; ++b) {
      if (capped[b]) {
        remaining -= members[b].size();
      } else if (!members[b].empty()) {
        active_weight += weight[b];
      }
    }
    std::vector<double> expected(strata.count, 0.0);
    if (remaining > 0) {
      if (active_weight <= 0.0) {
        throw ValidationError("cannot place " + std::to_string(remaining) +
                              " ids: no remaining bucket has both supply and "
                              "nonzero target weight");
      }
      for (std::size_t b = 0; b < strata.count; ++b) {
        if (!capped[b] && !members[b].empty()) {
          expected[b] = static_cast<double>(remaining) * weight[b] / active_weight;
        }
      }
    }
    if (first_expected.empty()) first_expected = expected;
    std::vector<std::size_t> q = round_quotas(strata, expected, remaining);

    std::string deficits;
    for (std::size_t b = 0; b < strata.count; ++b) {
      if (!capped[b] && q[b] > members[b].size()) {
        if (!deficits.empty()) deficits += "; ";
        deficits += strata.name(b) + " needs " + std::to_string(q[b]) + ", has " +
                    std::to_string(members[b].size());
        capped[b] = 1;
      }
    }
    if (deficits.empty()) {
      for (std::size_t b = 0; b < strata.count; ++b) {
        quota[b] = capped[b] ? members[b].size() : q[b];
      }
      break;
    }
    if (!options.best_effort) {
      throw ValidationError("infeasible quotas: " + deficits);
    }
    out.warnings.push_back("quota exceeds supply, redistributing: " + deficits);
  }

  Rng rng(seed);
  for (std::size_t b = 0; b < strata.count; ++b) {
    auto& m = members[b];
    if (!m.empty() || first_expected[b] > 0.0) {
      out.quotas.push_back({strata.name(b), first_expected[b], quota[b], m.size()});
    }
    // Partial Fisher-Yates: the first quota[b] slots are the draw.
    for (std::size_t i = 0; i < quota[b]; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform_below(rng, m.size() - i));
      std::swap(m[i], m[j]);
      out.ids.push_back(m[i]->id);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Prompt assignment
// ---------------------------------------------------------------------------

std::vector<PromptAssignment> assign_ids_to_prompts(std::span<const std::string> ids,
                                                    std::span<const PromptSlot> prompts,
                                                    std::size_t iterations_per_prompt,
                                                    std::uint64_t seed) {
  {
    std::unordered_set<std::string> seen;
    for (const auto& id : ids) {
      if (!seen.insert(id).second) throw ValidationError("duplicate id \"" + id + "\"");
    }
  }
  for (const auto& p : prompts) {
    if (p.persons < 1 || p.persons > kMaxPersonsPerPrompt) {
      throw ValidationError("prompt " + p.prompt_id + " asks for " +
                            std::to_string(p.persons) + " persons; allowed 1.." +
                            std::to_string(kMaxPersonsPerPrompt));
    }
    if (p.persons > ids.size()) {
      throw ValidationError("prompt " + p.prompt_id + " needs " +
                            std::to_string(p.persons) + " distinct ids but only " +
                            std::to_string(ids.size()) + " are available");
    }
  }

  std::vector<std::string> order(ids.begin(), ids.end());
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(order[i - 1], order[j]);
  }

  std::vector<PromptAssignment> out;
  std::size_t cursor = 0;
  for (const auto& p : prompts) {
    for (std::size_t it = 0; it < iterations_per_prompt; ++it) {
      PromptAssignment a{p.prompt_id, it, {}};
      for (std::size_t k = 0; k < p.persons; ++k) {
        a.ids.push_back(order[cursor]);
        cursor = (cursor + 1) % order.size();
      }
      out.push_back(std::move(a));
    }
  }
  return out;
}

json to_json(const StratifiedSample& sample) {
  json quotas = json::array();
  for (const auto& q : sample.quotas) {
    quotas.push_back({{"bucket", q.bucket},
                      {"expected", q.expected},
                      {"quota", q.quota},
                      {"supply", q.supply}});
  }
  return {{"ids", sample.ids}, {"quotas", std::move(quotas)},
          {"warnings", sample.warnings}};
}

json to_json(std::span<const PromptAssignment> assignments) {
  json arr = json::array();
  for (const auto& a : assignments) {
    arr.push_back({{"prompt_id", a.prompt_id}, {"iteration", a.iteration}, {"ids", a.ids}});
  }
  return arr;
}

}  // namespace mht
