// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#include "mht/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>

#include "mht/error.hpp"

namespace mht {

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

Embedding::Embedding(std::vector<double> values)
    : Embedding(std::move(values), false) {}

Embedding Embedding::degenerate(std::vector<double> values) {
  return Embedding(std::move(values), true);
}

Embedding::Embedding(std::vector<double> values, bool allow_zero)
    : values_(std::move(values)) {
  if (values_.empty()) throw ValidationError("embedding has dimension 0");
  double sq = 0.0;
  for (std::size_t i = 0; i < values_.size(); ++i) {
    if (!std::isfinite(values_[i])) {
      throw ValidationError("embedding entry " + std::to_string(i) +
                            " is not finite");
    }
    sq += values_[i] * values_[i];
  }
  norm_ = std::sqrt(sq);
  if (norm_ == 0.0 && !allow_zero) {
    throw ValidationError("embedding has zero norm");
  }
}

std::string_view to_string(EmbeddingRole role) {
  return role == EmbeddingRole::kReference ? "reference" : "generated";
}

EmbeddingSet::EmbeddingSet(EmbeddingRole role, std::size_t dim,
                           std::vector<Embedding> items)
    : role_(role), dim_(dim), items_(std::move(items)) {
  if (dim_ == 0) throw ValidationError("embedding set has dimension 0");
  for (std::size_t i = 0; i < items_.size(); ++i) {
    if (items_[i].dim() != dim_) {
      throw ValidationError("dimension mismatch at row " + std::to_string(i) +
                            ": expected " + std::to_string(dim_) + ", got " +
                            std::to_string(items_[i].dim()));
    }
  }
}

EmbeddingSet EmbeddingSet::from_rows(EmbeddingRole role, std::size_t dim,
                                     std::span<const double> data) {
  if (dim == 0) throw ValidationError("embedding set has dimension 0");
  if (data.size() % dim != 0) {
    throw ValidationError("dimension mismatch: " + std::to_string(data.size()) +
                          " values is not a multiple of dim " +
                          std::to_string(dim));
  }
  std::vector<Embedding> items;
  items.reserve(data.size() / dim);
  for (std::size_t off = 0; off < data.size(); off += dim) {
    auto row = data.subspan(off, dim);
    try {
      items.emplace_back(std::vector<double>(row.begin(), row.end()));
    } catch (const ValidationError& e) {
      throw ValidationError("row " + std::to_string(off / dim) + ": " + e.what());
    }
  }
  return EmbeddingSet(role, dim, std::move(items));
}

// ---------------------------------------------------------------------------
// TokenLayout
// ---------------------------------------------------------------------------

namespace {

void check_set(const IndexSet& set, std::string_view name, std::size_t length,
               std::vector<std::string>& owner) {
  for (std::size_t idx : set) {
    if (idx >= length) {
      throw ValidationError(std::string(name) + " index " + std::to_string(idx) +
                            " is out of range for L=" + std::to_string(length));
    }
    if (!owner[idx].empty()) {
      throw ValidationError("token " + std::to_string(idx) + " appears in both " +
                            owner[idx] + " and " + std::string(name));
    }
    owner[idx] = std::string(name);
  }
}

}  // namespace

void validate_token_partition(const TokenLayout& layout) {
  std::vector<std::string> owner(layout.length);
  check_set(layout.text, "text", layout.length, owner);
  for (std::size_t k = 0; k < layout.images.size(); ++k) {
    check_set(layout.images[k], "images[" + std::to_string(k) + "]",
              layout.length, owner);
  }
  check_set(layout.timestep, "timestep", layout.length, owner);
  check_set(layout.latent, "latent", layout.length, owner);
}

void validate_layout(const TokenLayout& layout) {
  validate_token_partition(layout);
  const std::size_t d = layout.grid_side;
  if (layout.latent.size() != d * d) {
    throw ValidationError("latent set has " +
                          std::to_string(layout.latent.size()) +
                          " tokens but grid_side " + std::to_string(d) +
                          " requires " + std::to_string(d * d));
  }
}

void canonicalize(TokenLayout& layout) {
  std::sort(layout.text.begin(), layout.text.end());
  for (auto& img : layout.images) std::sort(img.begin(), img.end());
  std::sort(layout.timestep.begin(), layout.timestep.end());
  std::sort(layout.latent.begin(), layout.latent.end());
}

TokenRoles classify_tokens(const TokenLayout& layout) {
  TokenRoles out;
  out.role.assign(layout.length, TokenRole::kOther);
  out.image_group.assign(layout.length, -1);
  for (std::size_t i : layout.text) out.role[i] = TokenRole::kText;
  for (std::size_t k = 0; k < layout.images.size(); ++k) {
    for (std::size_t i : layout.images[k]) {
      out.role[i] = TokenRole::kImage;
      out.image_group[i] = static_cast<int>(k);
    }
  }
  for (std::size_t i : layout.timestep) out.role[i] = TokenRole::kTimestep;
  for (std::size_t i : layout.latent) out.role[i] = TokenRole::kLatent;
  return out;
}

// ---------------------------------------------------------------------------
// RegionMap / SimilarityMap
// ---------------------------------------------------------------------------

RegionMap::RegionMap(std::size_t height, std::size_t width, bool fill)
    : height_(height), width_(width), bits_(height * width, fill ? 1 : 0) {}

RegionMap RegionMap::from_rows(const std::vector<std::vector<int>>& rows) {
  const std::size_t h = rows.size();
  const std::size_t w = h == 0 ? 0 : rows.front().size();
  RegionMap m(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    if (rows[r].size() != w) throw ValidationError("ragged region map rows");
    for (std::size_t c = 0; c < w; ++c) {
      if (rows[r][c] != 0 && rows[r][c] != 1) {
        throw ValidationError("region map entries must be 0 or 1");
      }
      m.set(r, c, rows[r][c] == 1);
    }
  }
  return m;
}

std::uint64_t RegionMap::area() const noexcept {
  std::uint64_t n = 0;
  for (auto b : bits_) n += b;
  return n;
}

bool RegionMap::all(bool value) const noexcept {
  const std::uint8_t v = value ? 1 : 0;
  return std::all_of(bits_.begin(), bits_.end(), [v](auto b) { return b == v; });
}

std::uint64_t intersection_area(const RegionMap& a, const RegionMap& b) {
  if (!a.same_shape(b)) throw ValidationError("region map dimension mismatch");
  std::uint64_t n = 0;
  for (std::size_t i = 0; i < a.cell_count(); ++i) n += (a.flat(i) && b.flat(i));
  return n;
}

double iou(const RegionMap& a, const RegionMap& b) {
  const std::uint64_t inter = intersection_area(a, b);
  const std::uint64_t uni = a.area() + b.area() - inter;
  if (uni == 0) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

SimilarityMap::SimilarityMap(std::size_t side, std::vector<double> values)
    : side_(side), values_(std::move(values)) {
  if (values_.size() != side_ * side_) {
    throw ValidationError("similarity map needs " + std::to_string(side_ * side_) +
                          " values, got " + std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!std::isfinite(v) || v < 0.0) {
      throw ValidationError("similarity map entries must be finite and >= 0");
    }
  }
}

SimilarityMap& SimilarityMap::operator+=(const SimilarityMap& other) {
  if (other.side_ != side_) throw ValidationError("similarity map size mismatch");
  for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += other.values_[i];
  return *this;
}

// ---------------------------------------------------------------------------
// Attributes
// ---------------------------------------------------------------------------

namespace {

constexpr std::array<std::string_view, kAgeBucketCount> kAgeNames = {
    "young_adult", "middle_aged", "aged"};
constexpr std::array<std::string_view, kGenderCount> kGenderNames = {"male",
                                                                     "female"};
constexpr std::array<std::string_view, kEthnicityCount> kEthnicityNames = {
    "white",      "black",          "south_asian",
    "east_asian", "hispanic_latin", "middle_eastern"};
constexpr std::array<std::string_view, kStatusCount> kStatusNames = {
    "anonymous", "celebrity"};
constexpr std::array<std::string_view, kDataOriginCount> kOriginNames = {
    "real", "synthetic"};

std::span<const std::string_view> names_of(Attribute a) {
  switch (a) {
    case Attribute::kAge: return kAgeNames;
    case Attribute::kGender: return kGenderNames;
    case Attribute::kEthnicity: return kEthnicityNames;
    case Attribute::kStatus: return kStatusNames;
    case Attribute::kOrigin: return kOriginNames;
  }
  return {};
}

}  // namespace

std::string_view to_string(Attribute a) {
  switch (a) {
    case Attribute::kAge: return "age";
    case Attribute::kGender: return "gender";
    case Attribute::kEthnicity: return "ethnicity";
    case Attribute::kStatus: return "status";
    case Attribute::kOrigin: return "origin";
  }
  return "";
}

std::optional<Attribute> parse_attribute(std::string_view name) {
  for (Attribute a : kAllAttributes) {
    if (to_string(a) == name) return a;
  }
  return std::nullopt;
}

std::size_t bucket_count(Attribute a) { return names_of(a).size(); }

std::size_t bucket_of(const AttributeLabel& label, Attribute a) {
  switch (a) {
    case Attribute::kAge: return static_cast<std::size_t>(label.age);
    case Attribute::kGender: return static_cast<std::size_t>(label.gender);
    case Attribute::kEthnicity: return static_cast<std::size_t>(label.ethnicity);
    case Attribute::kStatus: return static_cast<std::size_t>(label.status);
    case Attribute::kOrigin: return static_cast<std::size_t>(label.origin);
  }
  return 0;
}

std::string_view bucket_name(Attribute a, std::size_t bucket) {
  return names_of(a)[bucket];
}

std::optional<std::size_t> parse_bucket(Attribute a, std::string_view name) {
  auto names = names_of(a);
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return i;
  }
  return std::nullopt;
}

std::string_view to_string(QaKind kind) {
  return kind == QaKind::kSimple ? "simple" : "complex";
}

void validate_record(const SampleRecord& record) {
  const std::string at = "sample " + record.sample_id;
  if (record.ref_embeddings.role() != EmbeddingRole::kReference ||
      record.gen_embeddings.role() != EmbeddingRole::kGenerated) {
    throw ValidationError("embedding role mismatch at " + at);
  }
  if (record.n_refs() == 0) {
    throw ValidationError("no reference embeddings at " + at + ".ref_embeddings");
  }
  if (record.ref_attributes.size() != record.n_refs()) {
    throw ValidationError("ref_attributes length " +
                          std::to_string(record.ref_attributes.size()) +
                          " does not match n_refs " +
                          std::to_string(record.n_refs()) + " at " + at +
                          ".ref_attributes");
  }
  if (record.hps && !(*record.hps >= 0.0 && *record.hps <= 1.0)) {
    throw ValidationError("score out of range at " + at + ".hps");
  }
  for (std::size_t i = 0; i < record.qa_items.size(); ++i) {
    const int s = record.qa_items[i].raw_score;
    if (s < 1 || s > 10) {
      throw ValidationError("score out of range at " + at + ".qa_items[" +
                            std::to_string(i) + "]");
    }
  }
}

}  // namespace mht
