// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mht {

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

/// A face-identity feature vector. Entries are finite and d >= 1. A zero
/// vector can only be built through Embedding::degenerate(); cosine
/// similarity against it is an error.
class Embedding {
 public:
  explicit Embedding(std::vector<double> values);

  static Embedding degenerate(std::vector<double> values);

  std::size_t dim() const noexcept { return values_.size(); }
  std::span<const double> values() const noexcept { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double norm() const noexcept { return norm_; }
  bool is_degenerate() const noexcept { return norm_ == 0.0; }

  friend bool operator==(const Embedding& a, const Embedding& b) {
    return a.values_ == b.values_;
  }

 private:
  Embedding(std::vector<double> values, bool allow_zero);

  std::vector<double> values_;
  double norm_ = 0.0;
};

enum class EmbeddingRole { kReference, kGenerated };

std::string_view to_string(EmbeddingRole role);

/// Ordered embeddings sharing one dimension. Index i of the set is the
/// reference/generated index used by every downstream matching.
class EmbeddingSet {
 public:
  EmbeddingSet(EmbeddingRole role, std::size_t dim,
               std::vector<Embedding> items = {});

  /// Builds a set from a row-major block of `data.size() / dim` rows.
  static EmbeddingSet from_rows(EmbeddingRole role, std::size_t dim,
                                std::span<const double> data);

  EmbeddingRole role() const noexcept { return role_; }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return items_.size(); }
  bool empty() const noexcept { return items_.empty(); }
  const Embedding& operator[](std::size_t i) const { return items_[i]; }
  const std::vector<Embedding>& items() const noexcept { return items_; }
  auto begin() const noexcept { return items_.begin(); }
  auto end() const noexcept { return items_.end(); }

  friend bool operator==(const EmbeddingSet&, const EmbeddingSet&) = default;

 private:
  EmbeddingRole role_;
  std::size_t dim_;
  std::vector<Embedding> items_;
};

// ---------------------------------------------------------------------------
// Dense matrices
// ---------------------------------------------------------------------------

/// Row-major real matrix. Used for similarity matrices and attention layers.
struct DenseMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  DenseMatrix() = default;
  DenseMatrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(data).subspan(i * cols, cols);
  }

  friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;
};

// ---------------------------------------------------------------------------
// Token layout
// ---------------------------------------------------------------------------

/// Sorted, duplicate-free list of 0-based token indices.
using IndexSet = std::vector<std::size_t>;

/// Partition of a unified model's token sequence. Indices are 0-based.
/// Tokens that appear in no set are legal and behave as non-text queries.
struct TokenLayout {
  std::size_t length = 0;
  IndexSet text;
  std::vector<IndexSet> images;
  IndexSet timestep;
  IndexSet latent;
  std::size_t grid_side = 0;

  std::size_t image_count() const noexcept { return images.size(); }

  friend bool operator==(const TokenLayout&, const TokenLayout&) = default;
};

/// Checks every TokenLayout invariant: index sets disjoint and in range,
/// and |latent| == grid_side^2. Throws ValidationError.
void validate_layout(const TokenLayout& layout);

/// The sequence-level subset of validate_layout(): disjointness and range
/// only. Mask construction needs no latent grid.
void validate_token_partition(const TokenLayout& layout);

/// Sorts every index set in place.
void canonicalize(TokenLayout& layout);

enum class TokenRole : std::uint8_t { kOther, kText, kImage, kTimestep, kLatent };

/// Role of every token, plus the image group for image tokens (-1 otherwise).
/// Assumes validate_token_partition() passed.
struct TokenRoles {
  std::vector<TokenRole> role;
  std::vector<int> image_group;
};

TokenRoles classify_tokens(const TokenLayout& layout);

// ---------------------------------------------------------------------------
// Spatial maps
// ---------------------------------------------------------------------------

/// Binary spatial mask, row-major.
class RegionMap {
 public:
  RegionMap() = default;
  RegionMap(std::size_t height, std::size_t width, bool fill = false);

  static RegionMap ones(std::size_t height, std::size_t width) {
    return RegionMap(height, width, true);
  }
  static RegionMap zeros(std::size_t height, std::size_t width) {
    return RegionMap(height, width, false);
  }
  /// Rows of 0/1 values; any other value is rejected.
  static RegionMap from_rows(const std::vector<std::vector<int>>& rows);

  std::size_t height() const noexcept { return height_; }
  std::size_t width() const noexcept { return width_; }
  std::size_t cell_count() const noexcept { return bits_.size(); }

  bool at(std::size_t r, std::size_t c) const {
    return bits_[r * width_ + c] != 0;
  }
  void set(std::size_t r, std::size_t c, bool value) {
    bits_[r * width_ + c] = value ? 1 : 0;
  }
  bool flat(std::size_t i) const { return bits_[i] != 0; }
  void set_flat(std::size_t i, bool value) { bits_[i] = value ? 1 : 0; }

  std::uint64_t area() const noexcept;
  bool all(bool value) const noexcept;
  bool same_shape(const RegionMap& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  friend bool operator==(const RegionMap&, const RegionMap&) = default;

 private:
  std::size_t height_ = 0;
  std::size_t width_ = 0;
  std::vector<std::uint8_t> bits_;
};

std::uint64_t intersection_area(const RegionMap& a, const RegionMap& b);

/// Intersection over union. Two empty masks have IoU 0.
double iou(const RegionMap& a, const RegionMap& b);

/// D x D nonnegative accumulation of attention probability.
class SimilarityMap {
 public:
  SimilarityMap() = default;
  explicit SimilarityMap(std::size_t side) : side_(side), values_(side * side) {}
  /// Validates finiteness and nonnegativity.
  SimilarityMap(std::size_t side, std::vector<double> values);

  std::size_t side() const noexcept { return side_; }
  double at(std::size_t p, std::size_t r) const { return values_[p * side_ + r]; }
  double& at(std::size_t p, std::size_t r) { return values_[p * side_ + r]; }
  std::span<const double> values() const noexcept { return values_; }
  std::span<double> values() noexcept { return values_; }

  SimilarityMap& operator+=(const SimilarityMap& other);

  friend bool operator==(const SimilarityMap&, const SimilarityMap&) = default;

 private:
  std::size_t side_ = 0;
  std::vector<double> values_;
};

// ---------------------------------------------------------------------------
// Attributes and samples
// ---------------------------------------------------------------------------

enum class AgeBucket : std::uint8_t { kYoungAdult, kMiddleAged, kAged };
enum class Gender : std::uint8_t { kMale, kFemale };
enum class Ethnicity : std::uint8_t {
  kWhite,
  kBlack,
  kSouthAsian,
  kEastAsian,
  kHispanicLatin,
  kMiddleEastern,
};
enum class Status : std::uint8_t { kAnonymous, kCelebrity };
enum class DataOrigin : std::uint8_t { kReal, kSynthetic };

inline constexpr std::size_t kAgeBucketCount = 3;
inline constexpr std::size_t kGenderCount = 2;
inline constexpr std::size_t kEthnicityCount = 6;
inline constexpr std::size_t kStatusCount = 2;
inline constexpr std::size_t kDataOriginCount = 2;

struct AttributeLabel {
  AgeBucket age = AgeBucket::kYoungAdult;
  Gender gender = Gender::kMale;
  Ethnicity ethnicity = Ethnicity::kWhite;
  Status status = Status::kAnonymous;
  DataOrigin origin = DataOrigin::kReal;

  friend bool operator==(const AttributeLabel&, const AttributeLabel&) = default;
};

/// Attribute axes a label can be grouped by. Names double as JSON keys.
enum class Attribute : std::uint8_t { kAge, kGender, kEthnicity, kStatus, kOrigin };

inline constexpr Attribute kAllAttributes[] = {
    Attribute::kEthnicity, Attribute::kGender, Attribute::kAge,
    Attribute::kStatus, Attribute::kOrigin};

std::string_view to_string(Attribute a);
std::size_t bucket_count(Attribute a);
std::size_t bucket_of(const AttributeLabel& label, Attribute a);
std::string_view bucket_name(Attribute a, std::size_t bucket);
/// Inverse of bucket_name(); nullopt for unknown names.
std::optional<std::size_t> parse_bucket(Attribute a, std::string_view name);
std::optional<Attribute> parse_attribute(std::string_view name);

enum class QaKind : std::uint8_t { kSimple, kComplex };

std::string_view to_string(QaKind kind);

struct QaItem {
  QaKind kind = QaKind::kSimple;
  int raw_score = 1;  // MLLM choice scale, 1..10

  friend bool operator==(const QaItem&, const QaItem&) = default;
};

struct SampleRecord {
  std::string sample_id;
  std::string prompt_id;
  EmbeddingSet ref_embeddings{EmbeddingRole::kReference, 1};
  std::vector<AttributeLabel> ref_attributes;
  EmbeddingSet gen_embeddings{EmbeddingRole::kGenerated, 1};
  std::optional<double> hps;
  std::vector<QaItem> qa_items;

  std::size_t n_refs() const noexcept { return ref_embeddings.size(); }
  std::size_t n_gen() const noexcept { return gen_embeddings.size(); }

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

/// Checks SampleRecord invariants. Messages name the sample and field path.
void validate_record(const SampleRecord& record);

}  // namespace mht
