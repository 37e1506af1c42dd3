// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "mht/core.hpp"

namespace mht {

/// L x L binary self-attention mask, row = query token, column = key token.
/// Rows are packed into 64-bit words.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(std::size_t length);

  std::size_t length() const noexcept { return length_; }

  bool at(std::size_t i, std::size_t j) const {
    return (words_[i * stride_ + j / 64] >> (j % 64)) & 1u;
  }
  void set(std::size_t i, std::size_t j, bool value);
  void fill_row(std::size_t i, bool value);

  /// Row-major 0/1 bytes, L*L of them.
  std::vector<std::uint8_t> to_dense() const;

  /// True when every allowed entry of *this is also allowed in `other`.
  bool is_subset_of(const AttentionMask& other) const;

  friend bool operator==(const AttentionMask&, const AttentionMask&) = default;

 private:
  std::size_t length_ = 0;
  std::size_t stride_ = 0;
  std::vector<std::uint64_t> words_;
};

/// Token layout plus one latent region of interest per reference image.
struct IsolationSpec {
  TokenLayout layout;
  std::vector<IndexSet> rois;
};

/// Causal rows for text queries, all-ones rows for everything else.
AttentionMask build_base_mask(const TokenLayout& layout);

/// Like build_base_mask(), except a query in image group k may only see the
/// latent tokens in rois[k] (non-latent keys stay visible).
AttentionMask build_isolated_mask(const IsolationSpec& spec);

/// Latent tokens selected by a D x D map: cell (p, r) maps to the
/// (p * D + r)-th latent index in sorted order.
IndexSet roi_from_region_map(const RegionMap& map, const TokenLayout& layout);

/// {"L": int, "rows": [base64 of each packed row, MSB-first]}.
nlohmann::json mask_to_json(const AttentionMask& mask);
AttentionMask mask_from_json(const nlohmann::json& j);

}  // namespace mht
