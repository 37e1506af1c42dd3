// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#include "mht/mask.hpp"

#include <algorithm>
#include <string>

#include "mht/error.hpp"
#include "mht/io.hpp"

namespace mht {

AttentionMask::AttentionMask(std::size_t length)
    : length_(length), stride_((length + 63) / 64), words_(length * stride_, 0) {}

void AttentionMask::set(std::size_t i, std::size_t j, bool value) {
  const std::uint64_t bit = std::uint64_t{1} << (j % 64);
  auto& w = words_[i * stride_ + j / 64];
  w = value ? (w | bit) : (w & ~bit);
}

void AttentionMask::fill_row(std::size_t i, bool value) {
  auto first = words_.begin() + static_cast<std::ptrdiff_t>(i * stride_);
  std::fill(first, first + static_cast<std::ptrdiff_t>(stride_), 0);
  if (!value) return;
  for (std::size_t w = 0; w < stride_; ++w) {
    const std::size_t bits = std::min<std::size_t>(64, length_ - w * 64);
    first[static_cast<std::ptrdiff_t>(w)] =
        bits == 64 ? ~std::uint64_t{0} : ((std::uint64_t{1} << bits) - 1);
  }
}

std::vector<std::uint8_t> AttentionMask::to_dense() const {
  std::vector<std::uint8_t> out(length_ * length_);
  for (std::size_t i = 0; i < length_; ++i) {
    for (std::size_t j = 0; j < length_; ++j) out[i * length_ + j] = at(i, j);
  }
  return out;
}

bool AttentionMask::is_subset_of(const AttentionMask& other) const {
  if (other.length_ != length_) return false;
  for (std::size_t k = 0; k < words_.size(); ++k) {
    if (words_[k] & ~other.words_[k]) return false;
  }
  return true;
}

namespace {

void fill_causal(AttentionMask& mask, std::size_t i) {
  mask.fill_row(i, false);
  for (std::size_t j = 0; j <= i; ++j) mask.set(i, j, true);
}

}  // namespace

AttentionMask build_base_mask(const TokenLayout& layout) {
  validate_token_partition(layout);
  AttentionMask mask(layout.length);
  const TokenRoles roles = classify_tokens(layout);
  for (std::size_t i = 0; i < layout.length; ++i) {
    if (roles.role[i] == TokenRole::kText) {
      fill_causal(mask, i);
    } else {
      mask.fill_row(i, true);
    }
  }
  return mask;
}

AttentionMask build_isolated_mask(const IsolationSpec& spec) {
  const TokenLayout& layout = spec.layout;
  validate_token_partition(layout);
  if (spec.rois.size() != layout.image_count()) {
    throw ValidationError("got " + std::to_string(spec.rois.size()) +
                          " ROIs for " + std::to_string(layout.image_count()) +
                          " image groups");
  }
  const TokenRoles roles = classify_tokens(layout);
  for (std::size_t k = 0; k < spec.rois.size(); ++k) {
    for (std::size_t idx : spec.rois[k]) {
      if (idx >= layout.length || roles.role[idx] != TokenRole::kLatent) {
        throw ValidationError("ROI " + std::to_string(k) + " index " +
                              std::to_string(idx) + " is not a latent token");
      }
    }
  }

  AttentionMask mask(layout.length);
  for (std::size_t i = 0; i < layout.length; ++i) {
    switch (roles.role[i]) {
      case TokenRole::kText:
        fill_causal(mask, i);
        break;
      case TokenRole::kImage: {
        mask.fill_row(i, true);
        for (std::size_t j : layout.latent) mask.set(i, j, false);
        for (std::size_t j : spec.rois[static_cast<std::size_t>(roles.image_group[i])]) {
          mask.set(i, j, true);
        }
        break;
      }
      case TokenRole::kTimestep:
      case TokenRole::kLatent:
      case TokenRole::kOther:
        mask.fill_row(i, true);
        break;
    }
  }
  return mask;
}

IndexSet roi_from_region_map(const RegionMap& map, const TokenLayout& layout) {
  validate_layout(layout);
  const std::size_t d = layout.grid_side;
  if (map.height() != d || map.width() != d) {
    throw ValidationError("region map is " + std::to_string(map.height()) + "x" +
                          std::to_string(map.width()) + ", latent grid is " +
                          std::to_string(d) + "x" + std::to_string(d));
  }
  IndexSet sorted = layout.latent;
  std::sort(sorted.begin(), sorted.end());
  IndexSet out;
  for (std::size_t cell = 0; cell < d * d; ++cell) {
    if (map.flat(cell)) out.push_back(sorted[cell]);
  }
  return out;
}

nlohmann::json mask_to_json(const AttentionMask& mask) {
  nlohmann::json rows = nlohmann::json::array();
  std::vector<bool> row(mask.length());
  for (std::size_t i = 0; i < mask.length(); ++i) {
    for (std::size_t j = 0; j < mask.length(); ++j) row[j] = mask.at(i, j);
    rows.push_back(io::base64_encode(io::pack_bits(row)));
  }
  return {{"L", mask.length()}, {"rows", std::move(rows)}};
}

AttentionMask mask_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("L") || !j.contains("rows") ||
      !j["L"].is_number_unsigned() || !j["rows"].is_array()) {
    throw ValidationError("mask JSON needs \"L\" and \"rows\"");
  }
  const std::size_t length = j["L"].get<std::size_t>();
  if (j["rows"].size() != length) {
    throw ValidationError("mask JSON has " + std::to_string(j["rows"].size()) +
                          " rows for L=" + std::to_string(length));
  }
  AttentionMask mask(length);
  for (std::size_t i = 0; i < length; ++i) {
    const auto& encoded = j["rows"][i];
    if (!encoded.is_string()) throw ValidationError("mask rows must be strings");
    const auto bytes = io::base64_decode(encoded.get<std::string>());
    const auto bits = io::unpack_bits(bytes, length);
    for (std::size_t c = 0; c < length; ++c) mask.set(i, c, bits[c]);
  }
  return mask;
}

}  // namespace mht
