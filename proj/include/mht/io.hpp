// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <nlohmann/json.hpp>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mht/core.hpp"

namespace mht::io {

using nlohmann::json;

// Base64 (RFC 4648, with padding).
std::string base64_encode(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> base64_decode(std::string_view text);

// Bit packing, MSB of each byte first. Trailing pad bits are zero.
std::vector<std::uint8_t> pack_bits(const std::vector<bool>& bits);
std::vector<bool> unpack_bits(std::span<const std::uint8_t> bytes,
                              std::size_t bit_count);

// Files. Missing or unreadable files raise IoError; bad contents raise
// ValidationError.
std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
json read_json_file(const std::filesystem::path& path);
json parse_json_text(std::string_view text, std::string_view what);

/// Reads exactly `count` little-endian f32 values.
std::vector<double> read_f32_file(const std::filesystem::path& path,
                                  std::size_t count);
void write_f32_file(const std::filesystem::path& path,
                    std::span<const double> values);

// TokenLayout: {"L", "text", "images", "timestep", "latent", "grid_side"}.
// Index sets are canonicalized (sorted) on parse. No invariant checks beyond
// types; call validate_layout() as needed.
TokenLayout layout_from_json(const json& j);
json to_json(const TokenLayout& layout);

// RegionMap: {"h", "w", "bits": base64 of row-major packed bits}.
RegionMap region_map_from_json(const json& j);
json to_json(const RegionMap& map);

// Embedding sets. Inline {"dim", "data"} or external {"dim", "rows", "file"}
// where `file` is resolved against `base_dir`.
EmbeddingSet embedding_set_from_json(const json& j, EmbeddingRole role,
                                     const std::filesystem::path& base_dir);
json to_json(const EmbeddingSet& set);

Embedding embedding_from_json(const json& j);
json to_json(const Embedding& e);

AttributeLabel attribute_label_from_json(const json& j);
json to_json(const AttributeLabel& label);

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

inline constexpr int kManifestVersion = 1;

struct ManifestOptions {
  /// Drop invalid samples (recording why) instead of failing the whole file.
  /// A malformed document is always fatal.
  bool skip_invalid = false;
};

struct SkippedSample {
  std::string sample_id;  // empty when the id itself was unreadable
  std::string reason;
};

struct Manifest {
  std::vector<SampleRecord> samples;
  std::vector<SkippedSample> skipped;
};

/// Parses {"version": 1, "samples": [...]}. Records come back in file order,
/// fully validated; duplicate sample ids are rejected.
std::vector<SampleRecord> parse_manifest(const std::filesystem::path& path);

Manifest parse_manifest(const std::filesystem::path& path,
                        const ManifestOptions& options);

Manifest parse_manifest_text(std::string_view text,
                             const std::filesystem::path& base_dir,
                             const ManifestOptions& options = {});

json sample_to_json(const SampleRecord& record);

/// Canonical form: inline embeddings, `hps` omitted when absent.
json manifest_to_json(std::span<const SampleRecord> samples);

}  // namespace mht::io
