// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

#include "mht/io.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>
#include <unordered_set>

#include "mht/error.hpp"

namespace mht::io {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Base64 / bits
// ---------------------------------------------------------------------------

namespace {

constexpr char kB64Alphabet[] =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int b64_value(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

}  // namespace

std::string base64_encode(std::span<const std::uint8_t> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 3 <= bytes.size(); i += 3) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += kB64Alphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const std::uint32_t v = bytes[i] << 16;
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const std::uint32_t v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kB64Alphabet[(v >> 18) & 63];
    out += kB64Alphabet[(v >> 12) & 63];
    out += kB64Alphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<std::uint8_t> base64_decode(std::string_view text) {
  if (text.size() % 4 != 0) {
    throw ValidationError("base64 length is not a multiple of 4");
  }
  std::vector<std::uint8_t> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    const bool last = i + 4 == text.size();
    std::array<int, 4> v{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + k];
      if (c == '=' && last && k >= 2) {
        v[k] = 0;
        ++pad;
        continue;
      }
      if (pad > 0) throw ValidationError("invalid base64 padding");
      v[k] = b64_value(c);
      if (v[k] < 0) throw ValidationError("invalid base64 character");
    }
    const std::uint32_t word = (v[0] << 18) | (v[1] << 12) | (v[2] << 6) | v[3];
    out.push_back(static_cast<std::uint8_t>(word >> 16));
    if (pad < 2) out.push_back(static_cast<std::uint8_t>(word >> 8));
    if (pad < 1) out.push_back(static_cast<std::uint8_t>(word));
  }
  return out;
}

std::vector<std::uint8_t> pack_bits(const std::vector<bool>& bits) {
  std::vector<std::uint8_t> out((bits.size() + 7) / 8, 0);
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i]) out[i / 8] |= static_cast<std::uint8_t>(0x80u >> (i % 8));
  }
  return out;
}

std::vector<bool> unpack_bits(std::span<const std::uint8_t> bytes,
                              std::size_t bit_count) {
  if (bytes.size() != (bit_count + 7) / 8) {
    throw ValidationError("packed bitmap has " + std::to_string(bytes.size()) +
                          " bytes, expected " +
                          std::to_string((bit_count + 7) / 8));
  }
  std::vector<bool> out(bit_count);
  for (std::size_t i = 0; i < bit_count; ++i) {
    out[i] = (bytes[i / 8] >> (7 - i % 8)) & 1u;
  }
  for (std::size_t i = bit_count; i < bytes.size() * 8; ++i) {
    if ((bytes[i / 8] >> (7 - i % 8)) & 1u) {
      throw ValidationError("packed bitmap has nonzero padding bits");
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("error reading " + path.string());
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw IoError("error writing " + path.string());
}

json parse_json_text(std::string_view text, std::string_view what) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::exception& e) {
    throw ValidationError("malformed " + std::string(what) + ": " + e.what());
  }
}

json read_json_file(const fs::path& path) {
  return parse_json_text(read_text_file(path), path.string());
}

std::vector<double> read_f32_file(const fs::path& path, std::size_t count) {
  const std::string bytes = read_text_file(path);
  if (bytes.size() != count * 4) {
    throw ValidationError(path.string() + " holds " + std::to_string(bytes.size()) +
                          " bytes, expected " + std::to_string(count * 4) +
                          " (" + std::to_string(count) + " f32 values)");
  }
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::array<unsigned char, 4> raw;
    std::memcpy(raw.data(), bytes.data() + i * 4, 4);
    if constexpr (std::endian::native == std::endian::big) {
      std::swap(raw[0], raw[3]);
      std::swap(raw[1], raw[2]);
    }
    float f;
    std::memcpy(&f, raw.data(), 4);
    out[i] = f;
  }
  return out;
}

void write_f32_file(const fs::path& path, std::span<const double> values) {
  std::string bytes(values.size() * 4, '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = static_cast<float>(values[i]);
    std::array<unsigned char, 4> raw;
    std::memcpy(raw.data(), &f, 4);
    if constexpr (std::endian::native == std::endian::big) {
      std::swap(raw[0], raw[3]);
      std::swap(raw[1], raw[2]);
    }
    std::memcpy(bytes.data() + i * 4, raw.data(), 4);
  }
  write_text_file(path, bytes);
}

// ---------------------------------------------------------------------------
// JSON helpers
// ---------------------------------------------------------------------------

namespace {

const json& field(const json& obj, const char* key) {
  if (!obj.is_object()) throw ValidationError("expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw ValidationError(std::string("missing field \"") + key + "\"");
  }
  return *it;
}

std::size_t as_size(const json& j, const char* what) {
  if (!j.is_number_integer() || j.get<std::int64_t>() < 0) {
    throw ValidationError(std::string(what) + " must be a nonnegative integer");
  }
  return j.get<std::size_t>();
}

double as_number(const json& j, const char* what) {
  if (!j.is_number()) throw ValidationError(std::string(what) + " must be a number");
  return j.get<double>();
}

const std::string& as_string(const json& j, const char* what) {
  if (!j.is_string()) throw ValidationError(std::string(what) + " must be a string");
  return j.get_ref<const std::string&>();
}

IndexSet index_set_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw ValidationError(std::string(what) + " must be an array");
  IndexSet out;
  out.reserve(j.size());
  for (const auto& v : j) out.push_back(as_size(v, what));
  std::sort(out.begin(), out.end());
  return out;
}

// Rethrows a nested validation failure with "<what> at <where>" context.
template <typename Fn>
auto with_context(const std::string& where, Fn&& fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const ValidationError& e) {
    throw ValidationError(std::string(e.what()) + " at " + where);
  } catch (const json::exception& e) {
    throw ValidationError(std::string(e.what()) + " at " + where);
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Layout / region maps / embeddings
// ---------------------------------------------------------------------------

TokenLayout layout_from_json(const json& j) {
  TokenLayout layout;
  layout.length = as_size(field(j, "L"), "L");
  layout.text = index_set_from_json(field(j, "text"), "text");
  const json& images = field(j, "images");
  if (!images.is_array()) throw ValidationError("images must be an array");
  for (const auto& img : images) {
    layout.images.push_back(index_set_from_json(img, "images[k]"));
  }
  layout.timestep = index_set_from_json(field(j, "timestep"), "timestep");
  layout.latent = index_set_from_json(field(j, "latent"), "latent");
  layout.grid_side = as_size(field(j, "grid_side"), "grid_side");
  return layout;
}

json to_json(const TokenLayout& layout) {
  json images = json::array();
  for (const auto& img : layout.images) images.push_back(img);
  return json{{"L", layout.length},          {"text", layout.text},
              {"images", images},            {"timestep", layout.timestep},
              {"latent", layout.latent},     {"grid_side", layout.grid_side}};
}

RegionMap region_map_from_json(const json& j) {
  const std::size_t h = as_size(field(j, "h"), "h");
  const std::size_t w = as_size(field(j, "w"), "w");
  if (w != 0 && h > (std::size_t{1} << 31) / w) {
    throw ValidationError("region map larger than 2^31 cells");
  }
  const auto bytes = base64_decode(as_string(field(j, "bits"), "bits"));
  const auto bits = unpack_bits(bytes, h * w);
  RegionMap map(h, w);
  for (std::size_t i = 0; i < bits.size(); ++i) map.set_flat(i, bits[i]);
  return map;
}

json to_json(const RegionMap& map) {
  std::vector<bool> bits(map.cell_count());
  for (std::size_t i = 0; i < bits.size(); ++i) bits[i] = map.flat(i);
  return json{{"h", map.height()},
              {"w", map.width()},
              {"bits", base64_encode(pack_bits(bits))}};
}

EmbeddingSet embedding_set_from_json(const json& j, EmbeddingRole role,
                                     const fs::path& base_dir) {
  const std::size_t dim = as_size(field(j, "dim"), "dim");
  if (dim == 0) throw ValidationError("dim must be >= 1");
  std::vector<double> data;
  if (j.contains("file")) {
    const std::size_t rows = as_size(field(j, "rows"), "rows");
    const fs::path file = base_dir / as_string(field(j, "file"), "file");
    data = read_f32_file(file, rows * dim);
  } else {
    const json& arr = field(j, "data");
    if (!arr.is_array()) throw ValidationError("data must be an array");
    data.reserve(arr.size());
    for (const auto& v : arr) data.push_back(as_number(v, "data entries"));
    if (data.size() % dim != 0) {
      throw ValidationError("dimension mismatch: " + std::to_string(data.size()) +
                            " values is not a multiple of dim " +
                            std::to_string(dim));
    }
  }
  return EmbeddingSet::from_rows(role, dim, data);
}

json to_json(const EmbeddingSet& set) {
  json data = json::array();
  for (const auto& e : set) {
    for (double v : e.values()) data.push_back(v);
  }
  return json{{"dim", set.dim()}, {"data", std::move(data)}};
}

Embedding embedding_from_json(const json& j) {
  const std::size_t dim = as_size(field(j, "dim"), "dim");
  const json& arr = field(j, "data");
  if (!arr.is_array() || arr.size() != dim) {
    throw ValidationError("embedding data must hold exactly dim values");
  }
  std::vector<double> values;
  values.reserve(dim);
  for (const auto& v : arr) values.push_back(as_number(v, "data entries"));
  return Embedding(std::move(values));
}

json to_json(const Embedding& e) {
  return json{{"dim", e.dim()},
              {"data", std::vector<double>(e.values().begin(), e.values().end())}};
}

AttributeLabel attribute_label_from_json(const json& j) {
  AttributeLabel label;
  for (Attribute a : kAllAttributes) {
    const std::string key(to_string(a));
    const std::string& name = as_string(field(j, key.c_str()), key.c_str());
    auto bucket = parse_bucket(a, name);
    if (!bucket) {
      throw ValidationError("unknown " + key + " value \"" + name + "\"");
    }
    switch (a) {
      case Attribute::kAge: label.age = static_cast<AgeBucket>(*bucket); break;
      case Attribute::kGender: label.gender = static_cast<Gender>(*bucket); break;
      case Attribute::kEthnicity:
        label.ethnicity = static_cast<Ethnicity>(*bucket);
        break;
      case Attribute::kStatus: label.status = static_cast<Status>(*bucket); break;
      case Attribute::kOrigin: label.origin = static_cast<DataOrigin>(*bucket); break;
    }
  }
  return label;
}

json to_json(const AttributeLabel& label) {
  json j = json::object();
  for (Attribute a : kAllAttributes) {
    j[std::string(to_string(a))] = std::string(bucket_name(a, bucket_of(label, a)));
  }
  return j;
}

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

namespace {

SampleRecord sample_from_json(const json& j, std::size_t index,
                              const fs::path& base_dir) {
  SampleRecord rec;
  const std::string slot = "samples[" + std::to_string(index) + "]";
  rec.sample_id = with_context(slot + ".sample_id", [&] {
    return as_string(field(j, "sample_id"), "sample_id");
  });
  const std::string at = "sample " + rec.sample_id;

  rec.prompt_id = with_context(at + ".prompt_id", [&] {
    return as_string(field(j, "prompt_id"), "prompt_id");
  });
  rec.ref_embeddings = with_context(at + ".ref_embeddings", [&] {
    return embedding_set_from_json(field(j, "ref_embeddings"),
                                   EmbeddingRole::kReference, base_dir);
  });
  if (j.contains("n_refs")) {
    with_context(at + ".n_refs", [&] {
      const std::size_t n = as_size(j.at("n_refs"), "n_refs");
      if (n != rec.ref_embeddings.size()) {
        throw ValidationError("n_refs " + std::to_string(n) + " does not match " +
                              std::to_string(rec.ref_embeddings.size()) +
                              " reference embeddings");
      }
    });
  }
  const json& attrs =
      with_context(at + ".ref_attributes",
                   [&]() -> const json& { return field(j, "ref_attributes"); });
  if (!attrs.is_array()) {
    throw ValidationError("ref_attributes must be an array at " + at +
                          ".ref_attributes");
  }
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    rec.ref_attributes.push_back(
        with_context(at + ".ref_attributes[" + std::to_string(i) + "]",
                     [&] { return attribute_label_from_json(attrs[i]); }));
  }
  rec.gen_embeddings = with_context(at + ".gen_embeddings", [&] {
    return embedding_set_from_json(field(j, "gen_embeddings"),
                                   EmbeddingRole::kGenerated, base_dir);
  });
  if (rec.gen_embeddings.dim() != rec.ref_embeddings.dim()) {
    throw ValidationError("dimension mismatch: generated dim " +
                          std::to_string(rec.gen_embeddings.dim()) +
                          " vs reference dim " +
                          std::to_string(rec.ref_embeddings.dim()) + " at " + at +
                          ".gen_embeddings");
  }
  if (auto it = j.find("hps"); it != j.end() && !it->is_null()) {
    rec.hps = with_context(at + ".hps", [&] { return as_number(*it, "hps"); });
  }
  if (auto it = j.find("qa_items"); it != j.end()) {
    if (!it->is_array()) {
      throw ValidationError("qa_items must be an array at " + at + ".qa_items");
    }
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string where = at + ".qa_items[" + std::to_string(i) + "]";
      const json& item = (*it)[i];
      QaItem qa;
      with_context(where, [&] {
        const std::string& kind = as_string(field(item, "kind"), "kind");
        if (kind == "simple") {
          qa.kind = QaKind::kSimple;
        } else if (kind == "complex") {
          qa.kind = QaKind::kComplex;
        } else {
          throw ValidationError("unknown qa kind \"" + kind + "\"");
        }
        const json& score = field(item, "score");
        if (!score.is_number_integer()) {
          throw ValidationError("score must be an integer");
        }
        const auto raw = score.get<std::int64_t>();
        qa.raw_score = static_cast<int>(
            std::clamp<std::int64_t>(raw, std::numeric_limits<int>::min(),
                                     std::numeric_limits<int>::max()));
      });
      rec.qa_items.push_back(qa);
    }
  }
  validate_record(rec);
  return rec;
}

}  // namespace

Manifest parse_manifest_text(std::string_view text, const fs::path& base_dir,
                             const ManifestOptions& options) {
  const json doc = parse_json_text(text, "manifest");
  const json& samples = with_context("manifest", [&]() -> const json& {
    const json& version = field(doc, "version");
    if (!version.is_number_integer() || version.get<std::int64_t>() != kManifestVersion) {
      throw ValidationError("unsupported manifest version");
    }
    const json& s = field(doc, "samples");
    if (!s.is_array()) throw ValidationError("samples must be an array");
    return s;
  });

  Manifest out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const json& sj = samples[i];
    std::string id;
    if (sj.is_object() && sj.contains("sample_id") && sj["sample_id"].is_string()) {
      id = sj["sample_id"].get<std::string>();
    }
    try {
      if (!id.empty() && seen.count(id)) {
        throw ValidationError("duplicate sample_id \"" + id + "\" at samples[" +
                              std::to_string(i) + "]");
      }
      SampleRecord rec = sample_from_json(sj, i, base_dir);
      seen.insert(rec.sample_id);
      out.samples.push_back(std::move(rec));
    } catch (const ValidationError& e) {
      if (!options.skip_invalid) throw;
      out.skipped.push_back({id, e.what()});
    }
  }
  return out;
}

Manifest parse_manifest(const fs::path& path, const ManifestOptions& options) {
  return parse_manifest_text(read_text_file(path), path.parent_path(), options);
}

std::vector<SampleRecord> parse_manifest(const fs::path& path) {
  return parse_manifest(path, ManifestOptions{}).samples;
}

json sample_to_json(const SampleRecord& r) {
  json attrs = json::array();
  for (const auto& a : r.ref_attributes) attrs.push_back(to_json(a));
  json qa = json::array();
  for (const auto& item : r.qa_items) {
    qa.push_back({{"kind", std::string(to_string(item.kind))},
                  {"score", item.raw_score}});
  }
  json j = {{"sample_id", r.sample_id},
            {"prompt_id", r.prompt_id},
            {"n_refs", r.n_refs()},
            {"ref_embeddings", to_json(r.ref_embeddings)},
            {"ref_attributes", std::move(attrs)},
            {"gen_embeddings", to_json(r.gen_embeddings)},
            {"qa_items", std::move(qa)}};
  if (r.hps) j["hps"] = *r.hps;
  return j;
}

json manifest_to_json(std::span<const SampleRecord> samples) {
  json arr = json::array();
  for (const auto& s : samples) arr.push_back(sample_to_json(s));
  return json{{"version", kManifestVersion}, {"samples", std::move(arr)}};
}

}  // namespace mht::io
