// Copyright 2026 The MHT Authors
// SPDX-License-Identifier: Apache-2.0

// Command-line front end. Exit codes: 0 success, 1 validation error, 2 I/O
// error.

#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "mht/core.hpp"
#include "mht/error.hpp"
#include "mht/harness.hpp"
#include "mht/io.hpp"
#include "mht/mask.hpp"
#include "mht/regions.hpp"
#include "mht/sampler.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void emit(const std::string& out_path, const std::string& text) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
  } else {
    mht::io::write_text_file(out_path, text);
  }
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct EvalArgs {
  std::string manifest, out, csv, table;
  bool skip_invalid = false;
  std::size_t jobs = 1;
};

int run_eval(const EvalArgs& a) {
  const mht::BenchReport report =
      mht::run_benchmark(a.manifest, {a.jobs, a.skip_invalid});
  emit(a.out, dump(mht::report_to_json(report)));
  if (!a.csv.empty()) emit(a.csv, mht::report_to_csv(report));
  if (!a.table.empty()) emit(a.table, mht::report_to_table(report));
  for (const auto& s : report.skipped) {
    std::cerr << "skipped " << (s.sample_id.empty() ? "<unknown>" : s.sample_id) << ": "
              << s.reason << "\n";
  }
  return 0;
}

struct AssignArgs {
  std::string probe, segments, mode = "attention", out;
  double theta = mht::kDefaultNmsTheta;
};

json assignment_to_json(const mht::RegionAssignment& r) {
  json maps = json::array();
  for (const auto& m : r.maps) maps.push_back(mht::io::to_json(m));
  json matched = json::array();
  for (const auto& [k, q] : r.matched) matched.push_back({k, q});
  return {{"fill_policy", mht::to_string(r.fill_policy)},
          {"matched", std::move(matched)},
          {"maps", std::move(maps)}};
}

int run_assign(const AssignArgs& a) {
  const json seg = mht::io::read_json_file(a.segments);
  mht::RegionAssignment result;
  if (a.mode == "attention") {
    if (a.probe.empty()) throw mht::ValidationError("--probe is required in attention mode");
    const auto probe = mht::load_attention_probe(a.probe);
    const auto sims = mht::aggregate_attention_maps(probe);
    if (!seg.is_object() || !seg.contains("segments") || !seg["segments"].is_array()) {
      throw mht::ValidationError("segments file needs a \"segments\" array");
    }
    std::vector<mht::RegionMap> segments;
    for (const auto& s : seg["segments"]) segments.push_back(mht::io::region_map_from_json(s));
    result = mht::assign_regions_by_attention(sims, segments, {false, a.theta});
  } else if (a.mode == "identity") {
    try {
      const std::size_t h = seg.at("height").get<std::size_t>();
      const std::size_t w = seg.at("width").get<std::size_t>();
      const auto refs = mht::io::embedding_set_from_json(
          seg.at("refs"), mht::EmbeddingRole::kReference, fs::path(a.segments).parent_path());
      std::vector<mht::FaceCandidate> faces;
      for (const auto& f : seg.at("faces")) {
        faces.push_back({mht::io::region_map_from_json(f.at("mask")),
                         mht::io::embedding_from_json(f.at("embedding"))});
      }
      result = mht::assign_regions_by_identity(refs, faces, h, w);
    } catch (const json::exception& e) {
      throw mht::ValidationError(std::string("malformed identity input: ") + e.what());
    }
  } else {
    throw mht::ValidationError("--mode must be attention or identity");
  }
  emit(a.out, dump(assignment_to_json(result)));
  return 0;
}

struct MaskArgs {
  std::string layout, rois, out;
};

int run_build_mask(const MaskArgs& a) {
  mht::IsolationSpec spec;
  spec.layout = mht::io::layout_from_json(mht::io::read_json_file(a.layout));
  const json r = mht::io::read_json_file(a.rois);
  try {
    if (r.contains("rois")) {
      for (const auto& roi : r.at("rois")) {
        mht::IndexSet set = roi.get<mht::IndexSet>();
        std::sort(set.begin(), set.end());
        spec.rois.push_back(std::move(set));
      }
    } else {
      for (const auto& m : r.at("maps")) {
        spec.rois.push_back(
            mht::roi_from_region_map(mht::io::region_map_from_json(m), spec.layout));
      }
    }
  } catch (const json::exception& e) {
    throw mht::ValidationError(std::string("malformed ROI file: ") + e.what());
  }
  const json out = {{"base", mht::mask_to_json(mht::build_base_mask(spec.layout))},
                    {"isolated", mht::mask_to_json(mht::build_isolated_mask(spec))}};
  emit(a.out, dump(out));
  return 0;
}

struct SampleArgs {
  std::string pool, targets, prompts, out;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::size_t iterations = 3;
  bool best_effort = false;
};

int run_sample(const SampleArgs& a) {
  const auto pool = mht::pool_from_json(mht::io::read_json_file(a.pool));
  const auto targets = mht::targets_from_json(mht::io::read_json_file(a.targets));
  const auto sample = mht::stratified_sample(pool, targets, a.n, a.seed, {a.best_effort});
  json out = mht::to_json(sample);
  out["rng"] = mht::kRngName;
  out["seed"] = a.seed;
  out["n"] = a.n;
  if (!a.prompts.empty()) {
    const json p = mht::io::read_json_file(a.prompts);
    const json& list = p.is_object() && p.contains("prompts") ? p["prompts"] : p;
    std::vector<mht::PromptSlot> slots;
    try {
      for (const auto& e : list) {
        slots.push_back({e.at("prompt_id").get<std::string>(),
                         e.at("persons").get<std::size_t>()});
      }
    } catch (const json::exception& e) {
      throw mht::ValidationError(std::string("malformed prompts file: ") + e.what());
    }
    const auto assigned =
        mht::assign_ids_to_prompts(sample.ids, slots, a.iterations, a.seed);
    out["assignments"] = mht::to_json(assigned);
  }
  for (const auto& w : sample.warnings) std::cerr << "warning: " << w << "\n";
  emit(a.out, dump(out));
  return 0;
}

struct PoseArgs {
  std::string candidates, out;
};

int run_select_poses(const PoseArgs& a) {
  const auto per_prompt =
      mht::pose_candidates_from_json(mht::io::read_json_file(a.candidates));
  json out = json::object();
  for (const auto& [prompt, pick] : mht::select_pose_sources(per_prompt)) {
    out[prompt] = pick ? json(*pick) : json(nullptr);
  }
  emit(a.out, dump(out));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-person identity benchmark toolkit"};
  app.require_subcommand(1);

  EvalArgs eval;
  auto* ev = app.add_subcommand("eval", "Score a manifest and write the report");
  ev->add_option("--manifest", eval.manifest, "Manifest JSON")->required();
  ev->add_option("--out", eval.out, "Report JSON (stdout when omitted)");
  ev->add_option("--csv", eval.csv, "Also write CSV cells");
  ev->add_option("--table", eval.table, "Also write a text table");
  ev->add_flag("--skip-invalid", eval.skip_invalid, "Skip invalid samples");
  ev->add_option("--jobs", eval.jobs, "Worker threads")->check(CLI::PositiveNumber);

  AssignArgs assign;
  auto* as = app.add_subcommand("assign-regions", "Assign segments to reference images");
  as->add_option("--probe", assign.probe, "Attention probe JSON");
  as->add_option("--segments", assign.segments, "Segments JSON")->required();
  as->add_option("--mode", assign.mode, "attention or identity")
      ->check(CLI::IsMember({"attention", "identity"}));
  as->add_option("--theta", assign.theta, "NMS IoU threshold")->check(CLI::Range(0.0, 1.0));
  as->add_option("--out", assign.out, "Output JSON");

  MaskArgs mask;
  auto* bm = app.add_subcommand("build-mask", "Build base and isolated attention masks");
  bm->add_option("--layout", mask.layout, "Token layout JSON")->required();
  bm->add_option("--rois", mask.rois, "ROI JSON")->required();
  bm->add_option("--out", mask.out, "Output JSON");

  SampleArgs sample;
  auto* sa = app.add_subcommand("sample", "Stratified identity sampling");
  sa->add_option("--pool", sample.pool, "Labeled pool JSON")->required();
  sa->add_option("--targets", sample.targets, "Target marginals JSON")->required();
  sa->add_option("--n", sample.n, "Number of ids")->required();
  sa->add_option("--seed", sample.seed, "RNG seed")->required();
  sa->add_flag("--best-effort", sample.best_effort, "Redistribute infeasible quotas");
  sa->add_option("--prompts", sample.prompts, "Prompts JSON for id assignment");
  sa->add_option("--iterations", sample.iterations, "Iterations per prompt");
  sa->add_option("--out", sample.out, "Output JSON");

  PoseArgs poses;
  auto* sp = app.add_subcommand("select-poses", "Pick pose sources per prompt");
  sp->add_option("--candidates", poses.candidates, "Candidates JSON")->required();
  sp->add_option("--out", poses.out, "Output JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*ev) return run_eval(eval);
    if (*as) return run_assign(assign);
    if (*bm) return run_build_mask(mask);
    if (*sa) return run_sample(sample);
    if (*sp) return run_select_poses(poses);
  } catch (const mht::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == mht::ErrorKind::kIo ? 2 : 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
