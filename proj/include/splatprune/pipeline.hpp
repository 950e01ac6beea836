#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "splatprune/camera_rig.hpp"
#include "splatprune/color_validator.hpp"
#include "splatprune/error.hpp"
#include "splatprune/gaussian_store.hpp"
#include "splatprune/log.hpp"
#include "splatprune/mask_provider.hpp"
#include "splatprune/outlier_pruner.hpp"
#include "splatprune/whitelist_filter.hpp"

namespace splatprune {

inline constexpr int kReportSchemaVersion = 1;
inline constexpr std::string_view kOutputTag = "splatprune";

/// Defaults for the pipeline parameters.
namespace defaults {
inline constexpr double kTau = 0.40;
inline constexpr std::size_t kNeighbors = 10;
inline constexpr double kSpatialPercentile = 99.0;
inline constexpr double kNeighborPercentile = 95.0;
inline constexpr std::uint32_t kMinViews = 2;
inline constexpr double kMinRemainingFraction = 0.005;
}  // namespace defaults

enum class Variant { Basic, Neighbor, Spatial, Multiview, Combined };

constexpr std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::Basic: return "basic";
    case Variant::Neighbor: return "neighbor";
    case Variant::Spatial: return "spatial";
    case Variant::Multiview: return "multiview";
    case Variant::Combined: return "combined";
  }
  return "unknown";
}

inline Variant parse_variant(std::string_view name) {
  for (Variant v : {Variant::Basic, Variant::Neighbor, Variant::Spatial, Variant::Multiview, Variant::Combined}) {
    if (to_string(v) == name) return v;
  }
  throw Error(ErrorKind::InvalidArgument, "unknown variant '" + std::string(name) + "'");
}

struct PipelineParams {
  Variant variant = Variant::Neighbor;
  double tau = defaults::kTau;
  std::size_t k = defaults::kNeighbors;
  double p_spatial = defaults::kSpatialPercentile;
  double p_neighbor = defaults::kNeighborPercentile;
  std::uint32_t min_views = defaults::kMinViews;
  std::size_t workers = 0;  // 0 = auto
  /// A stage leaving less than this fraction of its input aborts the run;
  /// 0 disables the guard.
  double min_remaining_fraction = defaults::kMinRemainingFraction;

  /// Whitelist threshold actually applied: min_views in multiview/combined, else 1.
  std::uint32_t effective_min_views() const {
    return (variant == Variant::Multiview || variant == Variant::Combined) ? min_views : 1;
  }
  bool uses_neighbor() const {
    return variant == Variant::Neighbor || variant == Variant::Multiview || variant == Variant::Combined;
  }
  bool uses_spatial() const { return variant == Variant::Spatial || variant == Variant::Combined; }
  bool uses_min_views() const { return variant == Variant::Multiview || variant == Variant::Combined; }

  void validate() const {
    if (!(tau >= 0.0)) throw Error(ErrorKind::InvalidArgument, "tau must be non-negative");
    if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be positive");
    if (!(p_spatial > 0.0 && p_spatial < 100.0)) throw Error(ErrorKind::InvalidArgument, "p_spatial must lie in (0, 100)");
    if (!(p_neighbor > 0.0 && p_neighbor < 100.0)) throw Error(ErrorKind::InvalidArgument, "p_neighbor must lie in (0, 100)");
    if (min_views < 1) throw Error(ErrorKind::InvalidArgument, "min_views must be at least 1");
    if (!(min_remaining_fraction >= 0.0 && min_remaining_fraction < 1.0)) {
      throw Error(ErrorKind::InvalidArgument, "min_remaining_fraction must lie in [0, 1)");
    }
  }
};

struct PipelineResult {
  KeepVector keep;
  std::vector<std::uint32_t> hit_counts;
  ColorEvidence evidence;
  std::vector<StageRecord> stages;
  std::size_t input_count = 0;
  std::size_t whitelisted_count = 0;
  std::size_t masked_views = 0;
  std::size_t rig_views = 0;
  bool reprocessed_input = false;
  std::vector<std::string> warnings;

  std::size_t output_count() const { return count_kept(keep); }
  double compression_ratio() const {
    return input_count == 0 ? 0.0 : 1.0 - static_cast<double>(output_count()) / static_cast<double>(input_count);
  }
  double stage_millis(std::string_view prefix) const {
    double ms = 0.0;
    for (const auto& s : stages)
      if (s.name.rfind(prefix, 0) == 0) ms += s.millis;
    return ms;
  }
};

inline bool has_output_tag(const GaussianCloud& cloud) {
  for (const auto& c : cloud.comments)
    if (c.rfind(kOutputTag, 0) == 0) return true;
  return false;
}

namespace detail {

inline double millis_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

inline void guard_stage(const SelectionState& state, const PipelineParams& params) {
  const StageRecord& s = state.stage_log.back();
  const std::size_t input = s.removed + s.remaining;
  if (params.min_remaining_fraction <= 0.0 || input == 0) return;
  if (static_cast<double>(s.remaining) < params.min_remaining_fraction * static_cast<double>(input)) {
    throw Error(ErrorKind::StageGuard, "stage '" + s.name + "' removed " + std::to_string(s.removed) + " of " +
                                           std::to_string(input) +
                                           " Gaussians; check mask/camera pairing or lower --min-remaining");
  }
}

template <typename Fn>
auto with_stage_context(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const Error& e) {
    throw Error(e.kind(), "stage '" + stage + "': " + e.message());
  }
}

}  // namespace detail

/// Runs whitelist -> color -> outlier on in-memory inputs. Every aggregation
/// is an order-independent merge, so the result is identical for any worker
/// count.
inline PipelineResult run_stages(const GaussianCloud& cloud, const MaskSet& masks, const PipelineParams& params) {
  params.validate();
  if (masks.entries.empty()) throw Error(ErrorKind::NoMasksFound, "no masked views to prune against");

  PipelineResult result;
  result.input_count = cloud.size();
  result.masked_views = masks.total_views();
  result.rig_views = masks.rig_size;
  result.reprocessed_input = has_output_tag(cloud);
  if (result.reprocessed_input && params.variant != Variant::Basic) {
    result.warnings.push_back("input was already pruned by this tool; percentile stages remove a further tail");
  }
  if (params.variant != Variant::Basic && !params.uses_spatial() && params.p_spatial != defaults::kSpatialPercentile) {
    result.warnings.push_back("p_spatial is ignored by variant " + std::string(to_string(params.variant)));
  }
  if (!params.uses_min_views() && params.min_views != defaults::kMinViews) {
    result.warnings.push_back("min_views is ignored by variant " + std::string(to_string(params.variant)));
  }

  SelectionState state(cloud.size());
  const std::size_t workers = resolve_workers(params.workers);

  detail::with_stage_context("whitelist", [&] {
    const auto start = std::chrono::steady_clock::now();
    state.hit_counts = accumulate_hits(cloud, masks, workers);
    state.commit("whitelist", whitelist(state.hit_counts, params.effective_min_views()), detail::millis_since(start));
  });
  detail::guard_stage(state, params);
  result.whitelisted_count = state.remaining();

  detail::with_stage_context("color", [&] {
    const auto start = std::chrono::steady_clock::now();
    ColorValidation cv = validate_colors(cloud, state.keep, masks, params.tau, workers);
    result.evidence = std::move(cv.evidence);
    state.commit("color", std::move(cv.keep), detail::millis_since(start));
  });
  detail::guard_stage(state, params);

  if (params.variant != Variant::Basic) {
    const std::string stage = params.variant == Variant::Combined ? "combined"
                              : params.uses_spatial()              ? "spatial"
                                                                   : "neighbor";
    detail::with_stage_context(stage, [&] {
      const auto start = std::chrono::steady_clock::now();
      auto [positions, indices] = gather_kept(cloud, state.keep);
      KeepVector next = state.keep;
      if (!indices.empty()) {
        KeepVector remove;
        const OutlierParams op{params.k, params.p_spatial, params.p_neighbor};
        if (params.variant == Variant::Combined) {
          remove = combined_outliers(positions, op, workers);
        } else if (params.uses_spatial()) {
          remove = spatial_outliers(positions, params.p_spatial);
        } else {
          remove = neighbor_outliers(positions, params.k, params.p_neighbor, workers);
        }
        for (std::size_t j = 0; j < indices.size(); ++j)
          if (remove[j]) next[indices[j]] = 0;
      }
      state.commit(stage, std::move(next), detail::millis_since(start));
    });
    detail::guard_stage(state, params);
  }

  if (state.remaining() == 0) result.warnings.push_back("EmptyResult: every Gaussian was removed");
  result.keep = std::move(state.keep);
  result.hit_counts = std::move(state.hit_counts);
  result.stages = std::move(state.stage_log);
  return result;
}

struct PipelineConfig {
  PipelineParams params;
  std::filesystem::path model;
  std::optional<std::filesystem::path> colmap_dir;
  std::optional<std::filesystem::path> cameras_json;
  std::filesystem::path masks;
  std::optional<std::filesystem::path> images;
  std::filesystem::path output;
  std::optional<std::filesystem::path> report;

  std::filesystem::path report_path() const {
    if (report) return *report;
    auto p = output;
    p.replace_extension(".report.json");
    return p;
  }
};

struct ReportContext {
  std::string input_path;
  std::string output_path;
  std::size_t input_bytes = 0;
  std::size_t output_bytes = 0;
  std::size_t sh_rest_count = kDefaultRestCount;
  std::vector<std::string> mask_names;
  bool include_kept_indices = true;
};

inline nlohmann::json make_report(const PipelineResult& r, const PipelineParams& p, const ReportContext& ctx) {
  using nlohmann::json;
  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["tool"] = kOutputTag;
  report["config"] = {
      {"variant", to_string(p.variant)},
      {"tau", p.tau},
      {"k", p.k},
      {"p_spatial", p.p_spatial},
      {"p_neighbor", p.p_neighbor},
      {"min_views", p.min_views},
      {"effective_min_views", p.effective_min_views()},
      {"workers", resolve_workers(p.workers)},
      {"min_remaining_fraction", p.min_remaining_fraction},
      {"percentile_method", "linear"},
      {"color_evidence", "per-pixel-existential"},
  };
  report["input"] = {{"path", ctx.input_path},
                     {"gaussians", r.input_count},
                     {"bytes", ctx.input_bytes},
                     {"sh_rest_count", ctx.sh_rest_count}};
  report["output"] = {{"path", ctx.output_path}, {"gaussians", r.output_count()}, {"bytes", ctx.output_bytes}};
  report["masked_views"] = r.masked_views;
  report["rig_views"] = r.rig_views;
  report["mask_names"] = ctx.mask_names;
  report["compression_ratio"] = r.compression_ratio();
  report["size_ratio"] = ctx.input_bytes == 0 ? 0.0 : static_cast<double>(ctx.output_bytes) / ctx.input_bytes;

  const double n0 = static_cast<double>(r.input_count);
  const double nw = static_cast<double>(r.whitelisted_count);
  json stages = json::array();
  double total_ms = 0.0;
  for (const auto& s : r.stages) {
    const double input = static_cast<double>(s.removed + s.remaining);
    stages.push_back({{"name", s.name},
                      {"removed", s.removed},
                      {"remaining", s.remaining},
                      {"ms", s.millis},
                      {"fraction_of_input", input > 0 ? s.removed / input : 0.0},
                      {"fraction_of_original", n0 > 0 ? s.removed / n0 : 0.0},
                      {"fraction_of_whitelisted", nw > 0 ? s.removed / nw : 0.0}});
    total_ms += s.millis;
  }
  report["stages"] = std::move(stages);
  report["total_ms"] = total_ms;
  const double ms12 = r.stage_millis("whitelist") + r.stage_millis("color");
  report["stages_1_2_gaussians_per_ms"] = ms12 > 0 ? n0 / ms12 : 0.0;
  report["reprocessed_input"] = r.reprocessed_input;
  report["warnings"] = r.warnings;
  if (ctx.include_kept_indices) {
    std::vector<std::size_t> kept;
    kept.reserve(r.output_count());
    for (std::size_t i = 0; i < r.keep.size(); ++i)
      if (r.keep[i]) kept.push_back(i);
    report["kept_indices"] = std::move(kept);
  }
  return report;
}

struct PipelineRun {
  PipelineResult result;
  nlohmann::json report;
};

inline std::vector<CameraView> load_rig(const PipelineConfig& config) {
  if (config.colmap_dir && config.cameras_json) {
    throw Error(ErrorKind::InvalidArgument, "give either a COLMAP directory or a cameras JSON, not both");
  }
  if (config.colmap_dir) return load_colmap_text(*config.colmap_dir);
  if (config.cameras_json) return load_cameras_json(*config.cameras_json);
  throw Error(ErrorKind::InvalidArgument, "no cameras given");
}

/// File-level pipeline: load inputs, run the stages, write the pruned PLY
/// and the JSON report.
inline PipelineRun run_pipeline(const PipelineConfig& config) {
  namespace fs = std::filesystem;
  const GaussianCloud cloud = load_ply(config.model);
  const std::vector<CameraView> rig = load_rig(config);
  const MaskSet masks = load_masks(config.masks, config.images, rig);

  PipelineRun run;
  run.result = run_stages(cloud, masks, config.params);
  for (const auto& w : run.result.warnings) warn(w);

  GaussianCloud pruned = subset(cloud, run.result.keep);
  pruned.comments.push_back(std::string(kOutputTag) + " variant=" + std::string(to_string(config.params.variant)));

  ReportContext ctx;
  ctx.input_path = config.model.string();
  ctx.output_path = config.output.string();
  ctx.input_bytes = static_cast<std::size_t>(fs::file_size(config.model));
  ctx.output_bytes = save_ply(pruned, config.output);
  ctx.sh_rest_count = cloud.rest_count;
  for (const auto& mv : masks.entries) ctx.mask_names.push_back(mv.view.image_name);
  run.report = make_report(run.result, config.params, ctx);

  std::ofstream out(config.report_path());
  if (!out) throw Error(ErrorKind::IoFailure, "cannot open " + config.report_path().string() + " for writing");
  out << run.report.dump(2) << '\n';
  if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + config.report_path().string());
  return run;
}

}  // namespace splatprune
