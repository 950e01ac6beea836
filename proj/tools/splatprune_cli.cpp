// splatprune: isolate an object from a trained 3DGS model using sparse masks.
//
//   splatprune prune --model in.ply --cameras sparse/ --masks masks/ --out out.ply
//   splatprune synth --out scene/ --seed 7
//   splatprune eval  --labels scene/labels.bin --report out.report.json
//   splatprune info  --model in.ply --cameras sparse/

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "splatprune/splatprune.hpp"

namespace fs = std::filesystem;
using namespace splatprune;

namespace {

constexpr int kUsageError = 2;
constexpr int kRuntimeError = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::size_t parse_workers(const std::string& text) {
  if (text == "auto") return 0;
  try {
    std::size_t pos = 0;
    const long v = std::stol(text, &pos);
    if (pos == text.size() && v > 0) return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
  }
  throw UsageError("--workers expects a positive integer or 'auto', got '" + text + "'");
}

struct CameraArgs {
  std::string colmap;
  std::string json;

  void add_to(CLI::App* cmd) {
    auto* c = cmd->add_option("--cameras", colmap, "COLMAP text model directory (cameras.txt, images.txt)");
    auto* j = cmd->add_option("--cameras-json", json, "camera rig in the native JSON format");
    c->excludes(j);
  }
  bool given() const { return !colmap.empty() || !json.empty(); }
  std::vector<CameraView> load() const {
    return colmap.empty() ? load_cameras_json(json) : load_colmap_text(colmap);
  }
};

int run_prune(const PipelineConfig& config) {
  const PipelineRun run = run_pipeline(config);
  const auto& r = run.result;
  std::printf("%-10s %10s %10s %9s\n", "stage", "removed", "remaining", "ms");
  std::printf("%-10s %10s %10zu %9s\n", "original", "-", r.input_count, "-");
  for (const auto& s : r.stages) std::printf("%-10s %10zu %10zu %9.1f\n", s.name.c_str(), s.removed, s.remaining, s.millis);
  std::printf("compression %.1f%%  (%zu -> %zu Gaussians, %zu -> %zu bytes)\n", 100.0 * r.compression_ratio(),
              r.input_count, r.output_count(), run.report["input"]["bytes"].get<std::size_t>(),
              run.report["output"]["bytes"].get<std::size_t>());
  std::printf("wrote %s and %s\n", config.output.c_str(), config.report_path().c_str());
  return 0;
}

int run_synth(const SceneParams& params, const fs::path& out) {
  const SyntheticScene scene = generate_scene(params);
  const SceneFiles files = write_scene(scene, out);
  std::size_t counts[3] = {0, 0, 0};
  for (auto l : scene.labels) ++counts[static_cast<int>(l)];
  std::printf("scene seed=%llu: %zu object, %zu background, %zu floater Gaussians; %zu views, %zu masks\n",
              static_cast<unsigned long long>(scene.seed), counts[0], counts[1], counts[2], scene.rig.size(),
              scene.masks.total_views());
  std::printf("wrote %s\n", files.root.c_str());
  return 0;
}

int run_eval(const fs::path& labels_path, const fs::path& report_path, const std::string& visibility_path,
             const std::string& out_path) {
  const auto labels = load_labels(labels_path);
  std::ifstream in(report_path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open " + report_path.string());
  nlohmann::json report;
  try {
    in >> report;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, report_path.string() + ": " + e.what());
  }
  if (!report.contains("kept_indices")) {
    throw Error(ErrorKind::ParseError, report_path.string() + ": report has no kept_indices");
  }
  KeepVector keep(labels.size(), 0);
  for (const auto& idx : report["kept_indices"]) {
    const auto i = idx.get<std::size_t>();
    if (i >= keep.size()) throw Error(ErrorKind::LengthMismatch, "kept index " + std::to_string(i) + " beyond labels");
    keep[i] = 1;
  }
  std::vector<std::uint8_t> visible;
  if (!visibility_path.empty()) {
    std::ifstream v(visibility_path, std::ios::binary);
    if (!v) throw Error(ErrorKind::IoFailure, "cannot open " + visibility_path);
    visible.assign(std::istreambuf_iterator<char>(v), std::istreambuf_iterator<char>());
  }
  const ScoreMetrics m = score(keep, labels, visible);
  const std::string text = to_json(m).dump(2);
  std::printf("%s\n", text.c_str());
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    out << text << '\n';
    if (!out) throw Error(ErrorKind::IoFailure, "write failed for " + out_path);
  }
  return 0;
}

int run_info(const std::string& model, const CameraArgs& cams) {
  if (!model.empty()) {
    const GaussianCloud cloud = load_ply(model);
    std::printf("model %s\n  gaussians      %zu\n  sh rest coeffs %zu\n  stride         %zu bytes\n  file size      %ju bytes\n",
                model.c_str(), cloud.size(), cloud.rest_count, cloud.stride_bytes(),
                static_cast<std::uintmax_t>(fs::file_size(model)));
    if (cloud.rest_count != kDefaultRestCount) {
      std::printf("  note: %zu f_rest properties (degree-3 layout has %zu)\n", cloud.rest_count, kDefaultRestCount);
    }
    if (has_output_tag(cloud)) std::printf("  already pruned by splatprune\n");
  }
  if (cams.given()) {
    const auto rig = cams.load();
    std::printf("rig: %zu views\n", rig.size());
    for (const auto& v : rig) {
      std::printf("  %4d %-24s %dx%d fx=%.2f fy=%.2f center=(%.3f, %.3f, %.3f)\n", v.view_id, v.image_name.c_str(),
                  v.width, v.height, v.fx, v.fy, v.t_c2w.x(), v.t_c2w.y(), v.t_c2w.z());
    }
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Remove background and floater Gaussians from a 3DGS model using sparse object masks"};
  app.require_subcommand(1);

  // prune
  auto* prune = app.add_subcommand("prune", "run the whitelist / color / outlier pipeline");
  PipelineConfig config;
  CameraArgs prune_cams;
  std::string model, masks, images, out, report, variant = "neighbor", workers = "auto";
  prune->add_option("--model", model, "input 3DGS PLY")->required();
  prune_cams.add_to(prune);
  prune->add_option("--masks", masks, "directory of binary masks named after their images")->required();
  prune->add_option("--images", images, "directory of masked RGB images for color validation");
  prune->add_option("--out", out, "pruned PLY to write")->required();
  prune->add_option("--report", report, "JSON report path (default: <out>.report.json)");
  prune->add_option("--variant", variant, "basic | neighbor | spatial | multiview | combined")
      ->check(CLI::IsMember({"basic", "neighbor", "spatial", "multiview", "combined"}));
  prune->add_option("--tau", config.params.tau, "color threshold (RGB distance)")->check(CLI::NonNegativeNumber);
  prune->add_option("--k", config.params.k, "neighbors for outlier removal")->check(CLI::PositiveNumber);
  prune->add_option("--p-spatial", config.params.p_spatial, "spatial percentile")->check(CLI::Range(0.0, 100.0));
  prune->add_option("--p-neighbor", config.params.p_neighbor, "neighbor percentile")->check(CLI::Range(0.0, 100.0));
  prune->add_option("--min-views", config.params.min_views, "masked views required in multiview/combined")
      ->check(CLI::PositiveNumber);
  prune->add_option("--workers", workers, "worker threads, or 'auto'");
  prune->add_option("--min-remaining", config.params.min_remaining_fraction,
                    "abort if a stage keeps less than this fraction of its input (0 disables)")
      ->check(CLI::Range(0.0, 0.999999));

  // synth
  auto* synth = app.add_subcommand("synth", "generate a labeled synthetic benchmark scene");
  SceneParams sp;
  std::string synth_out;
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--seed", sp.seed, "PRNG seed");
  synth->add_option("--objects", sp.n_object, "object Gaussians");
  synth->add_option("--background", sp.n_background, "background Gaussians");
  synth->add_option("--floaters", sp.n_floaters, "floater Gaussians");
  synth->add_option("--views", sp.ring_views, "cameras on the ring");
  synth->add_option("--mask-views", sp.mask_views, "cameras that get a mask");
  synth->add_option("--width", sp.width, "image width");
  synth->add_option("--height", sp.height, "image height");

  // eval
  auto* eval = app.add_subcommand("eval", "score a prune report against synthetic labels");
  std::string labels, eval_report, visibility, eval_out;
  eval->add_option("--labels", labels, "labels.bin from synth")->required();
  eval->add_option("--report", eval_report, "report JSON from prune")->required();
  eval->add_option("--visibility", visibility, "visible.bin from synth (restricts the recall denominator)");
  eval->add_option("--out", eval_out, "write metrics JSON here");

  // info
  auto* info = app.add_subcommand("info", "print model and rig statistics");
  std::string info_model;
  CameraArgs info_cams;
  info->add_option("--model", info_model, "PLY to inspect");
  info_cams.add_to(info);

  try {
    app.parse(argc, argv);
    if (prune->parsed()) {
      if (!prune_cams.given()) throw UsageError("prune needs --cameras or --cameras-json");
      config.params.variant = parse_variant(variant);
      config.params.workers = parse_workers(workers);
      config.model = model;
      if (!prune_cams.colmap.empty()) config.colmap_dir = prune_cams.colmap;
      if (!prune_cams.json.empty()) config.cameras_json = prune_cams.json;
      config.masks = masks;
      if (!images.empty()) config.images = images;
      config.output = out;
      if (!report.empty()) config.report = report;
      return run_prune(config);
    }
    if (synth->parsed()) return run_synth(sp, synth_out);
    if (eval->parsed()) return run_eval(labels, eval_report, visibility, eval_out);
    if (info->parsed()) {
      if (info_model.empty() && !info_cams.given()) throw UsageError("info needs --model and/or cameras");
      return run_info(info_model, info_cams);
    }
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error: " << e.what() << "\n\n";
    const CLI::App* sub = nullptr;
    for (const auto* s : app.get_subcommands()) sub = s;
    std::cerr << (sub ? sub->help() : app.help());
    return kUsageError;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kUsageError;
}
