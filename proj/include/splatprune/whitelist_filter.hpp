#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "splatprune/error.hpp"
#include "splatprune/gaussian_store.hpp"
#include "splatprune/mask_provider.hpp"
#include "splatprune/parallel.hpp"
#include "splatprune/projection.hpp"

namespace splatprune {

struct StageRecord {
  std::string name;
  std::size_t removed = 0;
  std::size_t remaining = 0;
  double millis = 0.0;
};

/// The pipeline's mutable core: one keep flag and one mask-hit count per
/// Gaussian, plus the per-stage removal log. Only the orchestrator mutates it.
struct SelectionState {
  KeepVector keep;
  std::vector<std::uint32_t> hit_counts;
  std::vector<StageRecord> stage_log;

  SelectionState() = default;
  explicit SelectionState(std::size_t n) : keep(n, 1), hit_counts(n, 0) {}

  std::size_t remaining() const { return count_kept(keep); }

  /// Replaces keep with `next` (which must be a subset) and logs the stage.
  void commit(const std::string& stage, KeepVector next, double millis) {
    if (next.size() != keep.size()) throw Error(ErrorKind::LengthMismatch, "stage '" + stage + "' keep vector size");
    const std::size_t before = remaining();
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = static_cast<std::uint8_t>(next[i] && keep[i]);
    keep = std::move(next);
    const std::size_t after = remaining();
    stage_log.push_back({stage, before - after, after, millis});
  }
};

/// Number of masked views in which each Gaussian lands on an object pixel.
/// Views are statically partitioned over workers and the partial counts
/// summed, so the result does not depend on `workers`.
inline std::vector<std::uint32_t> accumulate_hits(const GaussianCloud& cloud, const MaskSet& masks,
                                                  std::size_t workers = 1) {
  const std::size_t n = cloud.size();
  const std::size_t views = masks.entries.size();
  workers = std::max<std::size_t>(1, std::min(resolve_workers(workers), views));
  std::vector<std::vector<std::uint32_t>> partial(workers);

  parallel_chunks(views, workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    auto& hits = partial[w];
    hits.assign(n, 0);
    for (std::size_t v = begin; v < end; ++v) {
      const MaskedView& mv = masks.entries[v];
      const ViewProjector project(mv.view);
      for (std::size_t i = 0; i < n; ++i) {
        const ProjectedPoint p = project(cloud, i);
        if (p.valid && mv.mask.at(p.px, p.py)) ++hits[i];
      }
    }
  });

  std::vector<std::uint32_t> hits(n, 0);
  for (const auto& part : partial) {
    if (part.empty()) continue;
    for (std::size_t i = 0; i < n; ++i) hits[i] += part[i];
  }
  return hits;
}

/// keep[i] = hit_counts[i] >= min_views. min_views = 1 is the plain
/// any-view whitelist; larger values demand multi-view consistency.
inline KeepVector whitelist(std::span<const std::uint32_t> hit_counts, std::uint32_t min_views) {
  if (min_views < 1) throw Error(ErrorKind::InvalidArgument, "minimum views must be at least 1");
  KeepVector keep(hit_counts.size());
  for (std::size_t i = 0; i < hit_counts.size(); ++i) keep[i] = hit_counts[i] >= min_views ? 1 : 0;
  return keep;
}

}  // namespace splatprune
