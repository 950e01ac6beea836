#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "splatprune/error.hpp"
#include "splatprune/gaussian_store.hpp"
#include "splatprune/mask_provider.hpp"
#include "splatprune/parallel.hpp"
#include "splatprune/projection.hpp"

namespace splatprune {

/// Degree-0 real spherical harmonic, 1 / (2 sqrt(pi)), as used for DC color.
inline constexpr double kShC0 = 0.28209479;

using Rgb = std::array<double, 3>;

inline Rgb dc_color_unclamped(const std::array<float, 3>& f_dc) {
  return {kShC0 * f_dc[0] + 0.5, kShC0 * f_dc[1] + 0.5, kShC0 * f_dc[2] + 0.5};
}

/// View-independent base color, clamped to [0,1] per channel.
inline Rgb dc_color(const std::array<float, 3>& f_dc) {
  Rgb c = dc_color_unclamped(f_dc);
  for (auto& v : c) v = std::clamp(v, 0.0, 1.0);
  return c;
}

inline double color_delta(const Rgb& a, const Rgb& b) {
  const double dr = a[0] - b[0], dg = a[1] - b[1], db = a[2] - b[2];
  return std::sqrt(dr * dr + dg * dg + db * db);
}

/// Per-pixel front layer of one view: the nearest kept Gaussian whose
/// projected centre falls in the pixel. Equal depths go to the lower index.
struct DepthBuffer {
  static constexpr std::uint32_t kEmpty = std::numeric_limits<std::uint32_t>::max();

  int width = 0;
  int height = 0;
  std::vector<std::uint32_t> winner;
  std::vector<double> depth;

  DepthBuffer(int w, int h)
      : width(w),
        height(h),
        winner(static_cast<std::size_t>(w) * h, kEmpty),
        depth(static_cast<std::size_t>(w) * h, std::numeric_limits<double>::infinity()) {}

  std::size_t pixel(int x, int y) const { return static_cast<std::size_t>(y) * width + x; }
};

inline DepthBuffer build_depth_buffer(const GaussianCloud& cloud, std::span<const std::uint8_t> keep,
                                      const CameraView& view) {
  if (keep.size() != cloud.size()) throw Error(ErrorKind::LengthMismatch, "keep vector does not match cloud");
  if (cloud.size() >= DepthBuffer::kEmpty) throw Error(ErrorKind::InvalidArgument, "cloud too large for depth buffer");
  DepthBuffer buffer(view.width, view.height);
  const ViewProjector project(view);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    if (!keep[i]) continue;
    const ProjectedPoint p = project(cloud, i);
    if (!p.valid) continue;
    const std::size_t px = buffer.pixel(p.px, p.py);
    // Ascending index order plus strict '<' gives the lower-index tie-break.
    if (p.depth < buffer.depth[px]) {
      buffer.depth[px] = p.depth;
      buffer.winner[px] = static_cast<std::uint32_t>(i);
    }
  }
  return buffer;
}

struct ColorEvidence {
  std::vector<std::uint32_t> rendered_count;  // views where i wins >= 1 object pixel
  std::vector<std::uint32_t> match_count;     // views where i matches at >= 1 object pixel
};

struct ColorValidation {
  KeepVector keep;
  ColorEvidence evidence;
};

/// Removes kept Gaussians that were front-layer on object pixels in some
/// masked view yet never matched the image color (delta < tau) in any view.
/// Views without a masked image contribute no evidence.
inline ColorValidation validate_colors(const GaussianCloud& cloud, std::span<const std::uint8_t> keep,
                                       const MaskSet& masks, double tau, std::size_t workers = 1) {
  if (!(tau >= 0.0)) throw Error(ErrorKind::InvalidArgument, "color threshold must be non-negative");
  if (keep.size() != cloud.size()) throw Error(ErrorKind::LengthMismatch, "keep vector does not match cloud");
  const std::size_t n = cloud.size();
  const std::size_t views = masks.entries.size();
  workers = std::max<std::size_t>(1, std::min(resolve_workers(workers), views));

  struct Partial {
    std::vector<std::uint32_t> rendered, matched;
  };
  std::vector<Partial> partial(workers);

  parallel_chunks(views, workers, [&](std::size_t w, std::size_t begin, std::size_t end) {
    Partial& out = partial[w];
    out.rendered.assign(n, 0);
    out.matched.assign(n, 0);
    constexpr std::uint8_t kRendered = 1, kMatched = 2;
    std::vector<std::uint8_t> flags(n, 0);
    std::vector<std::uint32_t> touched;
    for (std::size_t v = begin; v < end; ++v) {
      const MaskedView& mv = masks.entries[v];
      if (!mv.masked_image) continue;
      const DepthBuffer buffer = build_depth_buffer(cloud, keep, mv.view);
      for (int y = 0; y < buffer.height; ++y) {
        for (int x = 0; x < buffer.width; ++x) {
          if (!mv.mask.at(x, y)) continue;
          const std::uint32_t g = buffer.winner[buffer.pixel(x, y)];
          if (g == DepthBuffer::kEmpty) continue;
          if (flags[g] == 0) touched.push_back(g);
          flags[g] |= kRendered;
          if (!(flags[g] & kMatched)) {
            const auto img = mv.masked_image->at(x, y);
            if (color_delta(dc_color(cloud.dc(g)), Rgb{img[0], img[1], img[2]}) < tau) flags[g] |= kMatched;
          }
        }
      }
      for (const std::uint32_t g : touched) {
        out.rendered[g] += 1;
        out.matched[g] += (flags[g] & kMatched) ? 1 : 0;
        flags[g] = 0;
      }
      touched.clear();
    }
  });

  ColorValidation result;
  result.evidence.rendered_count.assign(n, 0);
  result.evidence.match_count.assign(n, 0);
  for (const auto& part : partial) {
    if (part.rendered.empty()) continue;
    for (std::size_t i = 0; i < n; ++i) {
      result.evidence.rendered_count[i] += part.rendered[i];
      result.evidence.match_count[i] += part.matched[i];
    }
  }
  result.keep.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const bool occluded = result.evidence.rendered_count[i] == 0;
    const bool matched = result.evidence.match_count[i] >= 1;
    result.keep[i] = (keep[i] && (occluded || matched)) ? 1 : 0;
  }
  return result;
}

}  // namespace splatprune
