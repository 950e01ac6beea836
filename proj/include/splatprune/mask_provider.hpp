#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "splatprune/camera_rig.hpp"
#include "splatprune/error.hpp"
#include "splatprune/image_io.hpp"
#include "splatprune/log.hpp"

namespace splatprune {

/// Row-major binary grid; nonzero = object pixel.
struct BinaryMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> data;

  BinaryMask() = default;
  BinaryMask(int w, int h, bool fill = false)
      : width(w), height(h), data(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  bool at(int x, int y) const { return data[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { data[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count_if(data.begin(), data.end(), [](auto v) { return v != 0; }));
  }
  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

/// Row-major RGB in [0,1], three floats per pixel.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<float> data;

  RgbImage() = default;
  RgbImage(int w, int h) : width(w), height(h), data(static_cast<std::size_t>(w) * h * 3, 0.0f) {}

  std::array<float, 3> at(int x, int y) const {
    const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
    return {data[o], data[o + 1], data[o + 2]};
  }
  void set(int x, int y, std::array<float, 3> c) {
    const std::size_t o = (static_cast<std::size_t>(y) * width + x) * 3;
    data[o] = c[0];
    data[o + 1] = c[1];
    data[o + 2] = c[2];
  }
};

struct MaskedView {
  CameraView view;
  std::size_t rig_index = 0;
  BinaryMask mask;
  std::optional<RgbImage> masked_image;
};

struct MaskSet {
  std::vector<MaskedView> entries;
  std::size_t rig_size = 0;

  std::size_t total_views() const noexcept { return entries.size(); }
};

inline constexpr int kDefaultMaskThreshold = 127;

/// true exactly where pixel > threshold. Multi-channel input is averaged.
inline BinaryMask binarize(const Image8& pixels, int threshold = kDefaultMaskThreshold) {
  BinaryMask mask(pixels.width, pixels.height);
  for (int y = 0; y < pixels.height; ++y) {
    for (int x = 0; x < pixels.width; ++x) {
      int value = 0;
      for (int c = 0; c < pixels.channels; ++c) value += pixels.at(x, y, c);
      value /= pixels.channels;
      mask.set(x, y, value > threshold);
    }
  }
  return mask;
}

/// Nearest-neighbour resample sampling source pixel centres; the identity
/// when sizes already match.
inline BinaryMask resize_nearest(const BinaryMask& src, int width, int height) {
  if (src.width == width && src.height == height) return src;
  BinaryMask out(width, height);
  for (int y = 0; y < height; ++y) {
    const int sy = std::min(src.height - 1, static_cast<int>(std::floor((y + 0.5) * src.height / height)));
    for (int x = 0; x < width; ++x) {
      const int sx = std::min(src.width - 1, static_cast<int>(std::floor((x + 0.5) * src.width / width)));
      out.set(x, y, src.at(sx, sy));
    }
  }
  return out;
}

/// Bilinear resample with half-pixel centres and edge clamping.
inline RgbImage resize_bilinear(const RgbImage& src, int width, int height) {
  if (src.width == width && src.height == height) return src;
  RgbImage out(width, height);
  const double scale_x = static_cast<double>(src.width) / width;
  const double scale_y = static_cast<double>(src.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * scale_y - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(fy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * scale_x - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(fx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double wx = fx - x0;
      const auto a = src.at(x0, y0), b = src.at(x1, y0), c = src.at(x0, y1), d = src.at(x1, y1);
      std::array<float, 3> v;
      for (int ch = 0; ch < 3; ++ch) {
        const double top = a[ch] * (1 - wx) + b[ch] * wx;
        const double bottom = c[ch] * (1 - wx) + d[ch] * wx;
        v[ch] = static_cast<float>(top * (1 - wy) + bottom * wy);
      }
      out.set(x, y, v);
    }
  }
  return out;
}

inline RgbImage to_rgb(const Image8& img) {
  RgbImage out(img.width, img.height);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      std::array<float, 3> c;
      for (int ch = 0; ch < 3; ++ch) c[ch] = img.at(x, y, img.channels == 3 ? ch : 0) / 255.0f;
      out.set(x, y, c);
    }
  }
  return out;
}

inline Image8 to_image8(const RgbImage& img) {
  Image8 out{img.width, img.height, 3, std::vector<std::uint8_t>(img.data.size())};
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    out.pixels[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.data[i], 0.0f, 1.0f) * 255.0f));
  }
  return out;
}

inline Image8 to_image8(const BinaryMask& mask) {
  Image8 out{mask.width, mask.height, 1, std::vector<std::uint8_t>(mask.data.size())};
  for (std::size_t i = 0; i < mask.data.size(); ++i) out.pixels[i] = mask.data[i] ? 255 : 0;
  return out;
}

/// Pairs a mask with its camera and brings both rasters to camera resolution.
/// Throws AllBlackMask when nothing of the object survives.
inline MaskedView make_masked_view(const CameraView& view, std::size_t rig_index, const BinaryMask& mask,
                                   std::optional<RgbImage> image = std::nullopt) {
  MaskedView mv;
  mv.view = view;
  mv.rig_index = rig_index;
  mv.mask = resize_nearest(mask, view.width, view.height);
  if (mv.mask.count() == 0) {
    throw Error(ErrorKind::AllBlackMask, "mask for '" + view.image_name + "' has no object pixels");
  }
  if (image) mv.masked_image = resize_bilinear(*image, view.width, view.height);
  return mv;
}

/// Loads every mask in `mask_dir` (PNG or PGM), pairing by file stem with the
/// rig's image names. Cameras without a mask are simply absent.
inline MaskSet load_masks(const std::filesystem::path& mask_dir, const std::optional<std::filesystem::path>& image_dir,
                          const std::vector<CameraView>& rig, int threshold = kDefaultMaskThreshold) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(mask_dir)) throw Error(ErrorKind::IoFailure, mask_dir.string() + " is not a directory");

  std::map<std::string, std::size_t> by_key;
  for (std::size_t i = 0; i < rig.size(); ++i) {
    if (!by_key.emplace(rig[i].key(), i).second) {
      throw Error(ErrorKind::InvalidArgument, "two cameras share the image key '" + rig[i].key() + "'");
    }
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(mask_dir)) {
    if (!entry.is_regular_file()) continue;
    const std::string ext = detail::lower_ext(entry.path());
    if (ext == ".png" || ext == ".pgm") files.push_back(entry.path());
  }
  if (files.empty()) throw Error(ErrorKind::NoMasksFound, "no PNG/PGM masks in " + mask_dir.string());
  std::sort(files.begin(), files.end());

  std::map<std::string, fs::path> images;
  if (image_dir) {
    if (!fs::is_directory(*image_dir)) throw Error(ErrorKind::IoFailure, image_dir->string() + " is not a directory");
    for (const auto& entry : fs::directory_iterator(*image_dir)) {
      if (entry.is_regular_file() && is_image_extension(entry.path())) {
        images.emplace(entry.path().stem().string(), entry.path());
      }
    }
  }

  std::map<std::size_t, MaskedView> paired;
  for (const auto& file : files) {
    const std::string key = file.stem().string();
    auto cam = by_key.find(key);
    if (cam == by_key.end()) throw Error(ErrorKind::UnpairedMask, file.string() + " matches no camera image name");
    if (paired.count(cam->second)) throw Error(ErrorKind::UnpairedMask, file.string() + " duplicates another mask");

    std::optional<RgbImage> rgb;
    if (image_dir) {
      auto img = images.find(key);
      if (img != images.end()) {
        rgb = to_rgb(read_image(img->second));
      } else {
        warn("no masked image for '" + key + "'; color validation gets no evidence from this view");
      }
    }
    try {
      paired.emplace(cam->second, make_masked_view(rig[cam->second], cam->second, binarize(read_image(file), threshold),
                                                   std::move(rgb)));
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::AllBlackMask) throw Error(ErrorKind::AllBlackMask, file.string() + " has no object pixels");
      throw;
    }
  }

  MaskSet set;
  set.rig_size = rig.size();
  for (auto& [index, mv] : paired) set.entries.push_back(std::move(mv));
  return set;
}

}  // namespace splatprune
