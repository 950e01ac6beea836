#include <cstdio>
#include <functional>

#include <gtest/gtest.h>

#include "splatprune/mask_provider.hpp"
#include "support/oracles.hpp"

using namespace splatprune;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::InvalidArgument;
}

Image8 gray(int w, int h, std::uint8_t v) { return {w, h, 1, std::vector<std::uint8_t>(static_cast<std::size_t>(w) * h, v)}; }

// Centered axis-aligned square covering [x0, x0 + side) x [y0, y0 + side).
Image8 square(int w, int h, int side) {
  Image8 img = gray(w, h, 0);
  const int x0 = (w - side) / 2, y0 = (h - side) / 2;
  for (int y = y0; y < y0 + side; ++y)
    for (int x = x0; x < x0 + side; ++x) img.pixels[static_cast<std::size_t>(y) * w + x] = 255;
  return img;
}

std::vector<CameraView> named_rig(int count, int w = 100, int h = 80) {
  std::vector<CameraView> rig;
  for (int i = 0; i < count; ++i) {
    CameraView v = testutil::make_view(w, h);
    v.view_id = i;
    char name[32];
    std::snprintf(name, sizeof name, "frame_%04d.jpg", i);
    v.image_name = name;
    rig.push_back(v);
  }
  return rig;
}

}  // namespace

TEST(MaskProvider, BinarizeIsStrictlyAboveThreshold) {
  EXPECT_TRUE(binarize(gray(1, 1, 128)).at(0, 0));
  EXPECT_FALSE(binarize(gray(1, 1, 127)).at(0, 0));
  EXPECT_EQ(binarize(gray(7, 5, 255)).count(), 35u);
  EXPECT_EQ(binarize(gray(7, 5, 0)).count(), 0u);
  EXPECT_TRUE(binarize(gray(1, 1, 11), 10).at(0, 0));
}

TEST(MaskProvider, BinarizeAveragesColorChannels) {
  Image8 rgb{1, 1, 3, {255, 255, 0}};  // mean 170
  EXPECT_TRUE(binarize(rgb).at(0, 0));
  Image8 dark{1, 1, 3, {255, 0, 0}};  // mean 85
  EXPECT_FALSE(binarize(dark).at(0, 0));
}

TEST(MaskProvider, ResizeAtCameraResolutionIsIdentity) {
  const BinaryMask m = binarize(square(31, 17, 9));
  EXPECT_EQ(resize_nearest(m, 31, 17), m);
}

TEST(MaskProvider, UpscaledSquareKeepsItsArea) {
  const int side = 40;
  const std::size_t full_area = binarize(square(100, 80, side)).count();
  ASSERT_EQ(full_area, static_cast<std::size_t>(side * side));
  const BinaryMask half = binarize(square(50, 40, side / 2));
  const BinaryMask up = resize_nearest(half, 100, 80);
  EXPECT_NEAR(static_cast<double>(up.count()), static_cast<double>(full_area), 0.02 * full_area);
  for (auto v : up.data) EXPECT_TRUE(v == 0 || v == 1);
}

TEST(MaskProvider, ResizeBilinearConstantStaysConstant) {
  RgbImage img(8, 6);
  for (int y = 0; y < 6; ++y)
    for (int x = 0; x < 8; ++x) img.set(x, y, {0.25f, 0.5f, 0.75f});
  const RgbImage big = resize_bilinear(img, 17, 13);
  for (int y = 0; y < 13; ++y) {
    for (int x = 0; x < 17; ++x) {
      const auto c = big.at(x, y);
      EXPECT_FLOAT_EQ(c[0], 0.25f);
      EXPECT_FLOAT_EQ(c[2], 0.75f);
    }
  }
}

TEST(MaskProvider, SparseMasksInLargeRig) {
  testutil::TempDir dir("masks302");
  const auto rig = named_rig(302);
  std::filesystem::create_directories(dir / "masks");
  write_png(square(100, 80, 20), dir / "masks" / "frame_0000.png");
  write_pgm(square(100, 80, 30), dir / "masks" / "frame_0150.pgm");
  write_png(square(50, 40, 10), dir / "masks" / "frame_0301.png");  // half resolution
  const MaskSet set = load_masks(dir / "masks", std::nullopt, rig);
  EXPECT_EQ(set.total_views(), 3u);
  EXPECT_EQ(set.rig_size, 302u);
  ASSERT_EQ(set.entries.size(), 3u);
  EXPECT_EQ(set.entries[0].rig_index, 0u);
  EXPECT_EQ(set.entries[1].rig_index, 150u);
  EXPECT_EQ(set.entries[2].rig_index, 301u);
  EXPECT_EQ(set.entries[1].mask.count(), 900u);
  EXPECT_EQ(set.entries[2].mask.width, 100);
  EXPECT_EQ(set.entries[2].mask.count(), 400u);
  for (const auto& e : set.entries) EXPECT_FALSE(e.masked_image.has_value());
}

TEST(MaskProvider, MaskedImagesArePairedAndResized) {
  testutil::TempDir dir("maskimg");
  const auto rig = named_rig(2);
  std::filesystem::create_directories(dir / "masks");
  std::filesystem::create_directories(dir / "images");
  write_png(square(100, 80, 20), dir / "masks" / "frame_0000.png");
  write_png(square(100, 80, 20), dir / "masks" / "frame_0001.png");
  Image8 photo{50, 40, 3, std::vector<std::uint8_t>(50 * 40 * 3, 51)};
  write_png(photo, dir / "images" / "frame_0000.png");

  std::vector<std::string> warnings;
  auto previous = set_warning_sink([&](const std::string& m) { warnings.push_back(m); });
  const MaskSet set = load_masks(dir / "masks", dir / "images", rig);
  set_warning_sink(previous);

  ASSERT_EQ(set.entries.size(), 2u);
  ASSERT_TRUE(set.entries[0].masked_image.has_value());
  EXPECT_EQ(set.entries[0].masked_image->width, 100);
  EXPECT_NEAR(set.entries[0].masked_image->at(70, 33)[1], 0.2f, 1e-6);
  EXPECT_FALSE(set.entries[1].masked_image.has_value());
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(MaskProvider, Errors) {
  testutil::TempDir dir("maskerr");
  const auto rig = named_rig(3);
  std::filesystem::create_directories(dir / "empty");
  EXPECT_EQ(kind_of([&] { load_masks(dir / "empty", std::nullopt, rig); }), ErrorKind::NoMasksFound);

  std::filesystem::create_directories(dir / "unpaired");
  write_png(square(100, 80, 20), dir / "unpaired" / "nobody.png");
  EXPECT_EQ(kind_of([&] { load_masks(dir / "unpaired", std::nullopt, rig); }), ErrorKind::UnpairedMask);

  std::filesystem::create_directories(dir / "black");
  write_png(gray(100, 80, 0), dir / "black" / "frame_0001.png");
  EXPECT_EQ(kind_of([&] { load_masks(dir / "black", std::nullopt, rig); }), ErrorKind::AllBlackMask);

  EXPECT_EQ(kind_of([&] { load_masks(dir / "absent", std::nullopt, rig); }), ErrorKind::IoFailure);
}

TEST(MaskProvider, ImageRoundTripPngAndPgm) {
  testutil::TempDir dir("imgio");
  Image8 img = square(13, 9, 5);
  img.pixels[3] = 77;
  write_png(img, dir / "a.png");
  write_pgm(img, dir / "a.pgm");
  const Image8 a = read_image(dir / "a.png");
  const Image8 b = read_image(dir / "a.pgm");
  EXPECT_EQ(a.pixels, img.pixels);
  EXPECT_EQ(b.pixels, img.pixels);
  EXPECT_EQ(a.width, 13);
  EXPECT_EQ(b.height, 9);
}
