#include <cstring>
#include <fstream>
#include <functional>
#include <random>

#include <gtest/gtest.h>

#include "splatprune/gaussian_store.hpp"
#include "support/oracles.hpp"

using namespace splatprune;

namespace {

std::string reference_header(std::size_t n, const std::string& format = "binary_little_endian 1.0") {
  GaussianCloud c;
  c.resize(0);
  std::string h = ply_header_text(c);
  h.replace(h.find("binary_little_endian 1.0"), 24, format);
  h.replace(h.find("element vertex 0"), 16, "element vertex " + std::to_string(n));
  return h;
}

void write_raw(const std::filesystem::path& p, const std::string& header, const std::vector<float>& body) {
  std::ofstream out(p, std::ios::binary);
  out << header;
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size() * sizeof(float)));
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "expected an Error";
  return ErrorKind::InvalidArgument;
}

}  // namespace

TEST(GaussianStore, LoadsSingleVertexPositions) {
  testutil::TempDir dir("ply1");
  std::vector<float> row(62, 0.0f);
  row[0] = 1.0f;
  row[1] = 2.0f;
  row[2] = 3.0f;
  write_raw(dir / "one.ply", reference_header(1), row);
  const GaussianCloud c = load_ply(dir / "one.ply");
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c.position(0), (std::array<float, 3>{1, 2, 3}));
  EXPECT_EQ(c.rest_count, 45u);
}

TEST(GaussianStore, TruncatedBody) {
  testutil::TempDir dir("ply2");
  std::ofstream(dir / "t.ply", std::ios::binary) << reference_header(1) << "1234567";
  EXPECT_EQ(kind_of([&] { load_ply(dir / "t.ply"); }), ErrorKind::TruncatedBody);
}

TEST(GaussianStore, RejectsAsciiAndBigEndian) {
  testutil::TempDir dir("ply3");
  std::ofstream(dir / "a.ply") << reference_header(0, "ascii 1.0");
  std::ofstream(dir / "b.ply") << reference_header(0, "binary_big_endian 1.0");
  EXPECT_EQ(kind_of([&] { load_ply(dir / "a.ply"); }), ErrorKind::UnsupportedEncoding);
  EXPECT_EQ(kind_of([&] { load_ply(dir / "b.ply"); }), ErrorKind::UnsupportedEncoding);
}

TEST(GaussianStore, MissingPropertyIsMalformed) {
  testutil::TempDir dir("ply4");
  std::string h = reference_header(0);
  h.erase(h.find("property float opacity\n"), 23);
  std::ofstream(dir / "m.ply") << h;
  EXPECT_EQ(kind_of([&] { load_ply(dir / "m.ply"); }), ErrorKind::MalformedHeader);
  std::ofstream(dir / "nomagic.ply") << "plx\n";
  EXPECT_EQ(kind_of([&] { load_ply(dir / "nomagic.ply"); }), ErrorKind::MalformedHeader);
}

TEST(GaussianStore, RejectsNonFinite) {
  testutil::TempDir dir("ply5");
  std::vector<float> row(62, 0.0f);
  row[10] = std::numeric_limits<float>::quiet_NaN();
  write_raw(dir / "nan.ply", reference_header(1), row);
  EXPECT_EQ(kind_of([&] { load_ply(dir / "nan.ply"); }), ErrorKind::NonFiniteValue);
  row[10] = std::numeric_limits<float>::infinity();
  write_raw(dir / "inf.ply", reference_header(1), row);
  EXPECT_EQ(kind_of([&] { load_ply(dir / "inf.ply"); }), ErrorKind::NonFiniteValue);
}

TEST(GaussianStore, EmptyCloudRoundTrip) {
  testutil::TempDir dir("ply6");
  GaussianCloud c;
  const std::size_t bytes = save_ply(c, dir / "e.ply");
  EXPECT_EQ(bytes, ply_header_text(c).size());
  EXPECT_EQ(std::filesystem::file_size(dir / "e.ply"), bytes);
  EXPECT_EQ(load_ply(dir / "e.ply"), c);
}

TEST(GaussianStore, RoundTripIsBitIdentical) {
  std::mt19937_64 rng(11);
  testutil::TempDir dir("ply7");
  const GaussianCloud c = testutil::random_cloud(rng, 1000, 3.0);
  save_ply(c, dir / "r.ply");
  const GaussianCloud back = load_ply(dir / "r.ply");
  ASSERT_EQ(back.size(), c.size());
  // Byte comparison so that -0.0 vs 0.0 would also be caught.
  EXPECT_EQ(std::memcmp(back.positions.data(), c.positions.data(), c.positions.size() * 4), 0);
  EXPECT_EQ(std::memcmp(back.f_rest.data(), c.f_rest.data(), c.f_rest.size() * 4), 0);
  EXPECT_EQ(back, c);
}

TEST(GaussianStore, StrideIs62FloatsWithNormals) {
  GaussianCloud c;
  EXPECT_EQ(c.floats_per_vertex(), 62u);
  EXPECT_EQ(c.stride_bytes(), 248u);
  // 198,000 Gaussians -> 198000 * 248 body bytes.
  c.resize(198000);
  testutil::TempDir dir("ply8");
  const std::size_t bytes = save_ply(c, dir / "big.ply");
  EXPECT_EQ(bytes - ply_header_text(c).size(), 198000u * 248u);
}

TEST(GaussianStore, SavedSizeTracksGaussianCount) {
  std::mt19937_64 rng(3);
  testutil::TempDir dir("ply9");
  const GaussianCloud c = testutil::random_cloud(rng, 52571);
  KeepVector keep(c.size(), 0);
  for (std::size_t i = 0; i < keep.size(); i += 8) keep[i] = 1;  // ~12.5%
  const double full = static_cast<double>(save_ply(c, dir / "full.ply"));
  const GaussianCloud s = subset(c, keep);
  const double part = static_cast<double>(save_ply(s, dir / "part.ply"));
  const double ratio = static_cast<double>(s.size()) / static_cast<double>(c.size());
  EXPECT_NEAR(part / full, ratio, 0.01 * ratio);
}

TEST(GaussianStore, AcceptsFewerRestCoefficients) {
  std::mt19937_64 rng(5);
  testutil::TempDir dir("ply10");
  const GaussianCloud c = testutil::random_cloud(rng, 10, 1.0, 9);
  save_ply(c, dir / "deg1.ply");
  const GaussianCloud back = load_ply(dir / "deg1.ply");
  EXPECT_EQ(back.rest_count, 9u);
  EXPECT_EQ(back, c);
}

TEST(GaussianStore, SubsetBasics) {
  std::mt19937_64 rng(1);
  const GaussianCloud c = testutil::random_cloud(rng, 3);
  EXPECT_EQ(subset(c, KeepVector{1, 1, 1}), c);
  EXPECT_EQ(subset(c, KeepVector{0, 0, 0}).size(), 0u);
  const GaussianCloud s = subset(c, KeepVector{1, 0, 1});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s.position(0), c.position(0));
  EXPECT_EQ(s.position(1), c.position(2));
  EXPECT_EQ(kind_of([&] { subset(c, KeepVector{1, 0}); }), ErrorKind::LengthMismatch);
}

TEST(GaussianStore, SubsetComposes) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const GaussianCloud c = testutil::random_cloud(rng, 200);
    std::bernoulli_distribution coin(0.6);
    KeepVector k1(c.size());
    for (auto& v : k1) v = coin(rng);
    const GaussianCloud once = subset(c, k1);
    KeepVector k2(once.size());
    for (auto& v : k2) v = coin(rng);
    // Expand k2 back onto the original index space.
    KeepVector both(c.size(), 0);
    for (std::size_t i = 0, j = 0; i < c.size(); ++i) {
      if (k1[i]) both[i] = k2[j++];
    }
    EXPECT_EQ(subset(once, k2), subset(c, both));
  }
}
