#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "splatprune/outlier_pruner.hpp"
#include "support/oracles.hpp"

using namespace splatprune;

namespace {

std::vector<float> random_positions(std::mt19937_64& rng, std::size_t n, float extent = 1.0f) {
  std::uniform_real_distribution<float> u(-extent, extent);
  std::vector<float> p(3 * n);
  for (auto& v : p) v = u(rng);
  return p;
}

std::vector<float> cluster_with_floaters(std::mt19937_64& rng, std::size_t cluster, std::size_t floaters) {
  std::vector<float> p;
  std::normal_distribution<float> g(0, 0.3f);
  for (std::size_t i = 0; i < cluster; ++i) {
    Eigen::Vector3f x(g(rng), g(rng), g(rng));
    if (x.norm() > 1.0f) x.normalize();
    p.insert(p.end(), {x.x(), x.y(), x.z()});
  }
  // Spread along a circle at 50x the cluster radius, far from each other too.
  for (std::size_t f = 0; f < floaters; ++f) {
    const double a = 2.0 * M_PI * static_cast<double>(f) / static_cast<double>(floaters);
    p.insert(p.end(), {static_cast<float>(50 * std::cos(a)), static_cast<float>(50 * std::sin(a)), 0.0f});
  }
  return p;
}

std::size_t count(const KeepVector& v) { return count_kept(v); }

}  // namespace

TEST(Outlier, PercentileExamples) {
  EXPECT_DOUBLE_EQ(percentile(std::vector<double>{0, 10}, 50), 5.0);
  EXPECT_DOUBLE_EQ(percentile(std::vector<double>{3, -1, 7, 2}, 100), 7.0);
  EXPECT_DOUBLE_EQ(percentile(std::vector<double>{3, -1, 7, 2}, 0), -1.0);
  EXPECT_NEAR(percentile(std::vector<double>{1, 2, 3, 4, 5}, 95), 4.8, 1e-12);
  EXPECT_DOUBLE_EQ(percentile(std::vector<double>{4.5}, 37), 4.5);
}

TEST(Outlier, PercentileMatchesRankWalkOracle) {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(-100, 100);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> v(1 + rng() % 200);
    for (auto& x : v) x = u(rng);
    const double p = std::uniform_real_distribution<double>(0, 100)(rng);
    EXPECT_NEAR(percentile(v, p), oracle::percentile_linear(v, p), 1e-9);
  }
}

TEST(Outlier, PercentileErrors) {
  try {
    percentile(std::vector<double>{}, 50);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::EmptyInput);
  }
  EXPECT_THROW(percentile(std::vector<double>{1}, 101), Error);
  EXPECT_THROW(percentile(std::vector<double>{1}, std::nan("")), Error);
}

TEST(Outlier, KnnEqualsBruteForce) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t n = 1 + rng() % 1500;
    auto pts = random_positions(rng, n);
    if (trial % 3 == 0) {
      // Duplicates and a coarse lattice force distance ties.
      for (auto& v : pts) v = std::round(v * 4.0f) / 4.0f;
    }
    const std::size_t k = 1 + rng() % 16;
    const NeighborIndex index(pts, 1 + rng() % 20);
    for (std::size_t i = 0; i < n; ++i) {
      const auto got = index.query_index(i, k);
      const auto ref = oracle::brute_knn(pts, i, k);
      ASSERT_EQ(got.size(), ref.size());
      for (std::size_t j = 0; j < ref.size(); ++j) {
        ASSERT_EQ(got[j].index, ref[j].first) << "trial " << trial << " point " << i;
        ASSERT_NEAR(got[j].distance, ref[j].second, 1e-9);
      }
    }
  }
}

TEST(Outlier, KnnOfCoincidentPoints) {
  const std::vector<float> pts(3 * 40, 0.25f);
  const NeighborIndex index(pts, 4);
  const auto nb = index.query_index(7, 5);
  ASSERT_EQ(nb.size(), 5u);
  EXPECT_EQ(nb[0].index, 0u);
  EXPECT_EQ(nb[4].index, 4u);
  EXPECT_EQ(nb[4].distance, 0.0);
}

TEST(Outlier, SpatialIdenticalPointsRemovesNothing) {
  const std::vector<float> pts(3 * 20, 1.5f);
  const auto d = centroid_distances(pts);
  for (double v : d) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(percentile(d, 99), 0.0);
  EXPECT_EQ(count(spatial_outliers(pts, 99)), 0u);
}

TEST(Outlier, SpatialRemovesTheFarPoint) {
  std::mt19937_64 rng(5);
  std::normal_distribution<float> g(0, 1);
  std::vector<float> pts;
  for (int i = 0; i < 99; ++i) {
    Eigen::Vector3f x(g(rng), g(rng), g(rng));
    x.normalize();
    pts.insert(pts.end(), {x.x(), x.y(), x.z()});
  }
  pts.insert(pts.end(), {100.0f, 0.0f, 0.0f});
  const auto removed = spatial_outliers(pts, 99);
  EXPECT_EQ(count(removed), 1u);
  EXPECT_EQ(removed[99], 1);
  // Threshold by the rank-walk oracle lies between the sphere and the far point.
  const double thr = oracle::percentile_linear(centroid_distances(pts), 99);
  EXPECT_GT(thr, 1.5);
  EXPECT_LT(thr, 90.0);
}

TEST(Outlier, SpatialRemovalFractionBounded) {
  std::mt19937_64 rng(6);
  const auto pts = random_positions(rng, 5000);
  const std::size_t removed = count(spatial_outliers(pts, 99));
  EXPECT_GT(removed, 0u);
  EXPECT_LE(removed, 50u);
}

TEST(Outlier, NeighborRemovesIsolatedFloaters) {
  std::mt19937_64 rng(12);
  // 95 cluster points + 5 floaters: threshold falls between the groups.
  {
    const auto pts = cluster_with_floaters(rng, 95, 5);
    const auto removed = neighbor_outliers(pts, 10, 95);
    for (std::size_t i = 95; i < 100; ++i) EXPECT_EQ(removed[i], 1);
    EXPECT_EQ(count(removed), 5u);
  }
  // 100 cluster points + 5 floaters: rank 0.95 * 104 = 98.8 lands between the
  // two largest cluster values, so the single most isolated cluster point goes too.
  {
    const auto pts = cluster_with_floaters(rng, 100, 5);
    const auto removed = neighbor_outliers(pts, 10, 95);
    for (std::size_t i = 100; i < 105; ++i) EXPECT_EQ(removed[i], 1);
    const auto d = oracle::brute_mean_knn(pts, 10);
    const std::size_t worst_cluster =
        static_cast<std::size_t>(std::max_element(d.begin(), d.begin() + 100) - d.begin());
    EXPECT_EQ(count(removed), 6u);
    EXPECT_EQ(removed[worst_cluster], 1);
  }
}

TEST(Outlier, MeanNeighborDistancesMatchBruteForce) {
  std::mt19937_64 rng(13);
  const auto pts = random_positions(rng, 800);
  const auto got = mean_neighbor_distances(pts, 10, 3);
  const auto ref = oracle::brute_mean_knn(pts, 10);
  for (std::size_t i = 0; i < ref.size(); ++i) ASSERT_NEAR(got[i], ref[i], 1e-9);
}

TEST(Outlier, GridRemovalConfinedToBoundary) {
  std::vector<float> pts;
  const int side = 10;
  for (int x = 0; x < side; ++x)
    for (int y = 0; y < side; ++y)
      for (int z = 0; z < side; ++z) pts.insert(pts.end(), {float(x), float(y), float(z)});
  const auto d = mean_neighbor_distances(pts, 10);
  const double interior = (6.0 + 4.0 * std::sqrt(2.0)) / 10.0;
  const auto removed = neighbor_outliers(pts, 10, 95);
  std::size_t i = 0;
  for (int x = 0; x < side; ++x) {
    for (int y = 0; y < side; ++y) {
      for (int z = 0; z < side; ++z, ++i) {
        const bool inner = x > 0 && y > 0 && z > 0 && x < side - 1 && y < side - 1 && z < side - 1;
        if (inner) {
          EXPECT_NEAR(d[i], interior, 1e-12);
          EXPECT_EQ(removed[i], 0);
        }
      }
    }
  }
  EXPECT_LE(count(removed), pts.size() / 3 * 5 / 100);
}

TEST(Outlier, ErrorKinds) {
  const std::vector<float> ten(30, 0.0f);
  try {
    neighbor_outliers(ten, 10, 95);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::TooFewPoints);
  }
  try {
    spatial_outliers(std::vector<float>{1, 2, 3}, 99);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::DegenerateSelection);
  }
}

TEST(Outlier, CombinedIsUnionOfConstituents) {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto pts = random_positions(rng, 500);
    for (int f = 0; f < 10; ++f) pts.insert(pts.end(), {3.0f + f, -4.0f, 2.0f * f});
    const OutlierParams params;
    const auto s = spatial_outliers(pts, params.p_spatial);
    const auto nb = neighbor_outliers(pts, params.k, params.p_neighbor);
    const auto c = combined_outliers(pts, params, 2);
    std::size_t both = 0;
    for (std::size_t i = 0; i < c.size(); ++i) {
      EXPECT_GE(c[i], s[i]);
      EXPECT_GE(c[i], nb[i]);
      EXPECT_EQ(c[i], s[i] | nb[i]);
      both += s[i] & nb[i];
    }
    EXPECT_EQ(count(c), count(s) + count(nb) - both);
  }
  const std::vector<float> same(3 * 30, 2.0f);
  EXPECT_EQ(count(combined_outliers(same, OutlierParams{})), 0u);
}

TEST(Outlier, InvariantUnderExactRigidMotion) {
  std::mt19937_64 rng(22);
  auto pts = random_positions(rng, 600);
  for (auto& v : pts) v = std::round(v * 1024.0f) / 1024.0f;
  // Signed axis permutation plus a dyadic shift: every coordinate stays exact.
  std::vector<float> moved(pts.size());
  for (std::size_t i = 0; i < pts.size() / 3; ++i) {
    moved[3 * i] = -pts[3 * i + 2] + 8.0f;
    moved[3 * i + 1] = pts[3 * i] - 4.0f;
    moved[3 * i + 2] = -pts[3 * i + 1] + 0.5f;
  }
  EXPECT_EQ(spatial_outliers(pts, 99), spatial_outliers(moved, 99));
  EXPECT_EQ(neighbor_outliers(pts, 10, 95), neighbor_outliers(moved, 10, 95));
}

TEST(Outlier, GatherKept) {
  GaussianCloud c;
  c.resize(3);
  for (std::size_t i = 0; i < 9; ++i) c.positions[i] = static_cast<float>(i);
  const auto [pos, idx] = gather_kept(c, KeepVector{1, 0, 1});
  EXPECT_EQ(pos, (std::vector<float>{0, 1, 2, 6, 7, 8}));
  EXPECT_EQ(idx, (std::vector<std::size_t>{0, 2}));
}
