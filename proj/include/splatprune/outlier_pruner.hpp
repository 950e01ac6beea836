#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "splatprune/error.hpp"
#include "splatprune/gaussian_store.hpp"
#include "splatprune/parallel.hpp"

namespace splatprune {

inline constexpr std::size_t kNoExclusion = std::numeric_limits<std::size_t>::max();

struct Neighbor {
  std::size_t index = 0;
  double distance = 0.0;
  friend bool operator==(const Neighbor&, const Neighbor&) = default;
};

/// Squared Euclidean distance between float positions, evaluated in double.
inline double squared_distance(const float* a, const std::array<double, 3>& b) {
  const double dx = static_cast<double>(a[0]) - b[0];
  const double dy = static_cast<double>(a[1]) - b[1];
  const double dz = static_cast<double>(a[2]) - b[2];
  return dx * dx + dy * dy + dz * dz;
}

/// Exact k-nearest-neighbour index over 3-D points (k-d tree, median split
/// on the widest axis). Results are ordered by (distance, index), so ties
/// resolve to the lower index and every query has a unique answer.
class NeighborIndex {
 public:
  /// `positions` holds x y z per point and must outlive the index.
  explicit NeighborIndex(std::span<const float> positions, std::size_t leaf_size = 12)
      : points_(positions), leaf_size_(std::max<std::size_t>(1, leaf_size)) {
    if (points_.size() % 3 != 0) throw Error(ErrorKind::LengthMismatch, "positions must hold 3 floats per point");
    order_.resize(points_.size() / 3);
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!order_.empty()) build(0, order_.size());
  }

  std::size_t size() const noexcept { return order_.size(); }

  std::array<double, 3> point(std::size_t i) const {
    return {points_[3 * i], points_[3 * i + 1], points_[3 * i + 2]};
  }

  /// The k nearest points to `query`, skipping index `exclude`. Returns
  /// min(k, available) neighbours sorted by non-decreasing distance.
  std::vector<Neighbor> query(const std::array<double, 3>& query, std::size_t k,
                              std::size_t exclude = kNoExclusion) const {
    std::vector<std::pair<double, std::size_t>> heap;  // max-heap on (d2, index)
    heap.reserve(k + 1);
    if (k > 0 && !nodes_.empty()) search(0, query, k, exclude, heap);
    std::sort_heap(heap.begin(), heap.end());
    std::vector<Neighbor> out;
    out.reserve(heap.size());
    for (const auto& [d2, idx] : heap) out.push_back({idx, std::sqrt(d2)});
    return out;
  }

  /// Neighbours of stored point i, excluding i itself.
  std::vector<Neighbor> query_index(std::size_t i, std::size_t k) const { return query(point(i), k, i); }

 private:
  struct Node {
    std::size_t begin = 0, end = 0;
    int axis = -1;  // -1 marks a leaf
    double split = 0.0;
    std::size_t left = 0, right = 0;
  };

  std::size_t build(std::size_t begin, std::size_t end) {
    const std::size_t id = nodes_.size();
    nodes_.push_back({begin, end});
    if (end - begin <= leaf_size_) return id;

    std::array<double, 3> lo{}, hi{};
    lo.fill(std::numeric_limits<double>::infinity());
    hi.fill(-std::numeric_limits<double>::infinity());
    for (std::size_t i = begin; i < end; ++i) {
      for (int a = 0; a < 3; ++a) {
        const double v = points_[3 * order_[i] + a];
        lo[a] = std::min(lo[a], v);
        hi[a] = std::max(hi[a], v);
      }
    }
    int axis = 0;
    for (int a = 1; a < 3; ++a) {
      if (hi[a] - lo[a] > hi[axis] - lo[axis]) axis = a;
    }
    if (hi[axis] - lo[axis] <= 0.0) return id;  // all coincident; keep as leaf

    const std::size_t mid = begin + (end - begin) / 2;
    auto coord = [&](std::size_t idx) { return points_[3 * idx + axis]; };
    std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(mid),
                     order_.begin() + static_cast<std::ptrdiff_t>(end),
                     [&](std::size_t a, std::size_t b) { return coord(a) < coord(b); });
    const double split = coord(order_[mid]);
    const std::size_t left = build(begin, mid);
    const std::size_t right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  // Left child holds coordinates <= split, right child >= split.
  void search(std::size_t node_id, const std::array<double, 3>& q, std::size_t k, std::size_t exclude,
              std::vector<std::pair<double, std::size_t>>& heap) const {
    const Node& node = nodes_[node_id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const std::size_t idx = order_[i];
        if (idx == exclude) continue;
        const std::pair<double, std::size_t> cand{squared_distance(&points_[3 * idx], q), idx};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end());
        } else if (cand < heap.front()) {
          std::pop_heap(heap.begin(), heap.end());
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end());
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const std::size_t near = diff <= 0.0 ? node.left : node.right;
    const std::size_t far = diff <= 0.0 ? node.right : node.left;
    search(near, q, k, exclude, heap);
    // Visit the far side unless it is strictly farther than the current
    // worst; an equal distance may still win on index.
    if (heap.size() < k || diff * diff <= heap.front().first) search(far, q, k, exclude, heap);
  }

  std::span<const float> points_;
  std::size_t leaf_size_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

/// Linear-interpolation percentile: rank r = p/100 * (n - 1) on the sorted
/// values, interpolated between floor(r) and ceil(r).
inline double percentile(std::span<const double> values, double p) {
  if (values.empty()) throw Error(ErrorKind::EmptyInput, "percentile of an empty vector");
  if (!(p >= 0.0 && p <= 100.0)) throw Error(ErrorKind::InvalidArgument, "percentile must lie in [0, 100]");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = static_cast<std::size_t>(std::ceil(rank));
  return sorted[lo] + (rank - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Flags values strictly above the p-th percentile.
inline KeepVector above_percentile(std::span<const double> values, double p) {
  const double threshold = percentile(values, p);
  KeepVector remove(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) remove[i] = values[i] > threshold ? 1 : 0;
  return remove;
}

/// Distance of each point to the centroid of all points.
inline std::vector<double> centroid_distances(std::span<const float> positions) {
  const std::size_t n = positions.size() / 3;
  std::array<double, 3> c{0.0, 0.0, 0.0};
  for (std::size_t i = 0; i < n; ++i)
    for (int a = 0; a < 3; ++a) c[a] += positions[3 * i + a];
  for (auto& v : c) v /= static_cast<double>(n);
  std::vector<double> d(n);
  for (std::size_t i = 0; i < n; ++i) d[i] = std::sqrt(squared_distance(&positions[3 * i], c));
  return d;
}

/// Removal flags for points farther from the centroid than the p-th
/// percentile of those distances.
inline KeepVector spatial_outliers(std::span<const float> positions, double p_spatial) {
  if (positions.size() % 3 != 0) throw Error(ErrorKind::LengthMismatch, "positions must hold 3 floats per point");
  if (positions.size() / 3 < 2) throw Error(ErrorKind::DegenerateSelection, "spatial outlier removal needs at least 2 points");
  const auto d = centroid_distances(positions);
  return above_percentile(d, p_spatial);
}

/// Mean distance of each point to its k nearest neighbours (self excluded).
inline std::vector<double> mean_neighbor_distances(std::span<const float> positions, std::size_t k,
                                                   std::size_t workers = 1) {
  const std::size_t n = positions.size() / 3;
  if (k == 0) throw Error(ErrorKind::InvalidArgument, "k must be positive");
  if (n <= k) {
    throw Error(ErrorKind::TooFewPoints,
                std::to_string(n) + " points cannot supply " + std::to_string(k) + " neighbours each");
  }
  const NeighborIndex index(positions);
  std::vector<double> mean(n);
  parallel_chunks(n, workers, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      double sum = 0.0;
      for (const auto& nb : index.query_index(i, k)) sum += nb.distance;
      mean[i] = sum / static_cast<double>(k);
    }
  });
  return mean;
}

inline KeepVector neighbor_outliers(std::span<const float> positions, std::size_t k, double p_neighbor,
                                    std::size_t workers = 1) {
  if (positions.size() % 3 != 0) throw Error(ErrorKind::LengthMismatch, "positions must hold 3 floats per point");
  const auto d = mean_neighbor_distances(positions, k, workers);
  return above_percentile(d, p_neighbor);
}

struct OutlierParams {
  std::size_t k = 10;
  double p_spatial = 99.0;
  double p_neighbor = 95.0;
};

/// Union of the spatial and neighbour removals, both computed on the same input.
inline KeepVector combined_outliers(std::span<const float> positions, const OutlierParams& params,
                                    std::size_t workers = 1) {
  KeepVector remove = spatial_outliers(positions, params.p_spatial);
  const KeepVector nb = neighbor_outliers(positions, params.k, params.p_neighbor, workers);
  for (std::size_t i = 0; i < remove.size(); ++i) remove[i] = static_cast<std::uint8_t>(remove[i] | nb[i]);
  return remove;
}

/// Positions of the kept rows (x y z interleaved) and their original indices.
inline std::pair<std::vector<float>, std::vector<std::size_t>> gather_kept(const GaussianCloud& cloud,
                                                                           std::span<const std::uint8_t> keep) {
  if (keep.size() != cloud.size()) throw Error(ErrorKind::LengthMismatch, "keep vector does not match cloud");
  std::vector<float> positions;
  std::vector<std::size_t> indices;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    if (!keep[i]) continue;
    indices.push_back(i);
    positions.insert(positions.end(), cloud.positions.begin() + 3 * static_cast<std::ptrdiff_t>(i),
                     cloud.positions.begin() + 3 * static_cast<std::ptrdiff_t>(i) + 3);
  }
  return {std::move(positions), std::move(indices)};
}

}  // namespace splatprune
