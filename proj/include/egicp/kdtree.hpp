#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

#include <Eigen/Core>

namespace egicp {

struct NeighborResult {
  std::size_t index = 0;
  double sq_dist = std::numeric_limits<double>::infinity();
};

/**
 * @brief Static 3D k-d tree with exact nearest / k-nearest queries.
 *
 * Splits on the axis of largest extent at the median. Distance ties are
 * broken towards the smaller point index so results match a linear scan.
 */
class KdTree {
 public:
  KdTree() = default;

  explicit KdTree(std::vector<Eigen::Vector3d> points, int leaf_size = 8)
      : points_(std::move(points)), leaf_size_(std::max(1, leaf_size)) {
    order_.resize(points_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    if (!points_.empty()) {
      nodes_.reserve(2 * points_.size() / leaf_size_ + 1);
      build(0, points_.size());
    }
  }

  std::size_t size() const { return points_.size(); }
  bool empty() const { return points_.empty(); }
  const std::vector<Eigen::Vector3d>& points() const { return points_; }

  NeighborResult nearest(const Eigen::Vector3d& query) const {
    NeighborResult best;
    if (!nodes_.empty()) {
      search_nearest(0, query, best);
    }
    return best;
  }

  /// k nearest neighbors sorted by ascending distance (fewer if size() < k).
  std::vector<NeighborResult> knn(const Eigen::Vector3d& query, std::size_t k) const {
    std::vector<NeighborResult> heap;
    if (nodes_.empty() || k == 0) {
      return heap;
    }
    heap.reserve(k + 1);
    search_knn(0, query, k, heap);
    std::sort_heap(heap.begin(), heap.end(), less);
    return heap;
  }

 private:
  struct Node {
    // Leaf when axis < 0; [begin, end) indexes into order_.
    int axis = -1;
    double split = 0.0;
    std::uint32_t left = 0;
    std::uint32_t right = 0;
    std::size_t begin = 0;
    std::size_t end = 0;
  };

  static bool less(const NeighborResult& a, const NeighborResult& b) {
    return a.sq_dist < b.sq_dist || (a.sq_dist == b.sq_dist && a.index < b.index);
  }

  std::uint32_t build(std::size_t begin, std::size_t end) {
    const auto id = static_cast<std::uint32_t>(nodes_.size());
    nodes_.emplace_back();
    nodes_[id].begin = begin;
    nodes_[id].end = end;
    if (end - begin <= static_cast<std::size_t>(leaf_size_)) {
      return id;
    }

    Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
    Eigen::Vector3d hi = -lo;
    for (std::size_t i = begin; i < end; ++i) {
      lo = lo.cwiseMin(points_[order_[i]]);
      hi = hi.cwiseMax(points_[order_[i]]);
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);
    if (hi[axis] - lo[axis] <= 0.0) {
      return id;  // all points identical
    }

    const std::size_t mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](std::size_t a, std::size_t b) { return points_[a][axis] < points_[b][axis]; });
    const double split = points_[order_[mid]][axis];

    const auto left = build(begin, mid);
    const auto right = build(mid, end);
    nodes_[id].axis = axis;
    nodes_[id].split = split;
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
  }

  void search_nearest(std::uint32_t id, const Eigen::Vector3d& q, NeighborResult& best) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const NeighborResult cand{order_[i], (points_[order_[i]] - q).squaredNorm()};
        if (less(cand, best)) {
          best = cand;
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const auto near = diff < 0.0 ? node.left : node.right;
    const auto far = diff < 0.0 ? node.right : node.left;
    search_nearest(near, q, best);
    if (diff * diff <= best.sq_dist) {
      search_nearest(far, q, best);
    }
  }

  void search_knn(std::uint32_t id, const Eigen::Vector3d& q, std::size_t k, std::vector<NeighborResult>& heap) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
      for (std::size_t i = node.begin; i < node.end; ++i) {
        const NeighborResult cand{order_[i], (points_[order_[i]] - q).squaredNorm()};
        if (heap.size() < k) {
          heap.push_back(cand);
          std::push_heap(heap.begin(), heap.end(), less);
        } else if (less(cand, heap.front())) {
          std::pop_heap(heap.begin(), heap.end(), less);
          heap.back() = cand;
          std::push_heap(heap.begin(), heap.end(), less);
        }
      }
      return;
    }
    const double diff = q[node.axis] - node.split;
    const auto near = diff < 0.0 ? node.left : node.right;
    const auto far = diff < 0.0 ? node.right : node.left;
    search_knn(near, q, k, heap);
    if (heap.size() < k || diff * diff <= heap.front().sq_dist) {
      search_knn(far, q, k, heap);
    }
  }

  std::vector<Eigen::Vector3d> points_;
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
  int leaf_size_ = 8;
};

}  // namespace egicp
