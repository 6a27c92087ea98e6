#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <numeric>
#include <queue>
#include <stdexcept>
#include <vector>

namespace hypermatch {

/// Exact k-nearest-neighbour index over low-dimensional points.
///
/// Neighbours are ordered by (squared distance, point index), so equal
/// distances break toward the smaller index and query results coincide with
/// a linear scan exactly, independent of tree layout.
template <int Dim>
class KdTree {
  static_assert(Dim >= 1);

 public:
  using Point = std::array<double, Dim>;

  explicit KdTree(std::vector<Point> points) : points_(std::move(points)), perm_(points_.size()) {
    std::iota(perm_.begin(), perm_.end(), 0);
    build(0, static_cast<int>(perm_.size()), 0);
  }

  int size() const { return static_cast<int>(points_.size()); }

  /// Indices of the k nearest points, ascending by (distance, index).
  std::vector<int> query(const Point& q, int k) const {
    if (k < 1) throw std::invalid_argument("KdTree::query: k must be >= 1");
    Heap heap;
    search(0, static_cast<int>(perm_.size()), 0, q, static_cast<std::size_t>(k), heap);
    std::vector<int> out(heap.size());
    for (std::size_t i = heap.size(); i-- > 0;) {
      out[i] = heap.top().idx;
      heap.pop();
    }
    return out;
  }

 private:
  struct Neighbor {
    double d2;
    int idx;
    bool operator<(const Neighbor& o) const { return d2 != o.d2 ? d2 < o.d2 : idx < o.idx; }
  };
  using Heap = std::priority_queue<Neighbor>;  // worst accepted neighbour on top

  static constexpr int kLeafSize = 16;

  double dist2(const Point& a, const Point& b) const {
    double s = 0.0;
    for (int d = 0; d < Dim; ++d) {
      const double diff = a[d] - b[d];
      s += diff * diff;
    }
    return s;
  }

  void build(int lo, int hi, int depth) {
    if (hi - lo <= kLeafSize) return;
    const int mid = (lo + hi) / 2;
    const int axis = depth % Dim;
    std::nth_element(perm_.begin() + lo, perm_.begin() + mid, perm_.begin() + hi,
                     [&](int a, int b) {
                       if (points_[a][axis] != points_[b][axis]) return points_[a][axis] < points_[b][axis];
                       return a < b;
                     });
    build(lo, mid, depth + 1);
    build(mid + 1, hi, depth + 1);
  }

  void offer(const Point& q, int idx, std::size_t k, Heap& heap) const {
    const Neighbor cand{dist2(points_[idx], q), idx};
    if (heap.size() < k) {
      heap.push(cand);
    } else if (cand < heap.top()) {
      heap.pop();
      heap.push(cand);
    }
  }

  void search(int lo, int hi, int depth, const Point& q, std::size_t k, Heap& heap) const {
    if (hi <= lo) return;
    if (hi - lo <= kLeafSize) {
      for (int i = lo; i < hi; ++i) offer(q, perm_[i], k, heap);
      return;
    }
    const int mid = (lo + hi) / 2;
    const int axis = depth % Dim;
    offer(q, perm_[mid], k, heap);
    const double split = points_[perm_[mid]][axis];
    const bool left_first = q[axis] <= split;
    const double plane_d2 = (q[axis] - split) * (q[axis] - split);

    if (left_first) search(lo, mid, depth + 1, q, k, heap);
    else search(mid + 1, hi, depth + 1, q, k, heap);

    // the far side may still hold a tie with a smaller index, hence <=
    if (heap.size() < k || plane_d2 <= heap.top().d2) {
      if (left_first) search(mid + 1, hi, depth + 1, q, k, heap);
      else search(lo, mid, depth + 1, q, k, heap);
    }
  }

  std::vector<Point> points_;
  std::vector<int> perm_;
};

}  // namespace hypermatch
