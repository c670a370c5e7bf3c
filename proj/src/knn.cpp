#include "esmine/knn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace esm {

namespace {
constexpr double kCoincident2 = kCoincidentDistance * kCoincidentDistance;
}

KdTree::KdTree(std::vector<Point> points, std::size_t leaf_size)
    : leaf_size_(std::max<std::size_t>(1, leaf_size)) {
  if (points.empty()) throw DataError("cannot build a neighbor index over zero points");
  dim_ = points.front().size();
  if (dim_ == 0) throw DataError("points must have at least one coordinate");
  count_ = points.size();
  coords_.reserve(count_ * dim_);
  for (const auto& p : points) {
    if (p.size() != dim_) throw DataError("points have inconsistent dimensions");
    coords_.insert(coords_.end(), p.begin(), p.end());
  }
  order_.resize(count_);
  for (std::size_t i = 0; i < count_; ++i) order_[i] = i;
  nodes_.reserve(2 * count_ / leaf_size_ + 1);
  build(0, count_);
}

int KdTree::build(std::size_t begin, std::size_t end) {
  Node node;
  node.begin = begin;
  node.end = end;
  node.lo.assign(dim_, std::numeric_limits<double>::infinity());
  node.hi.assign(dim_, -std::numeric_limits<double>::infinity());
  for (std::size_t i = begin; i < end; ++i) {
    const auto p = point(order_[i]);
    for (std::size_t a = 0; a < dim_; ++a) {
      node.lo[a] = std::min(node.lo[a], p[a]);
      node.hi[a] = std::max(node.hi[a], p[a]);
    }
  }
  const int self = static_cast<int>(nodes_.size());
  nodes_.push_back(node);
  if (end - begin <= leaf_size_) return self;

  std::size_t axis = 0;
  double widest = -1.0;
  for (std::size_t a = 0; a < dim_; ++a) {
    if (node.hi[a] - node.lo[a] > widest) {
      widest = node.hi[a] - node.lo[a];
      axis = a;
    }
  }
  if (widest <= 0.0) return self;  // all points identical: keep as one leaf

  const std::size_t mid = begin + (end - begin) / 2;
  std::nth_element(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                   order_.begin() + static_cast<std::ptrdiff_t>(mid),
                   order_.begin() + static_cast<std::ptrdiff_t>(end),
                   [&](std::size_t a, std::size_t b) {
                     return coords_[a * dim_ + axis] < coords_[b * dim_ + axis];
                   });
  const int left = build(begin, mid);
  const int right = build(mid, end);
  nodes_[self].axis = axis;
  nodes_[self].split = coords_[order_[mid] * dim_ + axis];
  nodes_[self].left = left;
  nodes_[self].right = right;
  return self;
}

double KdTree::box_distance2(const Node& node, std::span<const double> q) const {
  double s = 0.0;
  for (std::size_t a = 0; a < dim_; ++a) {
    double t = 0.0;
    if (q[a] < node.lo[a]) t = node.lo[a] - q[a];
    else if (q[a] > node.hi[a]) t = q[a] - node.hi[a];
    s += t * t;
  }
  return s;
}

void KdTree::search(int index, std::span<const double> q, std::size_t k,
                    std::vector<Candidate>& heap) const {
  const Node& node = nodes_[static_cast<std::size_t>(index)];
  // Subtrees are pruned only when strictly farther than the current worst,
  // so an equal-distance point with a smaller id is never missed.
  if (heap.size() == k && box_distance2(node, q) > heap.front().dist2) return;

  if (node.left < 0) {
    for (std::size_t i = node.begin; i < node.end; ++i) {
      const std::size_t id = order_[i];
      const double d2 = squared_distance(q, point(id));
      if (d2 < kCoincident2) continue;
      const Candidate c{d2, id};
      if (heap.size() < k) {
        heap.push_back(c);
        std::push_heap(heap.begin(), heap.end());
      } else if (c < heap.front()) {
        std::pop_heap(heap.begin(), heap.end());
        heap.back() = c;
        std::push_heap(heap.begin(), heap.end());
      }
    }
    return;
  }
  const bool go_left_first = q[node.axis] < node.split;
  search(go_left_first ? node.left : node.right, q, k, heap);
  search(go_left_first ? node.right : node.left, q, k, heap);
}

NeighborSet KdTree::finish(std::span<const double> q, std::vector<Candidate> best) const {
  std::sort(best.begin(), best.end());
  NeighborSet out;
  out.indices.reserve(best.size());
  out.distances.reserve(best.size());
  out.unit_vectors.reserve(best.size());
  for (const auto& c : best) {
    const double r = std::sqrt(c.dist2);
    const auto p = point(c.id);
    Point u(dim_);
    for (std::size_t a = 0; a < dim_; ++a) u[a] = (p[a] - q[a]) / r;
    out.indices.push_back(c.id);
    out.distances.push_back(r);
    out.unit_vectors.push_back(std::move(u));
  }
  return out;
}

NeighborSet KdTree::query(std::span<const double> q, std::size_t k) const {
  if (q.size() != dim_) {
    throw DataError("query has " + std::to_string(q.size()) + " coordinates, index has " +
                    std::to_string(dim_));
  }
  k = std::min(k, count_);
  std::vector<Candidate> heap;
  if (k == 0) return {};
  heap.reserve(k);
  search(0, q, k, heap);
  return finish(q, std::move(heap));
}

}  // namespace esm
