#pragma once

// Exact Euclidean k-nearest-neighbor index over a fixed point set.
//
// The tree is immutable after construction and may be queried concurrently.
// Points closer than kCoincidentDistance to the query are skipped: the
// Lennard-Jones force diverges at r -> 0 and the direction is undefined, so
// the next neighbor takes the slot. Ties are broken by ascending point id.

#include <cstddef>
#include <span>
#include <vector>

#include "esmine/core.hpp"

namespace esm {

inline constexpr double kCoincidentDistance = 1e-12;

struct NeighborSet {
  std::vector<std::size_t> indices;
  std::vector<double> distances;            // ascending
  std::vector<Point> unit_vectors;          // query -> neighbor, norm 1
  bool empty() const { return indices.empty(); }
  std::size_t size() const { return indices.size(); }
};

class KdTree {
public:
  /// Throws DataError on an empty point set or ragged dimensions.
  explicit KdTree(std::vector<Point> points, std::size_t leaf_size = 8);

  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> point(std::size_t id) const {
    return {coords_.data() + id * dim_, dim_};
  }

  /// k nearest points to `query` (k clamped to the available count).
  NeighborSet query(std::span<const double> query, std::size_t k) const;

private:
  struct Node {
    std::size_t begin = 0;  // into order_
    std::size_t end = 0;
    std::size_t axis = 0;
    double split = 0.0;
    int left = -1;
    int right = -1;
    std::vector<double> lo;  // bounding box
    std::vector<double> hi;
  };
  struct Candidate {
    double dist2;
    std::size_t id;
    bool operator<(const Candidate& o) const {
      return dist2 < o.dist2 || (dist2 == o.dist2 && id < o.id);
    }
  };

  int build(std::size_t begin, std::size_t end);
  double box_distance2(const Node& node, std::span<const double> q) const;
  void search(int node, std::span<const double> q, std::size_t k,
              std::vector<Candidate>& heap) const;
  NeighborSet finish(std::span<const double> q, std::vector<Candidate> best) const;

  std::size_t dim_ = 0;
  std::size_t count_ = 0;
  std::size_t leaf_size_ = 8;
  std::vector<double> coords_;  // row-major, count_ x dim_
  std::vector<std::size_t> order_;
  std::vector<Node> nodes_;
};

}  // namespace esm
