#pragma once

// Independent reference computations used only by tests. Nothing here calls
// into the code paths it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace oracle {

/// Exhaustive k-NN: sort every (squared distance, id) pair, drop points
/// closer than 1e-12, keep the first k.
inline std::vector<std::pair<double, std::size_t>> knn(const std::vector<std::vector<double>>& pts,
                                                       const std::vector<double>& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> all;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double s = 0.0;
    for (std::size_t a = 0; a < q.size(); ++a) {
      const double t = q[a] - pts[i][a];
      s += t * t;
    }
    if (s < 1e-24) continue;
    all.emplace_back(s, i);
  }
  std::sort(all.begin(), all.end());
  if (all.size() > k) all.resize(k);
  return all;
}

/// Area of the convex hull (Andrew's monotone chain + shoelace).
inline double hull_area(std::vector<std::array<double, 2>> p) {
  if (p.size() < 3) return 0.0;
  std::sort(p.begin(), p.end());
  auto cross = [](const auto& o, const auto& a, const auto& b) {
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
  };
  std::vector<std::array<double, 2>> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i > 0; --i) {
    while (k >= t && cross(h[k - 2], h[k - 1], p[i - 1]) <= 0) --k;
    h[k++] = p[i - 1];
  }
  h.resize(k - 1);
  double a = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto& u = h[i];
    const auto& v = h[(i + 1) % h.size()];
    a += u[0] * v[1] - v[0] * u[1];
  }
  return std::abs(a) / 2.0;
}

/// Dominated area by counting cell centers on an n x n grid over [0,1]^2.
/// Points are already oriented (larger is better) and normalized.
inline double grid_area(const std::vector<std::array<double, 2>>& pts, std::size_t n = 1000) {
  std::size_t hit = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = (static_cast<double>(i) + 0.5) / static_cast<double>(n);
    // Tallest point covering this column.
    double top = 0.0;
    for (const auto& p : pts)
      if (p[0] >= x) top = std::max(top, p[1]);
    for (std::size_t j = 0; j < n; ++j) {
      const double y = (static_cast<double>(j) + 0.5) / static_cast<double>(n);
      if (y <= top) ++hit;
    }
  }
  return static_cast<double>(hit) / static_cast<double>(n * n);
}

/// O(N^2) pairwise dominance for maximize-both points.
inline std::vector<std::size_t> nondominated(const std::vector<std::array<double, 2>>& pts) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    bool dominated = false;
    for (std::size_t j = 0; j < pts.size() && !dominated; ++j) {
      if (j == i) continue;
      const bool ge = pts[j][0] >= pts[i][0] && pts[j][1] >= pts[i][1];
      const bool gt = pts[j][0] > pts[i][0] || pts[j][1] > pts[i][1];
      if (ge && gt) dominated = true;
      if (pts[j] == pts[i] && j < i) dominated = true;  // duplicate keeps lowest index
    }
    if (!dominated) out.push_back(i);
  }
  return out;
}

}  // namespace oracle
