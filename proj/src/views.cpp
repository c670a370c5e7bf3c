#include "esmine/views.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace esm {

double DensityGrid::mass() const {
  double s = 0.0;
  for (double v : values) s += v;
  return s * cell_area();
}

DensityGrid density_grid(std::span<const Eigen::VectorXd> points, std::size_t nx, std::size_t ny,
                         double pad) {
  if (points.size() < 2) throw DataError("density grid needs at least two points");
  if (nx == 0 || ny == 0) throw DataError("density grid needs a nonempty grid");
  const double n = static_cast<double>(points.size());
  double mx = 0, my = 0;
  for (const auto& p : points) {
    mx += p(0);
    my += p(1);
  }
  mx /= n;
  my /= n;
  double vx = 0, vy = 0;
  double lox = points[0](0), hix = lox, loy = points[0](1), hiy = loy;
  for (const auto& p : points) {
    vx += (p(0) - mx) * (p(0) - mx);
    vy += (p(1) - my) * (p(1) - my);
    lox = std::min(lox, p(0));
    hix = std::max(hix, p(0));
    loy = std::min(loy, p(1));
    hiy = std::max(hiy, p(1));
  }
  const double scott = std::pow(n, -1.0 / 6.0);
  DensityGrid g;
  g.nx = nx;
  g.ny = ny;
  g.bandwidth_x = std::sqrt(vx / (n - 1)) * scott;
  g.bandwidth_y = std::sqrt(vy / (n - 1)) * scott;
  if (!(g.bandwidth_x > 0) || !(g.bandwidth_y > 0)) throw DataError("density grid needs spread on both axes");
  g.x0 = lox - pad * g.bandwidth_x;
  g.x1 = hix + pad * g.bandwidth_x;
  g.y0 = loy - pad * g.bandwidth_y;
  g.y1 = hiy + pad * g.bandwidth_y;

  // Separable kernel: precompute the 1-d factors per point and grid line.
  const double dx = (g.x1 - g.x0) / nx, dy = (g.y1 - g.y0) / ny;
  const double norm = 1.0 / (2.0 * std::numbers::pi * g.bandwidth_x * g.bandwidth_y * n);
  std::vector<double> kx(points.size() * nx), ky(points.size() * ny);
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (std::size_t c = 0; c < nx; ++c) {
      const double u = (g.x0 + (c + 0.5) * dx - points[i](0)) / g.bandwidth_x;
      kx[i * nx + c] = std::exp(-0.5 * u * u);
    }
    for (std::size_t r = 0; r < ny; ++r) {
      const double u = (g.y0 + (r + 0.5) * dy - points[i](1)) / g.bandwidth_y;
      ky[i * ny + r] = std::exp(-0.5 * u * u);
    }
  }
  g.values.assign(nx * ny, 0.0);
  for (std::size_t i = 0; i < points.size(); ++i)
    for (std::size_t r = 0; r < ny; ++r) {
      const double b = ky[i * ny + r];
      if (b < 1e-300) continue;
      for (std::size_t c = 0; c < nx; ++c) g.values[r * nx + c] += b * kx[i * nx + c];
    }
  for (double& v : g.values) v *= norm;
  return g;
}

std::vector<ScentedBar> scented_bars(std::span<const Point> points, std::span<const double> target,
                                     double target_lo, double target_hi, std::size_t bins) {
  if (bins == 0) throw DataError("scented bars need at least one bin");
  if (points.size() != target.size()) throw DataError("scented bars: one target value per point");
  if (points.empty()) return {};
  const std::size_t d = points.front().size();
  std::vector<ScentedBar> out;
  for (std::size_t a = 0; a < d; ++a) {
    ScentedBar bar;
    bar.variable = a;
    for (std::size_t b = 0; b <= bins; ++b) bar.edges.push_back(static_cast<double>(b) / bins);
    std::vector<double> count(bins, 0.0), sum(bins, 0.0);
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto b = std::min(bins - 1, static_cast<std::size_t>(std::clamp(points[i][a], 0.0, 1.0) * bins));
      count[b] += 1.0;
      sum[b] += target[i];
    }
    for (std::size_t b = 0; b < bins; ++b) {
      bar.density.push_back(count[b] / points.size());
      if (count[b] == 0.0) {
        bar.target_mean.emplace_back();
        bar.target_color.emplace_back();
        continue;
      }
      const double m = sum[b] / count[b];
      bar.target_mean.emplace_back(m);
      const double span = target_hi - target_lo;
      bar.target_color.emplace_back(span > 0 ? std::clamp((m - target_lo) / span, 0.0, 1.0) : 0.5);
    }
    out.push_back(std::move(bar));
  }
  return out;
}

}  // namespace esm
