#pragma once

// Numeric summaries behind the console panels: a kernel-density grid over
// the 2-d overview projection and per-axis scented bars.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "esmine/core.hpp"

namespace esm {

struct DensityGrid {
  std::size_t nx = 0;
  std::size_t ny = 0;
  double x0 = 0.0, x1 = 0.0;  // grid extent
  double y0 = 0.0, y1 = 0.0;
  double bandwidth_x = 0.0;
  double bandwidth_y = 0.0;
  std::vector<double> values;  // row-major, ny rows of nx cell-centre densities

  double cell_area() const { return (x1 - x0) / nx * (y1 - y0) / ny; }
  /// Sum of values times cell area; close to 1 when the grid covers the mass.
  double mass() const;
};

/// Product-Gaussian KDE with Scott's-rule bandwidths (sd * n^(-1/6)).
/// The grid spans the data padded by `pad` bandwidths on each side.
/// Needs at least two points with spread on both axes.
DensityGrid density_grid(std::span<const Eigen::VectorXd> points, std::size_t nx, std::size_t ny,
                         double pad = 4.0);

struct ScentedBar {
  std::size_t variable = 0;
  std::vector<double> edges;     // bins + 1, on [0,1]
  std::vector<double> density;   // share of rows per bin
  std::vector<std::optional<double>> target_mean;  // raw units; empty bins unset
  std::vector<std::optional<double>> target_color;  // target_mean mapped to [0,1]
};

/// Per input axis: binned row share and binned mean of one target,
/// over the given normalized points and their target values.
std::vector<ScentedBar> scented_bars(std::span<const Point> points, std::span<const double> target,
                                     double target_lo, double target_hi, std::size_t bins = 10);

}  // namespace esm
