#pragma once

// Linear overview projection (PCA with loading vectors) and the
// agent-centered cosine embedding used by the neighbor plot.

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esmine/core.hpp"

namespace esm {

class ProjectionError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct PcaModel {
  Eigen::VectorXd mean;                     // d
  Eigen::MatrixXd components;               // n x d, rows orthonormal
  Eigen::VectorXd explained_variance_ratio; // n, non-increasing
  Eigen::VectorXd explained_variance;       // n

  std::size_t dim() const { return static_cast<std::size_t>(components.cols()); }
  std::size_t n_components() const { return static_cast<std::size_t>(components.rows()); }
  /// Column j of the component matrix.
  Eigen::VectorXd loading_vector(std::size_t variable) const;
};

/// Mean-centered PCA via the covariance eigendecomposition. Each component
/// is signed so that its largest-magnitude entry is positive.
PcaModel fit_pca(std::span<const Point> points, std::size_t n_components);

/// M (p - mean).
Eigen::VectorXd project(const PcaModel& model, std::span<const double> p);
std::vector<Eigen::VectorXd> project_all(const PcaModel& model, std::span<const Point> points);

/// Inverse map from component space (exact when all d components are kept).
Point reconstruct(const PcaModel& model, const Eigen::VectorXd& coords);

/// Displacement of a projected point when variable j changes by delta:
/// L_j * delta.
Eigen::VectorXd move_delta(const PcaModel& model, std::size_t variable, double delta);

struct ScreeEntry {
  std::size_t component = 0;
  double ratio = 0.0;
  double cumulative = 0.0;
};
std::vector<ScreeEntry> scree(const PcaModel& model);

struct NeighborEmbedding {
  Point center;                        // the agent (d-dim)
  std::vector<Eigen::Vector2d> points; // embedded neighbor offsets
  std::vector<double> original_distances;
  Eigen::Vector2d top_eigenvalues = Eigen::Vector2d::Zero();
  double trace = 0.0;                  // of the unit-vector Gram matrix
  double min_eigenvalue = 0.0;
  std::vector<std::string> diagnostics;

  /// Share of the Gram trace carried by the two retained eigenvalues.
  double retained_fraction() const { return trace > 0.0 ? top_eigenvalues.sum() / trace : 0.0; }
};

/// Gram matrix of agent->neighbor unit vectors, top-2 eigenpairs,
/// P* = V* sqrt(Lambda*), then each row rescaled to the neighbor's true
/// distance. The Gram matrix is not double-centered.
/// Throws ProjectionError with fewer than two neighbors or a neighbor
/// coincident with the agent.
NeighborEmbedding cos_mds(std::span<const double> agent, std::span<const Point> neighbors);

}  // namespace esm
