#include "esmine/projection.hpp"

#include <algorithm>
#include <cmath>

namespace esm {

namespace {

// Flip each column so its largest-magnitude entry is positive.
void fix_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    Eigen::Index arg = 0;
    vectors.col(c).cwiseAbs().maxCoeff(&arg);
    if (vectors(arg, c) < 0.0) vectors.col(c) *= -1.0;
  }
}

Eigen::Map<const Eigen::VectorXd> as_vector(std::span<const double> p) {
  return {p.data(), static_cast<Eigen::Index>(p.size())};
}

}  // namespace

Eigen::VectorXd PcaModel::loading_vector(std::size_t variable) const {
  if (variable >= dim()) throw ProjectionError("loading vector index out of range");
  return components.col(static_cast<Eigen::Index>(variable));
}

PcaModel fit_pca(std::span<const Point> points, std::size_t n_components) {
  if (points.size() < 2) throw ProjectionError("PCA needs at least two points");
  const auto d = static_cast<Eigen::Index>(points.front().size());
  if (n_components < 1 || static_cast<Eigen::Index>(n_components) > d) {
    throw ProjectionError("PCA component count must be in [1, d]");
  }
  Eigen::MatrixXd X(static_cast<Eigen::Index>(points.size()), d);
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (static_cast<Eigen::Index>(points[i].size()) != d)
      throw ProjectionError("PCA input rows have inconsistent dimensions");
    X.row(static_cast<Eigen::Index>(i)) = as_vector(points[i]).transpose();
  }
  PcaModel m;
  m.mean = X.colwise().mean().transpose();
  X.rowwise() -= m.mean.transpose();
  const Eigen::MatrixXd cov = (X.transpose() * X) / static_cast<double>(X.rows() - 1);
  const double total = cov.trace();
  if (!(total > 1e-300)) throw ProjectionError("all points are identical (zero variance)");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw ProjectionError("covariance eigendecomposition failed");
  // Eigen sorts ascending; take the trailing columns in reverse.
  const auto n = static_cast<Eigen::Index>(n_components);
  Eigen::MatrixXd vecs(d, n);
  Eigen::VectorXd vals(n);
  for (Eigen::Index c = 0; c < n; ++c) {
    vecs.col(c) = solver.eigenvectors().col(d - 1 - c);
    vals(c) = std::max(0.0, solver.eigenvalues()(d - 1 - c));
  }
  fix_signs(vecs);
  m.components = vecs.transpose();
  m.explained_variance = vals;
  m.explained_variance_ratio = vals / total;
  return m;
}

Eigen::VectorXd project(const PcaModel& model, std::span<const double> p) {
  if (p.size() != model.dim()) {
    throw ProjectionError("point has " + std::to_string(p.size()) + " coordinates, model has " +
                          std::to_string(model.dim()));
  }
  return model.components * (as_vector(p) - model.mean);
}

std::vector<Eigen::VectorXd> project_all(const PcaModel& model, std::span<const Point> points) {
  std::vector<Eigen::VectorXd> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(project(model, p));
  return out;
}

Point reconstruct(const PcaModel& model, const Eigen::VectorXd& coords) {
  const Eigen::VectorXd x = model.components.transpose() * coords + model.mean;
  return Point(x.data(), x.data() + x.size());
}

Eigen::VectorXd move_delta(const PcaModel& model, std::size_t variable, double delta) {
  return model.loading_vector(variable) * delta;
}

std::vector<ScreeEntry> scree(const PcaModel& model) {
  std::vector<ScreeEntry> out;
  double cum = 0.0;
  for (Eigen::Index i = 0; i < model.explained_variance_ratio.size(); ++i) {
    cum += model.explained_variance_ratio(i);
    out.push_back({static_cast<std::size_t>(i), model.explained_variance_ratio(i), cum});
  }
  return out;
}

NeighborEmbedding cos_mds(std::span<const double> agent, std::span<const Point> neighbors) {
  if (neighbors.size() < 2) throw ProjectionError("cos-MDS needs at least two neighbors");
  const auto n = static_cast<Eigen::Index>(neighbors.size());
  const auto d = static_cast<Eigen::Index>(agent.size());

  NeighborEmbedding out;
  out.center.assign(agent.begin(), agent.end());
  out.original_distances.resize(neighbors.size());

  Eigen::MatrixXd P(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& q = neighbors[static_cast<std::size_t>(i)];
    if (static_cast<Eigen::Index>(q.size()) != d)
      throw ProjectionError("neighbor dimension differs from the agent");
    const Eigen::VectorXd v = as_vector(q) - as_vector(agent);
    const double len = v.norm();
    if (len < 1e-12) throw ProjectionError("neighbor " + std::to_string(i) + " coincides with the agent");
    out.original_distances[static_cast<std::size_t>(i)] = len;
    P.row(i) = (v / len).transpose();
  }

  const Eigen::MatrixXd gram = P * P.transpose();
  out.trace = gram.trace();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram);
  if (solver.info() != Eigen::Success) throw ProjectionError("Gram eigendecomposition failed");
  out.min_eigenvalue = solver.eigenvalues()(0);
  if (out.min_eigenvalue < -1e-9) {
    out.diagnostics.push_back("negative Gram eigenvalue " + std::to_string(out.min_eigenvalue));
  }

  Eigen::MatrixXd top(n, 2);
  for (Eigen::Index c = 0; c < 2; ++c) {
    top.col(c) = solver.eigenvectors().col(n - 1 - c);
    out.top_eigenvalues(c) = std::max(0.0, solver.eigenvalues()(n - 1 - c));
  }
  fix_signs(top);
  const Eigen::MatrixXd embedded = top * out.top_eigenvalues.cwiseSqrt().asDiagonal();

  out.points.resize(neighbors.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Vector2d e = embedded.row(i).transpose();
    const double len = e.norm();
    const double target = out.original_distances[static_cast<std::size_t>(i)];
    if (len < 1e-12) {
      // Orthogonal to both retained axes; no direction survives.
      out.diagnostics.push_back("neighbor " + std::to_string(i) + " has no in-plane direction");
      e = Eigen::Vector2d(target, 0.0);
    } else {
      e *= target / len;
    }
    out.points[static_cast<std::size_t>(i)] = e;
  }
  return out;
}

}  // namespace esm
