#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "esmine/data_io.hpp"
#include "esmine/projection.hpp"
#include "esmine/rng.hpp"

using namespace esm;

namespace {

std::vector<Point> correlated_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> mix(d, Point(d));
  for (auto& row : mix)
    for (auto& v : row) v = rng.normal();
  std::vector<Point> out;
  for (std::size_t i = 0; i < n; ++i) {
    Point z(d), p(d, 0.0);
    for (auto& v : z) v = rng.normal();
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) p[a] += mix[a][b] * z[b] * (1.0 + static_cast<double>(b));
    out.push_back(p);
  }
  return out;
}

// Plain-loop covariance and power iteration with deflation.
std::vector<double> top_eigenvalues_oracle(const std::vector<Point>& pts, std::size_t k, double* trace) {
  const std::size_t d = pts.front().size();
  const double n = static_cast<double>(pts.size());
  Point mean(d, 0.0);
  for (const auto& p : pts)
    for (std::size_t a = 0; a < d; ++a) mean[a] += p[a] / n;
  std::vector<Point> c(d, Point(d, 0.0));
  for (const auto& p : pts)
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) c[a][b] += (p[a] - mean[a]) * (p[b] - mean[b]) / (n - 1.0);
  *trace = 0.0;
  for (std::size_t a = 0; a < d; ++a) *trace += c[a][a];
  std::vector<double> vals;
  for (std::size_t e = 0; e < k; ++e) {
    Point v(d, 1.0);
    double lambda = 0.0;
    for (int it = 0; it < 5000; ++it) {
      Point w(d, 0.0);
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) w[a] += c[a][b] * v[b];
      double s = 0.0;
      for (double x : w) s += x * x;
      s = std::sqrt(s);
      for (std::size_t a = 0; a < d; ++a) v[a] = w[a] / s;
      lambda = s;
    }
    vals.push_back(lambda);
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) c[a][b] -= lambda * v[a] * v[b];
  }
  return vals;
}

double angle_gap(double a, double b) {
  const double g = std::fmod(std::abs(a - b), 2.0 * std::numbers::pi);
  return std::min(g, 2.0 * std::numbers::pi - g);
}

}  // namespace

TEST_CASE("pca: points on the x-axis") {
  std::vector<Point> pts{{-2, 0}, {-1, 0}, {0, 0}, {1, 0}, {3, 0}};
  const auto m = fit_pca(pts, 2);
  CHECK(std::abs(m.components(0, 0)) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(m.components(0, 1)) < 1e-12);
  CHECK(m.explained_variance_ratio(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::abs(m.explained_variance_ratio(1)) < 1e-12);
}

TEST_CASE("pca: isotropic 2-d data gives equal ratios") {
  std::vector<Point> pts{{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
  const auto m = fit_pca(pts, 2);
  CHECK(m.explained_variance_ratio(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(m.explained_variance_ratio(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pca: rows orthonormal, ratios non-increasing, sign convention") {
  const auto pts = correlated_points(400, 11, 3);
  const auto m = fit_pca(pts, 11);
  const Eigen::MatrixXd gram = m.components * m.components.transpose();
  CHECK((gram - Eigen::MatrixXd::Identity(11, 11)).cwiseAbs().maxCoeff() < 1e-9);
  for (Eigen::Index i = 1; i < 11; ++i)
    CHECK(m.explained_variance_ratio(i) <= m.explained_variance_ratio(i - 1) + 1e-15);
  CHECK(m.explained_variance_ratio.sum() <= 1.0 + 1e-9);
  for (Eigen::Index r = 0; r < 11; ++r) {
    Eigen::Index arg = 0;
    m.components.row(r).cwiseAbs().maxCoeff(&arg);
    CHECK(m.components(r, arg) > 0.0);
  }
}

TEST_CASE("pca: full reconstruction of an 11-variable set") {
  const auto pts = correlated_points(200, 11, 5);
  const auto m = fit_pca(pts, 11);
  double worst = 0.0;
  for (const auto& p : pts) {
    const auto back = reconstruct(m, project(m, p));
    for (std::size_t a = 0; a < 11; ++a) worst = std::max(worst, std::abs(back[a] - p[a]) / (1.0 + std::abs(p[a])));
  }
  CHECK(worst < 1e-9);
}

TEST_CASE("pca: errors") {
  CHECK_THROWS_AS(fit_pca(std::vector<Point>{{1, 2}}, 1), ProjectionError);
  CHECK_THROWS_AS(fit_pca(std::vector<Point>{{1, 2}, {1, 2}, {1, 2}}, 1), ProjectionError);
  CHECK_THROWS_AS(fit_pca(std::vector<Point>{{1, 2}, {2, 2}}, 3), ProjectionError);
  const auto m = fit_pca(std::vector<Point>{{0, 0}, {1, 2}, {3, 1}}, 2);
  CHECK_THROWS_AS(project(m, Point{1, 2, 3}), ProjectionError);
}

TEST_CASE("project: mean, component direction, matrix oracle") {
  const auto pts = correlated_points(100, 5, 7);
  const auto m = fit_pca(pts, 2);
  Point mean(m.mean.data(), m.mean.data() + 5);
  CHECK(project(m, mean).norm() < 1e-12);

  Point along = mean;
  for (std::size_t a = 0; a < 5; ++a) along[a] += 2.5 * m.components(0, static_cast<Eigen::Index>(a));
  const auto v = project(m, along);
  CHECK(v(0) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(std::abs(v(1)) < 1e-12);

  Rng rng(9);
  for (int t = 0; t < 50; ++t) {
    const Point p = rng.uniform_point(5);
    const auto got = project(m, p);
    for (int r = 0; r < 2; ++r) {
      double s = 0.0;
      for (int a = 0; a < 5; ++a) s += m.components(r, a) * (p[static_cast<std::size_t>(a)] - m.mean(a));
      CHECK(std::abs(got(r) - s) < 1e-12);
    }
  }
}

TEST_CASE("move_delta: zero, identity model, and the loading-vector identity") {
  const auto pts = correlated_points(300, 11, 11);
  const auto m = fit_pca(pts, 2);
  CHECK(move_delta(m, 3, 0.0).norm() == 0.0);

  PcaModel ident;
  ident.mean = Eigen::Vector2d::Zero();
  ident.components = Eigen::Matrix2d::Identity();
  ident.explained_variance_ratio = Eigen::Vector2d(0.5, 0.5);
  ident.explained_variance = Eigen::Vector2d(1, 1);
  const auto dv = move_delta(ident, 0, 0.3);
  CHECK(dv(0) == 0.3);
  CHECK(dv(1) == 0.0);

  Rng rng(12);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const Point p = rng.uniform_point(11);
    const std::size_t j = rng.index(11);
    const double delta = rng.uniform(-0.5, 0.5);
    Point q = p;
    q[j] += delta;
    const Eigen::VectorXd lhs = project(m, q) - project(m, p);
    worst = std::max(worst, (lhs - move_delta(m, j, delta)).cwiseAbs().maxCoeff());
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("scree: cumulative prefix sums") {
  PcaModel m;
  m.explained_variance_ratio = Eigen::Vector3d(0.6, 0.3, 0.1);
  const auto s = scree(m);
  REQUIRE(s.size() == 3);
  CHECK(s[0].cumulative == doctest::Approx(0.6));
  CHECK(s[1].cumulative == doctest::Approx(0.9));
  CHECK(s[2].cumulative == doctest::Approx(1.0));

  PcaModel one;
  one.explained_variance_ratio = Eigen::VectorXd::Constant(1, 0.7);
  CHECK(scree(one).front().cumulative == one.explained_variance_ratio(0));
}

TEST_CASE("scree: wine-like 11-d set against power iteration") {
  const auto ds = gen_wine_like(1599, 1);
  const auto pts = ds.existing_points();
  const auto m = fit_pca(pts, 2);
  double trace = 0.0;
  const auto top = top_eigenvalues_oracle(pts, 2, &trace);
  CHECK(scree(m)[1].cumulative == doctest::Approx((top[0] + top[1]) / trace).epsilon(1e-6));
  CHECK(scree(fit_pca(pts, 11)).back().cumulative <= 1.0 + 1e-9);
}

TEST_CASE("cos-mds: two opposite neighbors") {
  const Point agent{0.5, 0.5, 0.5};
  std::vector<Point> nb{{1.5, 0.5, 0.5}, {-1.5, 0.5, 0.5}};
  const auto e = cos_mds(agent, nb);
  CHECK(e.points[0].norm() == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(e.points[1].norm() == doctest::Approx(2.0).epsilon(1e-12));
  const double cosine = e.points[0].dot(e.points[1]) / (e.points[0].norm() * e.points[1].norm());
  CHECK(cosine == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("cos-mds: rejects bad input") {
  const Point agent{0, 0};
  CHECK_THROWS_AS(cos_mds(agent, std::vector<Point>{{1, 0}}), ProjectionError);
  CHECK_THROWS_AS(cos_mds(agent, std::vector<Point>{{1, 0}, {0, 0}}), ProjectionError);
}

TEST_CASE("cos-mds: 4-d hypersphere keeps unit lengths") {
  const auto data = gen_manifold(ManifoldKind::hypersphere4d, 1);
  REQUIRE(data.points.size() == 1000);
  const auto e = cos_mds(data.agent, data.points);
  double worst = 0.0;
  for (const auto& p : e.points) worst = std::max(worst, std::abs(p.norm() - 1.0));
  CHECK(worst < 1e-9);
  CHECK(e.diagnostics.empty());
  // Independent angles give second moments (1/8, 1/8, 1/4, 1/2) per axis, so
  // the top two carry about three quarters of the trace.
  CHECK(e.retained_fraction() == doctest::Approx(0.75).epsilon(0.05));
}

TEST_CASE("cos-mds: 3-d hyperboloid separates into two arcs") {
  const auto data = gen_manifold(ManifoldKind::hyperboloid3d);
  REQUIRE(data.points.size() == 900);
  const auto e = cos_mds(data.agent, data.points);
  std::vector<double> angle;
  std::vector<int> sheet;
  for (std::size_t i = 0; i < e.points.size(); ++i) {
    angle.push_back(std::atan2(e.points[i](1), e.points[i](0)));
    sheet.push_back(data.points[i][2] > 0 ? 1 : 0);
  }
  // Mean silhouette of the two sheets, circular distance on angles.
  double total = 0.0;
  for (std::size_t i = 0; i < angle.size(); ++i) {
    double in = 0.0, out = 0.0;
    std::size_t nin = 0, nout = 0;
    for (std::size_t j = 0; j < angle.size(); ++j) {
      if (i == j) continue;
      const double g = angle_gap(angle[i], angle[j]);
      if (sheet[i] == sheet[j]) {
        in += g;
        ++nin;
      } else {
        out += g;
        ++nout;
      }
    }
    const double a = in / static_cast<double>(nin), b = out / static_cast<double>(nout);
    total += (b - a) / std::max(a, b);
  }
  const double silhouette = total / static_cast<double>(angle.size());
  MESSAGE("hyperboloid silhouette " << silhouette << ", retained " << e.retained_fraction());
  CHECK(silhouette > 0.5);
  CHECK(e.retained_fraction() >= 0.9);
}

TEST_CASE("cos-mds: 4-d paraboloid preserves agent distances") {
  const auto data = gen_manifold(ManifoldKind::paraboloid4d);
  REQUIRE(data.points.size() == 1000);
  const auto e = cos_mds(data.agent, data.points);
  for (std::size_t i = 0; i < data.points.size(); ++i) {
    const double truth = distance(data.points[i], data.agent);
    CHECK(std::abs(e.points[i].norm() - truth) <= 1e-9 * std::max(1.0, truth));
  }
}
