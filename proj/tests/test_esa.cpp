#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>

#include "esmine/esa.hpp"
#include "esmine/rng.hpp"

using namespace esm;

namespace {

const double kEquilibrium = std::pow(2.0, 1.0 / 6.0);

std::vector<Point> uniform_points(std::size_t n, std::size_t d, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<Point> pts;
  for (std::size_t i = 0; i < n; ++i) pts.push_back(rng.uniform_point(d));
  return pts;
}

EsaParams fixed_sigma(double sigma) {
  EsaParams p;
  p.sigma_mode = SigmaMode::fixed;
  p.sigma = sigma;
  return p;
}

}  // namespace

TEST_CASE("potential: zero at sigma, -epsilon at the well minimum") {
  CHECK(std::abs(lj_potential(1.0, 1.0, 1.0)) < 1e-12);
  CHECK(lj_potential(kEquilibrium, 1.0, 1.0) == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(lj_potential(0.3 * kEquilibrium, 2.0, 0.3) == doctest::Approx(-2.0).epsilon(1e-12));
  // Extended-precision evaluation of 4[(1/0.9)^12 - (1/0.9)^6].
  CHECK(lj_potential(0.9, 1.0, 1.0) == doctest::Approx(6.636118953252916).epsilon(1e-13));
  CHECK_THROWS_AS(lj_potential(0.0, 1.0, 1.0), std::domain_error);
  CHECK_THROWS_AS(lj_potential(-1.0, 1.0, 1.0), std::domain_error);
}

TEST_CASE("force magnitude: 24 at sigma, zero at the well minimum") {
  CHECK(lj_force_magnitude(1.0, 1.0, 1.0) == doctest::Approx(24.0));
  CHECK(std::abs(lj_force_magnitude(kEquilibrium, 1.0, 1.0)) < 1e-9);
  CHECK(std::abs(lj_force_magnitude(0.05 * kEquilibrium, 1.0, 0.05)) < 1e-9 / 0.05);
  CHECK_THROWS_AS(lj_force_magnitude(0.0, 1.0, 1.0), std::domain_error);
}

TEST_CASE("force is minus the central difference of the potential") {
  const double h = 1e-5;
  const double r = 1.5;
  const double fd = (lj_potential(r + h, 1.0, 1.0) - lj_potential(r - h, 1.0, 1.0)) / (2 * h);
  CHECK(std::abs(lj_force_magnitude(r, 1.0, 1.0) + fd) < 1e-6);

  for (double sigma : {1.0, 0.05}) {
    for (int i = 0; i < 200; ++i) {
      const double rr = sigma * (0.8 + 2.2 * i / 199.0);
      const double hh = 1e-6 * sigma;
      const double dv = (lj_potential(rr + hh, 1.0, sigma) - lj_potential(rr - hh, 1.0, sigma)) / (2 * hh);
      const double f = lj_force_magnitude(rr, 1.0, sigma);
      // Relative to the force scale 24 eps/sigma near the zero crossing.
      CHECK(std::abs(f + dv) <= 1e-6 * std::max(std::abs(f), 24.0 / sigma));
    }
  }
}

TEST_CASE("effective sigma") {
  NeighborSet ns;
  ns.distances = {1.0, 2.0, 3.0};
  ns.indices = {0, 1, 2};
  EsaParams p;
  CHECK(effective_sigma(ns, p) == doctest::Approx(2.0));
  ns.distances = {0.4};
  ns.indices = {0};
  CHECK(effective_sigma(ns, p) == doctest::Approx(0.4));
  CHECK(effective_sigma(ns, fixed_sigma(0.05)) == 0.05);
}

TEST_CASE("resultant: symmetric neighbors cancel") {
  const KdTree t({{0.4, 0.5}, {0.6, 0.5}});
  const Point p{0.5, 0.5};
  const auto ns = t.query(p, 2);
  const auto r = resultant(p, ns, EsaParams{});
  CHECK(r.magnitude < 1e-7);
  CHECK_FALSE(r.direction.has_value());
}

TEST_CASE("resultant: a close single neighbor pushes straight away") {
  const KdTree t({{0.5, 0.5}});
  const Point p{0.5 + 0.05 * 0.6, 0.5 + 0.05 * 0.8};  // distance sigma/2 for sigma = 0.1
  const auto r = resultant(p, t.query(p, 1), fixed_sigma(0.1));
  REQUIRE(r.direction.has_value());
  CHECK((*r.direction)[0] == doctest::Approx(0.6));
  CHECK((*r.direction)[1] == doctest::Approx(0.8));
}

TEST_CASE("resultant: sign flips between 0.5 sigma and 3 sigma") {
  const KdTree t({{0.5, 0.5}});
  const double sigma = 0.1;
  const Point near{0.5 + 0.5 * sigma, 0.5};
  const Point far{0.5 + 3.0 * sigma, 0.5};
  CHECK((*resultant(near, t.query(near, 1), fixed_sigma(sigma)).direction)[0] > 0.0);  // away
  CHECK((*resultant(far, t.query(far, 1), fixed_sigma(sigma)).direction)[0] < 0.0);    // toward
}

TEST_CASE("resultant: three neighbors against a hand recomputation") {
  const std::vector<Point> pts{{0.2, 0.3}, {0.55, 0.7}, {0.8, 0.25}};
  const KdTree t(pts);
  const Point p{0.45, 0.4};
  const double sigma = 0.3, eps = 1.5;
  EsaParams params = fixed_sigma(sigma);
  params.epsilon = eps;
  const auto r = resultant(p, t.query(p, 3), params);

  double fx = 0.0, fy = 0.0;
  for (const auto& q : pts) {
    const double dx = p[0] - q[0], dy = p[1] - q[1];
    const double dist = std::sqrt(dx * dx + dy * dy);
    const double s = sigma / dist;
    const double f = 24.0 * eps / sigma * (2.0 * std::pow(s, 13) - std::pow(s, 7));
    fx += dx / dist * f;
    fy += dy / dist * f;
  }
  CHECK(std::abs(r.force[0] - fx) < 1e-9);
  CHECK(std::abs(r.force[1] - fy) < 1e-9);
  CHECK(std::abs(r.magnitude - std::hypot(fx, fy)) < 1e-9);
}

TEST_CASE("direction blend") {
  const Point d{1.0, 0.0};
  const Point m{0.0, 1.0};
  // No accumulated momentum: bare direction.
  CHECK(blend_direction(d, 5.0, m, 0.0) == d);
  // Identical directions blend to themselves.
  const auto same = blend_direction(d, 3.7, d, 1.0);
  CHECK(same[0] == doctest::Approx(1.0));
  CHECK(same[1] == doctest::Approx(0.0));
  // |F| = 2, L = 1, m orthogonal: (2d + m) / 3, not renormalized.
  const auto b = blend_direction(d, 2.0, m, 1.0);
  CHECK(b[0] == doctest::Approx(2.0 / 3.0));
  CHECK(b[1] == doctest::Approx(1.0 / 3.0));
}

TEST_CASE("step moves by alpha times the unnormalized blend and updates momentum") {
  const KdTree t({{0.5, 0.5}});
  EsaParams params = fixed_sigma(0.1);
  params.gamma = 0.9;
  params.alpha = 0.01;
  AgentState s = AgentState::at({0.56, 0.5});
  s.momentum = {0.0, 1.0};
  s.cumulative = 1.0;
  const double f = lj_force_magnitude(0.06, 1.0, 0.1);
  const auto out = step(s, t, params);
  REQUIRE(out.termination == Termination::running);
  const double dx = f / (f + 1.0), dy = 1.0 / (f + 1.0);
  CHECK(out.state.position[0] == doctest::Approx(0.56 + 0.01 * dx));
  CHECK(out.state.position[1] == doctest::Approx(0.5 + 0.01 * dy));
  CHECK(out.state.cumulative == doctest::Approx(0.9 * (1.0 + f)));
  CHECK(norm(out.state.momentum) == doctest::Approx(1.0));
  CHECK(out.state.step == 1);
}

TEST_CASE("gamma = 0 keeps momentum inert") {
  const KdTree t({{0.5, 0.5}, {0.52, 0.58}});
  EsaParams params = fixed_sigma(0.1);
  params.gamma = 0.0;
  AgentState s = AgentState::at({0.45, 0.47});
  for (int i = 0; i < 5; ++i) {
    const auto ns = t.query(s.position, params.k);
    const auto r = resultant(s.position, ns, params);
    const auto out = step(s, t, params);
    REQUIRE(out.termination == Termination::running);
    CHECK(out.state.cumulative == 0.0);
    for (std::size_t a = 0; a < 2; ++a)
      CHECK(out.state.position[a] == s.position[a] + (*r.direction)[a] * params.alpha);
    s = out.state;
  }
}

TEST_CASE("gamma = 0 run equals a momentum-free reimplementation bit for bit") {
  const auto pts = uniform_points(300, 2, 77);
  const KdTree t(pts);
  EsaParams params;
  params.gamma = 0.0;
  params.n = 200;
  const auto starts = random_starts(20, 2, 5);
  for (const auto& start : starts) {
    const Trajectory traj = run_agent(start, t, params);
    // Plain loop: x <- x + alpha * F / |F|.
    Point x = start;
    std::vector<Point> samples;
    for (std::size_t i = 0; i < params.n; ++i) {
      if (i % params.j == 0) samples.push_back(x);
      const auto ns = t.query(x, params.k);
      const auto r = resultant(x, ns, params);
      if (!r.direction) break;
      Point next = x;
      for (std::size_t a = 0; a < 2; ++a) next[a] += (*r.direction)[a] * params.alpha;
      if (!satisfies({}, next)) break;
      x = next;
    }
    REQUIRE(traj.samples.size() >= samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) CHECK(traj.samples[i].position == samples[i]);
    CHECK(traj.end() == x);
  }
}

TEST_CASE("an agent near a single point settles on the equilibrium shell") {
  const KdTree t({{0.5, 0.5}});
  EsaParams params = fixed_sigma(0.1);
  params.gamma = 0.0;
  params.n = 400;
  const Point start{0.55, 0.5};
  const auto traj = run_agent(start, t, params);
  const double final_r = distance(traj.end(), std::vector<double>{0.5, 0.5});
  CHECK(final_r > 0.05);
  CHECK(std::abs(final_r - kEquilibrium * 0.1) <= 2 * params.alpha);
  CHECK(traj.end()[1] == doctest::Approx(0.5));  // stays on the radial line
}

TEST_CASE("with adaptive sigma and one data point the agent runs out of the box") {
  const KdTree t({{0.5, 0.5}});
  EsaParams params;
  params.gamma = 0.0;
  params.n = 1000;
  params.alpha = 0.01;
  const auto traj = run_agent(std::vector<double>{0.6, 0.5}, t, params);
  CHECK(traj.termination == Termination::constraint_violated);
  CHECK(traj.end()[0] > 0.98);
  for (const auto& s : traj.samples) CHECK(satisfies({}, s.position));
}

TEST_CASE("trajectory sampling every j steps, start tagged") {
  const auto pts = uniform_points(100, 3, 1);
  const KdTree t(pts);
  EsaParams params;
  params.n = 95;
  params.j = 10;
  const auto traj = run_agent(std::vector<double>{0.5, 0.5, 0.5}, t, params);
  REQUIRE(!traj.samples.empty());
  CHECK(traj.samples.front().step == 0);
  CHECK(traj.samples.front().is_start);
  for (std::size_t i = 1; i < traj.samples.size(); ++i) {
    const auto gap = traj.samples[i].step - traj.samples[i - 1].step;
    if (traj.samples[i].is_terminal) CHECK(gap <= 10);
    else CHECK(gap == 10);
  }
  if (traj.termination == Termination::step_limit) {
    CHECK(traj.samples.back().step == 95);
    CHECK(traj.samples.back().is_terminal);
  }
}

TEST_CASE("invalid starts and parameters are rejected") {
  const KdTree t({{0.5, 0.5}, {0.2, 0.2}});
  EsaParams params;
  CHECK_THROWS_AS(run_agent(std::vector<double>{1.5, 0.5}, t, params), DataError);
  params.constraints.push_back(Constraint::brush(0, 0.0, 0.3));
  CHECK_THROWS_AS(run_agent(std::vector<double>{0.5, 0.5}, t, params), DataError);
  EsaParams bad;
  bad.gamma = 1.0;
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = EsaParams{};
  bad.j = 0;
  CHECK_THROWS_AS(bad.validate(), DataError);
}

TEST_CASE("every sample satisfies box and user constraints") {
  const auto pts = uniform_points(200, 2, 8);
  const KdTree t(pts);
  EsaParams params;
  params.alpha = 0.01;
  params.constraints = {Constraint::halfspace({1.0, 1.0}, -1.2), Constraint::brush(1, 0.1, 0.9)};
  const auto starts = random_starts(60, 2, 44, params.constraints);
  for (const auto& traj : run_batch(starts, t, params)) {
    for (const auto& s : traj.samples) CHECK(satisfies(params.constraints, s.position));
  }
}

TEST_CASE("batch results are independent of parallelism") {
  const auto pts = uniform_points(300, 4, 12);
  const KdTree t(pts);
  EsaParams params;
  params.n = 100;
  const auto starts = random_starts(100, 4, 99);
  const auto serial = run_batch(starts, t, params, 1);
  const auto parallel = run_batch(starts, t, params, 8);
  REQUIRE(serial.size() == parallel.size());
  for (std::size_t i = 0; i < serial.size(); ++i) {
    REQUIRE(serial[i].samples.size() == parallel[i].samples.size());
    for (std::size_t s = 0; s < serial[i].samples.size(); ++s)
      CHECK(serial[i].samples[s].position == parallel[i].samples[s].position);
  }
  CHECK(run_batch(std::span<const Point>{}, t, params, 4).empty());
}

TEST_CASE("random starts are seeded per agent ordinal") {
  const auto a = random_starts(10, 3, 5);
  const auto b = random_starts(20, 3, 5);
  for (std::size_t i = 0; i < 10; ++i) CHECK(a[i] == b[i]);
  CHECK(random_starts(10, 3, 6)[0] != a[0]);
}

TEST_CASE("anti-hubs are the points with the largest mean kNN distance") {
  std::vector<Point> pts = uniform_points(50, 2, 3);
  for (auto& p : pts) {  // squeeze into a corner
    p[0] *= 0.2;
    p[1] *= 0.2;
  }
  pts.push_back({0.9, 0.9});
  pts.push_back({0.7, 0.1});
  const KdTree t(pts);
  const auto ids = anti_hubs(t, 2, 8);
  CHECK(ids == std::vector<std::size_t>{50, 51});
}

TEST_CASE("batch wall time grows about linearly in the agent count (informational)") {
  const auto pts = uniform_points(1000, 5, 2);
  const KdTree t(pts);
  EsaParams params;
  params.n = 100;
  auto time_for = [&](std::size_t p) {
    const auto starts = random_starts(p, 5, 1);
    const auto start = std::chrono::steady_clock::now();
    const auto res = run_batch(starts, t, params, 1);
    CHECK(res.size() == p);
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  };
  const double t1 = time_for(100);
  const double t2 = time_for(200);
  MESSAGE("100 agents: " << t1 << " s, 200 agents: " << t2 << " s, ratio " << t2 / t1);
}
