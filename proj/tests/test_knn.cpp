#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <chrono>
#include <cmath>

#include "esmine/knn.hpp"
#include "esmine/rng.hpp"
#include "oracles.hpp"

using namespace esm;

TEST_CASE("empty point set is a construction error") {
  CHECK_THROWS_AS(KdTree(std::vector<Point>{}), DataError);
}

TEST_CASE("single point is returned for any query") {
  const KdTree t({{0.3, 0.7}});
  const auto ns = t.query(std::vector<double>{0.9, 0.1}, 1);
  REQUIRE(ns.size() == 1);
  CHECK(ns.indices[0] == 0);
}

TEST_CASE("nearest corner of the unit square") {
  const KdTree t({{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  const auto ns = t.query(std::vector<double>{0.1, 0.1}, 1);
  CHECK(ns.indices == std::vector<std::size_t>{0});
  CHECK(ns.distances[0] == doctest::Approx(std::sqrt(0.02)));
}

TEST_CASE("symmetric pair gives equal distances and opposite unit vectors") {
  const KdTree t({{0.4, 0.5}, {0.6, 0.5}});
  const auto ns = t.query(std::vector<double>{0.5, 0.5}, 2);
  REQUIRE(ns.size() == 2);
  CHECK(ns.indices == std::vector<std::size_t>{0, 1});  // tie broken by id
  CHECK(ns.distances[0] == doctest::Approx(0.1));
  CHECK(ns.distances[1] == doctest::Approx(0.1));
  CHECK(ns.unit_vectors[0][0] == doctest::Approx(-1.0));
  CHECK(ns.unit_vectors[1][0] == doctest::Approx(1.0));
}

TEST_CASE("k larger than the set returns everything") {
  std::vector<Point> pts;
  Rng rng(3);
  for (int i = 0; i < 12; ++i) pts.push_back(rng.uniform_point(3));
  const KdTree t(pts);
  CHECK(t.query(std::vector<double>{0.5, 0.5, 0.5}, 17).size() == 12);
}

TEST_CASE("a query on a data point skips it and returns the next k") {
  std::vector<Point> pts;
  Rng rng(11);
  for (int i = 0; i < 50; ++i) pts.push_back(rng.uniform_point(2));
  const KdTree t(pts);
  const auto ns = t.query(pts[7], 3);
  const auto ref = oracle::knn(pts, pts[7], 3);
  REQUIRE(ns.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(ns.indices[i] != 7);
    CHECK(ns.indices[i] == ref[i].second);
  }
}

TEST_CASE("300 uniform 2D points, k = 9, matches brute force") {
  Rng rng(2024);
  std::vector<Point> pts;
  for (int i = 0; i < 300; ++i) pts.push_back(rng.uniform_point(2));
  const KdTree t(pts);
  for (int q = 0; q < 200; ++q) {
    const Point query = rng.uniform_point(2);
    const auto ns = t.query(query, 9);
    const auto ref = oracle::knn(pts, query, 9);
    REQUIRE(ns.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) {
      CHECK(ns.indices[i] == ref[i].second);
      CHECK(ns.distances[i] == std::sqrt(ref[i].first));
    }
  }
}

TEST_CASE("ties are resolved by ascending id, including duplicates in the data") {
  // A lattice makes many exact distance ties.
  std::vector<Point> pts;
  for (int rep = 0; rep < 2; ++rep)
    for (int x = 0; x <= 6; ++x)
      for (int y = 0; y <= 6; ++y) pts.push_back({x / 6.0, y / 6.0});
  const KdTree t(pts, 2);
  Rng rng(5);
  for (int q = 0; q < 200; ++q) {
    Point query{std::round(rng.uniform() * 12.0) / 12.0, std::round(rng.uniform() * 12.0) / 12.0};
    const std::size_t k = 1 + rng.index(20);
    const auto ns = t.query(query, k);
    const auto ref = oracle::knn(pts, query, k);
    REQUIRE(ns.size() == ref.size());
    for (std::size_t i = 0; i < ref.size(); ++i) CHECK(ns.indices[i] == ref[i].second);
  }
}

TEST_CASE("unit vectors have norm 1") {
  Rng rng(9);
  std::vector<Point> pts;
  for (int i = 0; i < 200; ++i) pts.push_back(rng.uniform_point(11));
  const KdTree t(pts);
  const auto ns = t.query(rng.uniform_point(11), 9);
  for (const auto& u : ns.unit_vectors) CHECK(std::abs(norm(u) - 1.0) < 1e-9);
  for (std::size_t i = 1; i < ns.size(); ++i) CHECK(ns.distances[i - 1] <= ns.distances[i]);
}

TEST_CASE("query cost grows sub-linearly in N (informational)") {
  Rng rng(1);
  auto mean_query_us = [&](std::size_t n) {
    std::vector<Point> pts;
    for (std::size_t i = 0; i < n; ++i) pts.push_back(rng.uniform_point(3));
    const KdTree t(pts);
    const auto start = std::chrono::steady_clock::now();
    std::size_t sink = 0;
    for (int q = 0; q < 2000; ++q) sink += t.query(rng.uniform_point(3), 9).size();
    const auto us = std::chrono::duration<double, std::micro>(std::chrono::steady_clock::now() - start).count();
    CHECK(sink == 2000 * 9);
    return us / 2000.0;
  };
  const double small = mean_query_us(1000);
  const double large = mean_query_us(16000);
  MESSAGE("mean query time N=1000: " << small << " us, N=16000: " << large << " us");
}
