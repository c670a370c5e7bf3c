#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "esmine/stats.hpp"

using namespace esm::stats;

TEST_CASE("mean, sd and median") {
  const std::vector<double> x{1.0, 2.0, 3.0, 4.0};
  CHECK(mean(x) == doctest::Approx(2.5));
  CHECK(stddev(x) == doctest::Approx(1.2909944487358056));
  CHECK(median(x) == doctest::Approx(2.5));
  CHECK(stddev(std::vector<double>{3.0}) == 0.0);
}

// Reference values: scipy.stats.mannwhitneyu(method="asymptotic",
// use_continuity=True) on the same samples.
TEST_CASE("rank-sum test matches the asymptotic reference with ties") {
  const std::vector<double> a{1.1, 2.3, 3.3, 4.0, 5.5, 2.3, 7.1};
  const std::vector<double> b{0.5, 1.1, 1.9, 2.0, 3.0, 2.3};
  const auto two = rank_sum_test(a, b, Alternative::two_sided);
  CHECK(two.u == doctest::Approx(34.5));
  CHECK(two.p_value == doctest::Approx(0.06147952877355991).epsilon(1e-9));
  CHECK(rank_sum_test(a, b, Alternative::greater).p_value ==
        doctest::Approx(0.030739764386779955).epsilon(1e-9));
  CHECK(rank_sum_test(a, b, Alternative::less).p_value ==
        doctest::Approx(0.9779889024791649).epsilon(1e-9));
}

TEST_CASE("identical samples are not significant") {
  const std::vector<double> a{1, 2, 3, 4, 5};
  CHECK(rank_sum_test(a, a).p_value > 0.9);
}
