#include "esmine/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace esm::stats {

double mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  return std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(x.size());
}

double stddev(std::span<const double> x) {
  if (x.size() < 2) return 0.0;
  const double m = mean(x);
  double s = 0.0;
  for (double v : x) s += (v - m) * (v - m);
  return std::sqrt(s / static_cast<double>(x.size() - 1));
}

double median(std::span<const double> x) {
  if (x.empty()) return 0.0;
  std::vector<double> v(x.begin(), x.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

namespace {
double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }
}  // namespace

RankSumResult rank_sum_test(std::span<const double> a, std::span<const double> b,
                            Alternative alt) {
  RankSumResult r;
  const std::size_t n1 = a.size();
  const std::size_t n2 = b.size();
  if (n1 == 0 || n2 == 0) return r;

  struct Item {
    double v;
    int group;
  };
  std::vector<Item> all;
  all.reserve(n1 + n2);
  for (double v : a) all.push_back({v, 0});
  for (double v : b) all.push_back({v, 1});
  std::sort(all.begin(), all.end(), [](const Item& x, const Item& y) { return x.v < y.v; });

  const double n = static_cast<double>(n1 + n2);
  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  for (std::size_t i = 0; i < all.size();) {
    std::size_t j = i;
    while (j < all.size() && all[j].v == all[i].v) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    const double t = static_cast<double>(j - i);
    tie_term += t * t * t - t;
    for (std::size_t k = i; k < j; ++k)
      if (all[k].group == 0) rank_sum_a += avg_rank;
    i = j;
  }
  const double dn1 = static_cast<double>(n1);
  const double dn2 = static_cast<double>(n2);
  r.u = rank_sum_a - dn1 * (dn1 + 1.0) / 2.0;
  const double mu = dn1 * dn2 / 2.0;
  const double sigma = std::sqrt(dn1 * dn2 / 12.0 * ((n + 1.0) - tie_term / (n * (n - 1.0))));
  if (sigma == 0.0) return r;

  const double diff = r.u - mu;
  switch (alt) {
    case Alternative::greater:
      r.z = (diff - 0.5) / sigma;
      r.p_value = normal_sf(r.z);
      break;
    case Alternative::less:
      r.z = (diff + 0.5) / sigma;
      r.p_value = 1.0 - normal_sf(r.z);
      break;
    case Alternative::two_sided: {
      const double corrected = std::max(0.0, std::abs(diff) - 0.5);
      r.z = (diff >= 0 ? corrected : -corrected) / sigma;
      r.p_value = std::min(1.0, 2.0 * normal_sf(corrected / sigma));
      break;
    }
  }
  return r;
}

}  // namespace esm::stats
