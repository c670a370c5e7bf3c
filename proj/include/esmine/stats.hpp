#pragma once

// Summary statistics and the Wilcoxon-Mann-Whitney rank-sum test used by the
// experiment harnesses.

#include <span>

namespace esm::stats {

double mean(std::span<const double> x);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
double stddev(std::span<const double> x);
double median(std::span<const double> x);

enum class Alternative { two_sided, greater, less };

struct RankSumResult {
  double u = 0.0;  // U statistic of the first sample
  double z = 0.0;
  double p_value = 1.0;
};

/// Normal approximation with tie and continuity corrections.
/// `greater` tests whether the first sample tends to be larger.
RankSumResult rank_sum_test(std::span<const double> a, std::span<const double> b,
                            Alternative alt = Alternative::two_sided);

}  // namespace esm::stats
