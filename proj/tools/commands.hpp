#pragma once

// Bodies of the CLI subcommands, kept out of main() so tests can run them
// in-process and compare outputs byte for byte.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "esmine/strategies.hpp"

namespace esm::cli {

// name -> file contents, in emission order
using Files = std::vector<std::pair<std::string, std::string>>;

void write_files(const std::string& dir, const Files& files);

std::string points_csv(const std::vector<Point>& pts, const std::vector<std::string>& header = {});

// gen
Files gen_dataset(const std::string& kind, std::size_t n, std::size_t dim, const std::string& oracle,
                  const std::string& manifold, std::uint64_t seed);

// run
struct RunOptions {
  std::string oracle = "quadratic";
  std::size_t dim = 4;
  std::size_t rows = 100;
  std::size_t rounds = 3;
  std::string strategy = "esa";
  std::size_t batch = 50;
  std::size_t verify = 5;
  double budget = 50;
  double t1 = 20, t2 = 10;
  EsaParams esa;
  std::uint64_t seed = 1;
  std::size_t parallelism = 1;
};
/// One JSON line per round, then the final dataset as CSV.
Files run_rounds(const RunOptions& opt);
/// ESA batch against a loaded dataset: proposals as CSV in raw units.
std::string esa_batch_csv(const Dataset& ds, std::size_t agents, const EsaParams& esa, std::uint64_t seed,
                          std::size_t parallelism);

// compare
std::string compare_rows_csv(const CompareResult& r);
std::string compare_stats_csv(const CompareResult& r);
std::string compare_json(const CompareResult& r);

// figdata
Files figdata_fig4(const Fig4Config& cfg);
Files figdata_extrapolation(std::size_t rows, const ExtrapolationConfig& cfg, std::uint64_t seed);
Files figdata_cosmds(std::uint64_t seed);

// scaling
struct ScalingGrid {
  std::vector<std::size_t> d, N, p, n;
  std::size_t repeats = 1;
  std::uint64_t seed = 1;
};
struct ScalingRow {
  std::size_t d, N, p, n;
  double seconds;
};
struct ScalingResult {
  std::vector<ScalingRow> rows;
  // log-log least-squares exponents for every axis with more than one value
  std::vector<std::pair<std::string, double>> exponents;
};
/// Throws DataError when any axis is empty.
ScalingResult run_scaling(const ScalingGrid& grid);
std::string scaling_csv(const ScalingResult& r);

}  // namespace esm::cli
