#pragma once

// Dataset ingestion (CSV + JSON manifest), CSV writing, synthetic dataset
// generators, and the registry of analytic verification oracles.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esmine/core.hpp"

namespace esm {

// ---------------------------------------------------------------------------
// CSV + manifest

struct ColumnManifest {
  std::string name;
  VariableKind kind = VariableKind::input;
  Orientation orientation = Orientation::maximize;
  std::optional<double> min;
  std::optional<double> max;
};

struct Manifest {
  std::vector<ColumnManifest> columns;
  std::optional<std::string> cost_column;  // per-row verification cost

  static Manifest parse(const std::string& json_text);
  static Manifest load(const std::filesystem::path& path);
  std::string to_json() const;
};

/// Parses CSV text. Errors cite (row, column) for bad cells and name the
/// column for constant columns. Rows become existing seed configurations.
Dataset parse_csv(const std::string& text, const Manifest& manifest);
Dataset load_csv(const std::filesystem::path& path, const Manifest& manifest);

/// Raw inputs then targets (blank cells for absent targets), shortest
/// round-trip number formatting.
std::string to_csv(const Dataset& ds);
void write_csv(const std::filesystem::path& path, const Dataset& ds);
Manifest manifest_for(const Dataset& ds);
/// Existing rows only, ids reassigned; what gets written when a session is saved.
Dataset existing_subset(const Dataset& ds);

std::string format_double(double v);

// ---------------------------------------------------------------------------
// Synthetic datasets

enum class ManifoldKind { hyperboloid3d, paraboloid4d, hypersphere4d };

ManifoldKind manifold_from_string(const std::string& s);
std::string to_string(ManifoldKind k);

struct ManifoldData {
  std::vector<Point> points;  // raw coordinates, not normalized
  Point agent;
};

/// hyperboloid3d: 30 x 30 grid on [-1,1]^2, z = +-2 sqrt(x^2/0.04 + y^2/0.04 + 1),
///   sheet alternating in a checkerboard over the grid (900 points); agent at 0.
/// paraboloid4d: 10 x 10 x 10 grid on [-5,5]^3 mapped to (x, y, z, z^2); agent (0,0,0,20).
/// hypersphere4d: 1000 uniformly sampled angle triples on the unit 3-sphere; agent at 0.
ManifoldData gen_manifold(ManifoldKind kind, std::uint64_t seed = 1);

/// Wraps raw points as a dataset of input variables x0..x{d-1} with the
/// given bounds (data bounds when unset).
Dataset dataset_from_points(std::span<const Point> raw,
                            std::optional<std::pair<double, double>> bounds = std::nullopt);

/// n uniform points in [0,1]^2.
Dataset gen_demo2d(std::size_t n = 300, std::uint64_t seed = 1);

/// 11 skewed, correlated inputs and an integer quality target 3..8 with
/// the class counts of the classic red-wine table (scaled to n).
Dataset gen_wine_like(std::size_t n = 1599, std::uint64_t seed = 1);

// ---------------------------------------------------------------------------
// Verification oracles

struct Measurement {
  Point targets;
  double cost = 1.0;
};

/// Ground truth for proposed configurations: normalized input point ->
/// measured targets. Two targets, matching the two-objective Pareto view.
class VerificationOracle {
public:
  virtual ~VerificationOracle() = default;
  virtual std::string name() const = 0;
  virtual std::size_t dim() const = 0;
  /// Target variable specs (name, bounds, orientation).
  virtual std::vector<VariableSpec> targets() const = 0;
  virtual Measurement measure(std::span<const double> unit_point) const = 0;

  /// Scalar quality: mean of the two objectives mapped to [0,1], larger is
  /// better. Used to pick the best point along a trajectory.
  double score(std::span<const double> targets) const;
  /// Input variable specs x0..x{d-1} on [0,1].
  std::vector<VariableSpec> inputs() const;
  /// Empty dataset carrying this oracle's variables.
  Dataset empty_dataset() const;
};

/// "quadratic", "multimodal", "linear-noise".
std::unique_ptr<VerificationOracle> make_oracle(const std::string& name, std::size_t dim,
                                                std::uint64_t seed = 1);
std::vector<std::string> oracle_names();

/// Seeds a dataset with `n` uniform random rows measured by the oracle.
Dataset seed_dataset(const VerificationOracle& oracle, std::size_t n, std::uint64_t seed);

}  // namespace esm
