#pragma once

// Dataset, configuration, constraint and normalization types shared by the
// search engine, projections, Pareto tracking and the surrogate.
//
// All geometry runs on min-max normalized inputs in [0,1]^d. The
// normalization bounds are taken from the seed dataset and frozen; a value
// outside the seed range is clamped for indexing while its raw value is kept.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace esm {

using Point = std::vector<double>;

/// Error raised for malformed input data (bad dimensions, bad ranges, ...).
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class VariableKind { input, target };
enum class Orientation { maximize, minimize };

struct VariableSpec {
  std::string name;
  double min = 0.0;
  double max = 1.0;
  VariableKind kind = VariableKind::input;
  Orientation orientation = Orientation::maximize;  // targets only
};

enum class Status { existing, proposed };

enum class Provenance {
  seed,
  esa,
  random_sample,
  random_walk,
  pareto_improvement,
  blank,
  user_edited,
  gradient_refined,
};

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);
std::string to_string(Status s);

struct Configuration {
  std::uint64_t id = 0;
  Point values;                  // normalized inputs, each in [0,1]
  Point raw;                     // raw inputs; may lie outside the seed range
  std::optional<Point> targets;  // raw units, one per target variable
  bool targets_estimated = false;
  Status status = Status::proposed;
  Provenance provenance = Provenance::seed;
  double cost = 1.0;

  /// proposed -> existing. Throws if targets are missing or estimated.
  void mark_verified(Point measured);
};

/// Per-variable affine map raw <-> [0,1].
struct AffineMap {
  double lo = 0.0;
  double hi = 1.0;
  double to_unit(double x) const { return (x - lo) / (hi - lo); }
  double from_unit(double u) const { return lo + u * (hi - lo); }
};

struct NormalizedPoint {
  Point values;
  std::vector<bool> clamped;
  bool any_clamped() const;
};

/// Immutable snapshot of the working data. Adding rows produces a new
/// snapshot with an incremented version.
class Dataset {
public:
  Dataset() = default;
  /// Validates variable specs: unique names, min < max.
  explicit Dataset(std::vector<VariableSpec> variables);

  const std::vector<VariableSpec>& variables() const { return variables_; }
  const std::vector<VariableSpec>& inputs() const { return inputs_; }
  const std::vector<VariableSpec>& targets() const { return targets_; }
  std::size_t dim() const { return inputs_.size(); }
  std::size_t target_count() const { return targets_.size(); }
  const std::vector<AffineMap>& normalization() const { return maps_; }

  const std::vector<Configuration>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  std::uint64_t version() const { return version_; }

  std::optional<std::size_t> target_index(const std::string& name) const;
  std::optional<std::size_t> input_index(const std::string& name) const;

  NormalizedPoint normalize(std::span<const double> raw) const;
  Point denormalize(std::span<const double> unit) const;

  /// Builds a row from raw inputs. Normalized values are clamped.
  Configuration make_row(std::span<const double> raw, std::optional<Point> targets,
                         Status status, Provenance provenance) const;
  /// Builds a row from normalized inputs (raw is derived).
  Configuration make_row_normalized(std::span<const double> unit, std::optional<Point> targets,
                                    Status status, Provenance provenance) const;

  /// New snapshot with the extra rows appended. Row ids are assigned when 0.
  Dataset with_rows(std::vector<Configuration> extra) const;

  /// Row with this id, or nullptr.
  const Configuration* find(std::uint64_t id) const;
  /// New snapshot with the row of the same id replaced. Existing rows cannot
  /// go back to proposed.
  Dataset with_updated(Configuration row) const;

  /// Normalized input points of the existing rows, in row order.
  std::vector<Point> existing_points() const;
  std::vector<std::size_t> existing_row_indices() const;

private:
  std::vector<VariableSpec> variables_;
  std::vector<VariableSpec> inputs_;
  std::vector<VariableSpec> targets_;
  std::vector<AffineMap> maps_;
  std::vector<Configuration> rows_;
  std::uint64_t version_ = 0;
  std::uint64_t next_id_ = 1;
};

enum class ConstraintKind { box, halfspace, interval_brush };

/// A constraint f(p) <= 0 on a normalized point.
///  - box: lower/upper bounds per coordinate
///  - halfspace: coefficients . p + offset <= 0
///  - interval_brush: lower <= p[variable] <= upper
struct Constraint {
  ConstraintKind kind = ConstraintKind::halfspace;
  std::vector<double> coefficients;  // halfspace
  double offset = 0.0;               // halfspace
  std::vector<double> lower;         // box
  std::vector<double> upper;         // box
  std::size_t variable = 0;          // interval_brush
  double lo = 0.0;                   // interval_brush
  double hi = 1.0;                   // interval_brush

  static Constraint halfspace(std::vector<double> coefficients, double offset);
  static Constraint box(std::vector<double> lower, std::vector<double> upper);
  static Constraint brush(std::size_t variable, double lo, double hi);

  /// f(p); satisfied when <= 0.
  double value(std::span<const double> p) const;
};

/// Result of checking a point. `unit_box` set means the implicit [0,1]^d
/// box failed; otherwise `index` names the first violated user constraint.
struct Violation {
  bool unit_box = false;
  std::size_t index = 0;
  bool operator==(const Violation&) const = default;
};

/// Checks the unit box first, then the user constraints in order.
std::optional<Violation> evaluate_constraints(std::span<const Constraint> constraints,
                                              std::span<const double> p);

inline bool satisfies(std::span<const Constraint> constraints, std::span<const double> p) {
  return !evaluate_constraints(constraints, p).has_value();
}

double squared_distance(std::span<const double> a, std::span<const double> b);
double distance(std::span<const double> a, std::span<const double> b);
double norm(std::span<const double> v);

}  // namespace esm
