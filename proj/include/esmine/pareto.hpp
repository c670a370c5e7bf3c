#pragma once

// Two-objective Pareto fronts, the dominance-area reward, and the
// verification budget ledger.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esmine/core.hpp"

namespace esm {

class ParetoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

using Objectives = std::array<double, 2>;

struct ObjectivePair {
  std::array<std::string, 2> names{"f0", "f1"};
  std::array<Orientation, 2> orientation{Orientation::maximize, Orientation::maximize};
  std::array<double, 2> lo{0.0, 0.0};
  std::array<double, 2> hi{1.0, 1.0};

  /// Maps a raw objective value to [0,1] with larger = better.
  double oriented_unit(std::size_t axis, double value) const;
  /// Widens bounds to cover `value`; never shrinks them.
  void expand_to(const Objectives& value);
  void validate() const;
};

/// a dominates b: at least as good everywhere and strictly better somewhere.
bool dominates(const Objectives& a, const Objectives& b, const ObjectivePair& o);

/// Indices of non-dominated points, best first on the oriented first
/// objective. Exact duplicates keep only the lowest index.
std::vector<std::size_t> pareto_front(std::span<const Objectives> points, const ObjectivePair& o);

/// Area of the union of [0,x] x [0,y] over the normalized oriented front
/// points, in [0,1]. Throws ParetoError on degenerate bounds.
double dominance_area(std::span<const std::size_t> front, std::span<const Objectives> points,
                      const ObjectivePair& o);

enum class BoundsMode {
  fixed,    // declared objective bounds; area is monotone under additions
  running,  // bounds track the observed data; area may drop when they widen
};

struct TrackedPoint {
  std::uint64_t id = 0;
  Objectives value{};
  bool estimated = false;
  Provenance provenance = Provenance::seed;
};

struct VerifyOutcome {
  bool accepted = false;
  bool budget_exhausted = false;
  bool already_existing = false;
  bool front_expanded = false;
  double area_before = 0.0;
  double area_after = 0.0;
};

/// Progress tracker state: existing (verified) and proposed points, their
/// fronts, the dominance-area reward and the budget ledger.
class ParetoState {
public:
  ParetoState(ObjectivePair objectives, double budget_cap, BoundsMode mode = BoundsMode::fixed);

  const ObjectivePair& objectives() const { return objectives_; }
  const std::vector<TrackedPoint>& existing() const { return existing_; }
  const std::vector<TrackedPoint>& proposed() const { return proposed_; }
  std::vector<TrackedPoint> front_existing() const;
  std::vector<TrackedPoint> front_proposed() const;
  double dominance_area() const { return area_; }
  double budget_spent() const { return spent_; }
  double budget_cap() const { return cap_; }
  double budget_left() const { return cap_ - spent_; }
  BoundsMode bounds_mode() const { return mode_; }

  /// Seeds existing points without spending budget.
  void add_existing(TrackedPoint p);
  /// Proposed points may carry surrogate estimates.
  void set_proposed(std::vector<TrackedPoint> points);

  /// Moves a measured point into the existing set and charges `cost`.
  /// Refuses (no state change) when the cost would exceed the cap, when
  /// the targets are estimates, or when the id is already existing.
  VerifyOutcome update_on_verify(TrackedPoint measured, double cost = 1.0);

  /// Area if `extra` were added to the existing set, without mutating.
  double area_with(const Objectives& extra) const;

private:
  void recompute();

  ObjectivePair objectives_;
  BoundsMode mode_;
  double cap_;
  double spent_ = 0.0;
  double area_ = 0.0;
  std::vector<TrackedPoint> existing_;
  std::vector<TrackedPoint> proposed_;
};

}  // namespace esm
