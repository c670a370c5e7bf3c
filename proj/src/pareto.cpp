#include "esmine/pareto.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace esm {

namespace {

double oriented(const ObjectivePair& o, std::size_t axis, double v) {
  return o.orientation[axis] == Orientation::maximize ? v : -v;
}

}  // namespace

double ObjectivePair::oriented_unit(std::size_t axis, double value) const {
  const double u = std::clamp((value - lo[axis]) / (hi[axis] - lo[axis]), 0.0, 1.0);
  return orientation[axis] == Orientation::maximize ? u : 1.0 - u;
}

void ObjectivePair::expand_to(const Objectives& value) {
  for (std::size_t a = 0; a < 2; ++a) {
    lo[a] = std::min(lo[a], value[a]);
    hi[a] = std::max(hi[a], value[a]);
  }
}

void ObjectivePair::validate() const {
  for (std::size_t a = 0; a < 2; ++a) {
    if (!(lo[a] < hi[a]) || !std::isfinite(lo[a]) || !std::isfinite(hi[a])) {
      throw ParetoError("objective '" + names[a] + "' has degenerate bounds");
    }
  }
}

bool dominates(const Objectives& a, const Objectives& b, const ObjectivePair& o) {
  bool strict = false;
  for (std::size_t k = 0; k < 2; ++k) {
    const double x = oriented(o, k, a[k]);
    const double y = oriented(o, k, b[k]);
    if (x < y) return false;
    if (x > y) strict = true;
  }
  return strict;
}

std::vector<std::size_t> pareto_front(std::span<const Objectives> points, const ObjectivePair& o) {
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double a0 = oriented(o, 0, points[a][0]);
    const double b0 = oriented(o, 0, points[b][0]);
    if (a0 != b0) return a0 > b0;
    const double a1 = oriented(o, 1, points[a][1]);
    const double b1 = oriented(o, 1, points[b][1]);
    if (a1 != b1) return a1 > b1;
    return a < b;
  });
  // Sweeping best-first on objective 0, a point survives only if it beats
  // every earlier point on objective 1.
  std::vector<std::size_t> front;
  double best = -std::numeric_limits<double>::infinity();
  for (std::size_t idx : order) {
    const double v = oriented(o, 1, points[idx][1]);
    if (v > best) {
      front.push_back(idx);
      best = v;
    }
  }
  return front;
}

double dominance_area(std::span<const std::size_t> front, std::span<const Objectives> points,
                      const ObjectivePair& o) {
  o.validate();
  std::vector<std::array<double, 2>> unit;
  unit.reserve(front.size());
  for (std::size_t idx : front) {
    unit.push_back({o.oriented_unit(0, points[idx][0]), o.oriented_unit(1, points[idx][1])});
  }
  std::sort(unit.begin(), unit.end(), [](const auto& a, const auto& b) {
    return a[0] > b[0] || (a[0] == b[0] && a[1] > b[1]);
  });
  double area = 0.0;
  double covered = 0.0;
  for (const auto& u : unit) {
    if (u[1] > covered) {
      area += u[0] * (u[1] - covered);
      covered = u[1];
    }
  }
  return area;
}

ParetoState::ParetoState(ObjectivePair objectives, double budget_cap, BoundsMode mode)
    : objectives_(std::move(objectives)), mode_(mode), cap_(budget_cap) {
  objectives_.validate();
  if (!(budget_cap >= 0.0)) throw ParetoError("budget cap must be non-negative");
}

namespace {

std::vector<TrackedPoint> select_front(const std::vector<TrackedPoint>& pts,
                                       const ObjectivePair& o) {
  std::vector<Objectives> vals;
  vals.reserve(pts.size());
  for (const auto& p : pts) vals.push_back(p.value);
  std::vector<TrackedPoint> out;
  for (std::size_t idx : pareto_front(vals, o)) out.push_back(pts[idx]);
  return out;
}

}  // namespace

std::vector<TrackedPoint> ParetoState::front_existing() const {
  return select_front(existing_, objectives_);
}

std::vector<TrackedPoint> ParetoState::front_proposed() const {
  return select_front(proposed_, objectives_);
}

void ParetoState::add_existing(TrackedPoint p) {
  if (p.estimated) throw ParetoError("estimated targets cannot join the existing set");
  existing_.push_back(p);
  if (mode_ == BoundsMode::running) objectives_.expand_to(p.value);
  recompute();
}

void ParetoState::set_proposed(std::vector<TrackedPoint> points) { proposed_ = std::move(points); }

VerifyOutcome ParetoState::update_on_verify(TrackedPoint measured, double cost) {
  VerifyOutcome out;
  out.area_before = area_;
  out.area_after = area_;
  for (const auto& e : existing_) {
    if (e.id == measured.id) {
      out.already_existing = true;
      return out;
    }
  }
  if (measured.estimated) throw ParetoError("verification needs measured, not estimated, targets");
  if (spent_ + cost > cap_ + 1e-12) {
    out.budget_exhausted = true;
    return out;
  }
  spent_ += cost;
  existing_.push_back(measured);
  std::erase_if(proposed_, [&](const TrackedPoint& p) { return p.id == measured.id; });
  if (mode_ == BoundsMode::running) objectives_.expand_to(measured.value);
  recompute();
  const auto after = front_existing();
  out.accepted = true;
  out.area_after = area_;
  out.front_expanded = std::any_of(after.begin(), after.end(),
                                   [&](const TrackedPoint& p) { return p.id == measured.id; });
  return out;
}

double ParetoState::area_with(const Objectives& extra) const {
  std::vector<Objectives> vals;
  for (const auto& p : existing_) vals.push_back(p.value);
  vals.push_back(extra);
  ObjectivePair o = objectives_;
  if (mode_ == BoundsMode::running) o.expand_to(extra);
  const auto front = pareto_front(vals, o);
  return esm::dominance_area(front, vals, o);
}

void ParetoState::recompute() {
  std::vector<Objectives> vals;
  for (const auto& p : existing_) vals.push_back(p.value);
  if (vals.empty()) {
    area_ = 0.0;
    return;
  }
  const auto front = pareto_front(vals, objectives_);
  area_ = esm::dominance_area(front, vals, objectives_);
}

}  // namespace esm
