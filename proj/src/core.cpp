#include "esmine/core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace esm {

std::string to_string(Provenance p) {
  switch (p) {
    case Provenance::seed: return "seed";
    case Provenance::esa: return "esa";
    case Provenance::random_sample: return "random-sample";
    case Provenance::random_walk: return "random-walk";
    case Provenance::pareto_improvement: return "pareto-improvement";
    case Provenance::blank: return "blank";
    case Provenance::user_edited: return "user-edited";
    case Provenance::gradient_refined: return "gradient-refined";
  }
  return "seed";
}

Provenance provenance_from_string(const std::string& s) {
  for (auto p : {Provenance::seed, Provenance::esa, Provenance::random_sample,
                 Provenance::random_walk, Provenance::pareto_improvement, Provenance::blank,
                 Provenance::user_edited, Provenance::gradient_refined}) {
    if (to_string(p) == s) return p;
  }
  throw DataError("unknown provenance '" + s + "'");
}

std::string to_string(Status s) { return s == Status::existing ? "existing" : "proposed"; }

void Configuration::mark_verified(Point measured) {
  targets = std::move(measured);
  targets_estimated = false;
  status = Status::existing;
}

bool NormalizedPoint::any_clamped() const {
  return std::find(clamped.begin(), clamped.end(), true) != clamped.end();
}

Dataset::Dataset(std::vector<VariableSpec> variables) : variables_(std::move(variables)) {
  std::set<std::string> names;
  for (const auto& v : variables_) {
    if (!names.insert(v.name).second) throw DataError("duplicate variable name '" + v.name + "'");
    if (!(v.min < v.max)) {
      throw DataError("variable '" + v.name + "' has an empty range (min must be < max)");
    }
    if (v.kind == VariableKind::input) {
      inputs_.push_back(v);
      maps_.push_back({v.min, v.max});
    } else {
      targets_.push_back(v);
    }
  }
}

std::optional<std::size_t> Dataset::target_index(const std::string& name) const {
  for (std::size_t i = 0; i < targets_.size(); ++i)
    if (targets_[i].name == name) return i;
  return std::nullopt;
}

std::optional<std::size_t> Dataset::input_index(const std::string& name) const {
  for (std::size_t i = 0; i < inputs_.size(); ++i)
    if (inputs_[i].name == name) return i;
  return std::nullopt;
}

NormalizedPoint Dataset::normalize(std::span<const double> raw) const {
  if (raw.size() != dim()) {
    throw DataError("dimension mismatch: expected " + std::to_string(dim()) +
                    " input variables, got " + std::to_string(raw.size()));
  }
  NormalizedPoint out{Point(raw.size()), std::vector<bool>(raw.size(), false)};
  for (std::size_t i = 0; i < raw.size(); ++i) {
    double u = maps_[i].to_unit(raw[i]);
    if (u < 0.0 || u > 1.0) {
      out.clamped[i] = true;
      u = std::clamp(u, 0.0, 1.0);
    }
    out.values[i] = u;
  }
  return out;
}

Point Dataset::denormalize(std::span<const double> unit) const {
  if (unit.size() != dim()) {
    throw DataError("dimension mismatch: expected " + std::to_string(dim()) +
                    " input variables, got " + std::to_string(unit.size()));
  }
  Point out(unit.size());
  for (std::size_t i = 0; i < unit.size(); ++i) out[i] = maps_[i].from_unit(unit[i]);
  return out;
}

Configuration Dataset::make_row(std::span<const double> raw, std::optional<Point> targets,
                                Status status, Provenance provenance) const {
  if (targets && targets->size() != target_count()) {
    throw DataError("expected " + std::to_string(target_count()) + " target values, got " +
                    std::to_string(targets->size()));
  }
  if (status == Status::existing && !targets) {
    throw DataError("an existing configuration needs measured targets");
  }
  Configuration c;
  c.values = normalize(raw).values;
  c.raw.assign(raw.begin(), raw.end());
  c.targets = std::move(targets);
  c.status = status;
  c.provenance = provenance;
  return c;
}

Configuration Dataset::make_row_normalized(std::span<const double> unit,
                                           std::optional<Point> targets, Status status,
                                           Provenance provenance) const {
  Point raw = denormalize(unit);
  Configuration c = make_row(raw, std::move(targets), status, provenance);
  c.values.assign(unit.begin(), unit.end());
  for (auto& v : c.values) v = std::clamp(v, 0.0, 1.0);
  return c;
}

Dataset Dataset::with_rows(std::vector<Configuration> extra) const {
  Dataset next = *this;
  for (auto& row : extra) {
    if (row.values.size() != dim()) {
      throw DataError("row has " + std::to_string(row.values.size()) + " inputs, dataset has " +
                      std::to_string(dim()));
    }
    if (row.id == 0) row.id = next.next_id_;
    next.next_id_ = std::max(next.next_id_, row.id + 1);
    next.rows_.push_back(std::move(row));
  }
  ++next.version_;
  return next;
}

const Configuration* Dataset::find(std::uint64_t id) const {
  for (const auto& r : rows_)
    if (r.id == id) return &r;
  return nullptr;
}

Dataset Dataset::with_updated(Configuration row) const {
  Dataset next = *this;
  for (auto& r : next.rows_) {
    if (r.id != row.id) continue;
    if (r.status == Status::existing && row.status == Status::proposed)
      throw DataError("row " + std::to_string(row.id) + " is existing and cannot become proposed");
    if (row.values.size() != dim()) throw DataError("updated row has the wrong dimension");
    r = std::move(row);
    ++next.version_;
    return next;
  }
  throw DataError("no row with id " + std::to_string(row.id));
}

std::vector<Point> Dataset::existing_points() const {
  std::vector<Point> out;
  for (const auto& r : rows_)
    if (r.status == Status::existing) out.push_back(r.values);
  return out;
}

std::vector<std::size_t> Dataset::existing_row_indices() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < rows_.size(); ++i)
    if (rows_[i].status == Status::existing) out.push_back(i);
  return out;
}

Constraint Constraint::halfspace(std::vector<double> coefficients, double offset) {
  Constraint c;
  c.kind = ConstraintKind::halfspace;
  c.coefficients = std::move(coefficients);
  c.offset = offset;
  return c;
}

Constraint Constraint::box(std::vector<double> lower, std::vector<double> upper) {
  if (lower.size() != upper.size()) throw DataError("box bounds differ in dimension");
  Constraint c;
  c.kind = ConstraintKind::box;
  c.lower = std::move(lower);
  c.upper = std::move(upper);
  return c;
}

Constraint Constraint::brush(std::size_t variable, double lo, double hi) {
  if (!(lo <= hi) || lo < 0.0 || hi > 1.0) {
    throw DataError("brush interval must satisfy 0 <= lo <= hi <= 1");
  }
  Constraint c;
  c.kind = ConstraintKind::interval_brush;
  c.variable = variable;
  c.lo = lo;
  c.hi = hi;
  return c;
}

double Constraint::value(std::span<const double> p) const {
  switch (kind) {
    case ConstraintKind::halfspace: {
      double s = offset;
      for (std::size_t i = 0; i < coefficients.size() && i < p.size(); ++i)
        s += coefficients[i] * p[i];
      return s;
    }
    case ConstraintKind::box: {
      double worst = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < lower.size() && i < p.size(); ++i) {
        worst = std::max(worst, lower[i] - p[i]);
        worst = std::max(worst, p[i] - upper[i]);
      }
      return worst;
    }
    case ConstraintKind::interval_brush: {
      if (variable >= p.size()) return 0.0;
      return std::max(lo - p[variable], p[variable] - hi);
    }
  }
  return 0.0;
}

std::optional<Violation> evaluate_constraints(std::span<const Constraint> constraints,
                                              std::span<const double> p) {
  for (double x : p) {
    if (!(x >= 0.0 && x <= 1.0)) return Violation{true, 0};
  }
  for (std::size_t i = 0; i < constraints.size(); ++i) {
    if (constraints[i].value(p) > 0.0) return Violation{false, i};
  }
  return std::nullopt;
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double t = a[i] - b[i];
    s += t * t;
  }
  return s;
}

double distance(std::span<const double> a, std::span<const double> b) {
  return std::sqrt(squared_distance(a, b));
}

double norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace esm
