#pragma once

// Lennard-Jones empty-space search.
//
// An agent is pushed away from data points that are closer than the
// potential minimum and pulled back toward points that are farther. It
// follows the resultant force over its k nearest neighbors, optionally
// blended with a discounted momentum of past directions, until the force
// vanishes, a constraint is violated, or the step budget runs out.
//
// Force sign convention: lj_force_magnitude() > 0 means repulsion. With u_i
// the unit vector from the agent toward neighbor i, the resultant is
// sum_i -u_i * F(r_i), so a neighbor inside the well pushes the agent away.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "esmine/core.hpp"
#include "esmine/knn.hpp"

namespace esm {

double lj_potential(double r, double epsilon, double sigma);
double lj_force_magnitude(double r, double epsilon, double sigma);

enum class SigmaMode { fixed, mean_knn };

struct EsaParams {
  std::size_t k = 9;
  SigmaMode sigma_mode = SigmaMode::mean_knn;
  double sigma = 0.05;  // used when sigma_mode == fixed
  double epsilon = 1.0;
  std::size_t n = 400;
  double alpha = 0.001;
  double gamma = 0.9;
  double delta = 1e-7;
  std::size_t j = 10;
  std::vector<Constraint> constraints;
  bool renormalize_direction = false;  // experimental: unit-length moves

  /// Throws DataError when a field is out of range.
  void validate() const;
};

double effective_sigma(const NeighborSet& ns, const EsaParams& params);

struct Resultant {
  std::optional<Point> direction;  // unset when magnitude < delta
  double magnitude = 0.0;
  Point force;  // the raw summed vector
};

Resultant resultant(std::span<const double> p, const NeighborSet& ns, const EsaParams& params);

struct AgentState {
  Point position;
  Point momentum;  // unit or zero
  double cumulative = 0.0;
  std::size_t step = 0;

  static AgentState at(Point start);
};

enum class Termination { running, vanished, constraint_violated, step_limit };

const char* to_string(Termination t);

struct StepOutcome {
  AgentState state;  // unchanged position when terminated
  Termination termination = Termination::running;
  double force_magnitude = 0.0;
  double sigma = 0.0;
  double nearest_distance = 0.0;
  std::optional<Violation> violation;
};

/// Direction actually moved this step: (d*|F| + m*L) / (L + |F|).
/// With L == 0 the momentum term is skipped and d is returned unchanged.
Point blend_direction(std::span<const double> d, double magnitude,
                      std::span<const double> momentum, double cumulative);

StepOutcome step(const AgentState& state, const KdTree& index, const EsaParams& params);

struct TrajectorySample {
  std::size_t step = 0;
  Point position;
  bool is_start = false;     // step 0, the random initial coordinate
  bool is_terminal = false;  // appended because the run ended off the j grid
};

struct Trajectory {
  std::vector<TrajectorySample> samples;
  Termination termination = Termination::step_limit;
  std::size_t steps_taken = 0;
  // Context at termination: separates "converged inside a pocket" from
  // "left the data manifold" for downstream filtering.
  double final_force = 0.0;
  double final_sigma = 0.0;
  double final_nearest_distance = 0.0;

  const Point& end() const { return samples.back().position; }
};

/// Throws DataError if the start is outside the box or violates a constraint.
Trajectory run_agent(std::span<const double> start, const KdTree& index, const EsaParams& params);

/// Runs agents independently across `parallelism` worker threads. Output
/// order follows `starts` and does not depend on the thread count.
std::vector<Trajectory> run_batch(std::span<const Point> starts, const KdTree& index,
                                  const EsaParams& params, std::size_t parallelism = 1);

/// Uniform random starts in the unit box satisfying the constraints; start
/// i is drawn from stream (seed, i).
std::vector<Point> random_starts(std::size_t count, std::size_t dim, std::uint64_t seed,
                                 std::span<const Constraint> constraints = {});

/// Ids of the `count` points with the largest mean distance to their k
/// nearest neighbors (ties by ascending id).
std::vector<std::size_t> anti_hubs(const KdTree& index, std::size_t count, std::size_t k);

}  // namespace esm
