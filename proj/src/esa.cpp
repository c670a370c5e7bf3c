#include "esmine/esa.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <thread>

#include "esmine/rng.hpp"

namespace esm {

double lj_potential(double r, double epsilon, double sigma) {
  if (!(r > 0.0)) throw std::domain_error("Lennard-Jones potential needs r > 0");
  const double s6 = std::pow(sigma / r, 6);
  return 4.0 * epsilon * (s6 * s6 - s6);
}

// -dV/dr, so that a positive value pushes the pair apart.
double lj_force_magnitude(double r, double epsilon, double sigma) {
  if (!(r > 0.0)) throw std::domain_error("Lennard-Jones force needs r > 0");
  const double q = sigma / r;
  const double q6 = std::pow(q, 6);
  const double q7 = q6 * q;
  const double q13 = q6 * q7;
  return 24.0 * (epsilon / sigma) * (2.0 * q13 - q7);
}

void EsaParams::validate() const {
  if (k < 1) throw DataError("esa: k must be >= 1");
  if (n < 1) throw DataError("esa: n must be >= 1");
  if (!(alpha > 0.0)) throw DataError("esa: alpha must be > 0");
  if (!(delta > 0.0)) throw DataError("esa: delta must be > 0");
  if (j < 1) throw DataError("esa: j must be >= 1");
  if (!(gamma >= 0.0 && gamma < 1.0)) throw DataError("esa: gamma must be in [0,1)");
  if (!(epsilon > 0.0)) throw DataError("esa: epsilon must be > 0");
  if (sigma_mode == SigmaMode::fixed && !(sigma > 0.0)) throw DataError("esa: sigma must be > 0");
}

double effective_sigma(const NeighborSet& ns, const EsaParams& params) {
  if (params.sigma_mode == SigmaMode::fixed || ns.empty()) return params.sigma;
  double s = 0.0;
  for (double d : ns.distances) s += d;
  return s / static_cast<double>(ns.size());
}

Resultant resultant(std::span<const double> p, const NeighborSet& ns, const EsaParams& params) {
  Resultant out;
  out.force.assign(p.size(), 0.0);
  if (ns.empty()) return out;
  const double sigma = effective_sigma(ns, params);
  for (std::size_t i = 0; i < ns.size(); ++i) {
    const double f = lj_force_magnitude(ns.distances[i], params.epsilon, sigma);
    const auto& u = ns.unit_vectors[i];
    for (std::size_t a = 0; a < p.size(); ++a) out.force[a] -= u[a] * f;
  }
  out.magnitude = norm(out.force);
  if (out.magnitude >= params.delta) {
    Point d(out.force);
    for (auto& x : d) x /= out.magnitude;
    out.direction = std::move(d);
  }
  return out;
}

AgentState AgentState::at(Point start) {
  AgentState s;
  s.momentum.assign(start.size(), 0.0);
  s.position = std::move(start);
  return s;
}

const char* to_string(Termination t) {
  switch (t) {
    case Termination::running: return "running";
    case Termination::vanished: return "vanished";
    case Termination::constraint_violated: return "constraint-violated";
    case Termination::step_limit: return "step-limit";
  }
  return "running";
}

Point blend_direction(std::span<const double> d, double magnitude,
                      std::span<const double> momentum, double cumulative) {
  Point out(d.begin(), d.end());
  if (cumulative == 0.0) return out;
  const double total = cumulative + magnitude;
  for (std::size_t a = 0; a < out.size(); ++a)
    out[a] = (d[a] * magnitude + momentum[a] * cumulative) / total;
  return out;
}

StepOutcome step(const AgentState& state, const KdTree& index, const EsaParams& params) {
  StepOutcome out;
  out.state = state;
  const NeighborSet ns = index.query(state.position, params.k);
  out.sigma = effective_sigma(ns, params);
  out.nearest_distance = ns.empty() ? 0.0 : ns.distances.front();
  const Resultant res = resultant(state.position, ns, params);
  out.force_magnitude = res.magnitude;
  if (!res.direction) {
    out.termination = Termination::vanished;
    return out;
  }

  Point moved = blend_direction(*res.direction, res.magnitude, state.momentum, state.cumulative);
  if (params.renormalize_direction) {
    const double len = norm(moved);
    if (len > 0.0)
      for (auto& x : moved) x /= len;
  }

  AgentState next = state;
  for (std::size_t a = 0; a < moved.size(); ++a) next.position[a] += moved[a] * params.alpha;
  // Momentum is stored already discounted, so gamma = 0 leaves L = 0 and
  // the next blend reduces to the bare force direction.
  next.cumulative = params.gamma * (state.cumulative + res.magnitude);
  for (std::size_t a = 0; a < moved.size(); ++a)
    next.momentum[a] = params.gamma * state.momentum[a] + moved[a];
  const double mlen = norm(next.momentum);
  if (mlen > 0.0) {
    for (auto& x : next.momentum) x /= mlen;
  } else {
    std::fill(next.momentum.begin(), next.momentum.end(), 0.0);
  }
  next.step = state.step + 1;

  out.violation = evaluate_constraints(params.constraints, next.position);
  if (out.violation) {
    out.termination = Termination::constraint_violated;
    return out;
  }
  out.state = std::move(next);
  return out;
}

Trajectory run_agent(std::span<const double> start, const KdTree& index, const EsaParams& params) {
  params.validate();
  if (start.size() != index.dim()) {
    throw DataError("agent start has " + std::to_string(start.size()) +
                    " coordinates, index has " + std::to_string(index.dim()));
  }
  if (evaluate_constraints(params.constraints, start)) {
    throw DataError("agent start lies outside the unit box or violates a constraint");
  }

  Trajectory traj;
  AgentState state = AgentState::at(Point(start.begin(), start.end()));
  auto finish = [&](Termination why) {
    traj.termination = why;
    traj.steps_taken = state.step;
    if (traj.samples.empty() || traj.samples.back().step != state.step) {
      traj.samples.push_back({state.step, state.position, state.step == 0, true});
    }
    return traj;
  };

  for (std::size_t i = 0; i < params.n; ++i) {
    if (i % params.j == 0) traj.samples.push_back({i, state.position, i == 0, false});
    StepOutcome out = step(state, index, params);
    traj.final_force = out.force_magnitude;
    traj.final_sigma = out.sigma;
    traj.final_nearest_distance = out.nearest_distance;
    if (out.termination != Termination::running) return finish(out.termination);
    state = std::move(out.state);
  }
  Trajectory done = finish(Termination::step_limit);
  if (params.n % params.j == 0) done.samples.back().is_terminal = false;
  return done;
}

std::vector<Trajectory> run_batch(std::span<const Point> starts, const KdTree& index,
                                  const EsaParams& params, std::size_t parallelism) {
  params.validate();
  std::vector<Trajectory> out(starts.size());
  if (starts.empty()) return out;
  for (const auto& s : starts) {
    if (s.size() != index.dim() || evaluate_constraints(params.constraints, s)) {
      throw DataError("batch contains an invalid agent start");
    }
  }
  const std::size_t workers = std::clamp<std::size_t>(parallelism, 1, starts.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < starts.size(); ++i) out[i] = run_agent(starts[i], index, params);
    return out;
  }
  std::atomic<std::size_t> next{0};
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < starts.size(); i = next++)
          out[i] = run_agent(starts[i], index, params);
      });
    }
  }
  return out;
}

std::vector<Point> random_starts(std::size_t count, std::size_t dim, std::uint64_t seed,
                                 std::span<const Constraint> constraints) {
  std::vector<Point> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Rng rng = Rng::stream(seed, i);
    Point p = rng.uniform_point(dim);
    std::size_t tries = 1;
    while (evaluate_constraints(constraints, p)) {
      if (++tries > 10000) throw DataError("constraints reject almost every start position");
      p = rng.uniform_point(dim);
    }
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<std::size_t> anti_hubs(const KdTree& index, std::size_t count, std::size_t k) {
  std::vector<double> mean_dist(index.size(), 0.0);
  for (std::size_t id = 0; id < index.size(); ++id) {
    const NeighborSet ns = index.query(index.point(id), k);
    if (ns.empty()) continue;
    mean_dist[id] = std::accumulate(ns.distances.begin(), ns.distances.end(), 0.0) /
                    static_cast<double>(ns.size());
  }
  std::vector<std::size_t> ids(index.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::stable_sort(ids.begin(), ids.end(),
                   [&](std::size_t a, std::size_t b) { return mean_dist[a] > mean_dist[b]; });
  ids.resize(std::min(count, ids.size()));
  return ids;
}

}  // namespace esm
