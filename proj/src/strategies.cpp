#include "esmine/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "json.hpp"

#include "esmine/knn.hpp"
#include "esmine/stats.hpp"

namespace esm {

using nlohmann::json;

std::string to_string(Strategy s) {
  switch (s) {
    case Strategy::esa: return "esa";
    case Strategy::random_sampling: return "random-sampling";
    case Strategy::random_walk: return "random-walk";
    case Strategy::pareto_improvement: return "pareto-improvement";
    case Strategy::blank: return "blank";
  }
  return "esa";
}

Strategy strategy_from_string(const std::string& s) {
  if (s == "esa") return Strategy::esa;
  if (s == "random-sampling" || s == "rs") return Strategy::random_sampling;
  if (s == "random-walk" || s == "rw") return Strategy::random_walk;
  if (s == "pareto-improvement") return Strategy::pareto_improvement;
  if (s == "blank") return Strategy::blank;
  throw DataError("unknown strategy '" + s + "'");
}

Provenance provenance_of(Strategy s) {
  switch (s) {
    case Strategy::esa: return Provenance::esa;
    case Strategy::random_sampling: return Provenance::random_sample;
    case Strategy::random_walk: return Provenance::random_walk;
    case Strategy::pareto_improvement: return Provenance::pareto_improvement;
    case Strategy::blank: return Provenance::blank;
  }
  return Provenance::esa;
}

namespace {

Configuration proposal(Point values, Provenance prov) {
  Configuration c;
  c.values = std::move(values);
  c.status = Status::proposed;
  c.provenance = prov;
  return c;
}

constexpr std::uint64_t kWalkSalt = 0x57A1CULL;

}  // namespace

ProposalBatch random_sampling(std::size_t d, std::size_t size, std::uint64_t seed,
                              std::span<const Constraint> constraints) {
  ProposalBatch b;
  b.strategy = Provenance::random_sample;
  b.batch_size = size;
  b.seed = seed;
  for (auto& p : random_starts(size, d, seed, constraints))
    b.configurations.push_back(proposal(std::move(p), Provenance::random_sample));
  return b;
}

Trajectory random_walk_path(std::span<const double> start, const WalkParams& params, Rng& rng) {
  Trajectory t;
  Point pos(start.begin(), start.end());
  t.samples.push_back({0, pos, true, false});
  t.termination = Termination::step_limit;
  std::size_t s = 0;
  for (; s < params.steps; ++s) {
    const Point dir = rng.direction(pos.size());
    Point next = pos;
    for (std::size_t a = 0; a < pos.size(); ++a) next[a] = std::clamp(pos[a] + params.alpha * dir[a], 0.0, 1.0);
    if (evaluate_constraints(params.constraints, next)) {
      t.termination = Termination::constraint_violated;
      break;
    }
    pos = std::move(next);
    if ((s + 1) % params.j == 0) t.samples.push_back({s + 1, pos, false, false});
  }
  t.steps_taken = s;
  if (t.samples.back().step != s) t.samples.push_back({s, pos, false, true});
  return t;
}

std::vector<Trajectory> random_walk_batch(std::span<const Point> starts, const WalkParams& params,
                                          std::uint64_t seed) {
  if (params.j < 1) throw DataError("walk sampling interval must be >= 1");
  if (!(params.alpha >= 0.0)) throw DataError("walk step length must be >= 0");
  std::vector<Trajectory> out;
  out.reserve(starts.size());
  for (std::size_t i = 0; i < starts.size(); ++i) {
    Rng rng = Rng::stream(seed ^ kWalkSalt, i);
    out.push_back(random_walk_path(starts[i], params, rng));
  }
  return out;
}

ProposalBatch random_walk(std::size_t d, std::size_t size, const WalkParams& params,
                          std::uint64_t seed) {
  const auto starts = random_starts(size, d, seed, params.constraints);
  ProposalBatch b;
  b.strategy = Provenance::random_walk;
  b.batch_size = size;
  b.seed = seed;
  for (const auto& t : random_walk_batch(starts, params, seed))
    b.configurations.push_back(proposal(t.end(), Provenance::random_walk));
  return b;
}

ProposalBatch pareto_improvement(const Dataset& ds, const ParetoState& state, std::size_t size) {
  const auto front = state.front_existing();
  if (front.empty()) throw ParetoError("Pareto improvement needs a nonempty existing front");
  ProposalBatch b;
  b.strategy = Provenance::pareto_improvement;
  b.batch_size = size;
  for (std::size_t i = 0; i < size; ++i) {
    const auto* row = ds.find(front[i % front.size()].id);
    if (!row) throw DataError("front member is missing from the dataset");
    auto c = proposal(row->values, Provenance::pareto_improvement);
    c.targets = row->targets;
    c.targets_estimated = true;
    b.configurations.push_back(std::move(c));
  }
  return b;
}

Configuration blank_baseline(std::size_t d) { return proposal(Point(d, 0.5), Provenance::blank); }

// ---------------------------------------------------------------------------

Pipeline::Pipeline(Dataset ds, ObjectivePair objectives, double budget_cap, PhaseState phase,
                   SurrogateConfig surrogate)
    : ds_(std::move(ds)), pareto_(objectives, budget_cap), phase_(std::move(phase)),
      surrogate_cfg_(std::move(surrogate)) {
  phase_.validate();
  surrogate_cfg_.validate();
  for (std::size_t a = 0; a < 2; ++a) {
    const auto idx = ds_.target_index(objectives.names[a]);
    if (!idx) throw DataError("objective '" + objectives.names[a] + "' is not a target variable");
    objective_targets_[a] = *idx;
  }
  for (const auto& row : ds_.rows()) {
    if (row.status != Status::existing) continue;
    pareto_.add_existing({row.id, objectives_of(*row.targets), false, row.provenance});
  }
  refresh_proposed();
}

Objectives Pipeline::objectives_of(const Point& targets) const {
  return {targets[objective_targets_[0]], targets[objective_targets_[1]]};
}

std::optional<double> Pipeline::latest_ape() const {
  if (models_.empty()) return std::nullopt;
  return std::max(models_[objective_targets_[0]].ape, models_[objective_targets_[1]].ape);
}

std::optional<PhaseEvent> Pipeline::retrain() {
  std::vector<TrainReport> next;
  try {
    for (std::size_t t = 0; t < ds_.target_count(); ++t) next.push_back(train(ds_, t, surrogate_cfg_));
  } catch (const SurrogateError&) {
    models_.clear();
    if (phase_.phase == Phase::initial) return std::nullopt;
    PhaseEvent ev{phase_.phase, Phase::initial, ds_.version(), 100.0};
    phase_.phase = Phase::initial;
    return ev;
  }
  models_ = std::move(next);
  auto ev = advance_phase(phase_, *latest_ape(), ds_.version());
  refresh_proposed();
  return ev;
}

Point Pipeline::estimate(std::span<const double> p) const {
  if (models_.empty()) throw SurrogateError("no trained surrogate");
  Point out;
  for (const auto& m : models_) out.push_back(m.model.predict(p));
  return out;
}

double Pipeline::estimated_score(std::span<const double> p) const {
  const auto& o = pareto_.objectives();
  const std::size_t t0 = objective_targets_[0], t1 = objective_targets_[1];
  return 0.5 * (o.oriented_unit(0, models_.at(t0).model.predict(p)) +
                o.oriented_unit(1, models_.at(t1).model.predict(p)));
}

ScalarField Pipeline::score_field() const {
  if (models_.empty()) throw SurrogateError("no trained surrogate");
  // Unclamped blend so the gradient stays informative near the bounds.
  const auto& o = pareto_.objectives();
  std::array<double, 2> w{};
  for (std::size_t a = 0; a < 2; ++a) {
    w[a] = 0.5 / (o.hi[a] - o.lo[a]);
    if (o.orientation[a] == Orientation::minimize) w[a] = -w[a];
  }
  const SurrogateModel* m0 = &models_[objective_targets_[0]].model;
  const SurrogateModel* m1 = &models_[objective_targets_[1]].model;
  return {[=](std::span<const double> x) { return w[0] * m0->predict(x) + w[1] * m1->predict(x); },
          [=](std::span<const double> x) {
            Point g0 = m0->gradient(x);
            const Point g1 = m1->gradient(x);
            for (std::size_t a = 0; a < g0.size(); ++a) g0[a] = w[0] * g0[a] + w[1] * g1[a];
            return g0;
          }};
}

ProposalBatch Pipeline::propose(const StrategyRequest& req) const {
  const std::size_t d = ds_.dim();
  const Provenance prov = provenance_of(req.strategy);
  const bool scored = estimates_enabled();

  auto pick = [&](const Trajectory& t) -> Point {
    if (!scored) return t.end();
    // Largest estimated area gain first, then the blended score.
    auto key = [&](const Point& x) {
      return std::pair{pareto_.area_with(objectives_of(estimate(x))), estimated_score(x)};
    };
    const TrajectorySample* best = &t.samples.front();
    auto best_key = key(best->position);
    for (const auto& s : t.samples) {
      const auto k = key(s.position);
      if (k > best_key) {
        best_key = k;
        best = &s;
      }
    }
    return best->position;
  };

  ProposalBatch b;
  b.strategy = prov;
  b.batch_size = req.batch_size;
  b.seed = req.seed;
  switch (req.strategy) {
    case Strategy::esa: {
      auto pts = ds_.existing_points();
      if (pts.empty()) throw DataError("ESA needs at least one existing configuration");
      const KdTree index(std::move(pts));
      EsaParams params = req.esa;
      params.constraints.insert(params.constraints.end(), req.constraints.begin(), req.constraints.end());
      const auto starts = random_starts(req.batch_size, d, req.seed, params.constraints);
      for (const auto& t : run_batch(starts, index, params, req.parallelism))
        b.configurations.push_back(proposal(pick(t), prov));
      break;
    }
    case Strategy::random_sampling:
      b = random_sampling(d, req.batch_size, req.seed, req.constraints);
      break;
    case Strategy::random_walk: {
      WalkParams params = req.walk;
      params.constraints.insert(params.constraints.end(), req.constraints.begin(), req.constraints.end());
      const auto starts = random_starts(req.batch_size, d, req.seed, params.constraints);
      for (const auto& t : random_walk_batch(starts, params, req.seed))
        b.configurations.push_back(proposal(pick(t), prov));
      break;
    }
    case Strategy::pareto_improvement:
      b = pareto_improvement(ds_, pareto_, req.batch_size);
      break;
    case Strategy::blank:
      b.configurations.push_back(blank_baseline(d));
      b.batch_size = 1;
      break;
  }
  if (req.strategy == Strategy::blank && evaluate_constraints(req.constraints, b.configurations.front().values))
    throw DataError("the blank baseline violates the active constraints");
  if (scored && req.strategy != Strategy::pareto_improvement) {
    for (auto& c : b.configurations) {
      c.targets = estimate(c.values);
      c.targets_estimated = true;
    }
  }
  return b;
}

std::vector<std::uint64_t> Pipeline::add_proposals(const ProposalBatch& batch) {
  std::vector<Configuration> rows;
  for (const auto& c : batch.configurations) {
    auto row = ds_.make_row_normalized(c.values, c.targets, Status::proposed, c.provenance);
    row.targets_estimated = c.targets.has_value();
    rows.push_back(std::move(row));
  }
  const std::uint64_t before = ds_.rows().empty() ? 0 : ds_.rows().back().id;
  ds_ = ds_.with_rows(std::move(rows));
  std::vector<std::uint64_t> ids;
  for (const auto& r : ds_.rows())
    if (r.id > before) ids.push_back(r.id);
  refresh_proposed();
  return ids;
}

const Configuration& Pipeline::edit_proposal(std::uint64_t id, Point values, Provenance provenance) {
  const auto* row = ds_.find(id);
  if (!row) throw DataError("unknown proposal " + std::to_string(id));
  if (row->status != Status::proposed) throw DataError("row " + std::to_string(id) + " is already verified");
  if (values.size() != ds_.dim()) throw DataError("edit has the wrong dimension");
  for (auto& v : values) v = std::clamp(v, 0.0, 1.0);
  std::optional<Point> targets;
  if (estimates_enabled()) targets = estimate(values);
  auto next = ds_.make_row_normalized(values, targets, Status::proposed, provenance);
  next.targets_estimated = targets.has_value();
  next.id = id;
  ds_ = ds_.with_updated(std::move(next));
  refresh_proposed();
  return *ds_.find(id);
}

void Pipeline::refresh_proposed() {
  std::vector<TrackedPoint> pts;
  for (const auto& r : ds_.rows()) {
    if (r.status != Status::proposed) continue;
    std::optional<Point> t = r.targets;
    if (estimates_enabled() && r.provenance != Provenance::pareto_improvement) t = estimate(r.values);
    if (!t) continue;
    pts.push_back({r.id, objectives_of(*t), true, r.provenance});
  }
  pareto_.set_proposed(std::move(pts));
}

VerifyReport Pipeline::verify(std::span<const std::uint64_t> ids, const VerificationOracle& oracle,
                              bool retrain_after) {
  if (oracle.dim() != ds_.dim() || oracle.targets().size() != ds_.target_count())
    throw DataError("oracle '" + oracle.name() + "' does not match the dataset's variables");
  VerifyReport rep;
  rep.area_before = pareto_.dominance_area();
  for (const auto id : ids) {
    VerifyEntry e;
    e.id = id;
    const auto* row = ds_.find(id);
    if (!row) {
      e.unknown = true;
      rep.entries.push_back(e);
      continue;
    }
    if (row->status == Status::existing) {
      e.already_existing = true;
      e.targets = *row->targets;
      rep.entries.push_back(e);
      continue;
    }
    const Measurement m = oracle.measure(row->values);
    const VerifyOutcome out = pareto_.update_on_verify({id, objectives_of(m.targets), false, row->provenance}, m.cost);
    if (out.budget_exhausted) {
      e.budget_exhausted = true;
      rep.entries.push_back(e);
      rep.truncated = true;
      break;
    }
    Configuration updated = *row;
    updated.mark_verified(m.targets);
    updated.cost = m.cost;
    ds_ = ds_.with_updated(std::move(updated));
    e.accepted = true;
    e.front_expanded = out.front_expanded;
    e.targets = m.targets;
    ++rep.verified;
    rep.entries.push_back(e);
  }
  if (rep.verified > 0 && retrain_after) {
    if (auto ev = retrain()) rep.events.push_back(*ev);
  } else {
    refresh_proposed();
  }
  rep.area_after = pareto_.dominance_area();
  return rep;
}

std::string RoundReport::to_json() const {
  json j;
  j["strategy"] = to_string(strategy);
  j["phase_before"] = to_string(phase_before);
  j["phase_after"] = to_string(phase_after);
  j["proposals"] = proposals;
  j["candidates"] = candidates;
  j["verified"] = verified;
  j["refined"] = refined;
  j["truncated"] = truncated;
  j["area_before"] = area_before;
  j["area_after"] = area_after;
  j["ape"] = ape ? json(*ape) : json(nullptr);
  j["dataset_version"] = dataset_version;
  j["proposal_ids"] = proposal_ids;
  j["verified_ids"] = verified_ids;
  j["refine_scores"] = refine_scores;
  json evs = json::array();
  for (const auto& e : events)
    evs.push_back({{"from", to_string(e.from)}, {"to", to_string(e.to)}, {"version", e.version}, {"ape", e.ape}});
  j["events"] = evs;
  return j.dump();
}

RoundReport run_pipeline_round(Pipeline& pl, const StrategyRequest& req, std::size_t verify_budget,
                               const VerificationOracle& oracle, const RefineSettings& rs) {
  RoundReport rep;
  rep.strategy = req.strategy;
  rep.phase_before = pl.phase().phase;
  rep.area_before = pl.pareto().dominance_area();

  const auto batch = pl.propose(req);
  rep.proposals = batch.configurations.size();
  rep.proposal_ids = pl.add_proposals(batch);

  if (rep.phase_before != Phase::initial && pl.has_surrogate() && verify_budget > 0) {
    // Candidates: this round's proposals on the estimated front, ordered by
    // the area they would add if the estimate held.
    std::vector<std::pair<double, std::uint64_t>> ranked;
    {
      std::vector<Objectives> vals;
      std::vector<std::uint64_t> ids;
      for (auto id : rep.proposal_ids) {
        const auto* row = pl.dataset().find(id);
        vals.push_back(pl.objectives_of(pl.estimate(row->values)));
        ids.push_back(id);
      }
      for (auto idx : pareto_front(vals, pl.pareto().objectives()))
        ranked.emplace_back(pl.pareto().area_with(vals[idx]), ids[idx]);
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    rep.candidates = ranked.size();
    if (ranked.size() > verify_budget) ranked.resize(verify_budget);

    std::vector<std::uint64_t> chosen;
    for (const auto& [gain, id] : ranked) chosen.push_back(id);

    if (rep.phase_before == Phase::expert) {
      const ScalarField field = pl.score_field();
      std::vector<Constraint> cs = req.constraints;
      if (req.strategy == Strategy::esa) cs.insert(cs.end(), req.esa.constraints.begin(), req.esa.constraints.end());
      for (auto id : chosen) {
        const Point start = pl.dataset().find(id)->values;
        const auto r = refine(field, start, rs.steps, rs.eta, cs);
        rep.refine_scores.push_back({r.start_value, r.value});
        if (r.steps > 0) {
          pl.edit_proposal(id, r.point, Provenance::gradient_refined);
          ++rep.refined;
        }
      }
    }
    const auto v = pl.verify(chosen, oracle);
    rep.verified = v.verified;
    rep.truncated = v.truncated;
    rep.events = v.events;
    for (const auto& e : v.entries)
      if (e.accepted) rep.verified_ids.push_back(e.id);
  }
  rep.phase_after = pl.phase().phase;
  rep.area_after = pl.pareto().dominance_area();
  rep.ape = pl.latest_ape();
  rep.dataset_version = pl.dataset().version();
  return rep;
}

// ---------------------------------------------------------------------------

const MethodSummary* CompareResult::summary(const std::string& method) const {
  for (const auto& s : summaries)
    if (s.method == method) return &s;
  return nullptr;
}

const PairTest* CompareResult::test(const std::string& a, const std::string& b) const {
  for (const auto& t : tests)
    if (t.a == a && t.b == b) return &t;
  return nullptr;
}

namespace {

ObjectivePair objectives_for(const VerificationOracle& oracle) {
  const auto t = oracle.targets();
  ObjectivePair o;
  for (std::size_t a = 0; a < 2; ++a) {
    o.names[a] = t[a].name;
    o.orientation[a] = t[a].orientation;
    o.lo[a] = t[a].min;
    o.hi[a] = t[a].max;
  }
  return o;
}

// Oracle score with a central-difference gradient, for the refine variant.
ScalarField oracle_field(const VerificationOracle& oracle) {
  auto value = [&oracle](std::span<const double> x) { return oracle.score(oracle.measure(x).targets); };
  return {value, [value](std::span<const double> x) {
            Point p(x.begin(), x.end()), g(x.size());
            constexpr double h = 1e-6;
            for (std::size_t a = 0; a < p.size(); ++a) {
              const double keep = p[a];
              p[a] = keep + h;
              const double up = value(p);
              p[a] = keep - h;
              g[a] = (up - value(p)) / (2 * h);
              p[a] = keep;
            }
            return g;
          }};
}

}  // namespace

CompareResult run_compare(const CompareConfig& cfg) {
  const auto oracle = make_oracle(cfg.oracle, cfg.dim, cfg.seed);
  const ObjectivePair obj = objectives_for(*oracle);
  for (const auto& m : cfg.methods)
    if (m != "esa" && m != "rs" && m != "rw") throw DataError("unknown comparison method '" + m + "'");

  CompareResult res;
  std::vector<double> base_areas;
  for (std::size_t r = 0; r < cfg.repeats; ++r) {
    const std::uint64_t seed = splitmix64(cfg.seed + r);
    const Dataset ds = seed_dataset(*oracle, cfg.dataset_size, seed);
    std::vector<Objectives> base;
    for (const auto& row : ds.rows()) base.push_back({(*row.targets)[0], (*row.targets)[1]});
    base_areas.push_back(dominance_area(pareto_front(base, obj), base, obj));

    const auto starts = random_starts(cfg.agents, cfg.dim, seed ^ 0x5747ULL);
    const KdTree index(ds.existing_points());
    const ScalarField field = oracle_field(*oracle);

    auto reward_of = [&](const std::vector<Trajectory>& trajs) {
      std::vector<Objectives> all = base;
      for (const auto& t : trajs) {
        // Best sample by the oracle acting as critic.
        Point best = t.samples.front().position;
        double best_score = -1.0;
        for (const auto& s : t.samples) {
          const double v = oracle->score(oracle->measure(s.position).targets);
          if (v > best_score) {
            best_score = v;
            best = s.position;
          }
        }
        if (cfg.refine) best = refine(field, best, cfg.refine_settings.steps, cfg.refine_settings.eta).point;
        const auto m = oracle->measure(best).targets;
        all.push_back({m[0], m[1]});
      }
      return dominance_area(pareto_front(all, obj), all, obj);
    };

    for (const auto& method : cfg.methods) {
      double reward = 0.0;
      if (method == "rs") {
        std::vector<Trajectory> single;
        for (const auto& s : starts) {
          Trajectory t;
          t.samples.push_back({0, s, true, true});
          single.push_back(std::move(t));
        }
        reward = reward_of(single);
      } else if (method == "rw") {
        reward = reward_of(random_walk_batch(starts, cfg.walk, seed));
      } else {
        reward = reward_of(run_batch(starts, index, cfg.esa, cfg.parallelism));
      }
      res.rows.push_back({r, method, reward});
    }
  }
  res.dataset_area_mean = stats::mean(base_areas);

  std::vector<std::vector<double>> by_method;
  for (const auto& m : cfg.methods) {
    std::vector<double> v;
    for (const auto& row : res.rows)
      if (row.method == m) v.push_back(row.reward);
    res.summaries.push_back({m, v.size(), stats::mean(v), stats::stddev(v), stats::median(v)});
    by_method.push_back(std::move(v));
  }
  for (std::size_t a = 0; a < cfg.methods.size(); ++a) {
    for (std::size_t b = a + 1; b < cfg.methods.size(); ++b) {
      if (by_method[a].empty() || by_method[b].empty()) continue;
      const auto g = stats::rank_sum_test(by_method[a], by_method[b], stats::Alternative::greater);
      const auto t = stats::rank_sum_test(by_method[a], by_method[b], stats::Alternative::two_sided);
      res.tests.push_back({cfg.methods[a], cfg.methods[b], g.u, g.z, g.p_value, t.p_value});
    }
  }
  return res;
}

// ---------------------------------------------------------------------------

Fig4Result run_fig4(const Fig4Config& cfg) {
  Fig4Result out;
  Rng rng(cfg.seed);
  for (std::size_t i = 0; i < cfg.samples; ++i) out.samples.push_back(rng.uniform_point(2));
  out.starts = random_starts(cfg.agents, 2, cfg.seed ^ 0xF164ULL);
  const KdTree index(out.samples);

  EsaParams still = cfg.esa;
  still.gamma = 0.0;
  EsaParams moving = cfg.esa;
  moving.gamma = cfg.gamma;
  for (const auto& t : run_batch(out.starts, index, still, cfg.parallelism)) {
    out.final_no_momentum.push_back(t.end());
    for (const auto& s : t.samples) out.samples_no_momentum.push_back(s.position);
  }
  for (const auto& t : run_batch(out.starts, index, moving, cfg.parallelism)) {
    out.final_momentum.push_back(t.end());
    for (const auto& s : t.samples) out.samples_momentum.push_back(s.position);
  }
  return out;
}

// ---------------------------------------------------------------------------

Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  if (bins < 1) throw DataError("histogram needs at least one bin");
  if (!(hi > lo)) hi = lo + 1.0;
  Histogram h;
  for (std::size_t b = 0; b <= bins; ++b)
    h.edges.push_back(lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins));
  h.counts.assign(bins, 0);
  for (double v : values) {
    auto b = static_cast<std::size_t>(std::floor((v - lo) / (hi - lo) * static_cast<double>(bins)));
    if (v < lo) continue;
    h.counts[std::min(b, bins - 1)]++;
  }
  return h;
}

// The tree skips coincident points, so this is a plain scan that counts
// them as distance 0.
double nearest_distance(std::span<const Point> set, std::span<const double> q) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& p : set) best = std::min(best, squared_distance(p, q));
  return std::sqrt(best);
}

std::vector<ExtrapolationIteration> run_extrapolation(std::span<const Point> initial,
                                                      const ExtrapolationConfig& cfg) {
  if (initial.size() < cfg.agents) throw DataError("extrapolation needs at least as many rows as agents");
  std::vector<Point> working(initial.begin(), initial.end());
  std::vector<ExtrapolationIteration> out;

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const KdTree index(working);
    ExtrapolationIteration rec;
    rec.iteration = it;
    rec.seeds = anti_hubs(index, cfg.agents, cfg.knn);
    std::vector<Point> starts;
    for (auto id : rec.seeds) starts.push_back(working[id]);
    for (const auto& t : run_batch(starts, index, cfg.esa, cfg.parallelism)) {
      rec.results.push_back(t.end());
      rec.distances.push_back(nearest_distance(initial, t.end()));
    }
    rec.median = stats::median(rec.distances);
    rec.mean = stats::mean(rec.distances);
    working.insert(working.end(), rec.results.begin(), rec.results.end());
    out.push_back(std::move(rec));
  }
  double hi = 0.0;
  for (const auto& r : out)
    for (double d : r.distances) hi = std::max(hi, d);
  for (auto& r : out) r.histogram = histogram(r.distances, cfg.bins, 0.0, hi);
  return out;
}

std::size_t non_decreasing_pairs(const std::vector<ExtrapolationIteration>& its) {
  std::size_t n = 0;
  for (std::size_t i = 1; i < its.size(); ++i)
    if (its[i].median >= its[i - 1].median) ++n;
  return n;
}

}  // namespace esm
