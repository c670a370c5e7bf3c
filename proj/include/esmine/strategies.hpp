#pragma once

// Proposal strategies (ESA, random sampling, random walk, Pareto
// improvement, blank baseline), the phase-gated pipeline that ties
// search -> estimate -> verify -> retrain together, and the experiment
// drivers built on top of it (method comparison, Fig-4 style runs,
// extrapolation).

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "esmine/core.hpp"
#include "esmine/data_io.hpp"
#include "esmine/esa.hpp"
#include "esmine/pareto.hpp"
#include "esmine/rng.hpp"
#include "esmine/surrogate.hpp"

namespace esm {

enum class Strategy { esa, random_sampling, random_walk, pareto_improvement, blank };

std::string to_string(Strategy s);
Strategy strategy_from_string(const std::string& s);
Provenance provenance_of(Strategy s);

struct ProposalBatch {
  std::vector<Configuration> configurations;  // proposed; raw filled once bound to a dataset
  Provenance strategy = Provenance::esa;
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;
};

/// Uniform points in the unit box, rejection-sampled against the
/// constraints. Point i comes from stream (seed, i). Gives up with a
/// DataError when fewer than 1 in 10^4 draws is accepted.
ProposalBatch random_sampling(std::size_t d, std::size_t size, std::uint64_t seed,
                              std::span<const Constraint> constraints = {});

struct WalkParams {
  std::size_t steps = 400;
  double alpha = 0.001;
  std::size_t j = 10;  // sampling interval, as for ESA trajectories
  std::vector<Constraint> constraints;
};

/// Random walk of `steps` moves of length alpha in fresh uniform directions,
/// clipped to the box. A move that violates a user constraint ends the walk.
Trajectory random_walk_path(std::span<const double> start, const WalkParams& params, Rng& rng);

/// Walk i uses stream (seed, i) of a generator independent of the starts.
std::vector<Trajectory> random_walk_batch(std::span<const Point> starts, const WalkParams& params,
                                          std::uint64_t seed);

/// Final walk positions from random_sampling-protocol starts; with
/// steps == 0 this equals random_sampling(d, size, seed).
ProposalBatch random_walk(std::size_t d, std::size_t size, const WalkParams& params,
                          std::uint64_t seed);

/// Copies of the existing Pareto front (best first), cycled to `size`.
/// Each copy carries the member's measured targets as its estimate.
ProposalBatch pareto_improvement(const Dataset& ds, const ParetoState& state, std::size_t size);

/// The all-0.5 configuration.
Configuration blank_baseline(std::size_t d);

// ---------------------------------------------------------------------------
// Pipeline

struct StrategyRequest {
  Strategy strategy = Strategy::esa;
  std::size_t batch_size = 50;
  EsaParams esa;
  WalkParams walk;
  std::vector<Constraint> constraints;  // applied to every strategy
  std::uint64_t seed = 1;
  std::size_t parallelism = 1;
};

struct RefineSettings {
  std::size_t steps = 50;
  double eta = 0.05;
};

struct VerifyEntry {
  std::uint64_t id = 0;
  bool accepted = false;
  bool already_existing = false;
  bool budget_exhausted = false;
  bool unknown = false;
  bool front_expanded = false;
  Point targets;
};

struct VerifyReport {
  std::vector<VerifyEntry> entries;
  std::size_t verified = 0;
  bool truncated = false;  // stopped because the budget ran out
  double area_before = 0.0;
  double area_after = 0.0;
  std::vector<PhaseEvent> events;
};

/// Session state for one dataset: snapshot chain, Pareto/budget ledger,
/// surrogates (one per target variable) and the phase machine.
class Pipeline {
public:
  Pipeline(Dataset ds, ObjectivePair objectives, double budget_cap, PhaseState phase = {},
           SurrogateConfig surrogate = {});

  const Dataset& dataset() const { return ds_; }
  const ParetoState& pareto() const { return pareto_; }
  const PhaseState& phase() const { return phase_; }
  const SurrogateConfig& surrogate_config() const { return surrogate_cfg_; }
  std::array<std::size_t, 2> objective_targets() const { return objective_targets_; }
  bool has_surrogate() const { return !models_.empty(); }
  const std::vector<TrainReport>& models() const { return models_; }
  /// Worst held-out APE over the objective targets of the current models.
  std::optional<double> latest_ape() const;
  /// Surrogate estimates are shown from the Developed phase on.
  bool estimates_enabled() const { return has_surrogate() && phase_.phase != Phase::initial; }

  /// Retrains every target's surrogate on the existing rows and advances
  /// the phase. With too few rows training is refused, the models are
  /// dropped and the phase stays (or returns to) Initial.
  std::optional<PhaseEvent> retrain();

  /// Estimated targets (all target variables) for a normalized point.
  Point estimate(std::span<const double> p) const;
  /// Mean of the two oriented, normalized estimated objectives.
  double estimated_score(std::span<const double> p) const;
  ScalarField score_field() const;

  /// Runs a strategy against the current snapshot. With estimates enabled,
  /// trajectory strategies keep each trajectory's best-scored sample and
  /// every proposal carries estimated targets; otherwise the trajectory end.
  ProposalBatch propose(const StrategyRequest& req) const;

  /// Stores proposals as proposed rows (new version); returns their ids.
  std::vector<std::uint64_t> add_proposals(const ProposalBatch& batch);

  /// Replaces a proposal's inputs (normalized, clamped to the box) and marks
  /// it user-edited; refreshes its estimate when enabled.
  const Configuration& edit_proposal(std::uint64_t id, Point values, Provenance provenance);

  /// Measures each id with the oracle and charges its cost. Existing ids
  /// are no-ops; unknown ids are reported. Stops at the first refusal for
  /// budget. Retrains afterwards when anything was verified.
  VerifyReport verify(std::span<const std::uint64_t> ids, const VerificationOracle& oracle,
                      bool retrain_after = true);

  Objectives objectives_of(const Point& targets) const;

private:
  void refresh_proposed();

  Dataset ds_;
  ParetoState pareto_;
  PhaseState phase_;
  SurrogateConfig surrogate_cfg_;
  std::array<std::size_t, 2> objective_targets_{};
  std::vector<TrainReport> models_;
};

struct RoundReport {
  Strategy strategy = Strategy::esa;
  Phase phase_before = Phase::initial;
  Phase phase_after = Phase::initial;
  std::size_t proposals = 0;
  std::size_t candidates = 0;  // proposals on the estimated front
  std::size_t verified = 0;
  std::size_t refined = 0;
  bool truncated = false;
  double area_before = 0.0;
  double area_after = 0.0;
  std::optional<double> ape;
  std::uint64_t dataset_version = 0;
  std::vector<std::uint64_t> proposal_ids;
  std::vector<std::uint64_t> verified_ids;
  std::vector<std::array<double, 2>> refine_scores;  // predicted score before, after
  std::vector<PhaseEvent> events;

  std::string to_json() const;
};

/// One search -> estimate -> verify -> retrain round. Initial: proposals
/// only. Developed: verify up to `verify_budget` proposals from the
/// estimated front, largest estimated area gain first. Expert: as
/// Developed, refining each candidate by gradient ascent first.
RoundReport run_pipeline_round(Pipeline& pipeline, const StrategyRequest& req,
                               std::size_t verify_budget, const VerificationOracle& oracle,
                               const RefineSettings& refine_settings = {});

// ---------------------------------------------------------------------------
// Method comparison (ESA vs random sampling vs random walk)

struct CompareConfig {
  std::string oracle = "multimodal";
  std::size_t dim = 5;
  std::size_t dataset_size = 1000;
  std::size_t agents = 1500;
  std::size_t repeats = 20;
  std::vector<std::string> methods{"esa", "rs", "rw"};
  EsaParams esa;
  WalkParams walk;
  bool refine = false;  // gradient ascent on each trajectory's best point
  RefineSettings refine_settings;
  std::uint64_t seed = 1;
  std::size_t parallelism = 1;
};

struct CompareRow {
  std::size_t repeat = 0;
  std::string method;
  double reward = 0.0;
};

struct MethodSummary {
  std::string method;
  std::size_t n = 0;
  double mean = 0.0;
  double sd = 0.0;
  double median = 0.0;
};

struct PairTest {
  std::string a;
  std::string b;
  double u = 0.0;
  double z = 0.0;
  double p_greater = 1.0;   // H1: a > b
  double p_two_sided = 1.0;
};

struct CompareResult {
  std::vector<CompareRow> rows;
  std::vector<MethodSummary> summaries;
  std::vector<PairTest> tests;  // every ordered listing pair (a before b)
  double dataset_area_mean = 0.0;

  const MethodSummary* summary(const std::string& method) const;
  const PairTest* test(const std::string& a, const std::string& b) const;
};

/// Per repeat: a fresh seeded dataset measured by the oracle and shared
/// random starts. RS proposes the starts; ESA and RW keep the best
/// oracle-scored sample of each trajectory. Reward is the dominance area
/// of the dataset plus the chosen points.
CompareResult run_compare(const CompareConfig& cfg);

// ---------------------------------------------------------------------------
// Fig-4 style run: uniform 2-d samples, random agents, with and without
// momentum.

struct Fig4Config {
  std::size_t samples = 300;
  std::size_t agents = 600;
  EsaParams esa;  // gamma is overridden per run
  double gamma = 0.9;
  std::uint64_t seed = 1;
  std::size_t parallelism = 1;
};

struct Fig4Result {
  std::vector<Point> samples;
  std::vector<Point> starts;
  std::vector<Point> final_no_momentum;
  std::vector<Point> final_momentum;
  std::vector<Point> samples_momentum;  // every trajectory sample with momentum
  std::vector<Point> samples_no_momentum;
};

Fig4Result run_fig4(const Fig4Config& cfg);

// ---------------------------------------------------------------------------
// Extrapolation: agents seeded at anti-hubs, results fed back each round.

struct Histogram {
  std::vector<double> edges;  // bins + 1
  std::vector<std::size_t> counts;
};

Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi);

struct ExtrapolationConfig {
  std::size_t iterations = 6;
  std::size_t agents = 300;
  std::size_t knn = 8;
  EsaParams esa;
  std::size_t bins = 20;
  std::size_t parallelism = 1;
};

struct ExtrapolationIteration {
  std::size_t iteration = 0;
  std::vector<std::size_t> seeds;  // working-set row ids used as starts
  std::vector<Point> results;
  std::vector<double> distances;  // nearest distance to the initial set
  double median = 0.0;
  double mean = 0.0;
  Histogram histogram;  // shared edges across iterations
};

/// Distance from q to the closest member of `set` (0 when q is a member).
double nearest_distance(std::span<const Point> set, std::span<const double> q);

/// Each iteration seeds agents at the working set's anti-hubs (largest
/// mean knn-distance), runs ESA, records each final point's distance to
/// the initial set and appends the results to the working set.
std::vector<ExtrapolationIteration> run_extrapolation(std::span<const Point> initial,
                                                      const ExtrapolationConfig& cfg);

/// Number of consecutive iteration pairs whose median does not decrease.
std::size_t non_decreasing_pairs(const std::vector<ExtrapolationIteration>& its);

}  // namespace esm
