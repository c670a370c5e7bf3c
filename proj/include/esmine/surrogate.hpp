#pragma once

// Assistive regressor: a small fully connected network trained on verified
// configurations, its held-out average percentage error (APE), the
// Initial/Developed/Expert phase machine driven by that error, and
// gradient-ascent refinement of candidate configurations.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "esmine/core.hpp"

namespace esm {

class SurrogateError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

enum class Activation { tanh, softplus, identity };

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct SurrogateConfig {
  std::vector<std::size_t> hidden_layers{64, 64};
  Activation activation = Activation::tanh;
  double train_fraction = 0.8;
  std::size_t max_epochs = 400;
  double learning_rate = 3e-3;
  std::size_t batch_size = 32;
  std::uint64_t seed = 1;
  std::size_t min_rows = 20;

  void validate() const;
};

/// Feed-forward network with a linear scalar output.
class Mlp {
public:
  Mlp() = default;
  Mlp(std::size_t inputs, const std::vector<std::size_t>& hidden, Activation act,
      std::uint64_t seed);

  std::size_t inputs() const { return inputs_; }
  Activation activation() const { return activation_; }
  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  double forward(std::span<const double> x) const;
  /// d output / d x by reverse-mode accumulation.
  Eigen::VectorXd input_gradient(std::span<const double> x) const;

  /// One optimizer-agnostic pass over a batch (columns are samples):
  /// returns the mean squared error and fills parameter gradients.
  double batch_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                        std::vector<Eigen::MatrixXd>& dW,
                        std::vector<Eigen::VectorXd>& db) const;

private:
  std::size_t inputs_ = 0;
  Activation activation_ = Activation::tanh;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

class SurrogateModel {
public:
  SurrogateModel() = default;
  SurrogateModel(Mlp net, double target_mean, double target_scale, std::string target)
      : net_(std::move(net)), mean_(target_mean), scale_(target_scale),
        target_(std::move(target)) {}

  /// Estimated target in raw units.
  double predict(std::span<const double> p) const;
  /// d predict / d p.
  Point gradient(std::span<const double> p) const;

  const Mlp& network() const { return net_; }
  Mlp& network() { return net_; }
  double target_mean() const { return mean_; }
  double target_scale() const { return scale_; }
  const std::string& target() const { return target_; }
  std::size_t dim() const { return net_.inputs(); }

  std::string to_json() const;
  static SurrogateModel from_json(const std::string& text);

private:
  Mlp net_;
  double mean_ = 0.0;
  double scale_ = 1.0;
  std::string target_;
};

struct TrainReport {
  SurrogateModel model;
  double ape = 0.0;        // held-out, percent
  double train_ape = 0.0;  // percent
  std::size_t train_rows = 0;
  std::size_t holdout_rows = 0;
};

/// True when row `id` belongs to the training split. Depends only on the
/// id, so the split is stable across retrains.
bool in_training_split(std::uint64_t id, double train_fraction);

/// Mean |yhat - y| / max(|y|, 1e-8 * range(y)) in percent.
double average_percentage_error(std::span<const double> predicted,
                                std::span<const double> actual, double target_range);

/// Trains on (inputs, targets, ids). Throws SurrogateError below min_rows.
TrainReport train_regressor(std::span<const Point> inputs, std::span<const double> targets,
                            std::span<const std::uint64_t> ids, const SurrogateConfig& cfg,
                            const std::string& target_name = "target");

/// Trains on the existing rows of `ds` for target variable `target`.
TrainReport train(const Dataset& ds, std::size_t target, const SurrogateConfig& cfg);

enum class Phase { initial, developed, expert };
std::string to_string(Phase p);

Phase phase_for(double ape, double t1, double t2);

struct PhaseEvent {
  Phase from;
  Phase to;
  std::uint64_t version;
  double ape;
};

struct PhaseState {
  Phase phase = Phase::initial;
  double t1 = 20.0;
  double t2 = 10.0;
  struct Entry {
    std::uint64_t version;
    double ape;
  };
  std::vector<Entry> error_history;

  void validate() const;
};

/// Appends (version, ape) and recomputes the phase. Returns the transition
/// when the phase changed.
std::optional<PhaseEvent> advance_phase(PhaseState& ps, double ape, std::uint64_t version = 0);

enum class RefineStop { step_limit, no_improvement, constraint, not_expert };

struct RefineResult {
  Point point;
  double start_value = 0.0;
  double value = 0.0;
  std::vector<double> history;  // predicted value after each accepted step
  std::size_t steps = 0;
  RefineStop stop = RefineStop::step_limit;
};

/// Gradient ascent on the surrogate: p <- clip(p + eta * grad) inside the
/// unit box. A step that would violate a user constraint ends the run. A
/// step that lowers the prediction is retried with half the step size a
/// few times before giving up, so the prediction never decreases.
RefineResult refine(const SurrogateModel& model, std::span<const double> p, std::size_t steps,
                    double eta, std::span<const Constraint> constraints = {});

/// Any differentiable scalar, e.g. a blend of several surrogates.
struct ScalarField {
  std::function<double(std::span<const double>)> value;
  std::function<Point(std::span<const double>)> gradient;
};

RefineResult refine(const ScalarField& f, std::span<const double> p, std::size_t steps, double eta,
                    std::span<const Constraint> constraints = {});

}  // namespace esm
