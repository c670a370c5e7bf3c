#include "esmine/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "json.hpp"

#include "esmine/rng.hpp"

namespace esm {

using nlohmann::json;

std::string to_string(Activation a) {
  switch (a) {
    case Activation::tanh: return "tanh";
    case Activation::softplus: return "softplus";
    case Activation::identity: return "identity";
  }
  return "tanh";
}

Activation activation_from_string(const std::string& s) {
  if (s == "tanh") return Activation::tanh;
  if (s == "softplus") return Activation::softplus;
  if (s == "identity") return Activation::identity;
  throw SurrogateError("unknown activation '" + s + "'");
}

void SurrogateConfig::validate() const {
  for (auto w : hidden_layers)
    if (w < 1) throw SurrogateError("hidden layer widths must be >= 1");
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw SurrogateError("train_fraction must be in (0,1)");
  if (!(learning_rate > 0.0)) throw SurrogateError("learning_rate must be > 0");
  if (batch_size < 1) throw SurrogateError("batch_size must be >= 1");
}

namespace {

double act(Activation a, double x) {
  switch (a) {
    case Activation::tanh: return std::tanh(x);
    case Activation::softplus: return x > 30.0 ? x : std::log1p(std::exp(x));
    case Activation::identity: return x;
  }
  return x;
}

double act_derivative(Activation a, double x) {
  switch (a) {
    case Activation::tanh: {
      const double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::softplus: return 1.0 / (1.0 + std::exp(-x));
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

Eigen::MatrixXd apply(Activation a, const Eigen::MatrixXd& z) {
  return z.unaryExpr([a](double v) { return act(a, v); });
}

Eigen::MatrixXd apply_derivative(Activation a, const Eigen::MatrixXd& z) {
  return z.unaryExpr([a](double v) { return act_derivative(a, v); });
}

}  // namespace

Mlp::Mlp(std::size_t inputs, const std::vector<std::size_t>& hidden, Activation act_kind,
         std::uint64_t seed)
    : inputs_(inputs), activation_(act_kind) {
  Rng rng(seed);
  std::size_t prev = inputs;
  std::vector<std::size_t> widths = hidden;
  widths.push_back(1);
  for (std::size_t w : widths) {
    const double limit = std::sqrt(6.0 / static_cast<double>(prev + w));
    Eigen::MatrixXd W(static_cast<Eigen::Index>(w), static_cast<Eigen::Index>(prev));
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = rng.uniform(-limit, limit);
    weights_.push_back(std::move(W));
    biases_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(w)));
    prev = w;
  }
}

double Mlp::forward(std::span<const double> x) const {
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * a + biases_[l];
    a = (l + 1 < weights_.size()) ? Eigen::VectorXd(apply(activation_, z)) : z;
  }
  return a(0);
}

Eigen::VectorXd Mlp::input_gradient(std::span<const double> x) const {
  std::vector<Eigen::VectorXd> pre;
  Eigen::VectorXd a = Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::VectorXd z = weights_[l] * a + biases_[l];
    pre.push_back(z);
    a = (l + 1 < weights_.size()) ? Eigen::VectorXd(apply(activation_, z)) : z;
  }
  Eigen::VectorXd g = Eigen::VectorXd::Ones(1);
  for (std::size_t l = weights_.size(); l-- > 0;) {
    if (l + 1 < weights_.size()) g = g.cwiseProduct(apply_derivative(activation_, pre[l]));
    g = weights_[l].transpose() * g;
  }
  return g;
}

double Mlp::batch_gradient(const Eigen::MatrixXd& X, const Eigen::VectorXd& y,
                           std::vector<Eigen::MatrixXd>& dW,
                           std::vector<Eigen::VectorXd>& db) const {
  const double m = static_cast<double>(X.cols());
  std::vector<Eigen::MatrixXd> pre;
  std::vector<Eigen::MatrixXd> post{X};
  Eigen::MatrixXd a = X;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Eigen::MatrixXd z = (weights_[l] * a).colwise() + biases_[l];
    pre.push_back(z);
    a = (l + 1 < weights_.size()) ? apply(activation_, z) : z;
    post.push_back(a);
  }
  const Eigen::RowVectorXd err = a.row(0) - y.transpose();
  const double loss = err.squaredNorm() / m;

  dW.resize(weights_.size());
  db.resize(weights_.size());
  Eigen::MatrixXd g = (2.0 / m) * err;
  for (std::size_t l = weights_.size(); l-- > 0;) {
    if (l + 1 < weights_.size()) g = g.cwiseProduct(apply_derivative(activation_, pre[l]));
    dW[l] = g * post[l].transpose();
    db[l] = g.rowwise().sum();
    g = weights_[l].transpose() * g;
  }
  return loss;
}

double SurrogateModel::predict(std::span<const double> p) const {
  if (p.size() != dim()) throw SurrogateError("prediction input has the wrong dimension");
  return mean_ + scale_ * net_.forward(p);
}

Point SurrogateModel::gradient(std::span<const double> p) const {
  if (p.size() != dim()) throw SurrogateError("gradient input has the wrong dimension");
  const Eigen::VectorXd g = net_.input_gradient(p) * scale_;
  return Point(g.data(), g.data() + g.size());
}

std::string SurrogateModel::to_json() const {
  json j;
  j["format"] = "esmine-surrogate-v1";
  j["target"] = target_;
  j["inputs"] = net_.inputs();
  j["activation"] = to_string(net_.activation());
  j["target_mean"] = mean_;
  j["target_scale"] = scale_;
  json layers = json::array();
  for (std::size_t l = 0; l < net_.weights().size(); ++l) {
    const auto& W = net_.weights()[l];
    json layer;
    layer["rows"] = W.rows();
    layer["cols"] = W.cols();
    std::vector<double> w(static_cast<std::size_t>(W.size()));
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c)
        w[static_cast<std::size_t>(r * W.cols() + c)] = W(r, c);
    layer["weights"] = w;
    const auto& b = net_.biases()[l];
    layer["bias"] = std::vector<double>(b.data(), b.data() + b.size());
    layers.push_back(layer);
  }
  j["layers"] = layers;
  return j.dump();
}

SurrogateModel SurrogateModel::from_json(const std::string& text) {
  const json j = json::parse(text);
  if (j.value("format", "") != "esmine-surrogate-v1")
    throw SurrogateError("unrecognized surrogate checkpoint format");
  const auto inputs = j.at("inputs").get<std::size_t>();
  std::vector<std::size_t> hidden;
  const auto& layers = j.at("layers");
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) hidden.push_back(layers[l].at("rows").get<std::size_t>());
  Mlp net(inputs, hidden, activation_from_string(j.at("activation").get<std::string>()), 0);
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const auto rows = layers[l].at("rows").get<Eigen::Index>();
    const auto cols = layers[l].at("cols").get<Eigen::Index>();
    const auto w = layers[l].at("weights").get<std::vector<double>>();
    const auto b = layers[l].at("bias").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(w.size()) != rows * cols || static_cast<Eigen::Index>(b.size()) != rows)
      throw SurrogateError("checkpoint layer " + std::to_string(l) + " has inconsistent sizes");
    auto& W = net.weights()[l];
    W.resize(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) W(r, c) = w[static_cast<std::size_t>(r * cols + c)];
    net.biases()[l] = Eigen::Map<const Eigen::VectorXd>(b.data(), rows);
  }
  return SurrogateModel(std::move(net), j.at("target_mean").get<double>(),
                        j.at("target_scale").get<double>(), j.value("target", "target"));
}

bool in_training_split(std::uint64_t id, double train_fraction) {
  const std::uint64_t h = splitmix64(id ^ 0x5EEDF00DULL) % 10000ULL;
  return static_cast<double>(h) < train_fraction * 10000.0;
}

double average_percentage_error(std::span<const double> predicted,
                                std::span<const double> actual, double target_range) {
  if (predicted.empty()) return 0.0;
  const double floor = std::max(1e-8 * target_range, 1e-300);
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i)
    s += std::abs(predicted[i] - actual[i]) / std::max(std::abs(actual[i]), floor);
  return 100.0 * s / static_cast<double>(predicted.size());
}

TrainReport train_regressor(std::span<const Point> inputs, std::span<const double> targets,
                            std::span<const std::uint64_t> ids, const SurrogateConfig& cfg,
                            const std::string& target_name) {
  cfg.validate();
  if (inputs.size() != targets.size() || inputs.size() != ids.size())
    throw SurrogateError("inputs, targets and ids differ in length");
  if (inputs.size() < cfg.min_rows) {
    throw SurrogateError("training needs at least " + std::to_string(cfg.min_rows) +
                         " verified rows, have " + std::to_string(inputs.size()));
  }
  const std::size_t d = inputs.front().size();

  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> hold_idx;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    (in_training_split(ids[i], cfg.train_fraction) ? train_idx : hold_idx).push_back(i);
  // Degenerate hash splits on tiny sets: move one row across.
  if (hold_idx.empty()) {
    hold_idx.push_back(train_idx.back());
    train_idx.pop_back();
  }
  if (train_idx.empty()) {
    train_idx.push_back(hold_idx.back());
    hold_idx.pop_back();
  }

  double mean = 0.0;
  for (auto i : train_idx) mean += targets[i];
  mean /= static_cast<double>(train_idx.size());
  double var = 0.0;
  for (auto i : train_idx) var += (targets[i] - mean) * (targets[i] - mean);
  var /= static_cast<double>(train_idx.size());
  const double scale = var > 1e-24 ? std::sqrt(var) : 1.0;
  const auto [lo_it, hi_it] = std::minmax_element(targets.begin(), targets.end());
  const double range = *hi_it - *lo_it;

  Mlp net(d, cfg.hidden_layers, cfg.activation, cfg.seed);

  Eigen::MatrixXd X(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(train_idx.size()));
  Eigen::VectorXd y(static_cast<Eigen::Index>(train_idx.size()));
  for (std::size_t c = 0; c < train_idx.size(); ++c) {
    const auto& p = inputs[train_idx[c]];
    if (p.size() != d) throw SurrogateError("training inputs have inconsistent dimensions");
    for (std::size_t r = 0; r < d; ++r) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = p[r];
    y(static_cast<Eigen::Index>(c)) = (targets[train_idx[c]] - mean) / scale;
  }

  // Adam over shuffled mini-batches.
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::vector<Eigen::MatrixXd> mW, vW, dW;
  std::vector<Eigen::VectorXd> mb, vb, db;
  for (std::size_t l = 0; l < net.weights().size(); ++l) {
    mW.push_back(Eigen::MatrixXd::Zero(net.weights()[l].rows(), net.weights()[l].cols()));
    vW.push_back(mW.back());
    mb.push_back(Eigen::VectorXd::Zero(net.biases()[l].size()));
    vb.push_back(mb.back());
  }
  Rng shuffle_rng(cfg.seed ^ 0xA5A5A5A5ULL);
  std::vector<Eigen::Index> order(train_idx.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t t = 0;
  const std::size_t bs = std::min(cfg.batch_size, train_idx.size());
  for (std::size_t epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[shuffle_rng.index(i)]);
    for (std::size_t start = 0; start < order.size(); start += bs) {
      const std::size_t end = std::min(order.size(), start + bs);
      const auto m = static_cast<Eigen::Index>(end - start);
      Eigen::MatrixXd Xb(X.rows(), m);
      Eigen::VectorXd yb(m);
      for (Eigen::Index c = 0; c < m; ++c) {
        Xb.col(c) = X.col(order[start + static_cast<std::size_t>(c)]);
        yb(c) = y(order[start + static_cast<std::size_t>(c)]);
      }
      net.batch_gradient(Xb, yb, dW, db);
      ++t;
      const double lr = cfg.learning_rate * std::sqrt(1.0 - std::pow(b2, static_cast<double>(t))) /
                        (1.0 - std::pow(b1, static_cast<double>(t)));
      for (std::size_t l = 0; l < dW.size(); ++l) {
        mW[l] = b1 * mW[l] + (1.0 - b1) * dW[l];
        vW[l] = b2 * vW[l] + (1.0 - b2) * dW[l].cwiseAbs2();
        net.weights()[l] -= lr * (mW[l].array() / (vW[l].array().sqrt() + eps)).matrix();
        mb[l] = b1 * mb[l] + (1.0 - b1) * db[l];
        vb[l] = b2 * vb[l] + (1.0 - b2) * db[l].cwiseAbs2();
        net.biases()[l] -= lr * (mb[l].array() / (vb[l].array().sqrt() + eps)).matrix();
      }
    }
  }

  TrainReport report;
  report.model = SurrogateModel(std::move(net), mean, scale, target_name);
  auto score = [&](const std::vector<std::size_t>& idx) {
    std::vector<double> pred, act;
    for (auto i : idx) {
      pred.push_back(report.model.predict(inputs[i]));
      act.push_back(targets[i]);
    }
    return average_percentage_error(pred, act, range);
  };
  report.ape = score(hold_idx);
  report.train_ape = score(train_idx);
  report.train_rows = train_idx.size();
  report.holdout_rows = hold_idx.size();
  return report;
}

TrainReport train(const Dataset& ds, std::size_t target, const SurrogateConfig& cfg) {
  if (target >= ds.target_count()) throw SurrogateError("unknown target variable index");
  std::vector<Point> xs;
  std::vector<double> ys;
  std::vector<std::uint64_t> ids;
  for (const auto& row : ds.rows()) {
    if (row.status != Status::existing || !row.targets || row.targets_estimated) continue;
    xs.push_back(row.values);
    ys.push_back((*row.targets)[target]);
    ids.push_back(row.id);
  }
  return train_regressor(xs, ys, ids, cfg, ds.targets()[target].name);
}

std::string to_string(Phase p) {
  switch (p) {
    case Phase::initial: return "Initial";
    case Phase::developed: return "Developed";
    case Phase::expert: return "Expert";
  }
  return "Initial";
}

Phase phase_for(double ape, double t1, double t2) {
  if (ape <= t2) return Phase::expert;
  if (ape <= t1) return Phase::developed;
  return Phase::initial;
}

void PhaseState::validate() const {
  if (!(t2 < t1)) throw SurrogateError("phase thresholds need t2 < t1");
}

std::optional<PhaseEvent> advance_phase(PhaseState& ps, double ape, std::uint64_t version) {
  ps.validate();
  ps.error_history.push_back({version, ape});
  const Phase next = phase_for(ape, ps.t1, ps.t2);
  if (next == ps.phase) return std::nullopt;
  PhaseEvent ev{ps.phase, next, version, ape};
  ps.phase = next;
  return ev;
}

RefineResult refine(const SurrogateModel& model, std::span<const double> p, std::size_t steps,
                    double eta, std::span<const Constraint> constraints) {
  const ScalarField f{[&](std::span<const double> x) { return model.predict(x); },
                      [&](std::span<const double> x) { return model.gradient(x); }};
  return refine(f, p, steps, eta, constraints);
}

RefineResult refine(const ScalarField& model, std::span<const double> p, std::size_t steps,
                    double eta, std::span<const Constraint> constraints) {
  RefineResult out;
  out.point.assign(p.begin(), p.end());
  out.start_value = model.value(out.point);
  out.value = out.start_value;
  for (std::size_t s = 0; s < steps; ++s) {
    const Point g = model.gradient(out.point);
    double step = eta;
    bool accepted = false;
    for (int attempt = 0; attempt < 8 && !accepted; ++attempt, step *= 0.5) {
      Point next = out.point;
      for (std::size_t a = 0; a < next.size(); ++a)
        next[a] = std::clamp(next[a] + step * g[a], 0.0, 1.0);
      if (evaluate_constraints(constraints, next)) {
        out.stop = RefineStop::constraint;
        return out;
      }
      const double v = model.value(next);
      const double gain = v - out.value;
      if (gain < 0.0) continue;
      out.point = std::move(next);
      out.value = v;
      out.history.push_back(v);
      ++out.steps;
      accepted = true;
      if (gain < 1e-6) {
        out.stop = RefineStop::no_improvement;
        return out;
      }
    }
    if (!accepted) {
      out.stop = RefineStop::no_improvement;
      return out;
    }
  }
  out.stop = RefineStop::step_limit;
  return out;
}

}  // namespace esm
