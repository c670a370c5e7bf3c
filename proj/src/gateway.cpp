#include "esmine/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>
#include <vector>

#include "json.hpp"

#include "esmine/knn.hpp"
#include "esmine/projection.hpp"
#include "esmine/strategies.hpp"
#include "esmine/views.hpp"

// After Eigen: resolv.h (pulled in by httplib) defines _res.
#include "httplib.h"

namespace esm {

using nlohmann::json;

// ---------------------------------------------------------------------------
// config

GatewayConfig GatewayConfig::from_json(const std::string& text) {
  const json j = json::parse(text);
  GatewayConfig c;
  c.host = j.value("host", c.host);
  c.port = j.value("port", c.port);
  c.data_dir = j.value("data_dir", c.data_dir.string());
  c.max_sessions = j.value("max_sessions", c.max_sessions);
  c.max_batch = j.value("max_batch", c.max_batch);
  c.threads = j.value("threads", c.threads);
  if (c.port < 0 || c.port > 65535) throw DataError("port out of range");
  return c;
}

GatewayConfig GatewayConfig::load(const std::optional<std::filesystem::path>& file) {
  GatewayConfig c;
  if (file) {
    std::ifstream in(*file);
    if (!in) throw DataError("cannot read config file " + file->string());
    std::stringstream ss;
    ss << in.rdbuf();
    c = from_json(ss.str());
  }
  c.apply_env();
  return c;
}

void GatewayConfig::apply_env() {
  if (const char* h = std::getenv("ESMINE_HOST"); h && *h) host = h;
  if (const char* p = std::getenv("ESMINE_PORT"); p && *p) {
    try {
      port = std::stoi(p);
    } catch (const std::exception&) {
      throw DataError(std::string("ESMINE_PORT is not a number: ") + p);
    }
    if (port < 0 || port > 65535) throw DataError("ESMINE_PORT out of range");
  }
  if (const char* d = std::getenv("ESMINE_DATA_DIR"); d && *d) data_dir = d;
}

std::string GatewayConfig::to_json() const {
  return json{{"host", host}, {"port", port}, {"data_dir", data_dir.string()},
              {"max_sessions", max_sessions}, {"max_batch", max_batch}, {"threads", threads}}
      .dump(2);
}

// ---------------------------------------------------------------------------

namespace {

struct HttpError : std::runtime_error {
  int status;
  HttpError(int s, const std::string& m) : std::runtime_error(m), status(s) {}
};

[[noreturn]] void fail(int status, const std::string& msg) { throw HttpError(status, msg); }

struct Session {
  std::string id;
  std::mutex writer;  // one mutation at a time
  mutable std::mutex snap_mu;
  std::shared_ptr<const Pipeline> snap;
  std::unique_ptr<Pipeline> live;
  std::unique_ptr<VerificationOracle> oracle;

  std::shared_ptr<const Pipeline> snapshot() const {
    std::lock_guard lk(snap_mu);
    return snap;
  }
  void publish() {
    auto s = std::make_shared<const Pipeline>(*live);
    std::lock_guard lk(snap_mu);
    snap = std::move(s);
  }
};

struct Job {
  std::string id;
  std::string session;
  std::string kind;
  std::atomic<int> state{0};  // 0 queued, 1 running, 2 done, 3 failed
  int http_status = 200;
  std::string result;  // JSON text when done / failed
};

const char* job_state(int s) {
  switch (s) {
    case 0: return "queued";
    case 1: return "running";
    case 2: return "done";
    default: return "failed";
  }
}

json body_json(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    json j = json::parse(body);
    if (!j.is_object()) fail(400, "request body must be a JSON object");
    return j;
  } catch (const json::parse_error& e) {
    fail(400, std::string("malformed JSON: ") + e.what());
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : path) {
    if (c == '/') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::uint64_t parse_id(const std::string& s) {
  try {
    std::size_t used = 0;
    const auto v = std::stoull(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(404, "unknown proposal '" + s + "'");
}

json row_json(const Configuration& c) {
  json j{{"id", c.id},
         {"values", c.values},
         {"raw", c.raw},
         {"status", to_string(c.status)},
         {"provenance", to_string(c.provenance)},
         {"estimated", c.targets_estimated}};
  j["targets"] = c.targets ? json(*c.targets) : json(nullptr);
  return j;
}

json events_json(const std::vector<PhaseEvent>& evs) {
  json a = json::array();
  for (const auto& e : evs)
    a.push_back({{"from", to_string(e.from)}, {"to", to_string(e.to)}, {"version", e.version}, {"ape", e.ape}});
  return a;
}

json progress_json(const Pipeline& pl) {
  const auto& ps = pl.pareto();
  auto front = [](const std::vector<TrackedPoint>& f) {
    json a = json::array();
    for (const auto& p : f) a.push_back({{"id", p.id}, {"value", p.value}, {"estimated", p.estimated}});
    return a;
  };
  json hist = json::array();
  for (const auto& e : pl.phase().error_history) hist.push_back({{"version", e.version}, {"ape", e.ape}});
  const auto& o = ps.objectives();
  return {{"budget", {{"spent", ps.budget_spent()}, {"cap", ps.budget_cap()}, {"left", ps.budget_left()}}},
          {"dominance_area", ps.dominance_area()},
          {"objectives", {{"names", o.names}, {"lo", o.lo}, {"hi", o.hi},
                          {"orientation", {o.orientation[0] == Orientation::maximize ? "maximize" : "minimize",
                                           o.orientation[1] == Orientation::maximize ? "maximize" : "minimize"}}}},
          {"front_existing", front(ps.front_existing())},
          {"front_proposed", front(ps.front_proposed())},
          {"phase", to_string(pl.phase().phase)},
          {"t1", pl.phase().t1},
          {"t2", pl.phase().t2},
          {"ape", pl.latest_ape() ? json(*pl.latest_ape()) : json(nullptr)},
          {"ape_history", hist}};
}

EsaParams esa_from(const json& j) {
  EsaParams p;
  if (!j.is_object()) return p;
  p.k = j.value("k", p.k);
  p.n = j.value("n", p.n);
  p.alpha = j.value("alpha", p.alpha);
  p.gamma = j.value("gamma", p.gamma);
  p.delta = j.value("delta", p.delta);
  p.j = j.value("j", p.j);
  p.epsilon = j.value("epsilon", p.epsilon);
  if (j.contains("sigma")) {
    p.sigma_mode = SigmaMode::fixed;
    p.sigma = j.at("sigma").get<double>();
  }
  try {
    p.validate();
  } catch (const DataError& e) {
    fail(400, e.what());
  }
  return p;
}

std::size_t variable_index(const Dataset& ds, const json& v) {
  if (v.is_number_unsigned()) {
    const auto i = v.get<std::size_t>();
    if (i >= ds.dim()) fail(400, "variable index " + std::to_string(i) + " out of range");
    return i;
  }
  if (v.is_string()) {
    if (auto i = ds.input_index(v.get<std::string>())) return *i;
    fail(400, "unknown input variable '" + v.get<std::string>() + "'");
  }
  fail(400, "variable must be an index or an input name");
}

std::vector<Constraint> brushes_from(const Dataset& ds, const json& j) {
  std::vector<Constraint> out;
  if (!j.is_array()) return out;
  for (const auto& b : j) {
    const auto var = variable_index(ds, b.at("variable"));
    const double lo = b.at("lo").get<double>(), hi = b.at("hi").get<double>();
    if (lo < 0.0 || hi > 1.0 || lo > hi) fail(400, "brush must satisfy 0 <= lo <= hi <= 1");
    out.push_back(Constraint::brush(var, lo, hi));
  }
  return out;
}

void check_version(const json& req, const Pipeline& pl) {
  if (!req.contains("expected_version")) return;
  const auto want = req.at("expected_version").get<std::uint64_t>();
  if (want != pl.dataset().version())
    fail(409, "stale dataset version " + std::to_string(want) + ", current is " +
                  std::to_string(pl.dataset().version()));
}

// Existing rows selected by an optional target interval.
struct Subset {
  std::optional<std::size_t> target;
  double lo = -std::numeric_limits<double>::infinity();
  double hi = std::numeric_limits<double>::infinity();

  bool contains(const Configuration& r) const {
    if (r.status != Status::existing) return false;
    if (!target) return true;
    const double v = (*r.targets)[*target];
    return v >= lo && v <= hi;
  }
};

double number_param(const std::string& s, const std::string& name) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  fail(400, "parameter '" + name + "' is not a number");
}

bool flag_param(const QueryParams& q, const std::string& name, bool dflt) {
  const auto it = q.find(name);
  if (it == q.end()) return dflt;
  return it->second == "1" || it->second == "true" || it->second == "yes";
}

Subset subset_from(const Dataset& ds, const std::string* target, const std::string* lo, const std::string* hi) {
  Subset s;
  if (!target) return s;
  s.target = ds.target_index(*target);
  if (!s.target) fail(400, "unknown target '" + *target + "'");
  if (lo) s.lo = number_param(*lo, "lo");
  if (hi) s.hi = number_param(*hi, "hi");
  return s;
}

const std::string* qget(const QueryParams& q, const std::string& k) {
  const auto it = q.find(k);
  return it == q.end() ? nullptr : &it->second;
}

// Overview model: global fit on all existing rows, or on the subset.
PcaModel overview_model(const Dataset& ds, const Subset& sub, bool global, std::size_t comps) {
  std::vector<Point> pts;
  for (const auto& r : ds.rows())
    if (global ? r.status == Status::existing : sub.contains(r)) pts.push_back(r.values);
  if (pts.size() < 3) fail(409, "need at least 3 existing rows for the overview projection");
  return fit_pca(pts, std::min(comps, ds.dim()));
}

json pca_json(const PcaModel& m, const Dataset& ds) {
  json loadings = json::array();
  for (std::size_t j = 0; j < m.dim(); ++j) {
    const auto l = m.loading_vector(j);
    loadings.push_back({{"variable", ds.inputs()[j].name}, {"vector", std::vector<double>(l.data(), l.data() + l.size())}});
  }
  json comps = json::array();
  for (Eigen::Index r = 0; r < m.components.rows(); ++r) {
    std::vector<double> row(m.components.cols());
    for (Eigen::Index c = 0; c < m.components.cols(); ++c) row[c] = m.components(r, c);
    comps.push_back(row);
  }
  return {{"mean", std::vector<double>(m.mean.data(), m.mean.data() + m.mean.size())},
          {"components", comps},
          {"explained_variance_ratio",
           std::vector<double>(m.explained_variance_ratio.data(),
                               m.explained_variance_ratio.data() + m.explained_variance_ratio.size())},
          {"loadings", loadings}};
}

}  // namespace

// ---------------------------------------------------------------------------

struct Gateway::Impl {
  GatewayConfig cfg;
  mutable std::mutex mu;  // sessions, jobs, counters
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::map<std::string, std::shared_ptr<Job>> jobs;
  std::vector<std::thread> workers;
  std::uint64_t next_session = 1;
  std::uint64_t next_job = 1;
  std::unique_ptr<httplib::Server> server;
  std::mutex server_mu;

  std::shared_ptr<Session> session(const std::string& id) const {
    std::lock_guard lk(mu);
    const auto it = sessions.find(id);
    if (it == sessions.end()) fail(404, "unknown session '" + id + "'");
    return it->second;
  }

  HttpReply route(const std::string& method, const std::vector<std::string>& parts, const json& req,
                  const QueryParams& query);

  json create_session(const json& req);
  json search(Session& s, const json& req);
  json round(Session& s, const json& req);
  HttpReply verify(Session& s, const json& req);
  json patch(Session& s, std::uint64_t pid, const json& req);
  json view(const Session& s, const QueryParams& q) const;
  json summary(const Session& s) const;
  json save(const Session& s, const json& req) const;

  HttpReply submit(const std::shared_ptr<Session>& s, const std::string& kind,
                   std::function<json()> work);
};

namespace {

std::filesystem::path inside(const std::filesystem::path& root, const std::string& rel) {
  const std::filesystem::path p(rel);
  if (p.is_absolute()) fail(400, "paths are relative to the data directory");
  for (const auto& part : p)
    if (part == "..") fail(400, "paths may not leave the data directory");
  return root / p;
}

ObjectivePair pair_from_targets(const Dataset& ds, const json& names) {
  std::array<std::size_t, 2> idx{0, 1};
  if (names.is_array()) {
    if (names.size() != 2) fail(400, "objectives must name exactly two targets");
    for (std::size_t a = 0; a < 2; ++a) {
      const auto i = ds.target_index(names[a].get<std::string>());
      if (!i) fail(400, "unknown target '" + names[a].get<std::string>() + "'");
      idx[a] = *i;
    }
    if (idx[0] == idx[1]) fail(400, "objectives must be two different targets");
  } else if (ds.target_count() < 2) {
    fail(400, "the dataset needs two target variables");
  }
  ObjectivePair o;
  for (std::size_t a = 0; a < 2; ++a) {
    const auto& t = ds.targets()[idx[a]];
    o.names[a] = t.name;
    o.orientation[a] = t.orientation;
    o.lo[a] = t.min;
    o.hi[a] = t.max;
  }
  return o;
}

}  // namespace

json Gateway::Impl::create_session(const json& req) {
  const json ref = req.value("dataset", json::object());
  const std::string kind = ref.value("kind", "oracle");
  auto s = std::make_shared<Session>();
  Dataset ds;
  try {
    if (kind == "oracle") {
      const auto dim = ref.value("dim", std::size_t{4});
      const auto seed = ref.value("seed", std::uint64_t{1});
      s->oracle = make_oracle(ref.value("oracle", std::string("quadratic")), dim, seed);
      ds = seed_dataset(*s->oracle, ref.value("rows", std::size_t{100}), seed);
    } else if (kind == "csv") {
      const auto path = inside(cfg.data_dir, ref.at("path").get<std::string>());
      const auto manifest = inside(cfg.data_dir, ref.at("manifest").get<std::string>());
      ds = load_csv(path, Manifest::load(manifest));
      if (ref.contains("oracle")) {
        const auto& o = ref.at("oracle");
        s->oracle = make_oracle(o.at("name").get<std::string>(), ds.dim(), o.value("seed", std::uint64_t{1}));
        if (s->oracle->targets().size() != ds.target_count())
          fail(400, "oracle target count does not match the dataset");
      }
    } else {
      fail(400, "unknown dataset kind '" + kind + "'");
    }
  } catch (const HttpError&) {
    throw;
  } catch (const std::exception& e) {
    fail(400, std::string("bad dataset reference: ") + e.what());
  }

  PhaseState phase;
  phase.t1 = req.value("t1", phase.t1);
  phase.t2 = req.value("t2", phase.t2);
  if (!(phase.t2 < phase.t1)) fail(400, "thresholds must satisfy t2 < t1");
  const double budget = req.value("budget", 50.0);
  if (!(budget >= 0.0)) fail(400, "budget must be >= 0");
  SurrogateConfig sc;
  if (req.contains("surrogate")) {
    const auto& j = req.at("surrogate");
    if (j.contains("hidden_layers")) sc.hidden_layers = j.at("hidden_layers").get<std::vector<std::size_t>>();
    sc.max_epochs = j.value("max_epochs", sc.max_epochs);
    sc.learning_rate = j.value("learning_rate", sc.learning_rate);
    sc.seed = j.value("seed", sc.seed);
    if (j.contains("activation")) sc.activation = activation_from_string(j.at("activation").get<std::string>());
  }
  const auto objectives = pair_from_targets(ds, req.value("objectives", json()));
  try {
    s->live = std::make_unique<Pipeline>(std::move(ds), objectives, budget, phase, sc);
  } catch (const HttpError&) {
    throw;
  } catch (const std::exception& e) {
    fail(400, e.what());
  }
  s->live->retrain();
  s->publish();

  std::lock_guard lk(mu);
  if (sessions.size() >= cfg.max_sessions) fail(503, "session limit reached");
  s->id = "s" + std::to_string(next_session++);
  sessions[s->id] = s;
  json out = summary(*s);
  return out;
}

json Gateway::Impl::summary(const Session& s) const {
  const auto pl = s.snapshot();
  const auto& ds = pl->dataset();
  json vars = json::array();
  for (const auto& v : ds.variables())
    vars.push_back({{"name", v.name}, {"kind", v.kind == VariableKind::input ? "input" : "target"},
                    {"min", v.min}, {"max", v.max}});
  std::size_t existing = 0;
  for (const auto& r : ds.rows()) existing += r.status == Status::existing;
  return {{"session_id", s.id},
          {"dataset_version", ds.version()},
          {"variables", vars},
          {"rows", ds.size()},
          {"existing", existing},
          {"proposed", ds.size() - existing},
          {"oracle", s.oracle ? json(s.oracle->name()) : json(nullptr)},
          {"progress", progress_json(*pl)}};
}

json Gateway::Impl::search(Session& s, const json& req) {
  std::lock_guard w(s.writer);
  Pipeline& pl = *s.live;
  check_version(req, pl);
  StrategyRequest sr;
  try {
    sr.strategy = strategy_from_string(req.value("strategy", std::string("esa")));
  } catch (const DataError& e) {
    fail(400, e.what());
  }
  sr.batch_size = req.value("batch_size", sr.batch_size);
  if (sr.batch_size == 0 || sr.batch_size > cfg.max_batch)
    fail(400, "batch_size must be in 1.." + std::to_string(cfg.max_batch));
  sr.seed = req.value("seed", pl.dataset().version() + 1);
  sr.esa = esa_from(req.value("esa", json::object()));
  sr.constraints = brushes_from(pl.dataset(), req.value("brushes", json::array()));
  ProposalBatch batch;
  try {
    batch = pl.propose(sr);
  } catch (const DataError& e) {
    fail(422, e.what());
  } catch (const ParetoError& e) {
    fail(422, e.what());
  }
  const auto ids = pl.add_proposals(batch);
  s.publish();
  json props = json::array();
  for (auto id : ids) props.push_back(row_json(*pl.dataset().find(id)));
  return {{"dataset_version", pl.dataset().version()},
          {"strategy", to_string(sr.strategy)},
          {"seed", sr.seed},
          {"phase", to_string(pl.phase().phase)},
          {"proposals", props}};
}

json Gateway::Impl::round(Session& s, const json& req) {
  if (!s.oracle) fail(409, "this session has no verification oracle");
  std::lock_guard w(s.writer);
  Pipeline& pl = *s.live;
  check_version(req, pl);
  StrategyRequest sr;
  try {
    sr.strategy = strategy_from_string(req.value("strategy", std::string("esa")));
  } catch (const DataError& e) {
    fail(400, e.what());
  }
  sr.batch_size = req.value("batch_size", sr.batch_size);
  if (sr.batch_size == 0 || sr.batch_size > cfg.max_batch)
    fail(400, "batch_size must be in 1.." + std::to_string(cfg.max_batch));
  sr.seed = req.value("seed", pl.dataset().version() + 1);
  sr.esa = esa_from(req.value("esa", json::object()));
  sr.constraints = brushes_from(pl.dataset(), req.value("brushes", json::array()));
  RefineSettings rs;
  if (req.contains("refine")) {
    rs.steps = req.at("refine").value("steps", rs.steps);
    rs.eta = req.at("refine").value("eta", rs.eta);
  }
  const auto rep = run_pipeline_round(pl, sr, req.value("verify_budget", std::size_t{5}), *s.oracle, rs);
  s.publish();
  json out = json::parse(rep.to_json());
  out["progress"] = progress_json(pl);
  return out;
}

HttpReply Gateway::Impl::verify(Session& s, const json& req) {
  if (!s.oracle) fail(409, "this session has no verification oracle");
  std::lock_guard w(s.writer);
  Pipeline& pl = *s.live;
  check_version(req, pl);
  if (!req.contains("ids") || !req.at("ids").is_array()) fail(400, "ids must be a list of proposal ids");
  const auto ids = req.at("ids").get<std::vector<std::uint64_t>>();
  const auto rep = pl.verify(ids, *s.oracle);
  s.publish();

  json entries = json::array();
  json warnings = json::array();
  bool refused = false;
  for (const auto& e : rep.entries) {
    std::string status = "verified";
    if (e.unknown) status = "unknown";
    else if (e.already_existing) status = "already_existing";
    else if (e.budget_exhausted) status = "budget_exhausted";
    else if (!e.accepted) status = "skipped";
    if (e.already_existing) warnings.push_back("row " + std::to_string(e.id) + " is already verified; nothing charged");
    if (e.unknown) warnings.push_back("row " + std::to_string(e.id) + " does not exist");
    refused = refused || e.budget_exhausted;
    json ej{{"id", e.id}, {"status", status}, {"front_expanded", e.front_expanded}};
    ej["targets"] = e.accepted ? json(e.targets) : json(nullptr);
    entries.push_back(ej);
  }
  json out{{"dataset_version", pl.dataset().version()},
           {"entries", entries},
           {"verified", rep.verified},
           {"refused", refused},
           {"area_before", rep.area_before},
           {"area_after", rep.area_after},
           {"events", events_json(rep.events)},
           {"warnings", warnings},
           {"progress", progress_json(pl)}};
  if (refused && rep.verified == 0) {
    out["error"] = "verification budget exhausted";
    return {409, out.dump()};
  }
  return {200, out.dump()};
}

json Gateway::Impl::patch(Session& s, std::uint64_t pid, const json& req) {
  std::lock_guard w(s.writer);
  Pipeline& pl = *s.live;
  check_version(req, pl);
  const auto& ds = pl.dataset();
  const auto* row = ds.find(pid);
  if (!row) fail(404, "unknown proposal " + std::to_string(pid));
  if (row->status == Status::existing) fail(409, "row " + std::to_string(pid) + " is verified and cannot be edited");

  Point target = row->values;
  const json deltas = req.value("deltas", json::object());
  if (deltas.is_array()) {
    if (deltas.size() != ds.dim()) fail(400, "deltas must have one entry per input variable");
    for (std::size_t a = 0; a < ds.dim(); ++a) target[a] += deltas[a].get<double>();
  } else if (deltas.is_object()) {
    for (const auto& [name, v] : deltas.items()) {
      const auto i = ds.input_index(name);
      if (!i) fail(400, "unknown input variable '" + name + "'");
      target[*i] += v.get<double>();
    }
  } else {
    fail(400, "deltas must be a list or an object");
  }
  json clamped = json::array();
  for (std::size_t a = 0; a < target.size(); ++a)
    if (target[a] < 0.0 || target[a] > 1.0) clamped.push_back(ds.inputs()[a].name);

  const Subset sub = subset_from(ds, req.contains("target") ? &req.at("target").get_ref<const std::string&>() : nullptr,
                                 nullptr, nullptr);
  Subset ranged = sub;
  if (req.contains("lo")) ranged.lo = req.at("lo").get<double>();
  if (req.contains("hi")) ranged.hi = req.at("hi").get<double>();
  const auto model = overview_model(ds, ranged, req.value("use_global_pca", true), 2);

  const Point before = row->values;
  const auto& edited = pl.edit_proposal(pid, target, Provenance::user_edited);
  Eigen::VectorXd disp = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(model.n_components()));
  std::vector<double> applied;
  for (std::size_t a = 0; a < before.size(); ++a) {
    const double d = edited.values[a] - before[a];
    applied.push_back(d);
    if (d != 0.0) disp += move_delta(model, a, d);
  }
  json out{{"dataset_version", pl.dataset().version()},
           {"proposal", row_json(edited)},
           {"applied_deltas", applied},
           {"displacement", std::vector<double>(disp.data(), disp.data() + disp.size())},
           {"clamped", clamped},
           {"estimate", pl.estimates_enabled() ? json(pl.estimate(edited.values)) : json(nullptr)}};
  s.publish();
  return out;
}

json Gateway::Impl::view(const Session& s, const QueryParams& q) const {
  const auto pl = s.snapshot();
  const auto& ds = pl->dataset();
  const Subset sub = subset_from(ds, qget(q, "target"), qget(q, "lo"), qget(q, "hi"));
  const bool global = flag_param(q, "use_global_pca", true);
  const auto model = overview_model(ds, sub, global, 2);
  const auto full = overview_model(ds, sub, global, ds.dim());

  json pts = json::array();
  std::vector<Eigen::VectorXd> dens_pts;
  for (const auto& r : ds.rows()) {
    const auto p = project(model, r.values);
    const bool in = sub.contains(r);
    pts.push_back({{"id", r.id}, {"x", p(0)}, {"y", p.size() > 1 ? p(1) : 0.0},
                   {"status", to_string(r.status)}, {"in_subset", in}});
    if (in && p.size() > 1) dens_pts.push_back(p);
  }
  json scree_j = json::array();
  for (const auto& e : scree(full))
    scree_j.push_back({{"component", e.component}, {"ratio", e.ratio}, {"cumulative", e.cumulative}});

  json out{{"dataset_version", ds.version()},
           {"use_global_pca", global},
           {"pca", pca_json(model, ds)},
           {"scree", scree_j},
           {"points", pts}};

  const auto grid = static_cast<std::size_t>(qget(q, "grid") ? number_param(*qget(q, "grid"), "grid") : 40);
  if (grid == 0 || grid > 400) fail(400, "grid must be in 1..400");
  try {
    const auto g = density_grid(dens_pts, grid, grid);
    out["density"] = {{"nx", g.nx}, {"ny", g.ny}, {"x0", g.x0}, {"x1", g.x1}, {"y0", g.y0}, {"y1", g.y1},
                      {"bandwidth", {g.bandwidth_x, g.bandwidth_y}}, {"cell_area", g.cell_area()},
                      {"mass", g.mass()}, {"values", g.values}};
  } catch (const DataError& e) {
    out["density"] = nullptr;
    out["density_note"] = e.what();
  }

  // Scented bars over the subset for one target (first objective by default).
  std::size_t t = pl->objective_targets()[0];
  if (const auto* name = qget(q, "scented_target")) {
    const auto i = ds.target_index(*name);
    if (!i) fail(400, "unknown target '" + *name + "'");
    t = *i;
  }
  const auto bins = static_cast<std::size_t>(qget(q, "bins") ? number_param(*qget(q, "bins"), "bins") : 10);
  if (bins == 0 || bins > 200) fail(400, "bins must be in 1..200");
  std::vector<Point> sp;
  std::vector<double> sv;
  for (const auto& r : ds.rows())
    if (sub.contains(r)) {
      sp.push_back(r.values);
      sv.push_back((*r.targets)[t]);
    }
  json bars = json::array();
  for (const auto& b : scented_bars(sp, sv, ds.targets()[t].min, ds.targets()[t].max, bins)) {
    json m = json::array(), c = json::array();
    for (std::size_t i = 0; i < b.density.size(); ++i) {
      m.push_back(b.target_mean[i] ? json(*b.target_mean[i]) : json(nullptr));
      c.push_back(b.target_color[i] ? json(*b.target_color[i]) : json(nullptr));
    }
    bars.push_back({{"variable", ds.inputs()[b.variable].name}, {"edges", b.edges}, {"density", b.density},
                    {"target_mean", m}, {"target_color", c}});
  }
  out["scented"] = {{"target", ds.targets()[t].name}, {"bars", bars}};

  if (const auto* nb = qget(q, "neighbor")) {
    const auto pid = parse_id(*nb);
    const auto* row = ds.find(pid);
    if (!row) fail(404, "unknown proposal " + *nb);
    const auto k = static_cast<std::size_t>(qget(q, "k") ? number_param(*qget(q, "k"), "k") : 10);
    if (k < 2) fail(400, "k must be at least 2");
    std::vector<Point> existing;
    std::vector<const Configuration*> rows;
    for (const auto& r : ds.rows())
      if (r.status == Status::existing) {
        existing.push_back(r.values);
        rows.push_back(&r);
      }
    const KdTree index(existing);
    const auto ns = index.query(row->values, k);
    std::vector<Point> neigh;
    for (auto i : ns.indices) neigh.push_back(existing[i]);
    try {
      const auto emb = cos_mds(row->values, neigh);
      const auto obj = pl->objective_targets()[0];
      json np = json::array();
      for (std::size_t i = 0; i < neigh.size(); ++i)
        np.push_back({{"id", rows[ns.indices[i]]->id}, {"x", emb.points[i](0)}, {"y", emb.points[i](1)},
                      {"distance", emb.original_distances[i]}, {"target", (*rows[ns.indices[i]]->targets)[obj]}});
      out["neighbors"] = {{"id", pid}, {"k", neigh.size()}, {"points", np},
                          {"retained_fraction", emb.retained_fraction()}, {"diagnostics", emb.diagnostics}};
    } catch (const ProjectionError& e) {
      fail(422, e.what());
    }
  }
  out["progress"] = progress_json(*pl);
  return out;
}

json Gateway::Impl::save(const Session& s, const json& req) const {
  const auto pl = s.snapshot();
  const auto& ds = pl->dataset();
  const std::string name = req.value("name", s.id);
  if (name.empty() || name.find('/') != std::string::npos || name.find("..") != std::string::npos)
    fail(400, "bad save name");
  const Dataset out = existing_subset(ds);
  std::filesystem::create_directories(cfg.data_dir);
  write_csv(cfg.data_dir / (name + ".csv"), out);
  std::ofstream(cfg.data_dir / (name + ".manifest.json")) << manifest_for(out).to_json() << "\n";
  return {{"csv", name + ".csv"}, {"manifest", name + ".manifest.json"}, {"rows", out.size()},
          {"dataset_version", ds.version()}};
}

HttpReply Gateway::Impl::submit(const std::shared_ptr<Session>& s, const std::string& kind,
                                std::function<json()> work) {
  auto job = std::make_shared<Job>();
  {
    std::lock_guard lk(mu);
    job->id = "j" + std::to_string(next_job++);
    job->session = s->id;
    job->kind = kind;
    jobs[job->id] = job;
    workers.emplace_back([job, work = std::move(work)] {
      job->state = 1;
      try {
        job->result = work().dump();
        job->http_status = 200;
        job->state = 2;
      } catch (const HttpError& e) {
        job->result = json{{"error", e.what()}}.dump();
        job->http_status = e.status;
        job->state = 3;
      } catch (const std::exception& e) {
        job->result = json{{"error", e.what()}}.dump();
        job->http_status = 500;
        job->state = 3;
      }
    });
  }
  return {202, json{{"job_id", job->id}, {"status", "queued"}}.dump()};
}

HttpReply Gateway::Impl::route(const std::string& method, const std::vector<std::string>& p,
                               const json& req, const QueryParams& q) {
  auto ok = [](const json& j, int status = 200) { return HttpReply{status, j.dump()}; };
  if (p.size() == 1 && p[0] == "health" && method == "GET") return ok({{"status", "ok"}});
  if (p.size() == 1 && p[0] == "oracles" && method == "GET") return ok({{"oracles", oracle_names()}});
  if (p.size() == 2 && p[0] == "jobs" && method == "GET") {
    std::shared_ptr<Job> job;
    {
      std::lock_guard lk(mu);
      const auto it = jobs.find(p[1]);
      if (it == jobs.end()) fail(404, "unknown job '" + p[1] + "'");
      job = it->second;
    }
    const int st = job->state.load();
    json out{{"job_id", job->id}, {"session_id", job->session}, {"kind", job->kind}, {"status", job_state(st)}};
    if (st >= 2) {
      out["http_status"] = job->http_status;
      out["result"] = json::parse(job->result);
    }
    return ok(out);
  }
  if (p.empty() || p[0] != "sessions") fail(404, "no such endpoint");
  if (p.size() == 1) {
    if (method == "POST") return ok(create_session(req), 201);
    if (method == "GET") {
      json ids = json::array();
      std::lock_guard lk(mu);
      for (const auto& [id, _] : sessions) ids.push_back(id);
      return ok({{"sessions", ids}});
    }
    fail(405, "method not allowed");
  }
  auto s = session(p[1]);
  if (p.size() == 2) {
    if (method == "GET") return ok(summary(*s));
    if (method == "DELETE") {
      std::lock_guard lk(mu);
      sessions.erase(p[1]);
      return ok({{"deleted", p[1]}});
    }
    fail(405, "method not allowed");
  }
  const std::string& what = p[2];
  if (p.size() == 3 && what == "search" && method == "POST") {
    if (req.value("async", false)) return submit(s, "search", [this, s, req] { return search(*s, req); });
    return ok(search(*s, req));
  }
  if (p.size() == 3 && what == "round" && method == "POST") {
    if (req.value("async", false)) return submit(s, "round", [this, s, req] { return round(*s, req); });
    return ok(round(*s, req));
  }
  if (p.size() == 3 && what == "verify" && method == "POST") return verify(*s, req);
  if (p.size() == 3 && what == "view" && method == "GET") return ok(view(*s, q));
  if (p.size() == 3 && what == "save" && method == "POST") return ok(save(*s, req));
  if (p.size() == 3 && what == "proposals" && method == "GET") {
    const auto pl = s->snapshot();
    json rows = json::array();
    for (const auto& r : pl->dataset().rows())
      if (r.status == Status::proposed) rows.push_back(row_json(r));
    return ok({{"dataset_version", pl->dataset().version()}, {"proposals", rows}});
  }
  if (p.size() == 3 && what == "rows" && method == "GET") {
    const auto pl = s->snapshot();
    json rows = json::array();
    for (const auto& r : pl->dataset().rows()) rows.push_back(row_json(r));
    return ok({{"dataset_version", pl->dataset().version()}, {"rows", rows}});
  }
  if (p.size() == 4 && what == "proposals") {
    const auto pid = parse_id(p[3]);
    if (method == "PATCH") return ok(patch(*s, pid, req));
    if (method == "GET") {
      const auto pl = s->snapshot();
      const auto* r = pl->dataset().find(pid);
      if (!r) fail(404, "unknown proposal " + p[3]);
      return ok({{"dataset_version", pl->dataset().version()}, {"proposal", row_json(*r)}});
    }
    fail(405, "method not allowed");
  }
  fail(404, "no such endpoint");
}

// ---------------------------------------------------------------------------

Gateway::Gateway(GatewayConfig cfg) : impl_(std::make_unique<Impl>()) { impl_->cfg = std::move(cfg); }

Gateway::~Gateway() {
  stop();
  wait_for_jobs();
}

HttpReply Gateway::handle(const std::string& method, const std::string& path, const std::string& body,
                          const QueryParams& query) {
  try {
    const json req = (method == "POST" || method == "PATCH") ? body_json(body) : json::object();
    return impl_->route(method, split_path(path), req, query);
  } catch (const HttpError& e) {
    return {e.status, json{{"error", e.what()}}.dump()};
  } catch (const json::exception& e) {
    return {400, json{{"error", std::string("bad request field: ") + e.what()}}.dump()};
  } catch (const std::exception& e) {
    return {500, json{{"error", e.what()}}.dump()};
  }
}

int Gateway::bind() {
  std::lock_guard lk(impl_->server_mu);
  impl_->server = std::make_unique<httplib::Server>();
  auto& svr = *impl_->server;
  const auto threads = std::max<std::size_t>(1, impl_->cfg.threads);
  svr.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };
  auto bridge = [this](const httplib::Request& req, httplib::Response& res) {
    QueryParams q;
    for (const auto& [k, v] : req.params) q[k] = v;
    const auto r = handle(req.method, req.path, req.body, q);
    res.status = r.status;
    res.set_content(r.body, "application/json");
  };
  svr.Get(".*", bridge);
  svr.Post(".*", bridge);
  svr.Patch(".*", bridge);
  svr.Delete(".*", bridge);
  if (impl_->cfg.port == 0) return svr.bind_to_any_port(impl_->cfg.host);
  return svr.bind_to_port(impl_->cfg.host, impl_->cfg.port) ? impl_->cfg.port : -1;
}

bool Gateway::serve() {
  httplib::Server* svr = nullptr;
  {
    std::lock_guard lk(impl_->server_mu);
    svr = impl_->server.get();
  }
  return svr && svr->listen_after_bind();
}

bool Gateway::listen() { return bind() >= 0 && serve(); }

void Gateway::stop() {
  std::lock_guard lk(impl_->server_mu);
  if (impl_->server) impl_->server->stop();
}

void Gateway::wait_for_jobs() {
  std::vector<std::thread> ws;
  {
    std::lock_guard lk(impl_->mu);
    ws.swap(impl_->workers);
  }
  for (auto& t : ws)
    if (t.joinable()) t.join();
}

const GatewayConfig& Gateway::config() const { return impl_->cfg; }

std::size_t Gateway::session_count() const {
  std::lock_guard lk(impl_->mu);
  return impl_->sessions.size();
}

}  // namespace esm
