#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <thread>

#include "json.hpp"

#include "esmine/data_io.hpp"
#include "esmine/gateway.hpp"
#include "esmine/pareto.hpp"

#include "httplib.h"

using namespace esm;
using nlohmann::json;

namespace {

json create_body(double budget = 50, std::size_t dim = 2, std::uint64_t seed = 3) {
  return {{"dataset", {{"kind", "oracle"}, {"oracle", "quadratic"}, {"dim", dim}, {"rows", 60}, {"seed", seed}}},
          {"budget", budget},
          {"surrogate", {{"hidden_layers", {8}}, {"max_epochs", 30}}}};
}

struct Client {
  Gateway gw;
  explicit Client(GatewayConfig cfg = {}) : gw(std::move(cfg)) {}

  json call(const std::string& method, const std::string& path, const json& body = json::object(),
            int expect = 200, const QueryParams& q = {}) {
    const auto r = gw.handle(method, path, body.dump(), q);
    INFO(method << " " << path << " -> " << r.body);
    CHECK(r.status == expect);
    return json::parse(r.body);
  }
  std::string session(const json& body = create_body()) {
    return call("POST", "/sessions", body, 201)["session_id"].get<std::string>();
  }
  // A single proposal moved to the given point.
  std::uint64_t proposal_at(const std::string& s, const std::vector<double>& at) {
    const auto b = call("POST", "/sessions/" + s + "/search", {{"strategy", "blank"}});
    const auto id = b["proposals"][0]["id"].get<std::uint64_t>();
    std::vector<double> d;
    for (double v : at) d.push_back(v - 0.5);
    call("PATCH", "/sessions/" + s + "/proposals/" + std::to_string(id), {{"deltas", d}});
    return id;
  }
};

}  // namespace

TEST_CASE("sessions: create, validate, isolate") {
  Client c;
  const auto a = c.session();
  const auto b = c.session();
  CHECK(a != b);
  auto bad = create_body();
  bad["t1"] = 10;
  bad["t2"] = 20;
  c.call("POST", "/sessions", bad, 400);
  bad = create_body();
  bad["dataset"]["oracle"] = "nope";
  c.call("POST", "/sessions", bad, 400);
  bad = create_body();
  bad["dataset"] = {{"kind", "csv"}, {"path", "../x.csv"}, {"manifest", "m.json"}};
  c.call("POST", "/sessions", bad, 400);
  c.call("GET", "/sessions/zzz", {}, 404);

  const auto va = c.call("GET", "/sessions/" + a)["dataset_version"].get<std::uint64_t>();
  const auto vb = c.call("GET", "/sessions/" + b)["dataset_version"].get<std::uint64_t>();
  c.call("POST", "/sessions/" + a + "/search", {{"strategy", "rs"}, {"batch_size", 10}});
  CHECK(c.call("GET", "/sessions/" + a)["dataset_version"].get<std::uint64_t>() > va);
  CHECK(c.call("GET", "/sessions/" + b)["dataset_version"].get<std::uint64_t>() == vb);
  CHECK(c.call("GET", "/sessions/" + b)["proposed"] == 0);
  c.call("DELETE", "/sessions/" + b);
  CHECK(c.gw.session_count() == 1);
}

TEST_CASE("search: blank, batch size, brushes, errors") {
  Client c;
  const auto s = c.session();
  const auto blank = c.call("POST", "/sessions/" + s + "/search", {{"strategy", "blank"}});
  REQUIRE(blank["proposals"].size() == 1);
  CHECK(blank["proposals"][0]["values"] == json({0.5, 0.5}));

  const json esa{{"strategy", "esa"}, {"batch_size", 50}, {"esa", {{"n", 80}}}};
  const auto r = c.call("POST", "/sessions/" + s + "/search", esa);
  CHECK(r["proposals"].size() == 50);

  json brushed = esa;
  brushed["brushes"] = {{{"variable", "x0"}, {"lo", 0.2}, {"hi", 0.4}}, {{"variable", 1}, {"lo", 0.6}, {"hi", 0.9}}};
  for (const auto& p : c.call("POST", "/sessions/" + s + "/search", brushed)["proposals"]) {
    CHECK(p["values"][0].get<double>() >= 0.2);
    CHECK(p["values"][0].get<double>() <= 0.4);
    CHECK(p["values"][1].get<double>() >= 0.6);
    CHECK(p["values"][1].get<double>() <= 0.9);
  }
  brushed["brushes"] = {{{"variable", 0}, {"lo", -0.1}, {"hi", 0.4}}};
  c.call("POST", "/sessions/" + s + "/search", brushed, 400);
  c.call("POST", "/sessions/" + s + "/search", {{"strategy", "teleport"}}, 400);
  c.call("POST", "/sessions/" + s + "/search", {{"strategy", "esa"}, {"esa", {{"alpha", -1}}}}, 400);
}

TEST_CASE("patch: displacement is the loading-vector image of the applied deltas") {
  Client c;
  const auto s = c.session(create_body(50, 4));
  const auto b = c.call("POST", "/sessions/" + s + "/search", {{"strategy", "rs"}, {"batch_size", 3}});
  const auto id = b["proposals"][0]["id"].get<std::uint64_t>();
  const auto path = "/sessions/" + s + "/proposals/" + std::to_string(id);

  const auto zero = c.call("PATCH", path, {{"deltas", {0, 0, 0, 0}}});
  CHECK(zero["displacement"] == json({0.0, 0.0}));
  CHECK(zero["proposal"]["provenance"] == "user-edited");

  // Oracle: components * (after - before), from the view's model.
  const auto view = c.call("GET", "/sessions/" + s + "/view");
  const auto comps = view["pca"]["components"];
  const auto before = c.call("GET", path)["proposal"]["values"].get<std::vector<double>>();
  const auto moved = c.call("PATCH", path, {{"deltas", {{"x2", 0.01}}}});
  const auto after = moved["proposal"]["values"].get<std::vector<double>>();
  for (std::size_t r = 0; r < 2; ++r) {
    double expect = 0.0;
    for (std::size_t a = 0; a < 4; ++a) expect += comps[r][a].get<double>() * (after[a] - before[a]);
    CHECK(moved["displacement"][r].get<double>() == doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(moved["clamped"].empty());
  const bool initial = c.call("GET", "/sessions/" + s)["progress"]["phase"] == "Initial";
  CHECK(moved["estimate"].is_null() == initial);

  const auto clamp = c.call("PATCH", path, {{"deltas", {{"x0", 5.0}}}});
  CHECK(clamp["clamped"] == json({"x0"}));
  CHECK(clamp["proposal"]["values"][0] == 1.0);

  c.call("PATCH", "/sessions/" + s + "/proposals/99999", {{"deltas", {0, 0, 0, 0}}}, 404);
  c.call("PATCH", "/sessions/" + s + "/proposals/1", {{"deltas", {0, 0, 0, 0}}}, 409);  // a seed row
}

TEST_CASE("verify: area, idempotence, budget cap of five") {
  Client c;
  const auto s = c.session(create_body(5));
  const auto oracle = make_oracle("quadratic", 2, 3);

  // Best point of the first bowl: always on the front, rarely already in the data.
  std::vector<double> best{0, 0}, worst{0, 0};
  double hi = -1e9, lo = 1e9;
  for (int i = 0; i <= 100; ++i)
    for (int j = 0; j <= 100; ++j) {
      const std::vector<double> p{i / 100.0, j / 100.0};
      const double v = oracle->measure(p).targets[0];
      const double w = oracle->measure(p).targets[0] + oracle->measure(p).targets[1];
      if (v > hi) hi = v, best = p;
      if (w < lo) lo = w, worst = p;
    }
  const auto bad = c.proposal_at(s, worst);
  const auto good = c.proposal_at(s, best);

  auto v1 = c.call("POST", "/sessions/" + s + "/verify", {{"ids", {bad}}});
  CHECK(v1["entries"][0]["status"] == "verified");
  CHECK(v1["area_after"] == v1["area_before"]);
  auto v2 = c.call("POST", "/sessions/" + s + "/verify", {{"ids", {good}}});
  CHECK(v2["area_after"].get<double>() > v2["area_before"].get<double>());
  CHECK(v2["entries"][0]["front_expanded"] == true);

  const auto again = c.call("POST", "/sessions/" + s + "/verify", {{"ids", {good}}});
  CHECK(again["entries"][0]["status"] == "already_existing");
  CHECK(again["warnings"].size() == 1);
  CHECK(again["progress"]["budget"]["spent"] == 2.0);

  std::vector<std::uint64_t> more;
  for (int i = 0; i < 4; ++i) more.push_back(c.proposal_at(s, {0.1 * i, 0.3}));
  for (int i = 0; i < 3; ++i) c.call("POST", "/sessions/" + s + "/verify", {{"ids", {more[i]}}});
  const auto sixth = c.call("POST", "/sessions/" + s + "/verify", {{"ids", {more[3]}}}, 409);
  CHECK(sixth["entries"][0]["status"] == "budget_exhausted");
  CHECK(sixth["progress"]["budget"]["spent"] == 5.0);
  CHECK(c.call("GET", "/sessions/" + s + "/proposals/" + std::to_string(more[3]))["proposal"]["status"] == "proposed");
}

TEST_CASE("stale versions are rejected") {
  Client c;
  const auto s = c.session();
  const auto v = c.call("GET", "/sessions/" + s)["dataset_version"].get<std::uint64_t>();
  c.call("POST", "/sessions/" + s + "/search", {{"strategy", "blank"}, {"expected_version", v}});
  const auto stale = c.call("POST", "/sessions/" + s + "/search", {{"strategy", "blank"}, {"expected_version", v}}, 409);
  CHECK(stale["error"].get<std::string>().find("stale") != std::string::npos);
}

TEST_CASE("view: subset PCA, neighbors, density quadrature, scented bars") {
  Client c;
  auto body = create_body(50, 4);
  body["dataset"]["rows"] = 150;
  const auto s = c.session(body);
  const auto global = c.call("GET", "/sessions/" + s + "/view");
  const QueryParams sub{{"use_global_pca", "false"}, {"target", "bowl_a"}, {"lo", "0.9"}, {"hi", "1"}};
  const auto local = c.call("GET", "/sessions/" + s + "/view", {}, 200, sub);
  CHECK(global["scree"][0]["ratio"] != local["scree"][0]["ratio"]);
  CHECK(global["points"].size() == 150);

  const double mass = global["density"]["mass"].get<double>();
  CHECK(std::abs(mass - 1.0) < 0.02);

  const auto& bars = global["scented"]["bars"];
  REQUIRE(bars.size() == 4);
  double share = 0.0;
  for (const auto& v : bars[0]["density"]) share += v.get<double>();
  CHECK(share == doctest::Approx(1.0));

  const auto prop = c.call("POST", "/sessions/" + s + "/search", {{"strategy", "rs"}, {"batch_size", 1}});
  const auto pid = prop["proposals"][0]["id"].get<std::uint64_t>();
  for (std::size_t k : {6u, 8u}) {
    const auto v = c.call("GET", "/sessions/" + s + "/view", {}, 200,
                          {{"neighbor", std::to_string(pid)}, {"k", std::to_string(k)}});
    CHECK(v["neighbors"]["points"].size() == k);
    for (const auto& p : v["neighbors"]["points"]) {
      const double r = std::hypot(p["x"].get<double>(), p["y"].get<double>());
      CHECK(r == doctest::Approx(p["distance"].get<double>()).epsilon(1e-9));
    }
  }
  c.call("GET", "/sessions/" + s + "/view", {}, 404, {{"neighbor", "123456"}});
}

TEST_CASE("jobs: async search and round") {
  Client c;
  const auto s = c.session(create_body(10, 2));
  const auto job = c.call("POST", "/sessions/" + s + "/search", {{"strategy", "rs"}, {"batch_size", 7}, {"async", true}}, 202);
  c.gw.wait_for_jobs();
  const auto done = c.call("GET", "/jobs/" + job["job_id"].get<std::string>());
  CHECK(done["status"] == "done");
  CHECK(done["result"]["proposals"].size() == 7);

  const auto r = c.call("POST", "/sessions/" + s + "/round", {{"strategy", "rs"}, {"batch_size", 20}, {"verify_budget", 2}});
  CHECK(r["proposals"] == 20);
  CHECK(r.contains("phase_after"));
  c.call("GET", "/jobs/j999", {}, 404);
}

TEST_CASE("two sessions mutated from interleaved threads stay independent") {
  Client c;
  const auto a = c.session(create_body(100, 2, 3));
  const auto b = c.session(create_body(100, 2, 3));
  auto worker = [&](const std::string& s, int n) {
    for (int i = 0; i < n; ++i) c.gw.handle("POST", "/sessions/" + s + "/search", json{{"strategy", "rs"}, {"batch_size", 2}}.dump());
  };
  std::thread ta(worker, a, 12), tb(worker, b, 5);
  ta.join();
  tb.join();
  CHECK(c.call("GET", "/sessions/" + a)["proposed"] == 24);
  CHECK(c.call("GET", "/sessions/" + b)["proposed"] == 10);
}

TEST_CASE("save writes a loadable dataset") {
  const auto dir = std::filesystem::temp_directory_path() / "esmine_gateway_test";
  std::filesystem::remove_all(dir);
  GatewayConfig cfg;
  cfg.data_dir = dir;
  Client c(cfg);
  const auto s = c.session();
  const auto saved = c.call("POST", "/sessions/" + s + "/save", {{"name", "snap"}});
  CHECK(saved["rows"] == 60);
  json reload{{"dataset", {{"kind", "csv"}, {"path", "snap.csv"}, {"manifest", "snap.manifest.json"},
                           {"oracle", {{"name", "quadratic"}, {"seed", 3}}}}},
              {"surrogate", {{"hidden_layers", {8}}, {"max_epochs", 30}}}};
  const auto t = c.call("POST", "/sessions", reload, 201);
  CHECK(t["existing"] == 60);
}

TEST_CASE("config file and environment overrides") {
  const auto cfg = GatewayConfig::from_json(R"({"port": 9001, "data_dir": "/tmp/d", "threads": 2})");
  CHECK(cfg.port == 9001);
  CHECK(cfg.threads == 2);
  CHECK_THROWS(GatewayConfig::from_json(R"({"port": 70000})"));
  ::setenv("ESMINE_PORT", "9123", 1);
  ::setenv("ESMINE_DATA_DIR", "/tmp/other", 1);
  auto env = cfg;
  env.apply_env();
  CHECK(env.port == 9123);
  CHECK(env.data_dir == "/tmp/other");
  ::setenv("ESMINE_PORT", "nope", 1);
  CHECK_THROWS(env.apply_env());
  ::unsetenv("ESMINE_PORT");
  ::unsetenv("ESMINE_DATA_DIR");
}

TEST_CASE("http: loopback round trip") {
  GatewayConfig cfg;
  cfg.port = 0;
  cfg.threads = 2;
  Gateway gw(cfg);
  const int port = gw.bind();
  REQUIRE(port > 0);
  std::thread server([&] { gw.serve(); });
  httplib::Client cli("127.0.0.1", port);
  cli.set_read_timeout(30, 0);
  auto health = cli.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto created = cli.Post("/sessions", create_body().dump(), "application/json");
  REQUIRE(created);
  CHECK(created->status == 201);
  const auto id = json::parse(created->body)["session_id"].get<std::string>();
  auto view = cli.Get("/sessions/" + id + "/view?grid=10&bins=5");
  REQUIRE(view);
  CHECK(view->status == 200);
  CHECK(json::parse(view->body)["density"]["nx"] == 10);
  auto missing = cli.Get("/nothing");
  REQUIRE(missing);
  CHECK(missing->status == 404);
  gw.stop();
  server.join();
}
