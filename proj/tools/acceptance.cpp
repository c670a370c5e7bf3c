// Acceptance suite: one PASS/FAIL line per criterion, with timings.
// Exit status is non-zero when any line fails.

#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "commands.hpp"
#include "esmine/data_io.hpp"
#include "esmine/esa.hpp"
#include "esmine/knn.hpp"
#include "esmine/pareto.hpp"
#include "esmine/projection.hpp"
#include "esmine/stats.hpp"
#include "esmine/surrogate.hpp"
#include "oracles.hpp"

using namespace esm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool in_time = limit_s <= 0 || s < limit_s;
  const bool ok = o.pass && in_time;
  failures += !ok;
  std::ostringstream t;
  t << std::fixed << std::setprecision(2) << s << "s";
  if (limit_s > 0) t << " (limit " << limit_s << "s)";
  std::cout << (ok ? "PASS" : "FAIL") << "  " << name << "  [" << t.str() << "]  " << o.detail
            << (in_time ? "" : "  runtime exceeded") << std::endl;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(4) << v;
  return s.str();
}

Outcome lj_analytics() {
  double worst_v = 0, worst_f = 0, worst_rel = 0;
  for (double sigma : {0.05, 0.3, 1.0, 2.5}) {
    for (double eps : {0.5, 1.0, 3.0}) {
      const double rmin = std::pow(2.0, 1.0 / 6.0) * sigma;
      worst_v = std::max({worst_v, std::abs(lj_potential(sigma, eps, sigma)),
                          std::abs(lj_potential(rmin, eps, sigma) + eps)});
      worst_f = std::max(worst_f, std::abs(lj_force_magnitude(rmin, eps, sigma)) / (eps / sigma));
      for (int i = 0; i <= 400; ++i) {
        const double r = sigma * (0.8 + 2.2 * i / 400.0);
        const double h = 1e-5 * sigma;
        // repulsion positive: F = -dV/dr
        const double fd = -(lj_potential(r + h, eps, sigma) - lj_potential(r - h, eps, sigma)) / (2 * h);
        const double f = lj_force_magnitude(r, eps, sigma);
        // relative to the force scale eps/sigma near the sign change at rmin
        worst_rel = std::max(worst_rel, std::abs(f - fd) / std::max(std::abs(f), eps / sigma));
      }
    }
  }
  return {worst_v <= 1e-9 && worst_f <= 1e-9 && worst_rel <= 1e-6,
          "max|V| err " + fmt(worst_v) + ", |F(rmin)|/(eps/sigma) " + fmt(worst_f) + ", force vs dV/dr " +
              fmt(worst_rel)};
}

Outcome knn_equivalence() {
  std::size_t mismatches = 0, queries = 0;
  for (std::size_t d : {2u, 5u, 11u, 20u}) {
    Rng rng(100 + d);
    std::vector<Point> pts;
    for (int i = 0; i < 3000; ++i) pts.push_back(rng.uniform_point(d));
    // a few exact duplicates so ties and coincident exclusion are exercised
    for (int i = 0; i < 20; ++i) pts.push_back(pts[i]);
    const KdTree tree(pts);
    for (int q = 0; q < 250; ++q, ++queries) {
      Point query = q % 10 == 0 ? pts[rng.index(pts.size())] : rng.uniform_point(d);
      const std::size_t k = 1 + rng.index(20);
      const auto got = tree.query(query, k);
      const auto want = oracle::knn(pts, query, k);
      bool same = got.size() == want.size();
      for (std::size_t i = 0; same && i < want.size(); ++i)
        same = got.indices[i] == want[i].second && got.distances[i] == std::sqrt(want[i].first);
      mismatches += !same;
    }
  }
  return {mismatches == 0, std::to_string(queries) + " queries, " + std::to_string(mismatches) + " mismatches"};
}

std::vector<std::array<double, 2>> as2(const std::vector<Point>& v) {
  std::vector<std::array<double, 2>> out;
  for (const auto& p : v) out.push_back({p[0], p[1]});
  return out;
}

Outcome fig4_properties() {
  Fig4Config cfg;  // 300 samples, 600 agents, k 9, n 400, alpha 1e-3, j 10, delta 1e-7, gamma 0.9
  const auto r = run_fig4(cfg);
  std::vector<double> agent_gap, self_gap;
  for (const auto& a : r.final_no_momentum) {
    double best = 1e300;
    for (const auto& s : r.samples) best = std::min(best, distance(a, s));
    agent_gap.push_back(best);
  }
  for (std::size_t i = 0; i < r.samples.size(); ++i) {
    double best = 1e300;
    for (std::size_t j = 0; j < r.samples.size(); ++j)
      if (i != j) best = std::min(best, distance(r.samples[i], r.samples[j]));
    self_gap.push_back(best);
  }
  const auto t = stats::rank_sum_test(agent_gap, self_gap, stats::Alternative::greater);
  const double hull_m = oracle::hull_area(as2(r.samples_momentum));
  const double hull_0 = oracle::hull_area(as2(r.final_no_momentum));
  return {t.p_value < 0.01 && hull_m > hull_0,
          "(a) median gap agents " + fmt(stats::median(agent_gap)) + " vs data " + fmt(stats::median(self_gap)) +
              ", p=" + fmt(t.p_value) + "; (b) hull momentum samples " + fmt(hull_m) + " vs no-momentum finals " +
              fmt(hull_0)};
}

Outcome cosmds_suite() {
  const auto sphere = gen_manifold(ManifoldKind::hypersphere4d);
  const auto es = cos_mds(sphere.agent, sphere.points);
  double worst_len = 0;
  for (const auto& p : es.points) worst_len = std::max(worst_len, std::abs(p.norm() - 1.0));

  const auto hyp = gen_manifold(ManifoldKind::hyperboloid3d);
  const auto eh = cos_mds(hyp.agent, hyp.points);
  std::vector<double> ang;
  std::vector<int> sheet;
  for (std::size_t i = 0; i < hyp.points.size(); ++i) {
    ang.push_back(std::atan2(eh.points[i](1), eh.points[i](0)));
    sheet.push_back(hyp.points[i][2] > 0);
  }
  auto gap = [](double a, double b) {
    const double d = std::abs(a - b);
    return std::min(d, 2 * M_PI - d);
  };
  double sil = 0;
  for (std::size_t i = 0; i < ang.size(); ++i) {
    double in = 0, out = 0;
    std::size_t ni = 0, no = 0;
    for (std::size_t j = 0; j < ang.size(); ++j) {
      if (i == j) continue;
      (sheet[i] == sheet[j] ? in : out) += gap(ang[i], ang[j]);
      ++(sheet[i] == sheet[j] ? ni : no);
    }
    const double a = in / ni, b = out / no;
    sil += (b - a) / std::max(a, b);
  }
  sil /= ang.size();

  const auto par = gen_manifold(ManifoldKind::paraboloid4d);
  const auto ep = cos_mds(par.agent, par.points);
  double worst_par = 0;
  for (std::size_t i = 0; i < par.points.size(); ++i) {
    const double truth = distance(par.points[i], par.agent);
    worst_par = std::max(worst_par, std::abs(ep.points[i].norm() - truth) / std::max(1.0, truth));
  }
  return {worst_len <= 1e-9 && sil > 0.5 && worst_par <= 1e-12,
          "hypersphere max|len-1| " + fmt(worst_len) + ", hyperboloid silhouette " + fmt(sil) +
              ", paraboloid max rel distance err " + fmt(worst_par)};
}

Outcome loading_identity() {
  const auto ds = gen_wine_like(1599, 7);
  const auto pts = ds.existing_points();
  const auto m = fit_pca(pts, 2);
  Rng rng(8);
  double worst = 0;
  for (int t = 0; t < 100; ++t) {
    const Point p = rng.uniform_point(11);
    const std::size_t j = rng.index(11);
    const double delta = rng.uniform(-0.5, 0.5);
    Point q = p;
    q[j] += delta;
    const Eigen::VectorXd lhs = project(m, q) - project(m, p);
    worst = std::max(worst, (lhs - move_delta(m, j, delta)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, "100 cases, max abs deviation " + fmt(worst)};
}

Outcome dominance_area_checks() {
  Rng rng(9);
  const ObjectivePair unit;
  double worst = 0;
  for (int rep = 0; rep < 100; ++rep) {
    std::vector<Objectives> pts;
    const std::size_t n = 3 + rng.index(60);
    for (std::size_t i = 0; i < n; ++i) pts.push_back({rng.uniform(), rng.uniform()});
    const auto f = pareto_front(pts, unit);
    std::vector<std::array<double, 2>> plain(pts.begin(), pts.end());
    worst = std::max(worst, std::abs(dominance_area(f, pts, unit) - oracle::grid_area(plain)));
  }
  ParetoState st(unit, 1000);
  bool monotone = true;
  double last = 0;
  for (std::uint64_t i = 1; i <= 300; ++i) {
    st.update_on_verify({i, {rng.uniform(), rng.uniform()}});
    monotone = monotone && st.dominance_area() >= last;
    last = st.dominance_area();
  }
  const std::vector<Objectives> hand{{1, 0.5}, {0.5, 1}};
  const double h = dominance_area(pareto_front(hand, unit), hand, unit);
  return {worst < 2e-3 && monotone && h == 0.75,
          "max grid deviation " + fmt(worst) + ", monotone over 300 verifications: " + (monotone ? "yes" : "no") +
              ", hand case " + fmt(h)};
}

Outcome surrogate_gradients() {
  Rng rng(10);
  double worst = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t d = 2 + rng.index(9);
    const auto act = t % 2 ? Activation::softplus : Activation::tanh;
    const SurrogateModel m(Mlp(d, {1 + rng.index(24), 1 + rng.index(24)}, act, 500 + t), 0.3, 2.0, "y");
    const Point p = rng.uniform_point(d);
    const auto g = m.gradient(p);
    for (std::size_t a = 0; a < d; ++a) {
      Point up = p, dn = p;
      up[a] += 1e-5;
      dn[a] -= 1e-5;
      const double fd = (m.predict(up) - m.predict(dn)) / 2e-5;
      worst = std::max(worst, std::abs(g[a] - fd) / std::max(1e-3, std::abs(fd)));
    }
  }
  // refinement on a surrogate of a quadratic oracle
  const auto oracle = make_oracle("quadratic", 3, 11);
  std::vector<Point> xs;
  std::vector<double> ys;
  std::vector<std::uint64_t> ids;
  for (std::uint64_t i = 0; i < 300; ++i) {
    xs.push_back(rng.uniform_point(3));
    ys.push_back(oracle->measure(xs.back()).targets[0]);
    ids.push_back(i + 1);
  }
  SurrogateConfig cfg;
  cfg.hidden_layers = {32, 32};
  cfg.max_epochs = 200;
  const auto tr = train_regressor(xs, ys, ids, cfg);
  bool monotone = true;
  for (int s = 0; s < 20; ++s) {
    const auto r = refine(tr.model, rng.uniform_point(3), 100, 0.05);
    double prev = r.start_value;
    for (double v : r.history) {
      monotone = monotone && v >= prev;
      prev = v;
    }
  }
  return {worst < 1e-5 && monotone, "worst relative gradient error " + fmt(worst) +
                                        ", refinement monotone on 20 starts: " + (monotone ? "yes" : "no")};
}

Outcome phase_machine() {
  PhaseState ps;  // t1 20, t2 10
  std::string seq;
  bool ok = true;
  const Phase want[] = {Phase::initial, Phase::developed, Phase::expert};
  int i = 0;
  for (double ape : {25.0, 15.0, 8.0}) {
    advance_phase(ps, ape);
    seq += (i ? "," : "") + to_string(ps.phase);
    ok = ok && ps.phase == want[i++];
  }
  return {ok, "APE 25,15,8 -> " + seq};
}

Outcome compare_direction() {
  CompareConfig cfg;  // multimodal oracle, 20 master seeds, shared starts
  const auto r = run_compare(cfg);
  const auto* er = r.test("esa", "rs");
  const auto* ew = r.test("esa", "rw");
  const auto* sw = r.test("rs", "rw");
  const auto* e = r.summary("esa");
  const auto* s = r.summary("rs");
  const auto* w = r.summary("rw");
  const bool ok = e->mean > s->mean && e->mean > w->mean && er->p_greater < 0.05 && ew->p_greater < 0.05 &&
                  sw->p_two_sided > 0.05;
  return {ok, "mean esa " + fmt(e->mean) + " rs " + fmt(s->mean) + " rw " + fmt(w->mean) + "; p(esa>rs)=" +
                  fmt(er->p_greater) + " p(esa>rw)=" + fmt(ew->p_greater) + " p(rs!=rw)=" + fmt(sw->p_two_sided)};
}

Outcome extrapolation() {
  const auto ds = gen_wine_like(1599, 1);
  ExtrapolationConfig cfg;
  const auto its = run_extrapolation(ds.existing_points(), cfg);
  std::string med;
  for (const auto& it : its) med += (med.empty() ? "" : " ") + fmt(it.median);
  const auto pairs = non_decreasing_pairs(its);
  return {its.size() == 6 && pairs >= 4,
          "medians " + med + "; non-decreasing pairs " + std::to_string(pairs) + "/5"};
}

Outcome determinism() {
  CompareConfig cc;
  cc.repeats = 3;
  cc.dataset_size = 300;
  cc.agents = 200;
  auto compare_out = [&] {
    const auto r = run_compare(cc);
    return cli::compare_stats_csv(r) + cli::compare_rows_csv(r) + cli::compare_json(r);
  };
  ExtrapolationConfig ex;
  ex.agents = 100;
  ex.iterations = 3;
  auto all = [&] {
    std::vector<std::string> out{compare_out()};
    for (const auto& f : cli::figdata_fig4(Fig4Config{})) out.push_back(f.second);
    for (const auto& f : cli::figdata_extrapolation(600, ex, 2)) out.push_back(f.second);
    for (const auto& f : cli::figdata_cosmds(1)) out.push_back(f.second);
    return out;
  };
  const auto a = all();
  const auto b = all();
  std::size_t bytes = 0;
  for (const auto& s : a) bytes += s.size();
  return {a == b, std::to_string(a.size()) + " outputs, " + std::to_string(bytes) + " bytes, identical: " +
                      (a == b ? "yes" : "no")};
}

}  // namespace

int main() {
  std::cout << "esmine acceptance suite" << std::endl;
  criterion("L-J potential/force analytics", 1, lj_analytics);
  criterion("k-NN index equals brute force (d 2,5,11,20)", 30, knn_equivalence);
  criterion("momentum/no-momentum agent properties (300 samples, 600 agents)", 120, fig4_properties);
  criterion("cos-MDS manifold suite", 60, cosmds_suite);
  criterion("loading-vector identity (11-d)", 1, loading_identity);
  criterion("dominance area vs grid oracle, monotone, hand case", 30, dominance_area_checks);
  criterion("surrogate gradients and refinement", 60, surrogate_gradients);
  criterion("phase machine thresholds", 1, phase_machine);
  criterion("ESA vs RS vs RW direction (multimodal oracle, 20 seeds)", 900, compare_direction);
  criterion("extrapolation drifts away (6 iterations, wine-shaped)", 300, extrapolation);
  criterion("compare/figdata outputs byte-identical on rerun", 0, determinism);
  std::cout << (failures ? std::to_string(failures) + " criterion(s) failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
