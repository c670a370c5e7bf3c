#include "commands.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <Eigen/Dense>

#include "json.hpp"

#include "esmine/data_io.hpp"
#include "esmine/knn.hpp"
#include "esmine/projection.hpp"

namespace esm::cli {

using nlohmann::json;

void write_files(const std::string& dir, const Files& files) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, body] : files) {
    std::ofstream out(std::filesystem::path(dir) / name, std::ios::binary);
    if (!out) throw DataError("cannot write " + (std::filesystem::path(dir) / name).string());
    out << body;
  }
}

std::string points_csv(const std::vector<Point>& pts, const std::vector<std::string>& header) {
  std::ostringstream out;
  const std::size_t d = pts.empty() ? header.size() : pts.front().size();
  for (std::size_t a = 0; a < d; ++a)
    out << (a ? "," : "") << (a < header.size() ? header[a] : "x" + std::to_string(a));
  out << "\n";
  for (const auto& p : pts) {
    for (std::size_t a = 0; a < p.size(); ++a) out << (a ? "," : "") << format_double(p[a]);
    out << "\n";
  }
  return out.str();
}

Files gen_dataset(const std::string& kind, std::size_t n, std::size_t dim, const std::string& oracle,
                  const std::string& manifold, std::uint64_t seed) {
  Dataset ds;
  std::string agent;
  if (kind == "demo2d") {
    ds = gen_demo2d(n, seed);
  } else if (kind == "wine") {
    ds = gen_wine_like(n, seed);
  } else if (kind == "oracle") {
    ds = seed_dataset(*make_oracle(oracle, dim, seed), n, seed);
  } else if (kind == "manifold") {
    const auto m = gen_manifold(manifold_from_string(manifold), seed);
    ds = dataset_from_points(m.points);
    agent = points_csv({m.agent});
  } else {
    throw DataError("unknown dataset kind '" + kind + "' (demo2d, wine, oracle, manifold)");
  }
  Files f{{"data.csv", to_csv(ds)}, {"manifest.json", manifest_for(ds).to_json() + "\n"}};
  if (!agent.empty()) f.emplace_back("agent.csv", agent);
  return f;
}

Files run_rounds(const RunOptions& opt) {
  const auto oracle = make_oracle(opt.oracle, opt.dim, opt.seed);
  ObjectivePair o;
  const auto t = oracle->targets();
  for (std::size_t a = 0; a < 2; ++a) {
    o.names[a] = t[a].name;
    o.orientation[a] = t[a].orientation;
    o.lo[a] = t[a].min;
    o.hi[a] = t[a].max;
  }
  PhaseState ps;
  ps.t1 = opt.t1;
  ps.t2 = opt.t2;
  Pipeline pl(seed_dataset(*oracle, opt.rows, opt.seed), o, opt.budget, ps);
  pl.retrain();
  std::string lines;
  for (std::size_t r = 0; r < opt.rounds; ++r) {
    StrategyRequest req;
    req.strategy = strategy_from_string(opt.strategy);
    req.batch_size = opt.batch;
    req.esa = opt.esa;
    req.seed = splitmix64(opt.seed + r);
    req.parallelism = opt.parallelism;
    auto rep = json::parse(run_pipeline_round(pl, req, opt.verify, *oracle).to_json());
    rep["round"] = r;
    lines += rep.dump() + "\n";
  }
  return {{"rounds.jsonl", lines}, {"dataset.csv", to_csv(existing_subset(pl.dataset()))}};
}

std::string esa_batch_csv(const Dataset& ds, std::size_t agents, const EsaParams& esa, std::uint64_t seed,
                          std::size_t parallelism) {
  const KdTree index(ds.existing_points());
  const auto starts = random_starts(agents, ds.dim(), seed, esa.constraints);
  std::vector<Point> raw;
  std::vector<std::string> header;
  for (const auto& v : ds.inputs()) header.push_back(v.name);
  for (const auto& t : run_batch(starts, index, esa, parallelism)) raw.push_back(ds.denormalize(t.end()));
  return points_csv(raw, header);
}

std::string compare_rows_csv(const CompareResult& r) {
  std::ostringstream out;
  out << "repeat,method,reward\n";
  for (const auto& row : r.rows) out << row.repeat << "," << row.method << "," << format_double(row.reward) << "\n";
  return out.str();
}

std::string compare_stats_csv(const CompareResult& r) {
  std::ostringstream out;
  out << "method,n,mean,sd,median\n";
  for (const auto& s : r.summaries)
    out << s.method << "," << s.n << "," << format_double(s.mean) << "," << format_double(s.sd) << ","
        << format_double(s.median) << "\n";
  if (!r.tests.empty()) {
    out << "\na,b,u,z,p_greater,p_two_sided\n";
    for (const auto& t : r.tests)
      out << t.a << "," << t.b << "," << format_double(t.u) << "," << format_double(t.z) << ","
          << format_double(t.p_greater) << "," << format_double(t.p_two_sided) << "\n";
  }
  return out.str();
}

std::string compare_json(const CompareResult& r) {
  json j;
  j["dataset_area_mean"] = r.dataset_area_mean;
  for (const auto& s : r.summaries)
    j["summaries"].push_back({{"method", s.method}, {"n", s.n}, {"mean", s.mean}, {"sd", s.sd}, {"median", s.median}});
  j["tests"] = json::array();
  for (const auto& t : r.tests)
    j["tests"].push_back({{"a", t.a}, {"b", t.b}, {"u", t.u}, {"z", t.z}, {"p_greater", t.p_greater},
                          {"p_two_sided", t.p_two_sided}});
  return j.dump(2) + "\n";
}

Files figdata_fig4(const Fig4Config& cfg) {
  const auto r = run_fig4(cfg);
  const std::string g = format_double(cfg.gamma);
  return {{"fig4_samples.csv", points_csv(r.samples)},
          {"fig4_starts.csv", points_csv(r.starts)},
          {"fig4_final_gamma0.csv", points_csv(r.final_no_momentum)},
          {"fig4_final_gamma" + g + ".csv", points_csv(r.final_momentum)},
          {"fig4_trajectory_gamma0.csv", points_csv(r.samples_no_momentum)},
          {"fig4_trajectory_gamma" + g + ".csv", points_csv(r.samples_momentum)}};
}

Files figdata_extrapolation(std::size_t rows, const ExtrapolationConfig& cfg, std::uint64_t seed) {
  const auto ds = gen_wine_like(rows, seed);
  const auto its = run_extrapolation(ds.existing_points(), cfg);
  std::ostringstream dist, hist, summary;
  dist << "iteration,distance\n";
  hist << "iteration,bin_lo,bin_hi,count\n";
  summary << "iteration,agents,median,mean\n";
  for (const auto& it : its) {
    for (double d : it.distances) dist << it.iteration << "," << format_double(d) << "\n";
    for (std::size_t b = 0; b < it.histogram.counts.size(); ++b)
      hist << it.iteration << "," << format_double(it.histogram.edges[b]) << ","
           << format_double(it.histogram.edges[b + 1]) << "," << it.histogram.counts[b] << "\n";
    summary << it.iteration << "," << it.results.size() << "," << format_double(it.median) << ","
            << format_double(it.mean) << "\n";
  }
  return {{"extrapolation_distances.csv", dist.str()},
          {"extrapolation_histograms.csv", hist.str()},
          {"extrapolation_summary.csv", summary.str()}};
}

Files figdata_cosmds(std::uint64_t seed) {
  Files out;
  for (auto kind : {ManifoldKind::hyperboloid3d, ManifoldKind::paraboloid4d, ManifoldKind::hypersphere4d}) {
    const auto m = gen_manifold(kind, seed);
    const auto e = cos_mds(m.agent, m.points);
    std::ostringstream csv;
    csv << "x,y,distance,group\n";
    for (std::size_t i = 0; i < m.points.size(); ++i) {
      // hyperboloid: sheet sign; others: single group
      const int group = kind == ManifoldKind::hyperboloid3d ? (m.points[i][2] > 0 ? 1 : -1) : 0;
      csv << format_double(e.points[i](0)) << "," << format_double(e.points[i](1)) << ","
          << format_double(e.original_distances[i]) << "," << group << "\n";
    }
    out.emplace_back("cosmds_" + to_string(kind) + ".csv", csv.str());
  }
  return out;
}

ScalingResult run_scaling(const ScalingGrid& g) {
  if (g.d.empty() || g.N.empty() || g.p.empty() || g.n.empty())
    throw DataError("scaling grid needs at least one value for each of d, N, p, n");
  if (g.repeats == 0) throw DataError("scaling needs at least one repeat");
  ScalingResult res;
  for (auto d : g.d)
    for (auto N : g.N) {
      Rng rng(g.seed ^ (d * 1000003u + N));
      std::vector<Point> data;
      for (std::size_t i = 0; i < N; ++i) data.push_back(rng.uniform_point(d));
      const KdTree index(data);
      for (auto p : g.p)
        for (auto n : g.n) {
          EsaParams params;
          params.n = n;
          const auto starts = random_starts(p, d, g.seed);
          double best = 1e300;
          for (std::size_t r = 0; r < g.repeats; ++r) {
            const auto t0 = std::chrono::steady_clock::now();
            const auto trajs = run_batch(starts, index, params, 1);
            const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            best = std::min(best, s);
            if (trajs.size() != p) throw DataError("scaling: lost trajectories");
          }
          res.rows.push_back({d, N, p, n, best});
        }
    }

  // log t = c + sum_k b_k log x_k over the axes that vary
  std::vector<std::pair<std::string, std::size_t ScalingRow::*>> axes;
  if (g.d.size() > 1) axes.emplace_back("d", &ScalingRow::d);
  if (g.N.size() > 1) axes.emplace_back("N", &ScalingRow::N);
  if (g.p.size() > 1) axes.emplace_back("p", &ScalingRow::p);
  if (g.n.size() > 1) axes.emplace_back("n", &ScalingRow::n);
  if (!axes.empty()) {
    Eigen::MatrixXd X(res.rows.size(), axes.size() + 1);
    Eigen::VectorXd y(res.rows.size());
    for (std::size_t i = 0; i < res.rows.size(); ++i) {
      X(i, 0) = 1.0;
      for (std::size_t k = 0; k < axes.size(); ++k)
        X(i, k + 1) = std::log(static_cast<double>(res.rows[i].*(axes[k].second)));
      y(i) = std::log(std::max(res.rows[i].seconds, 1e-9));
    }
    const Eigen::VectorXd b = X.colPivHouseholderQr().solve(y);
    for (std::size_t k = 0; k < axes.size(); ++k) res.exponents.emplace_back(axes[k].first, b(k + 1));
  }
  return res;
}

std::string scaling_csv(const ScalingResult& r) {
  std::ostringstream out;
  out << "d,N,p,n,seconds\n";
  for (const auto& row : r.rows)
    out << row.d << "," << row.N << "," << row.p << "," << row.n << "," << format_double(row.seconds) << "\n";
  if (!r.exponents.empty()) {
    out << "\naxis,exponent\n";
    for (const auto& [axis, b] : r.exponents) out << axis << "," << format_double(b) << "\n";
  }
  return out.str();
}

}  // namespace esm::cli
