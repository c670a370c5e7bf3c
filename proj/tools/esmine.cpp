// esmine: headless runner for the empty-space search engine.

#include <atomic>
#include <chrono>
#include <csignal>
#include <iostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "commands.hpp"
#include "esmine/data_io.hpp"
#include "esmine/gateway.hpp"

using namespace esm;

namespace {

// Files go to --out-dir when given, else to stdout one after another.
void emit(const cli::Files& files, const std::string& dir) {
  if (!dir.empty()) {
    cli::write_files(dir, files);
    for (const auto& f : files) std::cerr << "wrote " << dir << "/" << f.first << "\n";
    return;
  }
  for (std::size_t i = 0; i < files.size(); ++i) {
    if (files.size() > 1) std::cout << (i ? "\n" : "") << "# " << files[i].first << "\n";
    std::cout << files[i].second;
  }
}

void add_esa_flags(CLI::App* cmd, EsaParams& p) {
  cmd->add_option("--k", p.k, "neighbours per force evaluation")->capture_default_str();
  cmd->add_option("--steps", p.n, "ESA steps per agent")->capture_default_str();
  cmd->add_option("--alpha", p.alpha, "step length")->capture_default_str();
  cmd->add_option("--gamma", p.gamma, "momentum")->capture_default_str();
  cmd->add_option("--delta", p.delta, "force magnitude stop threshold")->capture_default_str();
  cmd->add_option("--interval", p.j, "trajectory sampling interval")->capture_default_str();
}

// The handler only sets a flag; a watcher thread does the actual stop.
volatile std::sig_atomic_t g_stop = 0;
void on_signal(int) { g_stop = 1; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"esmine: empty-space search, baselines and experiment data"};
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  std::size_t parallelism = 1;
  app.add_option("--seed", seed, "master seed for every random choice")->capture_default_str();
  app.add_option("-j,--parallelism", parallelism, "worker threads for agent batches")->capture_default_str();

  // gen
  auto* gen = app.add_subcommand("gen", "generate a dataset (CSV + manifest)");
  std::string gen_kind = "demo2d", gen_oracle = "quadratic", gen_manifold = "hyperboloid3d", gen_out;
  std::size_t gen_n = 300, gen_dim = 4;
  gen->add_option("kind", gen_kind, "demo2d | wine | oracle | manifold")->capture_default_str();
  gen->add_option("-n,--rows", gen_n, "rows (demo2d, wine, oracle)")->capture_default_str();
  gen->add_option("--dim", gen_dim, "input dimension (oracle)")->capture_default_str();
  gen->add_option("--oracle", gen_oracle, "quadratic | multimodal | linear-noise")->capture_default_str();
  gen->add_option("--manifold", gen_manifold, "hyperboloid3d | paraboloid4d | hypersphere4d")->capture_default_str();
  gen->add_option("-o,--out-dir", gen_out, "directory for data.csv and manifest.json");

  // run
  auto* run = app.add_subcommand("run", "pipeline rounds on an oracle, or one ESA batch on a CSV");
  cli::RunOptions ro;
  std::string run_csv, run_manifest, run_out;
  std::size_t run_agents = 50;
  run->add_option("--oracle", ro.oracle, "verification oracle")->capture_default_str();
  run->add_option("--dim", ro.dim, "input dimension")->capture_default_str();
  run->add_option("--rows", ro.rows, "seed rows")->capture_default_str();
  run->add_option("--rounds", ro.rounds, "search/verify rounds")->capture_default_str();
  run->add_option("--strategy", ro.strategy, "esa | rs | rw | pareto-improvement | blank")->capture_default_str();
  run->add_option("--batch", ro.batch, "proposals per round")->capture_default_str();
  run->add_option("--verify", ro.verify, "verifications per round")->capture_default_str();
  run->add_option("--budget", ro.budget, "verification budget cap")->capture_default_str();
  run->add_option("--t1", ro.t1, "APE threshold Initial/Developed (percent)")->capture_default_str();
  run->add_option("--t2", ro.t2, "APE threshold Developed/Expert (percent)")->capture_default_str();
  run->add_option("--csv", run_csv, "run one ESA batch on this CSV instead");
  run->add_option("--manifest", run_manifest, "manifest for --csv");
  run->add_option("--agents", run_agents, "agents for --csv")->capture_default_str();
  run->add_option("-o,--out-dir", run_out, "output directory");
  add_esa_flags(run, ro.esa);

  // compare
  auto* cmp = app.add_subcommand("compare", "ESA vs random sampling vs random walk");
  CompareConfig cc;
  std::string cmp_out, cmp_format = "csv";
  cmp->add_option("--oracle", cc.oracle, "verification oracle")->capture_default_str();
  cmp->add_option("--dim", cc.dim, "input dimension")->capture_default_str();
  cmp->add_option("--stage-size", cc.dataset_size, "rows in each repeat's dataset")->capture_default_str();
  cmp->add_option("--agents", cc.agents, "shared starts per repeat")->capture_default_str();
  cc.repeats = 50;
  cmp->add_option("--repeats", cc.repeats, "repeats")->capture_default_str();
  cmp->add_option("--methods", cc.methods, "subset of esa rs rw")->delimiter(',')->capture_default_str();
  cmp->add_flag("--refine", cc.refine, "gradient ascent on each chosen point");
  cmp->add_option("--format", cmp_format, "csv | json")->check(CLI::IsMember({"csv", "json"}));
  cmp->add_option("-o,--out-dir", cmp_out, "write stats and per-repeat rows here");
  add_esa_flags(cmp, cc.esa);

  // figdata
  auto* fig = app.add_subcommand("figdata", "point sets behind the figures");
  std::string fig_what, fig_out;
  Fig4Config f4;
  ExtrapolationConfig ex;
  std::size_t ex_rows = 1599;
  fig->add_option("what", fig_what, "fig4 | extrapolation | cosmds")
      ->required()
      ->check(CLI::IsMember({"fig4", "extrapolation", "cosmds"}));
  fig->add_option("-o,--out-dir", fig_out, "output directory");
  fig->add_option("--samples", f4.samples, "fig4 data points")->capture_default_str();
  fig->add_option("--agents", f4.agents, "fig4 agents")->capture_default_str();
  fig->add_option("--momentum", f4.gamma, "fig4 momentum for the second run")->capture_default_str();
  fig->add_option("--iterations", ex.iterations, "extrapolation iterations")->capture_default_str();
  fig->add_option("--extra-agents", ex.agents, "extrapolation agents per iteration")->capture_default_str();
  fig->add_option("--rows", ex_rows, "extrapolation wine-shaped rows")->capture_default_str();

  // scaling
  auto* sc = app.add_subcommand("scaling", "ESA wall time over a parameter grid");
  cli::ScalingGrid grid;
  sc->add_option("--d", grid.d, "dimensions")->delimiter(',');
  sc->add_option("--N", grid.N, "dataset sizes")->delimiter(',');
  sc->add_option("--p", grid.p, "agent counts")->delimiter(',');
  sc->add_option("--n", grid.n, "steps per agent")->delimiter(',');
  sc->add_option("--repeats", grid.repeats, "timing repeats (minimum kept)")->capture_default_str();

  // serve
  auto* serve = app.add_subcommand("serve", "start the HTTP gateway");
  std::string cfg_file, host, data_dir;
  int port = -1;
  serve->add_option("--config", cfg_file, "JSON config file");
  serve->add_option("--host", host, "bind address");
  serve->add_option("--port", port, "port (0 = any)");
  serve->add_option("--data-dir", data_dir, "directory for CSV datasets and saves");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      emit(cli::gen_dataset(gen_kind, gen_n, gen_dim, gen_oracle, gen_manifold, seed), gen_out);
    } else if (*run) {
      if (!run_csv.empty()) {
        if (run_manifest.empty()) throw DataError("--csv needs --manifest");
        const auto ds = load_csv(run_csv, Manifest::load(run_manifest));
        emit({{"proposals.csv", cli::esa_batch_csv(ds, run_agents, ro.esa, seed, parallelism)}}, run_out);
      } else {
        ro.seed = seed;
        ro.parallelism = parallelism;
        emit(cli::run_rounds(ro), run_out);
      }
    } else if (*cmp) {
      cc.seed = seed;
      cc.parallelism = parallelism;
      const auto r = run_compare(cc);
      const std::string stats = cmp_format == "json" ? cli::compare_json(r) : cli::compare_stats_csv(r);
      emit({{cmp_format == "json" ? "compare_stats.json" : "compare_stats.csv", stats},
            {"compare_rows.csv", cli::compare_rows_csv(r)}},
           cmp_out);
    } else if (*fig) {
      if (fig_what == "fig4") {
        f4.seed = seed;
        f4.parallelism = parallelism;
        emit(cli::figdata_fig4(f4), fig_out);
      } else if (fig_what == "extrapolation") {
        ex.parallelism = parallelism;
        emit(cli::figdata_extrapolation(ex_rows, ex, seed), fig_out);
      } else {
        emit(cli::figdata_cosmds(seed), fig_out);
      }
    } else if (*sc) {
      grid.seed = seed;
      if (grid.d.empty() || grid.N.empty() || grid.p.empty() || grid.n.empty()) {
        std::cerr << "scaling: give at least one value for each of --d --N --p --n\n" << sc->help();
        return 2;
      }
      std::cout << cli::scaling_csv(cli::run_scaling(grid));
    } else if (*serve) {
      auto cfg = GatewayConfig::load(cfg_file.empty() ? std::nullopt : std::optional<std::filesystem::path>(cfg_file));
      if (!host.empty()) cfg.host = host;
      if (port >= 0) cfg.port = port;
      if (!data_dir.empty()) cfg.data_dir = data_dir;
      Gateway gw(cfg);
      const int bound = gw.bind();
      if (bound < 0) {
        std::cerr << "cannot bind " << cfg.host << ":" << cfg.port << "\n";
        return 1;
      }
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::atomic<bool> done{false};
      std::thread watcher([&] {
        while (!done && !g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
        gw.stop();
      });
      std::cerr << "listening on http://" << cfg.host << ":" << bound << "\n";
      gw.serve();
      done = true;
      watcher.join();
      gw.wait_for_jobs();
      std::cerr << "stopped\n";
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
