#include <csignal>
#include <cstdlib>
#include <iostream>

#include <CLI11.hpp>

#include "scitech/scitech.hpp"

namespace {

using namespace scitech;

std::string env_run_dir() {
  const char* v = std::getenv("SCITECH_RUN_DIR");
  return v != nullptr ? v : "";
}

fs::path require_run_dir(const std::string& given) {
  if (!given.empty()) return given;
  throw Error("no run directory: pass --run-dir or set SCITECH_RUN_DIR");
}

PipelineConfig load(const std::string& config_path, std::optional<std::uint64_t> seed) {
  auto c = config_path.empty() ? PipelineConfig{} : load_config(config_path);
  if (seed) c.seed = *seed;
  validate(c);
  return c;
}

void print_report(const StageReport& r) {
  std::cout << to_string(r.stage) << ": " << (r.skipped ? "up to date" : "done");
  if (!r.skipped) std::cout << " " << r.summary.dump();
  std::cout << "\n";
  for (const auto& w : r.warnings) std::cerr << "  warning: " << w << "\n";
}

ApiServer* g_server = nullptr;

void on_signal(int) {
  if (g_server != nullptr) g_server->stop();
}

int report(const fs::path& run_dir) {
  const auto manifest = load_manifest(run_dir);
  if (!manifest) throw Error("missing artifact: run manifest (run stage 'ingest')");
  std::set<Stage> verified;
  verify_stage(*manifest, Stage::analytics, manifest_config(*manifest), run_dir, verified);
  for (const char* name : {"topics_over_time", "distance_by_year", "by_country", "by_field", "by_topic", "relatedness"}) {
    std::cout << "# " << name << "\n" << read_file(run_dir / "analytics" / (std::string(name) + ".csv")) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Topic detection and science-technology linkage pipeline"};
  app.require_subcommand(1);

  std::string config_path;
  std::string run_dir = env_run_dir();
  std::optional<std::uint64_t> seed;

  std::vector<CLI::App*> stage_cmds;
  for (auto s : kStages) {
    auto* cmd = app.add_subcommand(to_string(s), "Run the " + to_string(s) + " stage");
    cmd->add_option("--config", config_path, "Pipeline config (JSON)");
    cmd->add_option("--run-dir", run_dir, "Run directory (default: $SCITECH_RUN_DIR)");
    cmd->add_option("--seed", seed, "Override the config seed");
    stage_cmds.push_back(cmd);
  }

  bool force = false;
  auto* all = app.add_subcommand("all", "Run every stage in order, skipping stages already up to date");
  all->add_option("--config", config_path, "Pipeline config (JSON)");
  all->add_option("--run-dir", run_dir, "Run directory (default: $SCITECH_RUN_DIR)");
  all->add_option("--seed", seed, "Override the config seed");
  all->add_flag("--force", force, "Rerun stages even when up to date");

  int port = 8080;
  std::string host = "127.0.0.1";
  std::string static_dir;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API for a run");
  serve->add_option("--run-dir", run_dir, "Run directory (default: $SCITECH_RUN_DIR)");
  serve->add_option("--port", port, "Port (0 picks a free port)")->check(CLI::Range(0, 65535));
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--static", static_dir, "Directory of UI assets mounted at /");

  auto* rep = app.add_subcommand("report", "Print all analytics tables as CSV");
  rep->add_option("--run-dir", run_dir, "Run directory (default: $SCITECH_RUN_DIR)");

  std::string out_dir;
  std::uint64_t fixture_seed = FixtureParams{}.seed;
  auto* fixture = app.add_subcommand("fixture", "Write the synthetic linkage fixture");
  fixture->add_option("--out", out_dir, "Output directory")->required();
  fixture->add_option("--seed", fixture_seed, "Generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    for (std::size_t i = 0; i < stage_cmds.size(); ++i) {
      if (stage_cmds[i]->parsed()) {
        print_report(run_stage(kStages[i], load(config_path, seed), require_run_dir(run_dir)));
        return 0;
      }
    }
    if (all->parsed()) {
      run_pipeline(load(config_path, seed), require_run_dir(run_dir), force, print_report);
      return 0;
    }
    if (serve->parsed()) {
      ApiServer server(require_run_dir(run_dir), static_dir);
      for (const auto& w : server.service().warnings()) std::cerr << "warning: " << w << "\n";
      const int bound = server.bind(host, port);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cout << "listening on http://" << host << ":" << bound << "/api/v1" << std::endl;
      server.listen();
      g_server = nullptr;
      return 0;
    }
    if (rep->parsed()) return report(require_run_dir(run_dir));
    if (fixture->parsed()) {
      FixtureParams params;
      params.seed = fixture_seed;
      write_fixture(make_fixture(params), out_dir);
      std::cout << "fixture written to " << out_dir << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
