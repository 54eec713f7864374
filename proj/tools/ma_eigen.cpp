#include "maeigen/io.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace maeigen;

namespace {

io::RunConfig load_config(const std::string& path) {
  return io::parse_config(io::read_file(path));
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return io::kInputError;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Monge-Ampere eigenvalue solver"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(io::kVersion));
  io::Streams streams{std::cout, std::cerr};

  std::string config, out;
  std::optional<std::uint64_t> seed;
  bool timing = false;

  auto* mesh = app.add_subcommand("mesh", "build the mesh of a configuration and write mesh.json");
  mesh->add_option("--config", config, "run configuration (JSON)")->required();
  mesh->add_option("--out", out, "output directory");

  auto* run = app.add_subcommand("run", "run the inverse iteration and its checks");
  run->add_option("--config", config, "run configuration (JSON)")->required();
  run->add_option("--out", out, "output directory");
  run->add_option("--seed", seed, "seed for random initial data");
  run->add_flag("--timing", timing, "record per-iteration wall time in trace.csv");

  double radius = 1.0, tol = 1e-10;
  auto* oracle = app.add_subcommand("oracle", "radial eigenpair of a disk");
  oracle->add_option("--radius", radius, "disk radius")->capture_default_str();
  oracle->add_option("--tol", tol, "shooting tolerance on u(radius)")->capture_default_str();
  oracle->add_option("--out", out, "output directory for profile.csv");

  int workers = io::workers_from_env();
  auto* sweep = app.add_subcommand("sweep", "run a grid of configurations");
  sweep->add_option("--config", config, "sweep configuration (JSON with base and grid)")->required();
  sweep->add_option("--out", out, "output directory");
  sweep->add_option("--workers", workers, "concurrent cells (default MA_EIGEN_WORKERS or 1)")
      ->check(CLI::PositiveNumber);

  std::string run_dir;
  auto* verify = app.add_subcommand("verify", "re-run the checks of a finished run");
  verify->add_option("run-dir", run_dir, "directory written by run")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : io::kInputError;
  }

  if (*mesh) {
    return guarded([&] {
      auto cfg = load_config(config);
      if (!out.empty()) cfg.out = out;
      return io::mesh_command(cfg, streams);
    });
  }
  if (*run) {
    return guarded([&] {
      auto cfg = load_config(config);
      if (!out.empty()) cfg.out = out;
      if (seed) cfg.seed = *seed;
      cfg.timing = cfg.timing || timing;
      return io::run_command(cfg, streams);
    });
  }
  if (*oracle) return io::oracle_command(radius, tol, out.empty() ? "." : out, streams);
  if (*sweep) {
    return guarded([&] {
      auto s = io::parse_sweep(io::read_file(config));
      if (!out.empty()) s.out = out;
      return io::sweep_command(s, workers, streams);
    });
  }
  return io::verify_command(run_dir, streams);
}
