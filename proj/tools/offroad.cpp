#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "offroad/commands.hpp"

namespace {

std::optional<offroad::fs::path> opt_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return offroad::fs::path(s);
}

}  // namespace

int main(int argc, char** argv) {
  using namespace offroad;
  CLI::App app{"Off-road planner with demonstration-adapted cost weights"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string config_file, out_dir = "out";
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  app.add_option("--config", config_file, "key=value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--set", overrides, "config override key=value (repeatable)")->allow_extra_args(false);

  std::string kind, library, bundle, cloud, reference, weights;
  std::optional<std::size_t> frames;
  int frame = 0;
  std::vector<std::string> bundles;

  auto* gen = app.add_subcommand("gen", "generate a scenario frame bundle");
  gen->add_option("--kind", kind, "straight|ramp|cross|long_curve|undulate|rough");
  gen->add_option("--frames", frames, "frame count");
  gen->add_option("--library", library, "prebuilt primitive library dir");

  auto* maps = app.add_subcommand("maps", "export feature layers for a point cloud");
  maps->add_option("cloud", cloud, "XYZ point cloud")->required();
  maps->add_option("--reference", reference, "reference trajectory CSV");

  app.add_subcommand("primitives", "build the behavioral primitive library");

  auto* adapt = app.add_subcommand("adapt", "learn cost weights from a bundle");
  adapt->add_option("bundle", bundle, "bundle dir")->required();
  adapt->add_option("--library", library, "prebuilt primitive library dir");

  auto* planc = app.add_subcommand("plan", "plan one bundle frame");
  planc->add_option("bundle", bundle, "bundle dir")->required();
  planc->add_option("--frame", frame, "frame index");
  planc->add_option("--weights", weights, "weights JSON (default uniform)");
  planc->add_option("--library", library, "prebuilt primitive library dir");

  auto* run = app.add_subcommand("run", "replanning session over a bundle");
  run->add_option("bundle", bundle, "bundle dir")->required();
  run->add_option("--library", library, "prebuilt primitive library dir");

  auto* eval = app.add_subcommand("eval", "adaptive vs baseline report over bundles");
  eval->add_option("bundles", bundles, "bundle dirs")->required();
  eval->add_option("--library", library, "prebuilt primitive library dir");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    RunConfig cfg;
    if (!config_file.empty()) cfg = load_config(config_file);
    for (const auto& o : overrides) {
      const auto eq = o.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + o + "'");
      set_config_value(cfg, detail::trim(o.substr(0, eq)), detail::trim(o.substr(eq + 1)));
    }
    if (seed) cfg.seed = *seed;
    if (!kind.empty()) set_config_value(cfg, "scenario.kind", kind);
    if (frames) cfg.frames = *frames;
    cfg.validate();

    const fs::path out = out_dir;
    if (*gen) {
      std::cout << cmd_gen(cfg, out, opt_path(library)) << '\n';
    } else if (*maps) {
      std::cout << cmd_maps(cfg, cloud, out, opt_path(reference)) << '\n';
    } else if (app.got_subcommand("primitives")) {
      std::cout << cmd_primitives(cfg, out) << '\n';
    } else if (*adapt) {
      std::cout << cmd_adapt(cfg, bundle, out, opt_path(library)) << '\n';
    } else if (*planc) {
      const PlanOutcome o = cmd_plan(cfg, bundle, frame, out, opt_path(weights), opt_path(library));
      std::cout << o.summary << '\n';
      if (o.blocked) return 4;
    } else if (*run) {
      std::cout << cmd_run(cfg, bundle, out, opt_path(library)) << '\n';
    } else if (*eval) {
      std::vector<fs::path> paths(bundles.begin(), bundles.end());
      std::cout << cmd_eval(cfg, paths, out, opt_path(library));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return 3;
  } catch (const BlockedError& e) {
    std::cerr << "blocked: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
