#include <cstdio>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"
#include "mixpl/error.hpp"

namespace {

using mixpl::cli::Overrides;

// Raw flag storage; only flags that were actually given become overrides.
struct CommonFlags {
  std::string config, out, preset, mosaic_range;
  std::uint64_t seed = 0;
  double power = 0.5, thr = 0.7, wu = 2.0, alpha = 0.5;
  int iters = 100;
  std::map<std::string, CLI::Option*> opts;

  void attach(CLI::App* cmd) {
    opts["config"] = cmd->add_option("--config", config, "JSON config file (schema version 1)")->default_str("none");
    opts["seed"] = cmd->add_option("--seed", seed, "Master random seed")->default_str("0");
    opts["out"] = cmd->add_option("--out", out, "Output directory (falls back to $MIXPL_OUT)")->default_str("mixpl-out");
    opts["preset"] = cmd->add_option("--preset", preset, "Detector preset: ce-loss (thr 0.7), focal (0.4), fcos (0.3)")
                         ->default_str("ce-loss")
                         ->check(CLI::IsMember({"ce-loss", "focal", "fcos"}));
    opts["power"] = cmd->add_option("--power", power, "Labeled resampling power in [0, 1]")->default_str("0.5");
    opts["thr"] = cmd->add_option("--thr", thr, "Pseudo-label score threshold (overrides the preset)")
                      ->default_str("0.7 (from preset)");
    opts["wu"] = cmd->add_option("--wu", wu, "Loss weight of pseudo-labeled images")->default_str("2");
    opts["iters"] = cmd->add_option("--iters", iters, "Training iterations to simulate")->default_str("100");
    opts["mosaic-range"] = cmd->add_option("--mosaic-range", mosaic_range, "Mosaic longest-edge range lo:hi")
                               ->default_str("400:800");
    opts["alpha"] = cmd->add_option("--alpha", alpha, "Pseudo Mixup blend weight")->default_str("0.5");
  }

  bool given(const std::string& name) const { return opts.at(name)->count() > 0; }

  Overrides overrides() const {
    Overrides o;
    if (given("config")) o.config = config;
    if (given("seed")) o.seed = seed;
    if (given("out")) o.out = out;
    if (given("preset")) o.preset = preset;
    if (given("power")) o.power = power;
    if (given("thr")) o.thr = thr;
    if (given("wu")) o.wu = wu;
    if (given("iters")) o.iters = iters;
    if (given("mosaic-range")) o.mosaic_range = mosaic_range;
    if (given("alpha")) o.alpha = alpha;
    return o;
  }
};

void report(const std::vector<std::filesystem::path>& files) {
  for (const auto& f : files) std::cout << f.string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MixPL semi-supervised detection data pipeline tools"};
  app.require_subcommand(1);

  std::map<CLI::App*, CommonFlags> flags;
  auto sub = [&](const std::string& name, const std::string& desc) {
    CLI::App* cmd = app.add_subcommand(name, desc);
    flags[cmd].attach(cmd);
    return cmd;
  };

  double fraction = 0.1;
  CLI::App* split = sub("split", "Split the dataset into labeled and unlabeled COCO files");
  CLI::Option* fraction_opt = split->add_option("--fraction", fraction, "Labeled fraction in (0, 1]")->default_str("0.1");

  std::vector<std::string> mix_images, mosaic_images;
  std::string mix_dets, mosaic_dets;
  CLI::App* mix = sub("mix", "Pseudo Mixup of two pseudo-labeled images");
  mix->add_option("images", mix_images, "Two raster files (.png or .mxpl); default: first two dataset images")
      ->expected(0, 2);
  CLI::Option* mix_dets_opt = mix->add_option("--detections", mix_dets, "COCO results file; image i has image_id i")
                                  ->default_str("none");
  CLI::App* mosaic = sub("mosaic", "Pseudo Mosaic of four pseudo-labeled images");
  mosaic->add_option("images", mosaic_images, "Four raster files (.png or .mxpl); default: first four dataset images")
      ->expected(0, 4);
  CLI::Option* mosaic_dets_opt = mosaic->add_option("--detections", mosaic_dets, "COCO results file; image i has image_id i")
                                     ->default_str("none");

  CLI::App* resample = sub("resample-plan", "Category and image repeat factors for labeled resampling");

  bool no_svg = false;
  CLI::App* grad = sub("grad-density", "Gradient-density histograms per taxonomy, augmentation and threshold");
  grad->add_flag("--no-svg", no_svg, "Skip the SVG plots")->default_str("false");

  CLI::App* simulate = sub("simulate", "Run the simulated teacher-student data loop and write per-iteration stats");

  std::string stats_dets;
  CLI::App* stats = sub("stats", "Per-category and per-scale dataset statistics");
  CLI::Option* stats_dets_opt = stats->add_option("--detections", stats_dets, "COCO results file to count as pseudo-labels")
                                    ->default_str("none");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    if (msg.empty()) msg = e.get_name();
    std::cerr << "mixpl: error [cli]: " << msg << '\n';
    return 2;
  }

  try {
    CLI::App* cmd = app.get_subcommands().front();
    const mixpl::Config config = mixpl::cli::resolve_config(flags.at(cmd).overrides());
    if (cmd == split) {
      mixpl::cli::SplitArgs a;
      if (fraction_opt->count()) a.fraction = fraction;
      report(mixpl::cli::run_split(config, a));
    } else if (cmd == mix || cmd == mosaic) {
      mixpl::cli::MixArgs a;
      const auto& imgs = cmd == mix ? mix_images : mosaic_images;
      a.images.assign(imgs.begin(), imgs.end());
      if (cmd == mix && mix_dets_opt->count()) a.detections = mix_dets;
      if (cmd == mosaic && mosaic_dets_opt->count()) a.detections = mosaic_dets;
      report(cmd == mix ? mixpl::cli::run_mix(config, a) : mixpl::cli::run_mosaic(config, a));
    } else if (cmd == resample) {
      std::string table;
      const auto files = mixpl::cli::run_resample_plan(config, &table);
      std::cout << table;
      report(files);
    } else if (cmd == grad) {
      mixpl::cli::GradArgs a;
      if (no_svg) a.svg = false;
      report(mixpl::cli::run_grad_density(config, a));
    } else if (cmd == simulate) {
      report(mixpl::cli::run_simulate(config));
    } else if (cmd == stats) {
      mixpl::cli::StatsArgs a;
      if (stats_dets_opt->count()) a.detections = stats_dets;
      report(mixpl::cli::run_stats(config, a));
    }
  } catch (const mixpl::Error& e) {
    std::cerr << "mixpl: error [" << e.module() << "]: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "mixpl: error [cli]: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
