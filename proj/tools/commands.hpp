#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mixpl/config.hpp"

namespace mixpl::cli {

/// Flag values that override the config file. Unset fields leave the file
/// (or built-in default) untouched.
struct Overrides {
  std::optional<std::filesystem::path> config;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::optional<std::string> preset;
  std::optional<double> power;
  std::optional<double> thr;
  std::optional<double> wu;
  std::optional<int> iters;
  std::optional<std::string> mosaic_range;
  std::optional<double> alpha;
};

/// Config file, then MIXPL_OUT for the output directory, then flags.
Config resolve_config(const Overrides& o);

struct SplitArgs {
  std::optional<double> fraction;
};

struct MixArgs {
  /// Raster files (.png or .mxpl). Empty: take images from the configured dataset.
  std::vector<std::filesystem::path> images;
  /// COCO results file; the i-th image has image_id i + 1.
  std::optional<std::filesystem::path> detections;
};

struct GradArgs {
  std::optional<bool> svg;
};

struct StatsArgs {
  std::optional<std::filesystem::path> detections;
};

/// Each command writes into config.output_dir and returns the files written.
std::vector<std::filesystem::path> run_split(const Config& config, const SplitArgs& args);
std::vector<std::filesystem::path> run_mix(const Config& config, const MixArgs& args);
std::vector<std::filesystem::path> run_mosaic(const Config& config, const MixArgs& args);
std::vector<std::filesystem::path> run_resample_plan(const Config& config, std::string* table);
std::vector<std::filesystem::path> run_grad_density(const Config& config, const GradArgs& args);
std::vector<std::filesystem::path> run_simulate(const Config& config);
std::vector<std::filesystem::path> run_stats(const Config& config, const StatsArgs& args);

}  // namespace mixpl::cli
