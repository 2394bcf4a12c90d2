#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixpl/augment.hpp"
#include "mixpl/geometry.hpp"
#include "mixpl/pseudo.hpp"
#include "mixpl/simulation.hpp"
#include "mixpl/synthetic.hpp"
#include "mixpl/teacher.hpp"

namespace mixpl {

inline constexpr int kConfigVersion = 1;

/// Where images come from: a COCO file, the Zipf-style synthetic generator,
/// or the exact-fraction long-tail generator.
struct DatasetConfig {
  std::string source = "synthetic";  // synthetic | long-tail | coco
  std::filesystem::path path;
  SyntheticSpec synthetic;
  std::vector<double> long_tail{1.0, 0.81, 0.64, 0.49, 0.36, 0.25, 0.16, 0.09, 0.04, 0.01};
  int long_tail_images = 100;
};

/// Teacher profile: a named base plus optional field overrides.
struct TeacherConfig {
  /// Empty means "follow the detector preset".
  std::string base;
  std::optional<std::array<double, 3>> score_means;
  nlohmann::json overrides = nlohmann::json::object();
};

struct GradConfig {
  int scenes = 24;
  std::vector<double> thresholds{0.5, 0.7, 0.9};
  std::size_t bins = 64;
  int stride = 16;
  double strong_gain = 0.8;
  bool svg = true;
};

struct Config {
  int version = kConfigVersion;
  DatasetConfig dataset;
  double split_fraction = 0.1;
  std::uint64_t split_seed = 0;
  std::string preset = "ce-loss";  // ce-loss | focal | fcos
  /// Overrides the preset threshold when set.
  std::optional<double> threshold;
  int n_labeled = 1;
  int n_unlabeled = 4;
  ComposeOptions compose;
  double resample_power = 0.5;
  bool filter_empty = true;
  ResizeParams resize;
  double flip_prob = 0.5;
  ErasingParams erasing;
  std::size_t cache_window = 1;
  TeacherConfig teacher;
  double ema_momentum = 0.999;
  GradConfig grad;
  int iterations = 100;
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "mixpl-out";

  double effective_threshold() const;
  TeacherProfile teacher_profile() const;
  SimConfig sim_config() const;
  /// Throws ValidationError on out-of-range values.
  void validate() const;
};

/// ce-loss 0.7, focal 0.4, fcos 0.3.
double preset_threshold(const std::string& preset);
/// ce-loss -> faster-rcnn, focal and fcos -> retinanet.
std::string preset_teacher(const std::string& preset);
TeacherProfile named_profile(const std::string& name);

/// Strict: unknown keys and wrong types are ParseErrors with a JSON pointer.
Config parse_config(std::string_view text);
Config load_config(const std::filesystem::path& path);
nlohmann::json config_to_json(const Config& config);

/// Materialises the configured dataset.
DatasetIndex load_configured_dataset(const Config& config);

}  // namespace mixpl
