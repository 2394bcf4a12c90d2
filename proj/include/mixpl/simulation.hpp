#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "mixpl/augment.hpp"
#include "mixpl/geometry.hpp"
#include "mixpl/pseudo.hpp"
#include "mixpl/teacher.hpp"

namespace mixpl {

struct SimConfig {
  int n_labeled = 1;
  int n_unlabeled = 4;
  double threshold = 0.7;
  bool filter_empty = true;
  ComposeOptions compose;
  double resample_power = 0.5;
  ResizeParams resize;
  double flip_prob = 0.5;
  ErasingParams erasing;
  std::size_t cache_window = 1;
  /// Rasterise images and run the pixel stages. Off by default: the
  /// statistics depend only on geometry and scores.
  bool render = false;
  int iterations = 100;
  std::uint64_t seed = 0;
};

/// Counts for one training iteration, taken on the unlabeled images in
/// their original frame. Index 0/1/2 = small/medium/large.
struct IterationStats {
  std::int64_t iteration = 0;
  std::array<std::size_t, 3> gt{};
  std::array<std::size_t, 3> pl{};
  std::size_t empty_images = 0;
  std::size_t fp_count = 0;       // false positives surviving the threshold
  std::size_t detected_gt = 0;    // teacher hits before thresholding
  std::size_t raw_fp = 0;         // teacher false positives before thresholding
  std::size_t threshold_filtered = 0;
  std::size_t cache_occupancy = 0;
  std::size_t mixed_images = 0;
  std::size_t labeled_images = 0;
  std::map<CategoryId, std::size_t> gt_per_category;
  std::map<CategoryId, std::size_t> pl_per_category;

  std::size_t pl_total() const { return pl[0] + pl[1] + pl[2]; }
  std::size_t gt_total() const { return gt[0] + gt[1] + gt[2]; }
};

/// Optional per-iteration observer, e.g. for dumping batches.
using BatchObserver = std::function<void(const PseudoBatch&)>;

/// Runs the teacher-student data loop: sample a labeled (resampled) and
/// unlabeled batch, weak/strong views, simulated teacher on the weak view,
/// threshold and empty filtering, transfer to the strong view, MixPL batch
/// composition and cache update. Deterministic in config.seed.
std::vector<IterationStats> run_simulation(const DatasetIndex& labeled, const DatasetIndex& unlabeled,
                                           const TeacherProfile& profile, const SimConfig& config,
                                           const BatchObserver& observer = {});

/// CSV with columns iter, gt_s, gt_m, gt_l, pl_s, pl_m, pl_l, empty_images,
/// fp_count, then log_gt_<id>, log_pl_<id> per category as ln(1 + count).
std::string stats_to_csv(const std::vector<IterationStats>& stats, const std::map<CategoryId, std::string>& categories);

}  // namespace mixpl
