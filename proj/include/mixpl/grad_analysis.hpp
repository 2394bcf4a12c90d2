#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixpl/geometry.hpp"
#include "mixpl/rng.hpp"
#include "mixpl/teacher.hpp"

namespace mixpl {

enum class Taxonomy { kTP = 0, kFP = 1, kTN = 2, kFN = 3 };

std::string to_string(Taxonomy t);

/// Pseudo-label vs ground-truth agreement of one anchor.
Taxonomy classify(int pl_target, int gt_target);

struct SampleRecord {
  BBox anchor;
  double p = 0.0;
  int pl_target = 0;
  int gt_target = 0;
  Taxonomy taxonomy = Taxonomy::kTN;
  double g = 0.0;
  /// Best-matching ground-truth / pseudo-label index when positive.
  std::optional<std::size_t> gt_match;
  std::optional<std::size_t> pl_match;
};

inline constexpr double kProbEpsilon = 1e-7;

/// -p* log p - (1 - p*) log(1 - p), with p clamped to [eps, 1 - eps].
double bce_loss(double p, int target);

/// |p - p*|: the magnitude of d bce / d logit.
double gradient_norm(double p, int target);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

/// Square anchors of every scale centred on a stride grid (ceil(w/stride) x
/// ceil(h/stride) cells), clipped to the image.
std::vector<BBox> generate_anchors(int width, int height, int stride, std::span<const double> scales);

/// An anchor is positive under a label set iff its best IoU against that set
/// is >= iou_thr. p and g are left at 0.
std::vector<SampleRecord> assign_samples(std::span<const BBox> anchors, const LabelList& gt, const LabelList& pl,
                                         double iou_thr = 0.5);

/// Fills p and recomputes g = |p - p*_pl| for every record.
void set_scores(std::vector<SampleRecord>& records, std::span<const double> p);

struct DensityHistogram {
  Taxonomy taxonomy = Taxonomy::kTP;
  std::string augmentation;
  double threshold = 0.0;
  std::vector<std::size_t> counts;
  double sum_g = 0.0;

  std::size_t bins() const { return counts.size(); }
  double bin_center(std::size_t i) const { return (static_cast<double>(i) + 0.5) / static_cast<double>(counts.size()); }
  std::size_t total() const;
  double mean_g() const { return total() ? sum_g / static_cast<double>(total()) : 0.0; }
};

/// Uniform bins over [0, 1]; g == 1 lands in the last bin.
std::size_t bin_of(double g, std::size_t bins);

/// One histogram per taxonomy, indexed by Taxonomy.
std::array<DensityHistogram, 4> density(std::span<const SampleRecord> records, std::size_t bins = 64,
                                        const std::string& augmentation = "", double threshold = 0.0);

/// GHM-style smoothing: each bin's count summed over +-radius neighbouring
/// bins and divided by the neighbourhood width (in g units).
std::vector<double> smoothed_density(const DensityHistogram& h, std::size_t radius);

// ---------------------------------------------------------------------------
// Augmentation comparison
// ---------------------------------------------------------------------------

/// One analysed image: ground truth, the raw (unthresholded) teacher output,
/// and the latent foreground evidence of each ground-truth object.
struct AnalysisScene {
  LabeledImage image;
  LabelList teacher;
  std::vector<double> evidence;
};

/// Builds a scene from the simulated teacher: detected objects carry their
/// detection score as evidence, missed ones a draw from the score model.
AnalysisScene make_scene(const TeacherProfile& profile, const LabeledImage& image, double iteration, Rng& rng);

/// Student response model standing in for the network. Under strong
/// augmentation foreground evidence is scaled by `strong_gain`; under Pseudo
/// Mixup each anchor's response is the blend alpha * own + (1 - alpha) *
/// partner, so a missed object overlaid on background is attenuated by the
/// blend weight. Mosaic rescales evidence by the score-model mean of the
/// object's new scale class relative to its original class.
struct ResponseModel {
  double strong_gain = 0.8;
  double mixup_alpha = 0.5;
  TruncatedNormal background{0.03, 0.05};
  std::array<double, 3> scale_mean{0.304, 0.406, 0.509};
};

enum class AugmentationKind { kWeak, kStrong, kMixup, kMosaic };

std::string to_string(AugmentationKind k);

struct AnalysisOptions {
  std::vector<AugmentationKind> augmentations{AugmentationKind::kWeak, AugmentationKind::kStrong,
                                              AugmentationKind::kMixup, AugmentationKind::kMosaic};
  std::vector<double> thresholds{0.5, 0.7, 0.9};
  int stride = 16;
  std::vector<double> anchor_scales{16, 32, 64, 128, 256};
  double iou_thr = 0.5;
  std::size_t bins = 64;
  int mosaic_lo = 400;
  int mosaic_hi = 800;
  std::uint64_t seed = 0;
};

struct HistogramFamily {
  /// Ordered by augmentation, then threshold, then taxonomy.
  std::vector<DensityHistogram> histograms;

  const DensityHistogram& get(AugmentationKind aug, double thr, Taxonomy t) const;
};

HistogramFamily compare_augmentations(std::span<const AnalysisScene> scenes, const ResponseModel& model,
                                      const AnalysisOptions& options);

/// bin_center,count rows for one histogram.
std::string histogram_csv(const DensityHistogram& h);

/// One row per histogram: augmentation, threshold, taxonomy, total, mean_g.
std::string family_summary_csv(const HistogramFamily& family);

/// Line plot of every taxonomy/augmentation curve at one threshold.
std::string family_svg(const HistogramFamily& family, double threshold);

}  // namespace mixpl
