#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "mixpl/error.hpp"
#include "mixpl/geometry.hpp"
#include "mixpl/rng.hpp"

namespace mixpl {

class CalibrationError : public Error {
 public:
  explicit CalibrationError(const std::string& what) : Error("sim-teacher", what) {}
};

/// Normal(mu, sigma) truncated to [0, 1]. sigma == 0 is a point mass at
/// clamp(mu, 0, 1).
struct TruncatedNormal {
  double mu = 0.5;
  double sigma = 0.2;

  double mean() const;
  double sample(Rng& rng) const;
};

/// Solves for mu so that the truncated mean equals `target` with sigma held
/// fixed. Throws CalibrationError when the target cannot be reached.
TruncatedNormal calibrate_truncated_normal(double target, double sigma);

/// start + (end - start) / (1 + exp(-(t - midpoint) / width)).
struct LogisticCurve {
  double start = 0.0;
  double end = 1.0;
  double midpoint = 0.0;
  double width = 1.0;

  double at(double t) const;
};

/// Synthetic teacher: detection probability per object scale and category
/// frequency decile as a function of the training iteration, a per-scale
/// score model, and a false-positive process.
struct TeacherProfile {
  std::array<LogisticCurve, 3> recall;  // indexed by ScaleClass
  /// Recall multiplier per category-frequency decile, 0 = most frequent.
  std::array<double, 10> decile_factor{1, 1, 1, 1, 1, 1, 1, 1, 1, 1};
  std::map<CategoryId, int> category_decile;
  std::map<CategoryId, double> category_override;
  std::array<TruncatedNormal, 3> score;
  /// Expected spurious boxes per image as a function of iteration.
  LogisticCurve fp_per_image{0.0, 0.0, 0.0, 1.0};
  std::array<double, 3> fp_scale_mix{0.34, 0.33, 0.33};
  TruncatedNormal fp_score{0.3, 0.2};
  /// Corner noise sigma as a fraction of the box side.
  double jitter = 0.02;

  double recall_for(ScaleClass s, CategoryId category, double iteration) const;

  /// Recall curves non-decreasing, score means ordered small < medium < large,
  /// probabilities in range. Throws ValidationError otherwise.
  void validate() const;
};

/// Recall 1, no false positives, no jitter: predicted boxes equal the ground truth.
TeacherProfile perfect_profile();

/// Table-2 style Faster R-CNN teacher: per-scale mean scores 0.304 / 0.406 /
/// 0.509, recall rising with iteration, a growing false-positive stream.
TeacherProfile faster_rcnn_profile();

/// RetinaNet-like scores 0.147 / 0.186 / 0.205.
TeacherProfile retinanet_profile();

/// Rank categories by instance count (descending) and assign deciles.
std::map<CategoryId, int> category_deciles(const DatasetIndex& dataset);


/// Adjusts the per-scale score distributions so their means hit `targets`.
TeacherProfile calibrate_scores(TeacherProfile profile, const std::array<double, 3>& targets);

/// Teacher output for one image. `gt_index[i]` names the ground-truth
/// annotation detection i came from, or nullopt for a false positive.
struct TeacherPrediction {
  LabelList detections;
  std::vector<std::optional<std::size_t>> gt_index;
  std::size_t detected_gt = 0;
  std::size_t false_positives = 0;
};

TeacherPrediction simulate_predictions(const TeacherProfile& profile, const LabeledImage& image,
                                       double iteration, Rng& rng);

using ParamVector = std::vector<double>;

/// t' = m t + (1 - m) s elementwise.
ParamVector ema_update(const ParamVector& teacher, const ParamVector& student, double momentum);

}  // namespace mixpl
