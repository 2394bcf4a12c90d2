#pragma once

#include <map>
#include <vector>

#include "mixpl/geometry.hpp"
#include "mixpl/rng.hpp"

namespace mixpl {

struct CategoryFrequency {
  /// Fraction of images containing at least one instance, for every category
  /// that occurs in some image.
  std::map<CategoryId, double> fraction;
  /// Categories in the table that occur in no image; they cannot be resampled.
  std::vector<CategoryId> absent;
};

CategoryFrequency category_frequency(const DatasetIndex& labeled);

/// Repeat factors for labeled resampling.
struct RepeatPlan {
  double power = 0.5;
  std::map<CategoryId, double> fraction;
  std::map<CategoryId, double> category_factor;  // 1 / f(c)^power
  std::vector<ImageId> image_ids;
  std::vector<double> image_factor;              // max over categories in the image, 1 if none

  double factor_of(ImageId id) const;
};

/// Throws ValidationError when power is outside [0, 1] or a fraction is not
/// in (0, 1].
RepeatPlan repeat_factors(const DatasetIndex& labeled, const CategoryFrequency& freq, double power);
RepeatPlan repeat_factors(const DatasetIndex& labeled, double power);

/// One epoch: each image floor(r) times plus once more with probability
/// frac(r), then shuffled.
std::vector<ImageId> build_epoch(const RepeatPlan& plan, Rng& rng);

}  // namespace mixpl
