#include "mixpl/resample.hpp"

#include <algorithm>
#include <cmath>

#include "mixpl/error.hpp"

namespace mixpl {

namespace {
constexpr const char* kModule = "resampler";
}

CategoryFrequency category_frequency(const DatasetIndex& labeled) {
  if (labeled.empty()) throw ValidationError(kModule, "labeled set is empty");
  CategoryFrequency freq;
  const double n = static_cast<double>(labeled.size());
  for (const auto& [cat, members] : labeled.membership()) {
    if (members.empty()) {
      freq.absent.push_back(cat);
    } else {
      freq.fraction[cat] = static_cast<double>(members.size()) / n;
    }
  }
  return freq;
}

double RepeatPlan::factor_of(ImageId id) const {
  auto it = std::find(image_ids.begin(), image_ids.end(), id);
  if (it == image_ids.end()) throw ValidationError(kModule, "image " + std::to_string(id) + " not in plan");
  return image_factor[static_cast<std::size_t>(it - image_ids.begin())];
}

RepeatPlan repeat_factors(const DatasetIndex& labeled, const CategoryFrequency& freq, double power) {
  if (!(power >= 0.0 && power <= 1.0)) {
    throw ValidationError(kModule, "power must lie in [0, 1], got " + std::to_string(power));
  }
  RepeatPlan plan;
  plan.power = power;
  plan.fraction = freq.fraction;
  for (const auto& [cat, f] : freq.fraction) {
    if (!(f > 0.0 && f <= 1.0)) throw ValidationError(kModule, "category fraction must lie in (0, 1]");
    plan.category_factor[cat] = 1.0 / std::pow(f, power);
  }
  for (const auto& img : labeled.images()) {
    double r = 1.0;
    for (const auto& a : img.annotations) {
      auto it = plan.category_factor.find(a.category);
      if (it != plan.category_factor.end()) r = std::max(r, it->second);
    }
    plan.image_ids.push_back(img.id);
    plan.image_factor.push_back(r);
  }
  return plan;
}

RepeatPlan repeat_factors(const DatasetIndex& labeled, double power) {
  return repeat_factors(labeled, category_frequency(labeled), power);
}

std::vector<ImageId> build_epoch(const RepeatPlan& plan, Rng& rng) {
  std::vector<ImageId> epoch;
  for (std::size_t i = 0; i < plan.image_ids.size(); ++i) {
    const double r = plan.image_factor[i];
    const double whole = std::floor(r);
    auto copies = static_cast<std::size_t>(whole);
    if (bernoulli(rng, r - whole)) ++copies;
    epoch.insert(epoch.end(), copies, plan.image_ids[i]);
  }
  std::shuffle(epoch.begin(), epoch.end(), rng);
  return epoch;
}

}  // namespace mixpl
