#include "mixpl/teacher.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <boost/math/distributions/normal.hpp>

namespace mixpl {

namespace {

constexpr const char* kModule = "sim-teacher";
const boost::math::normal_distribution<double> kStd(0.0, 1.0);

double pdf(double x) { return boost::math::pdf(kStd, x); }
double cdf(double x) { return boost::math::cdf(kStd, x); }
double ccdf(double x) { return boost::math::cdf(boost::math::complement(kStd, x)); }

// Probability mass of the standard normal on [a, b], computed on the tail
// that keeps precision.
double mass(double a, double b) { return a > 0.0 ? ccdf(a) - ccdf(b) : cdf(b) - cdf(a); }

constexpr double kMuLo = -2.0;
constexpr double kMuHi = 3.0;
constexpr double kMinMass = 1e-280;

double side_for(ScaleClass cls, double max_side, Rng& rng) {
  switch (cls) {
    case ScaleClass::kSmall: return uniform(rng, 8.0, 31.9);
    case ScaleClass::kMedium: return uniform(rng, 32.0, 96.0);
    case ScaleClass::kLarge: return uniform(rng, 96.5, std::max(97.0, max_side));
  }
  return 32.0;
}

}  // namespace

double TruncatedNormal::mean() const {
  if (sigma <= 0.0) return std::clamp(mu, 0.0, 1.0);
  const double a = (0.0 - mu) / sigma, b = (1.0 - mu) / sigma;
  const double z = mass(a, b);
  if (z < kMinMass) return mu < 0.5 ? 0.0 : 1.0;
  return mu + sigma * (pdf(a) - pdf(b)) / z;
}

double TruncatedNormal::sample(Rng& rng) const {
  if (sigma <= 0.0) return std::clamp(mu, 0.0, 1.0);
  const double a = (0.0 - mu) / sigma, b = (1.0 - mu) / sigma;
  double x;
  if (a > 0.0) {
    // Work in the upper tail: u ~ U(Q(b), Q(a)), x = Q^-1(u).
    const double u = uniform(rng, ccdf(b), ccdf(a));
    x = boost::math::quantile(boost::math::complement(kStd, u));
  } else {
    const double u = uniform(rng, cdf(a), cdf(b));
    x = boost::math::quantile(kStd, std::clamp(u, 1e-300, 1.0 - 1e-16));
  }
  return std::clamp(mu + sigma * x, 0.0, std::nextafter(1.0, 0.0));
}

TruncatedNormal calibrate_truncated_normal(double target, double sigma) {
  if (!(target > 0.0 && target < 1.0)) {
    throw CalibrationError("score target " + std::to_string(target) + " is outside (0, 1)");
  }
  if (sigma < 0.0) throw CalibrationError("score sigma must be non-negative");
  if (sigma == 0.0) return {target, 0.0};
  TruncatedNormal lo{kMuLo, sigma}, hi{kMuHi, sigma};
  if (lo.mean() > target || hi.mean() < target) {
    throw CalibrationError("score target " + std::to_string(target) + " unreachable with sigma " +
                           std::to_string(sigma));
  }
  // The truncated mean is increasing in mu.
  double a = kMuLo, b = kMuHi;
  for (int i = 0; i < 200 && b - a > 1e-13; ++i) {
    const double m = 0.5 * (a + b);
    if (TruncatedNormal{m, sigma}.mean() < target) a = m; else b = m;
  }
  return {0.5 * (a + b), sigma};
}

double LogisticCurve::at(double t) const {
  if (width <= 0.0) return t < midpoint ? start : end;
  return start + (end - start) / (1.0 + std::exp(-(t - midpoint) / width));
}

double TeacherProfile::recall_for(ScaleClass s, CategoryId category, double iteration) const {
  double factor = 1.0;
  if (auto it = category_override.find(category); it != category_override.end()) {
    factor = it->second;
  } else if (auto d = category_decile.find(category); d != category_decile.end()) {
    factor = decile_factor[static_cast<std::size_t>(std::clamp(d->second, 0, 9))];
  }
  return std::clamp(recall[static_cast<int>(s)].at(iteration) * factor, 0.0, 1.0);
}

void TeacherProfile::validate() const {
  auto in01 = [](double v) { return v >= 0.0 && v <= 1.0; };
  for (const auto& c : recall) {
    if (c.end < c.start || !in01(c.start) || !in01(c.end)) {
      throw ValidationError(kModule, "recall curves must be non-decreasing within [0, 1]");
    }
  }
  for (double f : decile_factor) {
    if (f < 0.0) throw ValidationError(kModule, "decile factors must be non-negative");
  }
  if (!(score[0].mean() < score[1].mean() && score[1].mean() < score[2].mean())) {
    if (!(score[0].sigma == 0 && score[1].sigma == 0 && score[2].sigma == 0 &&
          score[0].mu == score[1].mu && score[1].mu == score[2].mu)) {
      throw ValidationError(kModule, "score means must increase with object size");
    }
  }
  if (fp_per_image.start < 0.0 || fp_per_image.end < 0.0) {
    throw ValidationError(kModule, "false-positive rate must be non-negative");
  }
  if (jitter < 0.0) throw ValidationError(kModule, "jitter must be non-negative");
}

TeacherProfile perfect_profile() {
  TeacherProfile p;
  for (auto& c : p.recall) c = {1.0, 1.0, 0.0, 1.0};
  p.score = {TruncatedNormal{0.9, 0.0}, TruncatedNormal{0.9, 0.0}, TruncatedNormal{0.9, 0.0}};
  p.fp_per_image = {0.0, 0.0, 0.0, 1.0};
  p.jitter = 0.0;
  return p;
}

TeacherProfile faster_rcnn_profile() {
  TeacherProfile p;
  p.recall = {LogisticCurve{0.25, 0.60, 300.0, 100.0}, LogisticCurve{0.35, 0.85, 300.0, 100.0},
              LogisticCurve{0.45, 0.97, 300.0, 100.0}};
  p.decile_factor = {1.0, 0.97, 0.94, 0.9, 0.86, 0.82, 0.77, 0.72, 0.66, 0.6};
  p.score = {TruncatedNormal{0.5, 0.20}, TruncatedNormal{0.5, 0.22}, TruncatedNormal{0.5, 0.25}};
  p.fp_per_image = {0.5, 6.0, 300.0, 100.0};
  p.fp_scale_mix = {0.05, 0.25, 0.70};
  p.fp_score = {0.65, 0.20};
  p = calibrate_scores(std::move(p), {0.304, 0.406, 0.509});
  return p;
}

TeacherProfile retinanet_profile() {
  TeacherProfile p = faster_rcnn_profile();
  p.score = {TruncatedNormal{0.2, 0.10}, TruncatedNormal{0.2, 0.12}, TruncatedNormal{0.2, 0.13}};
  p.fp_score = {0.2, 0.15};
  return calibrate_scores(std::move(p), {0.147, 0.186, 0.205});
}

std::map<CategoryId, int> category_deciles(const DatasetIndex& dataset) {
  std::map<CategoryId, std::size_t> count;
  for (const auto& [cat, name] : dataset.categories()) count[cat] = 0;
  for (const auto& img : dataset.images())
    for (const auto& a : img.annotations) ++count[a.category];
  std::vector<std::pair<CategoryId, std::size_t>> ranked(count.begin(), count.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::map<CategoryId, int> deciles;
  const auto n = ranked.size();
  for (std::size_t r = 0; r < n; ++r) deciles[ranked[r].first] = static_cast<int>(r * 10 / n);
  return deciles;
}

TeacherProfile calibrate_scores(TeacherProfile profile, const std::array<double, 3>& targets) {
  if (!(targets[0] <= targets[1] && targets[1] <= targets[2])) {
    throw CalibrationError("score targets must be ordered small <= medium <= large");
  }
  for (std::size_t i = 0; i < 3; ++i) profile.score[i] = calibrate_truncated_normal(targets[i], profile.score[i].sigma);
  return profile;
}

TeacherPrediction simulate_predictions(const TeacherProfile& profile, const LabeledImage& image,
                                       double iteration, Rng& rng) {
  TeacherPrediction out;
  std::normal_distribution<double> noise(0.0, 1.0);
  for (std::size_t k = 0; k < image.annotations.size(); ++k) {
    const auto& a = image.annotations[k];
    const ScaleClass cls = area_class(a.box);
    if (!bernoulli(rng, profile.recall_for(cls, a.category, iteration))) continue;
    BBox box = a.box;
    if (profile.jitter > 0.0) {
      const double sx = profile.jitter * a.box.width(), sy = profile.jitter * a.box.height();
      const double x1 = a.box.x1() + sx * noise(rng), y1 = a.box.y1() + sy * noise(rng);
      const double x2 = a.box.x2() + sx * noise(rng), y2 = a.box.y2() + sy * noise(rng);
      if (auto j = BBox::try_make(x1, y1, x2, y2)) {
        if (auto c = clip_box(*j, image.width, image.height)) box = *c;
      }
    }
    const double score = profile.score[static_cast<int>(cls)].sample(rng);
    out.detections.push_back({box, a.category, score});
    out.gt_index.emplace_back(k);
    ++out.detected_gt;
  }

  const double rate = profile.fp_per_image.at(iteration);
  const int n_fp = rate > 0.0 ? std::poisson_distribution<int>(rate)(rng) : 0;
  std::discrete_distribution<int> pick_scale(profile.fp_scale_mix.begin(), profile.fp_scale_mix.end());
  std::vector<CategoryId> cats;
  for (const auto& [c, d] : profile.category_decile) cats.push_back(c);
  if (cats.empty())
    for (const auto& a : image.annotations) cats.push_back(a.category);
  if (cats.empty()) cats.push_back(1);
  for (int i = 0; i < n_fp; ++i) {
    const auto cls = static_cast<ScaleClass>(pick_scale(rng));
    const double max_side = 0.8 * std::min(image.width, image.height);
    const double side = std::min(side_for(cls, max_side, rng), max_side);
    const double w = std::min(side, image.width - 1.0), h = std::min(side * side / w, image.height - 1.0);
    const double x = uniform(rng, 0.0, image.width - w), y = uniform(rng, 0.0, image.height - h);
    const CategoryId cat = cats[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(cats.size()) - 1))];
    out.detections.push_back({BBox(x, y, x + w, y + h), cat, profile.fp_score.sample(rng)});
    out.gt_index.emplace_back(std::nullopt);
    ++out.false_positives;
  }
  return out;
}

ParamVector ema_update(const ParamVector& teacher, const ParamVector& student, double momentum) {
  if (teacher.size() != student.size()) {
    throw ValidationError(kModule, "EMA teacher and student lengths differ (" + std::to_string(teacher.size()) +
                                       " vs " + std::to_string(student.size()) + ")");
  }
  if (!(momentum >= 0.0 && momentum <= 1.0)) throw ValidationError(kModule, "EMA momentum must lie in [0, 1]");
  ParamVector out(teacher.size());
  for (std::size_t i = 0; i < teacher.size(); ++i) out[i] = momentum * teacher[i] + (1.0 - momentum) * student[i];
  return out;
}

}  // namespace mixpl
