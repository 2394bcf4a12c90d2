// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails or overruns its time limit.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixpl/augment.hpp"
#include "mixpl/coco_io.hpp"
#include "mixpl/grad_analysis.hpp"
#include "mixpl/pseudo.hpp"
#include "mixpl/resample.hpp"
#include "mixpl/simulation.hpp"
#include "mixpl/synthetic.hpp"
#include "mixpl/teacher.hpp"
#include "oracles.hpp"

using namespace mixpl;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string name;
  double limit_s;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, a);
  return buf;
}

const std::vector<double> kLongTail{1.0, 0.81, 0.64, 0.49, 0.36, 0.25, 0.16, 0.09, 0.04, 0.01};

Outcome repeat_factors_exact() {
  const DatasetIndex ds = make_long_tail_dataset(kLongTail, 100, 7);
  // Independent frequency count.
  std::map<CategoryId, double> f;
  for (const auto& img : ds.images()) {
    std::map<CategoryId, bool> seen;
    for (const auto& a : img.annotations) seen[a.category] = true;
    for (const auto& [c, _] : seen) f[c] += 1.0;
  }
  for (auto& [c, v] : f) v /= static_cast<double>(ds.size());

  double worst_cat = 0, worst_mult = 0;
  for (double power : {0.0, 0.25, 0.5, 1.0}) {
    const RepeatPlan plan = repeat_factors(ds, power);
    if (plan.category_factor.size() != 10) return {false, "expected 10 categories"};
    for (const auto& [c, fc] : f) worst_cat = std::max(worst_cat, std::abs(plan.category_factor.at(c) - std::pow(fc, -power)));

    const int epochs = 10000;
    Rng rng(static_cast<std::uint64_t>(power * 100) + 1);
    std::map<ImageId, long> count;
    for (int e = 0; e < epochs; ++e)
      for (ImageId id : build_epoch(plan, rng)) ++count[id];
    for (const auto& img : ds.images()) {
      double r = 1.0;
      for (const auto& a : img.annotations) r = std::max(r, std::pow(f.at(a.category), -power));
      const double got = static_cast<double>(count[img.id]) / epochs;
      worst_mult = std::max(worst_mult, std::abs(got - r) / r);
    }
  }
  return {worst_cat <= 1e-12 && worst_mult <= 0.05,
          "max |r(c) err| " + fmt("%.2e", worst_cat) + ", max multiplicity rel err " + fmt("%.4f", worst_mult)};
}

Outcome mosaic_rebalancing() {
  SyntheticSpec spec;
  spec.num_images = 1100;
  spec.seed = 11;
  const DatasetIndex ds = make_synthetic_dataset(spec);
  std::vector<const LabeledImage*> images;
  for (const auto& img : ds.images()) {
    if (!img.annotations.empty() && images.size() < 1000) images.push_back(&img);
  }
  if (images.size() != 1000) return {false, "not enough non-empty synthetic images"};

  auto small_medium_share = [](const LabelList& labels) {
    std::size_t sm = 0;
    for (const auto& d : labels) sm += area_class(d.box) != ScaleClass::kLarge;
    return static_cast<double>(sm) / static_cast<double>(labels.size());
  };

  Rng rng(12);
  std::size_t composites = 0, increased = 0, conserved = 0;
  for (std::size_t g = 0; g + 4 <= images.size(); g += 4) {
    std::vector<PseudoImage> four;
    LabelList input;
    for (std::size_t k = 0; k < 4; ++k) {
      const LabeledImage& img = *images[g + k];
      PseudoImage p;
      p.width = img.width;
      p.height = img.height;
      p.raster = render_raster(img, 5);
      p.labels = {img.id, img.labels(), 0};
      for (auto& d : p.labels.detections) d.score = 1.0;
      input.insert(input.end(), p.labels.detections.begin(), p.labels.detections.end());
      four.push_back(std::move(p));
    }
    const MixedImage m = pseudo_mosaic(four, {400, 800}, rng);
    ++composites;
    conserved += m.labels_before_clip == input.size() && m.labels.size() + m.dropped_labels == input.size();
    if (!m.raster || m.raster->width() != m.width || m.raster->height() != m.height) return {false, "raster size mismatch"};
    if (!m.labels.empty() && small_medium_share(m.labels) > small_medium_share(input)) ++increased;
  }
  const double frac = static_cast<double>(increased) / static_cast<double>(composites);
  return {conserved == composites && frac >= 0.99,
          std::to_string(composites) + " composites, count conserved in " + std::to_string(conserved) +
              ", small+medium share up in " + fmt("%.4f", frac)};
}

Outcome mixup_fn_suppression() {
  SyntheticSpec spec;
  const DatasetIndex ds = make_synthetic_dataset(spec);
  TeacherProfile profile = faster_rcnn_profile();
  profile.category_decile = category_deciles(ds);
  Rng rng(derive_stream(0, 0x677264));
  std::vector<AnalysisScene> scenes;
  for (std::size_t i = 0; i < 24; ++i) scenes.push_back(make_scene(profile, ds.images()[i], 100.0, rng));
  ResponseModel model;
  for (std::size_t s = 0; s < 3; ++s) model.scale_mean[s] = profile.score[s].mean();
  AnalysisOptions options;
  options.augmentations = {AugmentationKind::kStrong, AugmentationKind::kMixup};
  const HistogramFamily family = compare_augmentations(scenes, model, options);

  std::size_t min_anchors = SIZE_MAX;
  for (auto aug : options.augmentations) {
    for (double thr : options.thresholds) {
      std::size_t n = 0;
      for (auto t : {Taxonomy::kTP, Taxonomy::kFP, Taxonomy::kTN, Taxonomy::kFN}) n += family.get(aug, thr, t).total();
      min_anchors = std::min(min_anchors, n);
    }
  }
  bool ok = min_anchors >= 10000;
  double prev_gap = -1;
  std::string detail;
  for (double thr : options.thresholds) {
    const auto& strong = family.get(AugmentationKind::kStrong, thr, Taxonomy::kFN);
    const auto& mix = family.get(AugmentationKind::kMixup, thr, Taxonomy::kFN);
    const double gap = strong.mean_g() - mix.mean_g();
    ok = ok && mix.total() > 0 && strong.total() > 0 && gap > 0 && gap > prev_gap;
    prev_gap = gap;
    detail += "thr " + fmt("%.1f", thr) + ": mixup " + fmt("%.3f", mix.mean_g()) + " < strong " +
              fmt("%.3f", strong.mean_g()) + "; ";
  }
  return {ok, detail + std::to_string(min_anchors) + " anchors per view"};
}

Outcome score_calibration() {
  SyntheticSpec spec;
  spec.num_images = 400;
  spec.seed = 21;
  const DatasetIndex ds = make_synthetic_dataset(spec);
  const std::array<std::array<double, 3>, 2> targets{{{0.304, 0.406, 0.509}, {0.147, 0.186, 0.205}}};
  const std::array<TeacherProfile, 2> profiles{faster_rcnn_profile(), retinanet_profile()};
  const std::size_t need = 100000;
  double worst = 0;
  std::string detail;
  for (std::size_t p = 0; p < 2; ++p) {
    Rng rng(31 + p);
    std::array<double, 3> sum{};
    std::array<std::size_t, 3> n{};
    for (std::size_t i = 0; std::min({n[0], n[1], n[2]}) < need; i = (i + 1) % ds.size()) {
      const LabeledImage& img = ds.images()[i];
      const auto pred = simulate_predictions(profiles[p], img, 1000.0, rng);
      for (std::size_t k = 0; k < pred.detections.size(); ++k) {
        if (!pred.gt_index[k]) continue;
        const int s = static_cast<int>(area_class(img.annotations[*pred.gt_index[k]].box));
        if (n[s] >= need) continue;
        sum[s] += pred.detections[k].score;
        ++n[s];
      }
    }
    detail += p == 0 ? "faster-rcnn" : "; retinanet";
    for (int s = 0; s < 3; ++s) {
      const double mean = sum[s] / static_cast<double>(n[s]);
      worst = std::max(worst, std::abs(mean - targets[p][s]));
      detail += " " + fmt("%.4f", mean);
    }
  }
  return {worst <= 0.01, detail + " (max err " + fmt("%.4f", worst) + ")"};
}

Outcome scale_crossover() {
  SyntheticSpec spec;
  const DatasetIndex ds = make_synthetic_dataset(spec);
  const DatasetSplit split = split_dataset(ds, 0.1, 0);
  TeacherProfile profile = faster_rcnn_profile();
  profile.category_decile = category_deciles(ds);
  SimConfig cfg;
  cfg.iterations = 1000;
  cfg.threshold = 0.7;
  const auto stats = run_simulation(split.labeled, split.unlabeled, profile, cfg);
  if (stats.size() != 1000) return {false, "wrong iteration count"};
  std::size_t violations = 0;
  for (const auto& s : stats) {
    if (s.gt[0] > 0 ? s.pl[0] >= s.gt[0] : s.pl[0] > 0) ++violations;
  }
  std::size_t pl_l = 0, gt_l = 0;
  for (std::size_t i = 750; i < 1000; ++i) {
    pl_l += stats[i].pl[2];
    gt_l += stats[i].gt[2];
  }
  const double ratio = gt_l ? static_cast<double>(pl_l) / static_cast<double>(gt_l) : 0.0;
  return {ratio > 1.0 && violations == 0,
          "final-quartile PL_l/GT_l " + fmt("%.3f", ratio) + ", iterations with PL_s >= GT_s: " + std::to_string(violations)};
}

Outcome batch_contract() {
  SyntheticSpec spec;
  spec.num_images = 600;
  spec.seed = 41;
  const DatasetIndex ds = make_synthetic_dataset(spec);
  std::vector<const LabeledImage*> pool;
  for (const auto& img : ds.images())
    if (!img.annotations.empty()) pool.push_back(&img);

  PseudoLabelCache cache;
  Rng rng(42);
  std::size_t next = 0;
  int good = 0;
  for (std::int64_t it = 0; it < 100; ++it) {
    std::vector<LabeledSample> labeled;
    const LabeledImage& l = *pool[next++ % pool.size()];
    labeled.push_back({l.id, l.width, l.height, std::nullopt, l.labels()});
    std::vector<PseudoImage> unlabeled;
    std::vector<ImageId> current;
    for (int k = 0; k < 4; ++k) {
      const LabeledImage& img = *pool[next++ % pool.size()];
      PseudoImage p;
      p.width = img.width;
      p.height = img.height;
      p.labels = {img.id, img.labels(), it};
      unlabeled.push_back(std::move(p));
      current.push_back(img.id);
    }
    const PseudoBatch batch = compose_training_batch(std::move(labeled), std::move(unlabeled), cache, {}, it, rng);
    const auto doc = nlohmann::json::parse(composition_manifest(batch));

    bool ok = doc.at("labeled").size() == 1 && doc.at("mixed").size() == 5;
    std::vector<std::pair<ImageId, std::int64_t>> pool8;
    int mixups = 0, mosaics = 0;
    for (const auto& m : doc.at("mixed")) {
      if (m.at("kind") != "mixup") continue;
      ++mixups;
      ok = ok && m.at("sources").size() == 2;
      if (!ok) break;
      const auto& a = m["sources"][0];
      ok = ok && a.at("image_id") == current[static_cast<std::size_t>(mixups - 1)] && a.at("iteration") == it;
      for (const auto& s : m["sources"]) pool8.emplace_back(s.at("image_id"), s.at("iteration"));
    }
    for (const auto& m : doc.at("mixed")) {
      if (m.at("kind") != "mosaic") continue;
      ++mosaics;
      ok = ok && m.at("sources").size() == 4;
      for (const auto& s : m.at("sources")) {
        const std::pair<ImageId, std::int64_t> key{s.at("image_id"), s.at("iteration")};
        auto at = std::find(pool8.begin(), pool8.end(), key);
        ok = ok && at != pool8.end();
        if (at != pool8.end()) pool8.erase(at);
      }
    }
    ok = ok && mixups == 4 && mosaics == 1;
    good += ok;
  }
  return {good == 100, std::to_string(good) + "/100 iterations with 1 labeled + 4 mixup + 1 mosaic from the 8-image pool"};
}

Outcome gradient_and_ema() {
  std::mt19937_64 g(71);
  std::uniform_real_distribution<double> logit(-8.0, 8.0);
  const double h = 1e-4;
  double worst_fd = 0;
  for (int i = 0; i < 10000; ++i) {
    const double z = logit(g);
    const int t = static_cast<int>(g() & 1);
    const double fd = (bce_loss(sigmoid(z + h), t) - bce_loss(sigmoid(z - h), t)) / (2 * h);
    worst_fd = std::max(worst_fd, std::abs(gradient_norm(sigmoid(z), t) - std::abs(fd)));
  }

  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double worst_ema = 0;
  for (double m : {0.0, 0.5, 0.9, 0.99, 0.999}) {
    ParamVector t(256), s(256);
    for (auto& x : t) x = u(g);
    for (auto& x : s) x = u(g);
    auto dist = [&](const ParamVector& a) {
      double d = 0;
      for (std::size_t i = 0; i < a.size(); ++i) d += (a[i] - s[i]) * (a[i] - s[i]);
      return std::sqrt(d);
    };
    const double d0 = dist(t);
    for (int k = 1; k <= 100; ++k) {
      t = ema_update(t, s, m);
      worst_ema = std::max(worst_ema, std::abs(dist(t) - std::pow(m, k) * d0));
    }
  }
  return {worst_fd <= 1e-6 && worst_ema <= 1e-12,
          "max FD err " + fmt("%.2e", worst_fd) + ", max EMA contraction err " + fmt("%.2e", worst_ema)};
}

Outcome transform_oracles() {
  std::mt19937_64 g(81);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const GeometricOp ops[] = {GeometricOp::kShearX, GeometricOp::kShearY, GeometricOp::kTranslateX,
                             GeometricOp::kTranslateY, GeometricOp::kRotate};
  int agree = 0;
  double worst = 0;
  for (int i = 0; i < 1000; ++i) {
    const GeometricOp op = ops[g() % 5];
    const MagnitudeRange range = magnitude_range(op);
    const double mag = range.lo + (range.hi - range.lo) * u(g);
    const int w = 200 + static_cast<int>(g() % 1200), h = 200 + static_cast<int>(g() % 1000);
    const double x1 = u(g) * (w - 20), y1 = u(g) * (h - 20);
    const BBox b(x1, y1, x1 + 5 + u(g) * (w - x1 - 5), y1 + 5 + u(g) * (h - y1 - 5));
    const LabelList out = transform_labels({{b, 1, 1.0}}, geometric_transform(op, mag, w, h), w, h);
    const auto ref = oracle::dense_hull(op, mag, w, h, {b.x1(), b.y1(), b.x2(), b.y2()});
    if (!ref || ref->x2 - ref->x1 <= 1.0 || ref->y2 - ref->y1 <= 1.0) {
      // Degenerate after clipping: either dropped or within a pixel of nothing.
      agree += out.empty() || (out[0].box.width() <= 2.0 || out[0].box.height() <= 2.0);
      continue;
    }
    if (out.size() != 1) continue;
    const double d = std::max({std::abs(out[0].box.x1() - ref->x1), std::abs(out[0].box.y1() - ref->y1),
                               std::abs(out[0].box.x2() - ref->x2), std::abs(out[0].box.y2() - ref->y2)});
    worst = std::max(worst, d);
    agree += d <= 1.0;
  }

  // Erasing: random rects plus boundary cases at exactly 0.7 coverage.
  int erase_agree = 0, erase_total = 0, at_boundary = 0;
  auto check = [&](int bx1, int by1, int bx2, int by2, const std::vector<PixelRect>& rects) {
    const double cov = oracle::pixel_coverage(bx1, by1, bx2, by2, rects);
    const bool dropped = filter_erased({{BBox(bx1, by1, bx2, by2), 1, 1.0}}, rects, 0.7).empty();
    at_boundary += std::abs(cov - 0.7) < 1e-12;
    erase_agree += dropped == (cov > 0.7);
    ++erase_total;
  };
  for (int i = 0; i < 1000; ++i) {
    const int bx1 = static_cast<int>(g() % 60), by1 = static_cast<int>(g() % 60);
    const int bx2 = bx1 + 1 + static_cast<int>(g() % 40), by2 = by1 + 1 + static_cast<int>(g() % 40);
    std::vector<PixelRect> rects;
    const int n = 1 + static_cast<int>(g() % 4);
    for (int k = 0; k < n; ++k) {
      const int x0 = bx1 - 10 + static_cast<int>(g() % 40), y0 = by1 - 10 + static_cast<int>(g() % 40);
      rects.push_back({std::max(0, x0), std::max(0, y0), std::max(0, x0) + 1 + static_cast<int>(g() % 40),
                       std::max(0, y0) + 1 + static_cast<int>(g() % 40)});
    }
    check(bx1, by1, bx2, by2, rects);
  }
  for (int rows : {6, 7, 8}) check(0, 0, 10, 10, {{0, 0, 10, rows}});
  for (int cols : {69, 70, 71}) check(10, 10, 110, 20, {{10, 10, 10 + cols, 20}});
  check(0, 0, 10, 10, {{0, 0, 10, 4}, {0, 4, 3, 10}, {0, 0, 10, 2}});

  return {agree == 1000 && erase_agree == erase_total && at_boundary >= 2,
          std::to_string(agree) + "/1000 boxes within 1 px (max " + fmt("%.3f", worst) + "), erasing " +
              std::to_string(erase_agree) + "/" + std::to_string(erase_total) + " drop decisions match"};
}

Outcome filtering_invariants() {
  std::mt19937_64 g(91);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  bool monotone = true;
  for (int trial = 0; trial < 200; ++trial) {
    LabelList dets;
    const int n = static_cast<int>(g() % 50);
    for (int i = 0; i < n; ++i) {
      double s = u(g);
      if (g() % 5 == 0) s = static_cast<double>(g() % 101) / 100.0;
      dets.push_back({BBox(i, i, i + 10, i + 10), 1, s});
    }
    LabelList prev = filter_by_threshold(dets, 0.0);
    for (int k = 1; k <= 100; ++k) {
      const LabelList cur = filter_by_threshold(dets, k / 100.0);
      // cur must be a subsequence of prev.
      std::size_t j = 0;
      for (const auto& d : prev)
        if (j < cur.size() && d.box == cur[j].box && d.score == cur[j].score) ++j;
      monotone = monotone && j == cur.size() && cur.size() <= prev.size();
      prev = cur;
    }
  }

  std::size_t batches_ok = 0, removed = 0;
  for (int b = 0; b < 10000; ++b) {
    std::vector<PseudoImage> batch;
    const int n = 1 + static_cast<int>(g() % 8);
    const double thr = u(g);
    for (int i = 0; i < n; ++i) {
      LabelList dets;
      const int k = static_cast<int>(g() % 4);
      for (int j = 0; j < k; ++j) dets.push_back({BBox(0, 0, 10, 10), 1, u(g)});
      PseudoImage p;
      p.width = p.height = 32;
      p.labels = {i + 1, filter_by_threshold(dets, thr), 0};
      batch.push_back(std::move(p));
    }
    const EmptyFilterResult r = filter_empty_images(std::move(batch));
    removed += r.removed;
    batches_ok += std::none_of(r.kept.begin(), r.kept.end(), [](const PseudoImage& p) { return p.detections().empty(); }) &&
                  r.kept.size() + r.removed == static_cast<std::size_t>(n);
  }

  int exact = 0;
  for (int i = 0; i < 100; ++i) {
    const int w = 1 + static_cast<int>(g() % 300), h = 1 + static_cast<int>(g() % 300);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h * 3);
    for (auto& v : px) v = static_cast<std::uint8_t>(g());
    const ImageRaster r(w, h, px);
    const ImageRaster padded = pad_to(r, w + static_cast<int>(g() % 64), h + static_cast<int>(g() % 64));
    // Through the cache, which stores images unpadded.
    PseudoLabelCache cache;
    PseudoImage p;
    p.width = w;
    p.height = h;
    p.raster = padded;
    p.labels = {1, {{BBox(0, 0, 1, 1), 1, 1.0}}, 0};
    cache.put({p}, 0);
    Rng rng(static_cast<std::uint64_t>(i));
    const auto back = cache.sample(1, rng);
    exact += unpad(padded) == r && back.size() == 1 && back[0].image.raster && *back[0].image.raster == r;
  }
  return {monotone && batches_ok == 10000 && exact == 100,
          std::string("threshold monotone: ") + (monotone ? "yes" : "no") + ", " + std::to_string(batches_ok) +
              "/10000 batches free of empty images (" + std::to_string(removed) + " removed), " +
              std::to_string(exact) + "/100 rasters bit-exact"};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "repeat factors match the closed form and epoch multiplicity", 10, repeat_factors_exact},
      {2, "mosaic conserves labels and raises the small+medium share", 30, mosaic_rebalancing},
      {3, "mixup suppresses false-negative gradients", 60, mixup_fn_suppression},
      {4, "teacher score calibration", 30, score_calibration},
      {5, "large pseudo-labels overtake ground truth, small never do", 300, scale_crossover},
      {6, "batch composition contract", 60, batch_contract},
      {7, "gradient norm and EMA contraction", 60, gradient_and_ema},
      {8, "box transforms and erasing match brute-force oracles", 60, transform_oracles},
      {9, "filtering and padding invariants", 60, filtering_invariants},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs < c.limit_s;
    const bool pass = o.pass && in_time;
    failed += !pass;
    std::printf("%s [%d] %s: %s (%.2f s, limit %.0f s%s)\n", pass ? "PASS" : "FAIL", c.id, c.name.c_str(),
                o.detail.c_str(), secs, c.limit_s, in_time ? "" : ", exceeded");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
