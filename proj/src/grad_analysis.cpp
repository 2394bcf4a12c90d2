#include "mixpl/grad_analysis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "mixpl/error.hpp"
#include "mixpl/pseudo.hpp"

namespace mixpl {

namespace {

constexpr const char* kModule = "grad-analysis";

void check_target(int target) {
  if (target != 0 && target != 1) throw ValidationError(kModule, "target must be 0 or 1");
}

// Best IoU match of a box against a label set; nullopt below the threshold.
std::optional<std::size_t> best_match(const BBox& anchor, const LabelList& labels, double thr) {
  std::optional<std::size_t> best;
  double best_iou = thr;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double v = iou(anchor, labels[i].box);
    if (v >= best_iou) {
      if (!best || v > best_iou) {
        best = i;
        best_iou = v;
      }
    }
  }
  return best;
}

// Labels of one source image placed on an analysis canvas.
struct Layer {
  LabelList gt;
  std::vector<double> evidence;  // per gt, already scaled for the view
  LabelList teacher;
  double fp_gain = 1.0;
  std::size_t scene = 0;
  /// Mosaic cell; anchors centred outside it get no response from this layer.
  std::optional<BBox> region;
};

struct View {
  int width = 0;
  int height = 0;
  std::vector<Layer> layers;
  std::vector<double> weights;
};

Layer place(const AnalysisScene& s, std::size_t scene, const AffineTransform& tf, double gain,
            const std::array<double, 3>* scale_mean) {
  Layer l;
  l.scene = scene;
  l.fp_gain = gain;
  for (std::size_t k = 0; k < s.image.annotations.size(); ++k) {
    const BBox& src = s.image.annotations[k].box;
    auto mapped = tf.map_box(src);
    if (!mapped) continue;
    double e = s.evidence[k] * gain;
    if (scale_mean) {
      const auto before = static_cast<int>(area_class(src)), after = static_cast<int>(area_class(*mapped));
      e *= std::min(1.0, (*scale_mean)[after] / (*scale_mean)[before]);
    }
    l.gt.push_back({*mapped, s.image.annotations[k].category, 1.0});
    l.evidence.push_back(std::clamp(e, 0.0, 1.0));
  }
  for (const auto& d : s.teacher) {
    if (auto mapped = tf.map_box(d.box)) l.teacher.push_back({*mapped, d.category, d.score});
  }
  return l;
}

std::vector<View> build_views(std::span<const AnalysisScene> scenes, AugmentationKind aug, const ResponseModel& model,
                              const AnalysisOptions& opt, Rng& rng) {
  std::vector<View> views;
  const std::size_t n = scenes.size();
  const AffineTransform id;
  switch (aug) {
    case AugmentationKind::kWeak:
    case AugmentationKind::kStrong: {
      const double gain = aug == AugmentationKind::kWeak ? 1.0 : model.strong_gain;
      for (std::size_t i = 0; i < n; ++i) {
        views.push_back({scenes[i].image.width, scenes[i].image.height, {place(scenes[i], i, id, gain, nullptr)}, {1.0}});
      }
      break;
    }
    case AugmentationKind::kMixup: {
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = (i + 1) % n;
        View v;
        v.width = std::max(scenes[i].image.width, scenes[j].image.width);
        v.height = std::max(scenes[i].image.height, scenes[j].image.height);
        v.layers = {place(scenes[i], i, id, model.strong_gain, nullptr), place(scenes[j], j, id, model.strong_gain, nullptr)};
        v.weights = {model.mixup_alpha, 1.0 - model.mixup_alpha};
        views.push_back(std::move(v));
      }
      break;
    }
    case AugmentationKind::kMosaic: {
      for (std::size_t i = 0; i + 3 < n || (i < n && i == 0); i += 4) {
        std::array<std::pair<int, int>, 4> sizes;
        std::array<std::size_t, 4> idx;
        for (std::size_t k = 0; k < 4; ++k) {
          idx[k] = (i + k) % n;
          sizes[k] = {scenes[idx[k]].image.width, scenes[idx[k]].image.height};
        }
        const auto layout = mosaic_layout(sizes, uniform_int(rng, opt.mosaic_lo, opt.mosaic_hi));
        View v;
        v.width = layout.out_w;
        v.height = layout.out_h;
        for (std::size_t k = 0; k < 4; ++k) {
          v.layers.push_back(place(scenes[idx[k]], idx[k], layout.placement[k], model.strong_gain, &model.scale_mean));
          const Point o = layout.origin[k];
          v.layers.back().region = BBox(o.x, o.y, o.x + layout.resized_w[k], o.y + layout.resized_h[k]);
          v.weights.push_back(1.0);
        }
        views.push_back(std::move(v));
      }
      break;
    }
  }
  return views;
}

// Response of one layer at one anchor.
double layer_response(const Layer& l, const BBox& anchor, double background, double iou_thr) {
  if (auto g = best_match(anchor, l.gt, iou_thr)) return l.evidence[*g];
  if (auto t = best_match(anchor, l.teacher, iou_thr)) return std::clamp(l.teacher[*t].score * l.fp_gain, 0.0, 1.0);
  return background;
}

}  // namespace

std::string to_string(Taxonomy t) {
  switch (t) {
    case Taxonomy::kTP: return "TP";
    case Taxonomy::kFP: return "FP";
    case Taxonomy::kTN: return "TN";
    case Taxonomy::kFN: return "FN";
  }
  return "unknown";
}

std::string to_string(AugmentationKind k) {
  switch (k) {
    case AugmentationKind::kWeak: return "weak";
    case AugmentationKind::kStrong: return "strong";
    case AugmentationKind::kMixup: return "mixup";
    case AugmentationKind::kMosaic: return "mosaic";
  }
  return "unknown";
}

Taxonomy classify(int pl_target, int gt_target) {
  check_target(pl_target);
  check_target(gt_target);
  if (pl_target == 1) return gt_target == 1 ? Taxonomy::kTP : Taxonomy::kFP;
  return gt_target == 1 ? Taxonomy::kFN : Taxonomy::kTN;
}

double bce_loss(double p, int target) {
  check_target(target);
  const double q = std::clamp(p, kProbEpsilon, 1.0 - kProbEpsilon);
  return target == 1 ? -std::log(q) : -std::log(1.0 - q);
}

double gradient_norm(double p, int target) {
  check_target(target);
  return std::abs(p - static_cast<double>(target));
}

std::vector<BBox> generate_anchors(int width, int height, int stride, std::span<const double> scales) {
  if (width <= 0 || height <= 0 || stride <= 0) throw ValidationError(kModule, "invalid anchor grid");
  std::vector<BBox> anchors;
  if (scales.empty()) return anchors;
  const int nx = (width + stride - 1) / stride, ny = (height + stride - 1) / stride;
  anchors.reserve(static_cast<std::size_t>(nx) * ny * scales.size());
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double cx = (i + 0.5) * stride, cy = (j + 0.5) * stride;
      for (double s : scales) {
        if (auto b = clip_box(BBox(cx - s / 2, cy - s / 2, cx + s / 2, cy + s / 2), width, height)) anchors.push_back(*b);
      }
    }
  }
  return anchors;
}

std::vector<SampleRecord> assign_samples(std::span<const BBox> anchors, const LabelList& gt, const LabelList& pl,
                                         double iou_thr) {
  std::vector<SampleRecord> out;
  out.reserve(anchors.size());
  for (const auto& a : anchors) {
    SampleRecord r{a, 0.0, 0, 0, Taxonomy::kTN, 0.0, std::nullopt, std::nullopt};
    r.gt_match = best_match(a, gt, iou_thr);
    r.pl_match = best_match(a, pl, iou_thr);
    r.gt_target = r.gt_match ? 1 : 0;
    r.pl_target = r.pl_match ? 1 : 0;
    r.taxonomy = classify(r.pl_target, r.gt_target);
    r.g = gradient_norm(r.p, r.pl_target);
    out.push_back(r);
  }
  return out;
}

void set_scores(std::vector<SampleRecord>& records, std::span<const double> p) {
  if (p.size() != records.size()) throw ValidationError(kModule, "score count does not match sample count");
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!(p[i] >= 0.0 && p[i] <= 1.0)) throw ValidationError(kModule, "probability outside [0, 1]");
    records[i].p = p[i];
    records[i].g = gradient_norm(p[i], records[i].pl_target);
  }
}

std::size_t DensityHistogram::total() const {
  std::size_t t = 0;
  for (auto c : counts) t += c;
  return t;
}

std::size_t bin_of(double g, std::size_t bins) {
  const auto b = static_cast<std::size_t>(std::floor(std::clamp(g, 0.0, 1.0) * static_cast<double>(bins)));
  return std::min(b, bins - 1);
}

std::array<DensityHistogram, 4> density(std::span<const SampleRecord> records, std::size_t bins,
                                        const std::string& augmentation, double threshold) {
  if (bins == 0) throw ValidationError(kModule, "histogram needs at least one bin");
  std::array<DensityHistogram, 4> h;
  for (int t = 0; t < 4; ++t) {
    h[t].taxonomy = static_cast<Taxonomy>(t);
    h[t].augmentation = augmentation;
    h[t].threshold = threshold;
    h[t].counts.assign(bins, 0);
  }
  for (const auto& r : records) {
    auto& hist = h[static_cast<int>(r.taxonomy)];
    ++hist.counts[bin_of(r.g, bins)];
    hist.sum_g += r.g;
  }
  return h;
}

std::vector<double> smoothed_density(const DensityHistogram& h, std::size_t radius) {
  const std::size_t n = h.counts.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= radius ? i - radius : 0, hi = std::min(n - 1, i + radius);
    double sum = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) sum += static_cast<double>(h.counts[k]);
    out[i] = sum / (static_cast<double>(hi - lo + 1) / static_cast<double>(n));
  }
  return out;
}

AnalysisScene make_scene(const TeacherProfile& profile, const LabeledImage& image, double iteration, Rng& rng) {
  AnalysisScene s;
  s.image = image;
  const TeacherPrediction pred = simulate_predictions(profile, image, iteration, rng);
  s.teacher = pred.detections;
  s.evidence.assign(image.annotations.size(), -1.0);
  for (std::size_t i = 0; i < pred.detections.size(); ++i) {
    if (pred.gt_index[i]) s.evidence[*pred.gt_index[i]] = pred.detections[i].score;
  }
  for (std::size_t k = 0; k < image.annotations.size(); ++k) {
    if (s.evidence[k] < 0.0) s.evidence[k] = profile.score[static_cast<int>(area_class(image.annotations[k].box))].sample(rng);
  }
  return s;
}

const DensityHistogram& HistogramFamily::get(AugmentationKind aug, double thr, Taxonomy t) const {
  const std::string name = to_string(aug);
  for (const auto& h : histograms) {
    if (h.augmentation == name && std::abs(h.threshold - thr) < 1e-12 && h.taxonomy == t) return h;
  }
  throw ValidationError(kModule, "no histogram for " + name + " at threshold " + std::to_string(thr));
}

HistogramFamily compare_augmentations(std::span<const AnalysisScene> scenes, const ResponseModel& model,
                                      const AnalysisOptions& options) {
  for (const auto& s : scenes) {
    if (s.evidence.size() != s.image.annotations.size()) {
      throw ValidationError(kModule, "scene evidence does not match its annotations");
    }
  }
  for (double t : options.thresholds) {
    if (!(t >= 0.0 && t <= 1.0)) throw ValidationError(kModule, "thresholds must lie in [0, 1]");
  }
  HistogramFamily family;
  if (scenes.empty()) return family;
  for (AugmentationKind aug : options.augmentations) {
    Rng rng = derive_stream(options.seed, static_cast<std::uint64_t>(aug));
    const auto views = build_views(scenes, aug, model, options, rng);
    std::vector<std::array<DensityHistogram, 4>> per_thr;
    for (double thr : options.thresholds) per_thr.push_back(density({}, options.bins, to_string(aug), thr));

    for (const auto& v : views) {
      const auto anchors = generate_anchors(v.width, v.height, options.stride, options.anchor_scales);
      // Responses do not depend on the threshold.
      std::vector<double> p(anchors.size(), 0.0);
      for (std::size_t l = 0; l < v.layers.size(); ++l) {
        Rng bg = derive_stream(options.seed ^ 0x9e3779b97f4a7c15ULL, v.layers[l].scene);
        const auto& region = v.layers[l].region;
        for (std::size_t a = 0; a < anchors.size(); ++a) {
          const double background = model.background.sample(bg) * v.layers[l].fp_gain;
          if (region) {
            const double cx = 0.5 * (anchors[a].x1() + anchors[a].x2()), cy = 0.5 * (anchors[a].y1() + anchors[a].y2());
            if (cx < region->x1() || cx >= region->x2() || cy < region->y1() || cy >= region->y2()) continue;
          }
          p[a] += v.weights[l] * layer_response(v.layers[l], anchors[a], background, options.iou_thr);
        }
      }
      for (auto& x : p) x = std::clamp(x, 0.0, 1.0);

      LabelList gt, teacher;
      for (const auto& l : v.layers) {
        gt.insert(gt.end(), l.gt.begin(), l.gt.end());
        teacher.insert(teacher.end(), l.teacher.begin(), l.teacher.end());
      }
      for (std::size_t t = 0; t < options.thresholds.size(); ++t) {
        const LabelList pl = filter_by_threshold(teacher, options.thresholds[t]);
        auto records = assign_samples(anchors, gt, pl, options.iou_thr);
        set_scores(records, p);
        const auto h = density(records, options.bins);
        for (int k = 0; k < 4; ++k) {
          for (std::size_t b = 0; b < options.bins; ++b) per_thr[t][k].counts[b] += h[k].counts[b];
          per_thr[t][k].sum_g += h[k].sum_g;
        }
      }
    }
    for (auto& arr : per_thr)
      for (auto& h : arr) family.histograms.push_back(std::move(h));
  }
  return family;
}

std::string histogram_csv(const DensityHistogram& h) {
  std::ostringstream os;
  os << "bin_center,count\n";
  char buf[64];
  for (std::size_t i = 0; i < h.bins(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.6f,%zu\n", h.bin_center(i), h.counts[i]);
    os << buf;
  }
  return os.str();
}

std::string family_summary_csv(const HistogramFamily& family) {
  std::ostringstream os;
  os << "augmentation,threshold,taxonomy,total,mean_g\n";
  char buf[160];
  for (const auto& h : family.histograms) {
    std::snprintf(buf, sizeof(buf), "%s,%.4f,%s,%zu,%.6f\n", h.augmentation.c_str(), h.threshold,
                  to_string(h.taxonomy).c_str(), h.total(), h.mean_g());
    os << buf;
  }
  return os.str();
}

std::string family_svg(const HistogramFamily& family, double threshold) {
  constexpr double kW = 640, kH = 400, kPad = 40;
  static const char* kColors[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  std::vector<const DensityHistogram*> curves;
  double peak = 1.0;
  for (const auto& h : family.histograms) {
    if (std::abs(h.threshold - threshold) > 1e-12) continue;
    curves.push_back(&h);
    for (auto c : h.counts) peak = std::max(peak, std::log1p(static_cast<double>(c)));
  }
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kPad << "\" y=\"20\" font-size=\"12\">gradient density, threshold " << threshold
     << " (log(1+count) vs g)</text>\n";
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& h = *curves[c];
    os << "<polyline fill=\"none\" stroke=\"" << kColors[c % 8] << "\" points=\"";
    for (std::size_t i = 0; i < h.bins(); ++i) {
      const double x = kPad + h.bin_center(i) * (kW - 2 * kPad);
      const double y = kH - kPad - std::log1p(static_cast<double>(h.counts[i])) / peak * (kH - 2 * kPad);
      os << x << ',' << y << ' ';
    }
    os << "\"/>\n";
    os << "<text x=\"" << kW - 150 << "\" y=\"" << 40 + 14 * c << "\" font-size=\"11\" fill=\"" << kColors[c % 8]
       << "\">" << h.augmentation << ' ' << to_string(h.taxonomy) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace mixpl
