#include "mixpl/augment.hpp"

#include <algorithm>
#include <cmath>

#include "mixpl/error.hpp"

namespace mixpl {

namespace {

constexpr const char* kModule = "augment";

struct Tap {
  int i0 = 0;
  int i1 = 0;
  float w1 = 0.0f;  // weight of i1; i0 gets 1 - w1
};

// Bilinear taps for output positions 0..out-1 under a pure scale, using
// pixel-centre alignment and edge clamping.
std::vector<Tap> scale_taps(int in, int out) {
  std::vector<Tap> taps(static_cast<std::size_t>(out));
  const double ratio = static_cast<double>(in) / out;
  for (int o = 0; o < out; ++o) {
    const double s = std::clamp((o + 0.5) * ratio - 0.5, 0.0, in - 1.0);
    const int i0 = static_cast<int>(std::floor(s));
    const int i1 = std::min(i0 + 1, in - 1);
    taps[o] = {i0, i1, static_cast<float>(s - i0)};
  }
  return taps;
}

std::uint8_t round8(float v) { return static_cast<std::uint8_t>(std::clamp(v + 0.5f, 0.0f, 255.0f)); }

}  // namespace

std::string to_string(GeometricOp op) {
  switch (op) {
    case GeometricOp::kShearX: return "ShearX";
    case GeometricOp::kShearY: return "ShearY";
    case GeometricOp::kTranslateX: return "TranslateX";
    case GeometricOp::kTranslateY: return "TranslateY";
    case GeometricOp::kRotate: return "Rotate";
  }
  return "unknown";
}

std::string to_string(PipelineKind k) {
  switch (k) {
    case PipelineKind::kLabeled: return "labeled";
    case PipelineKind::kWeak: return "weak";
    case PipelineKind::kStrong: return "strong";
  }
  return "unknown";
}

MagnitudeRange magnitude_range(GeometricOp op) {
  switch (op) {
    case GeometricOp::kShearX:
    case GeometricOp::kShearY: return {-0.3, 0.3};
    case GeometricOp::kTranslateX:
    case GeometricOp::kTranslateY: return {-0.1, 0.1};
    case GeometricOp::kRotate: return {-30.0, 30.0};
  }
  return {0.0, 0.0};
}

AffineTransform geometric_transform(GeometricOp op, double magnitude, int width, int height) {
  const double cx = width / 2.0, cy = height / 2.0;
  switch (op) {
    case GeometricOp::kShearX: return AffineTransform::shear_x(magnitude, cy);
    case GeometricOp::kShearY: return AffineTransform::shear_y(magnitude, cx);
    case GeometricOp::kTranslateX: return AffineTransform::translate(magnitude * width, 0.0);
    case GeometricOp::kTranslateY: return AffineTransform::translate(0.0, magnitude * height);
    case GeometricOp::kRotate: return AffineTransform::rotate(magnitude, cx, cy);
  }
  throw ValidationError(kModule, "unknown geometric op");
}

// ---------------------------------------------------------------------------
// Pixels
// ---------------------------------------------------------------------------

ImageRaster resize_raster(const ImageRaster& src, int width, int height, Interpolation interp) {
  if (src.padded()) throw ValidationError(kModule, "cannot resize a padded raster");
  ImageRaster out(width, height);
  if (interp == Interpolation::kNearest) {
    std::vector<int> xs(static_cast<std::size_t>(width));
    for (int x = 0; x < width; ++x) {
      xs[x] = std::min(src.width() - 1, static_cast<int>((x + 0.5) * src.width() / width));
    }
    for (int y = 0; y < height; ++y) {
      const int sy = std::min(src.height() - 1, static_cast<int>((y + 0.5) * src.height() / height));
      const std::uint8_t* in = src.row(sy);
      std::uint8_t* o = out.row(y);
      for (int x = 0; x < width; ++x) {
        o[3 * x] = in[3 * xs[x]];
        o[3 * x + 1] = in[3 * xs[x] + 1];
        o[3 * x + 2] = in[3 * xs[x] + 2];
      }
    }
    return out;
  }
  const auto tx = scale_taps(src.width(), width);
  const auto ty = scale_taps(src.height(), height);
  for (int y = 0; y < height; ++y) {
    const std::uint8_t* r0 = src.row(ty[y].i0);
    const std::uint8_t* r1 = src.row(ty[y].i1);
    const float wy = ty[y].w1;
    std::uint8_t* o = out.row(y);
    for (int x = 0; x < width; ++x) {
      const int a = 3 * tx[x].i0, b = 3 * tx[x].i1;
      const float wx = tx[x].w1;
      for (int c = 0; c < 3; ++c) {
        const float top = r0[a + c] + wx * (r0[b + c] - r0[a + c]);
        const float bot = r1[a + c] + wx * (r1[b + c] - r1[a + c]);
        o[3 * x + c] = round8(top + wy * (bot - top));
      }
    }
  }
  return out;
}

ImageRaster flip_raster(const ImageRaster& src) {
  if (src.padded()) throw ValidationError(kModule, "cannot flip a padded raster");
  ImageRaster out(src.width(), src.height());
  const int w = src.width();
  for (int y = 0; y < src.height(); ++y) {
    const std::uint8_t* in = src.row(y);
    std::uint8_t* o = out.row(y);
    for (int x = 0; x < w; ++x) {
      const int m = w - 1 - x;
      o[3 * x] = in[3 * m];
      o[3 * x + 1] = in[3 * m + 1];
      o[3 * x + 2] = in[3 * m + 2];
    }
  }
  return out;
}

ImageRaster warp_affine(const ImageRaster& src, const AffineTransform& tf, int width, int height,
                        Interpolation interp) {
  if (src.padded()) throw ValidationError(kModule, "cannot warp a padded raster");
  const auto inv = tf.inverse().matrix();
  ImageRaster out(width, height);
  const int sw = src.width(), sh = src.height();
  for (int y = 0; y < height; ++y) {
    std::uint8_t* o = out.row(y);
    const double py = y + 0.5;
    for (int x = 0; x < width; ++x) {
      const double px = x + 0.5;
      const double sx = inv[0] * px + inv[1] * py + inv[2] - 0.5;
      const double sy = inv[3] * px + inv[4] * py + inv[5] - 0.5;
      if (sx < -0.5 || sy < -0.5 || sx > sw - 0.5 || sy > sh - 0.5) continue;
      if (interp == Interpolation::kNearest) {
        const int ix = std::clamp(static_cast<int>(std::lround(sx)), 0, sw - 1);
        const int iy = std::clamp(static_cast<int>(std::lround(sy)), 0, sh - 1);
        for (int c = 0; c < 3; ++c) o[3 * x + c] = src.at(ix, iy, c);
        continue;
      }
      const double cx = std::clamp(sx, 0.0, sw - 1.0), cy = std::clamp(sy, 0.0, sh - 1.0);
      const int x0 = static_cast<int>(std::floor(cx)), y0 = static_cast<int>(std::floor(cy));
      const int x1 = std::min(x0 + 1, sw - 1), y1 = std::min(y0 + 1, sh - 1);
      const float fx = static_cast<float>(cx - x0), fy = static_cast<float>(cy - y0);
      for (int c = 0; c < 3; ++c) {
        const float top = src.at(x0, y0, c) + fx * (src.at(x1, y0, c) - src.at(x0, y0, c));
        const float bot = src.at(x0, y1, c) + fx * (src.at(x1, y1, c) - src.at(x0, y1, c));
        o[3 * x + c] = round8(top + fy * (bot - top));
      }
    }
  }
  return out;
}

LabelList transform_labels(const LabelList& labels, const AffineTransform& tf, int width, int height) {
  LabelList out;
  out.reserve(labels.size());
  for (const auto& d : labels) {
    auto mapped = tf.map_box(d.box);
    if (!mapped) continue;
    auto clipped = clip_and_filter(*mapped, width, height);
    if (clipped) out.push_back({*clipped, d.category, d.score});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Erasing
// ---------------------------------------------------------------------------

double erased_coverage(const BBox& box, const std::vector<PixelRect>& rects) {
  // Occupancy over the grid induced by the box and rectangle edges: every
  // cell is either fully inside the union of erased pixels or fully outside.
  std::vector<double> xs = {box.x1(), box.x2()}, ys = {box.y1(), box.y2()};
  std::vector<PixelRect> hits;
  for (const auto& r : rects) {
    if (r.x1 <= box.x1() || r.x0 >= box.x2() || r.y1 <= box.y1() || r.y0 >= box.y2()) continue;
    hits.push_back(r);
    for (double x : {static_cast<double>(r.x0), static_cast<double>(r.x1)})
      if (x > box.x1() && x < box.x2()) xs.push_back(x);
    for (double y : {static_cast<double>(r.y0), static_cast<double>(r.y1)})
      if (y > box.y1() && y < box.y2()) ys.push_back(y);
  }
  if (hits.empty()) return 0.0;
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  double area = 0.0;
  for (std::size_t j = 0; j + 1 < ys.size(); ++j) {
    const double cy = 0.5 * (ys[j] + ys[j + 1]);
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
      const double cx = 0.5 * (xs[i] + xs[i + 1]);
      const bool covered = std::any_of(hits.begin(), hits.end(), [&](const PixelRect& r) {
        return cx > r.x0 && cx < r.x1 && cy > r.y0 && cy < r.y1;
      });
      if (covered) area += (xs[i + 1] - xs[i]) * (ys[j + 1] - ys[j]);
    }
  }
  return area / box.area();
}

LabelList filter_erased(const LabelList& labels, const std::vector<PixelRect>& rects, double threshold) {
  LabelList out;
  out.reserve(labels.size());
  for (const auto& d : labels) {
    if (rects.empty() || erased_coverage(d.box, rects) <= threshold) out.push_back(d);
  }
  return out;
}

std::vector<PixelRect> sample_erasing(int width, int height, const ErasingParams& p, Rng& rng) {
  if (p.min_patches < 0 || p.max_patches < p.min_patches || p.min_ratio < 0.0 ||
      p.max_ratio < p.min_ratio || p.max_ratio > 1.0) {
    throw ValidationError(kModule, "invalid erasing parameters");
  }
  std::vector<PixelRect> rects;
  const int n = uniform_int(rng, p.min_patches, p.max_patches);
  for (int i = 0; i < n; ++i) {
    const int pw = static_cast<int>(std::lround(uniform(rng, p.min_ratio, p.max_ratio) * width));
    const int ph = static_cast<int>(std::lround(uniform(rng, p.min_ratio, p.max_ratio) * height));
    const int x0 = uniform_int(rng, 0, width - pw);
    const int y0 = uniform_int(rng, 0, height - ph);
    if (pw > 0 && ph > 0) rects.push_back({x0, y0, x0 + pw, y0 + ph});
  }
  return rects;
}

// ---------------------------------------------------------------------------
// Stages
// ---------------------------------------------------------------------------

std::pair<int, int> resized_size(int width, int height, int short_side, int long_cap) {
  const double short_in = std::min(width, height), long_in = std::max(width, height);
  double scale = short_side / short_in;
  if (long_in * scale > long_cap) scale = long_cap / long_in;
  return {std::max(1, static_cast<int>(std::lround(width * scale))),
          std::max(1, static_cast<int>(std::lround(height * scale)))};
}

Stage plan_resize_to(int width, int height, int short_side, int long_cap) {
  const auto [ow, oh] = resized_size(width, height, short_side, long_cap);
  Stage s;
  s.type = Stage::Type::kResize;
  s.name = "resize";
  s.transform = AffineTransform::scale(static_cast<double>(ow) / width, static_cast<double>(oh) / height);
  s.out_w = ow;
  s.out_h = oh;
  return s;
}

Stage plan_resize(int width, int height, const ResizeParams& params, Rng& rng) {
  if (params.short_min <= 0 || params.short_max < params.short_min || params.long_cap <= 0) {
    throw ValidationError(kModule, "invalid resize range");
  }
  return plan_resize_to(width, height, uniform_int(rng, params.short_min, params.short_max), params.long_cap);
}

Stage plan_flip(int width, int height, double prob, Rng& rng) {
  Stage s;
  s.type = Stage::Type::kFlip;
  s.out_w = width;
  s.out_h = height;
  if (bernoulli(rng, prob)) {
    s.name = "flip";
    s.transform = AffineTransform::hflip(width);
  } else {
    s.name = "no-flip";
  }
  return s;
}

Stage plan_rand_augment(int width, int height, AugmentSpace space, Rng& rng) {
  Stage s;
  s.out_w = width;
  s.out_h = height;
  if (space == AugmentSpace::kColor) {
    s.type = Stage::Type::kColor;
    s.color = static_cast<ColorOp>(uniform_int(rng, 0, 7));
    const auto range = magnitude_range(s.color);
    if (s.color == ColorOp::kPosterize) {
      s.magnitude = uniform_int(rng, static_cast<int>(range.lo), static_cast<int>(range.hi));
    } else if (range.hi > range.lo) {
      s.magnitude = uniform(rng, range.lo, range.hi);
    }
    s.name = to_string(s.color);
  } else {
    s.type = Stage::Type::kGeometric;
    const auto op = static_cast<GeometricOp>(uniform_int(rng, 0, 4));
    const auto range = magnitude_range(op);
    s.magnitude = uniform(rng, range.lo, range.hi);
    s.transform = geometric_transform(op, s.magnitude, width, height);
    s.name = to_string(op);
  }
  return s;
}

Stage plan_erasing(int width, int height, const ErasingParams& params, Rng& rng) {
  Stage s;
  s.type = Stage::Type::kErase;
  s.name = "erase";
  s.out_w = width;
  s.out_h = height;
  s.erased = sample_erasing(width, height, params, rng);
  s.drop_threshold = params.drop_threshold;
  return s;
}

ImageRaster render_stage(const Stage& stage, const ImageRaster& r, Interpolation interp) {
  switch (stage.type) {
    case Stage::Type::kResize: return resize_raster(r, stage.out_w, stage.out_h, interp);
    case Stage::Type::kFlip:
      return stage.transform.kind() == TransformKind::kFlip ? flip_raster(r) : r;
    case Stage::Type::kColor: return apply_color_op(r, stage.color, stage.magnitude);
    case Stage::Type::kGeometric: return warp_affine(r, stage.transform, stage.out_w, stage.out_h, interp);
    case Stage::Type::kErase: {
      ImageRaster out = r;
      for (const auto& rect : stage.erased) {
        for (int y = rect.y0; y < rect.y1; ++y) {
          std::fill(out.row(y) + 3 * rect.x0, out.row(y) + 3 * rect.x1, std::uint8_t{0});
        }
      }
      return out;
    }
  }
  throw ValidationError(kModule, "unknown stage");
}

LabelList map_labels(const Stage& stage, const LabelList& labels) {
  switch (stage.type) {
    case Stage::Type::kColor: return labels;
    case Stage::Type::kErase: return filter_erased(labels, stage.erased, stage.drop_threshold);
    default: return transform_labels(labels, stage.transform, stage.out_w, stage.out_h);
  }
}

LabelList map_labels(const PipelinePlan& plan, const LabelList& labels) {
  LabelList out = labels;
  for (const auto& s : plan.stages) out = map_labels(s, out);
  return out;
}

std::vector<std::string> PipelinePlan::trace() const {
  std::vector<std::string> t;
  for (const auto& s : stages) t.push_back(s.name);
  return t;
}

PipelinePlan plan_pipeline(const AugmentSpec& spec, int width, int height, Rng& rng) {
  PipelinePlan plan;
  plan.in_w = width;
  plan.in_h = height;
  int w = width, h = height;
  auto push = [&](Stage s) {
    plan.composite = compose(s.transform, plan.composite);
    w = s.out_w;
    h = s.out_h;
    if (s.type == Stage::Type::kErase) {
      plan.erased.insert(plan.erased.end(), s.erased.begin(), s.erased.end());
    }
    plan.stages.push_back(std::move(s));
  };
  push(plan_resize(w, h, spec.resize, rng));
  push(plan_flip(w, h, spec.flip_prob, rng));
  if (spec.kind != PipelineKind::kWeak) {
    for (int i = 0; i < spec.color_ops; ++i) push(plan_rand_augment(w, h, AugmentSpace::kColor, rng));
  }
  if (spec.kind == PipelineKind::kStrong) {
    for (int i = 0; i < spec.geometric_ops; ++i) push(plan_rand_augment(w, h, AugmentSpace::kGeometric, rng));
    push(plan_erasing(w, h, spec.erasing, rng));
  }
  plan.out_w = w;
  plan.out_h = h;
  return plan;
}

Augmented execute(const PipelinePlan& plan, const ImageRaster& r, const LabelList& labels, Interpolation interp) {
  if (r.width() != plan.in_w || r.height() != plan.in_h) {
    throw ValidationError(kModule, "raster size does not match the pipeline plan");
  }
  Augmented out{r, labels, plan.composite, plan.erased, plan.trace()};
  for (const auto& s : plan.stages) {
    out.raster = render_stage(s, out.raster, interp);
    out.labels = map_labels(s, out.labels);
  }
  return out;
}

namespace {

Augmented run_stage(const Stage& s, const ImageRaster& r, const LabelList& labels, Interpolation interp) {
  return {render_stage(s, r, interp), map_labels(s, labels), s.transform, s.erased, {s.name}};
}

}  // namespace

Augmented random_resize(const ImageRaster& r, const LabelList& labels, Rng& rng, const ResizeParams& params) {
  return run_stage(plan_resize(r.width(), r.height(), params, rng), r, labels, Interpolation::kBilinear);
}

Augmented resize_to_short_side(const ImageRaster& r, const LabelList& labels, int short_side, int long_cap) {
  return run_stage(plan_resize_to(r.width(), r.height(), short_side, long_cap), r, labels,
                   Interpolation::kBilinear);
}

Augmented random_flip(const ImageRaster& r, const LabelList& labels, Rng& rng, double prob) {
  return run_stage(plan_flip(r.width(), r.height(), prob, rng), r, labels, Interpolation::kBilinear);
}

Augmented rand_augment(const ImageRaster& r, const LabelList& labels, Rng& rng, AugmentSpace space) {
  return run_stage(plan_rand_augment(r.width(), r.height(), space, rng), r, labels, Interpolation::kBilinear);
}

Augmented apply_geometric(const ImageRaster& r, const LabelList& labels, GeometricOp op, double magnitude,
                          Interpolation interp) {
  Stage s;
  s.type = Stage::Type::kGeometric;
  s.name = to_string(op);
  s.magnitude = magnitude;
  s.transform = geometric_transform(op, magnitude, r.width(), r.height());
  s.out_w = r.width();
  s.out_h = r.height();
  return run_stage(s, r, labels, interp);
}

Augmented random_erasing(const ImageRaster& r, const LabelList& labels, Rng& rng, const ErasingParams& params) {
  return run_stage(plan_erasing(r.width(), r.height(), params, rng), r, labels, Interpolation::kBilinear);
}

Augmented apply_pipeline(const AugmentSpec& spec, const ImageRaster& r, const LabelList& labels, Rng& rng) {
  const auto plan = plan_pipeline(spec, r.width(), r.height(), rng);
  return execute(plan, r, labels, spec.interpolation);
}

Augmented apply_pipeline(const AugmentSpec& spec, const ImageRaster& r, const LabelList& labels,
                         ImageId image_id) {
  Rng rng = derive_stream(spec.seed, static_cast<std::uint64_t>(image_id));
  return apply_pipeline(spec, r, labels, rng);
}

LabelList transfer_labels(const LabelList& weak_labels, const AffineTransform& weak_tf,
                          const AffineTransform& strong_tf, int strong_w, int strong_h) {
  const AffineTransform to_strong = compose(strong_tf, weak_tf.inverse());
  return transform_labels(weak_labels, to_strong, strong_w, strong_h);
}

}  // namespace mixpl
