#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "mixpl/affine.hpp"
#include "mixpl/geometry.hpp"
#include "mixpl/raster.hpp"
#include "mixpl/rng.hpp"

namespace mixpl {

enum class Interpolation { kBilinear, kNearest };

// ---------------------------------------------------------------------------
// RandAugment operation sets
// ---------------------------------------------------------------------------

enum class ColorOp {
  kAutoContrast,
  kEqualize,
  kSolarize,    // magnitude: threshold in [0, 256]
  kPosterize,   // magnitude: bits in [4, 8]
  kContrast,    // magnitude: enhancement factor in [0.1, 1.9]
  kColor,
  kBrightness,
  kSharpness,
};

enum class GeometricOp {
  kShearX,      // magnitude: shear coefficient in [-0.3, 0.3]
  kShearY,
  kTranslateX,  // magnitude: fraction of the image side in [-0.1, 0.1]
  kTranslateY,
  kRotate,      // magnitude: degrees in [-30, 30]
};

enum class AugmentSpace { kColor, kGeometric };

std::string to_string(ColorOp op);
std::string to_string(GeometricOp op);

struct MagnitudeRange {
  double lo = 0.0;
  double hi = 0.0;
};

MagnitudeRange magnitude_range(ColorOp op);
MagnitudeRange magnitude_range(GeometricOp op);

/// PIL-style colour transform. Boxes are unaffected by construction.
ImageRaster apply_color_op(const ImageRaster& r, ColorOp op, double magnitude);

/// The affine map of a geometric op on a width x height canvas. Shears and
/// rotations act about the image centre; translation is magnitude * side.
AffineTransform geometric_transform(GeometricOp op, double magnitude, int width, int height);

// ---------------------------------------------------------------------------
// Pixel-level helpers
// ---------------------------------------------------------------------------

/// Resamples `src` into a width x height canvas under `tf` (source -> output),
/// filling uncovered pixels with 0.
ImageRaster warp_affine(const ImageRaster& src, const AffineTransform& tf, int width, int height,
                        Interpolation interp = Interpolation::kBilinear);

ImageRaster resize_raster(const ImageRaster& src, int width, int height,
                          Interpolation interp = Interpolation::kBilinear);

ImageRaster flip_raster(const ImageRaster& src);

/// Maps each label through `tf`, takes the hull, clips to the canvas and
/// drops boxes that become degenerate.
LabelList transform_labels(const LabelList& labels, const AffineTransform& tf, int width, int height);

// ---------------------------------------------------------------------------
// Random erasing
// ---------------------------------------------------------------------------

/// Half-open pixel rectangle [x0, x1) x [y0, y1).
struct PixelRect {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  friend bool operator==(const PixelRect&, const PixelRect&) = default;
};

struct ErasingParams {
  int min_patches = 1;
  int max_patches = 20;
  /// Patch side as a fraction of the matching image side.
  double min_ratio = 0.0;
  double max_ratio = 0.1;
  /// Labels whose erased fraction exceeds this are dropped.
  double drop_threshold = 0.7;
};

/// Exact fraction of the box area covered by the union of the rectangles.
double erased_coverage(const BBox& box, const std::vector<PixelRect>& rects);

/// Drops labels with erased coverage strictly above `threshold`.
LabelList filter_erased(const LabelList& labels, const std::vector<PixelRect>& rects, double threshold);

std::vector<PixelRect> sample_erasing(int width, int height, const ErasingParams& params, Rng& rng);

// ---------------------------------------------------------------------------
// Pipelines
// ---------------------------------------------------------------------------

enum class PipelineKind { kLabeled, kWeak, kStrong };

std::string to_string(PipelineKind k);

struct ResizeParams {
  int short_min = 400;
  int short_max = 1200;
  int long_cap = 1333;
};

struct AugmentSpec {
  PipelineKind kind = PipelineKind::kWeak;
  ResizeParams resize;
  double flip_prob = 0.5;
  int color_ops = 1;
  int geometric_ops = 1;
  ErasingParams erasing;
  Interpolation interpolation = Interpolation::kBilinear;
  std::uint64_t seed = 0;
};

/// One sampled stage of a pipeline. Geometry-changing stages carry their
/// transform and output size; colour stages carry the op; the erasing stage
/// carries its rectangles.
struct Stage {
  enum class Type { kResize, kFlip, kColor, kGeometric, kErase };
  Type type = Type::kResize;
  std::string name;
  AffineTransform transform;
  int out_w = 0;
  int out_h = 0;
  ColorOp color = ColorOp::kAutoContrast;
  double magnitude = 0.0;
  std::vector<PixelRect> erased;
  double drop_threshold = 0.7;
};

/// All random decisions of one pipeline run, independent of pixel content.
struct PipelinePlan {
  std::vector<Stage> stages;
  int in_w = 0;
  int in_h = 0;
  int out_w = 0;
  int out_h = 0;
  /// Product of the stage transforms (source -> output).
  AffineTransform composite;
  std::vector<PixelRect> erased;
  std::vector<std::string> trace() const;
};

/// Result of running one op or pipeline on an image and its labels.
struct Augmented {
  ImageRaster raster;
  LabelList labels;
  AffineTransform transform;
  std::vector<PixelRect> erased;
  std::vector<std::string> trace;
};

/// Output size for a resize to the given short side with the long-side cap,
/// rounded to whole pixels.
std::pair<int, int> resized_size(int width, int height, int short_side, int long_cap);

Stage plan_resize(int width, int height, const ResizeParams& params, Rng& rng);
Stage plan_resize_to(int width, int height, int short_side, int long_cap);
Stage plan_flip(int width, int height, double prob, Rng& rng);
Stage plan_rand_augment(int width, int height, AugmentSpace space, Rng& rng);
Stage plan_erasing(int width, int height, const ErasingParams& params, Rng& rng);

PipelinePlan plan_pipeline(const AugmentSpec& spec, int width, int height, Rng& rng);

/// Applies a stage or a whole plan. Label mapping is pure geometry, so
/// `map_labels` can run without pixels.
ImageRaster render_stage(const Stage& stage, const ImageRaster& r, Interpolation interp);
LabelList map_labels(const Stage& stage, const LabelList& labels);
LabelList map_labels(const PipelinePlan& plan, const LabelList& labels);
Augmented execute(const PipelinePlan& plan, const ImageRaster& r, const LabelList& labels,
                  Interpolation interp = Interpolation::kBilinear);

Augmented random_resize(const ImageRaster& r, const LabelList& labels, Rng& rng,
                        const ResizeParams& params = {});
Augmented resize_to_short_side(const ImageRaster& r, const LabelList& labels, int short_side,
                               int long_cap = 1333);
Augmented random_flip(const ImageRaster& r, const LabelList& labels, Rng& rng, double prob = 0.5);
Augmented rand_augment(const ImageRaster& r, const LabelList& labels, Rng& rng, AugmentSpace space);
Augmented apply_geometric(const ImageRaster& r, const LabelList& labels, GeometricOp op, double magnitude,
                          Interpolation interp = Interpolation::kBilinear);
Augmented random_erasing(const ImageRaster& r, const LabelList& labels, Rng& rng,
                         const ErasingParams& params = {});

Augmented apply_pipeline(const AugmentSpec& spec, const ImageRaster& r, const LabelList& labels, Rng& rng);
/// Uses the stream derived from (spec.seed, image_id).
Augmented apply_pipeline(const AugmentSpec& spec, const ImageRaster& r, const LabelList& labels,
                         ImageId image_id);

/// Moves labels predicted on the weak view into the strong view of the same
/// source image: strong ∘ weak⁻¹, hull, clip to the strong canvas.
LabelList transfer_labels(const LabelList& weak_labels, const AffineTransform& weak_tf,
                          const AffineTransform& strong_tf, int strong_w, int strong_h);

}  // namespace mixpl
