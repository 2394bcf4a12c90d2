#pragma once

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mixpl/affine.hpp"
#include "mixpl/geometry.hpp"
#include "mixpl/raster.hpp"
#include "mixpl/rng.hpp"

namespace mixpl {

/// Pseudo-labels of one unlabeled image and the iteration that produced them.
struct PseudoLabelSet {
  ImageId image_id = 0;
  LabelList detections;
  std::int64_t iteration = 0;
};

/// A pseudo-labeled image. The raster is optional so the simulator can run
/// the whole pipeline on geometry alone; when present its content size equals
/// (width, height).
struct PseudoImage {
  int width = 0;
  int height = 0;
  std::optional<ImageRaster> raster;
  PseudoLabelSet labels;

  ImageId image_id() const { return labels.image_id; }
  const LabelList& detections() const { return labels.detections; }
};

// ---------------------------------------------------------------------------
// Filtering
// ---------------------------------------------------------------------------

/// Keeps detections with score >= thr, in order. Throws if thr is outside [0,1].
LabelList filter_by_threshold(const LabelList& dets, double thr);

struct EmptyFilterResult {
  std::vector<PseudoImage> kept;
  std::size_t removed = 0;
};

/// Drops images whose pseudo-label list is empty.
EmptyFilterResult filter_empty_images(std::vector<PseudoImage> batch);

// ---------------------------------------------------------------------------
// Cache
// ---------------------------------------------------------------------------

struct CacheEntry {
  PseudoImage image;  // raster stored unpadded
  std::int64_t stamp = 0;
};

/// Pseudo-labeled images from the nearest previous iteration(s). With the
/// default window of 1 every put replaces the contents wholesale; a larger
/// window keeps that many most recent non-empty iterations.
class PseudoLabelCache {
 public:
  explicit PseudoLabelCache(std::size_t window = 1);

  /// Stores the iteration's images (padding removed). An empty put leaves the
  /// previous contents in place.
  void put(std::vector<PseudoImage> entries, std::int64_t iteration);

  /// k entries uniformly without replacement when k <= size, with
  /// replacement otherwise. Throws CacheWarmupError when empty.
  std::vector<CacheEntry> sample(std::size_t k, Rng& rng) const;

  std::size_t size() const;
  bool empty() const { return size() == 0; }
  std::size_t window() const { return window_; }
  std::vector<CacheEntry> entries() const;

 private:
  std::size_t window_;
  std::deque<std::vector<CacheEntry>> iterations_;
};

// ---------------------------------------------------------------------------
// Mixing
// ---------------------------------------------------------------------------

enum class MixKind { kMixup, kMosaic };

std::string to_string(MixKind k);

struct SourceRef {
  ImageId image_id = 0;
  std::int64_t iteration = 0;
  bool from_cache = false;
};

struct MixedImage {
  MixKind kind = MixKind::kMixup;
  int width = 0;
  int height = 0;
  std::optional<ImageRaster> raster;
  LabelList labels;
  std::vector<SourceRef> sources;
  /// Label count before clipping to the composite and how many clipping dropped.
  std::size_t labels_before_clip = 0;
  std::size_t dropped_labels = 0;
};

/// Pixel-wise overlay of two pseudo-labeled images on a zero-padded common
/// canvas of max(Wa,Wb) x max(Ha,Hb): alpha*a + (1-alpha)*b rounded half-up.
/// Labels are the concatenation of both lists.
MixedImage pseudo_mixup(const PseudoImage& a, const PseudoImage& b, double alpha = 0.5);

struct MosaicRange {
  int lo = 400;
  int hi = 800;
};

/// Geometry of a 2x2 composite. Inputs 0..3 sit top-left, top-right,
/// bottom-left, bottom-right.
struct MosaicLayout {
  int long_edge = 0;
  std::array<int, 4> resized_w{};
  std::array<int, 4> resized_h{};
  std::array<Point, 4> origin{};
  int out_w = 0;
  int out_h = 0;
  /// Source -> composite map for each input.
  std::array<AffineTransform, 4> placement;
};

MosaicLayout mosaic_layout(std::span<const std::pair<int, int>> sizes, int long_edge);

/// Samples one longest-edge L uniformly in the range, resizes each of the
/// four inputs to it, and composes them on a 2x2 grid. Throws unless exactly
/// four inputs are given.
MixedImage pseudo_mosaic(std::span<const PseudoImage> four, const MosaicRange& range, Rng& rng);
MixedImage pseudo_mosaic_fixed(std::span<const PseudoImage> four, int long_edge);

// ---------------------------------------------------------------------------
// Batch composition
// ---------------------------------------------------------------------------

struct LabeledSample {
  ImageId image_id = 0;
  int width = 0;
  int height = 0;
  std::optional<ImageRaster> raster;
  LabelList labels;
};

struct ComposeOptions {
  double unlabeled_weight = 2.0;
  double mixup_alpha = 0.5;
  MosaicRange mosaic;
};

struct PseudoBatch {
  std::int64_t iteration = 0;
  std::vector<LabeledSample> labeled;
  std::vector<MixedImage> mixed;
  double labeled_weight = 1.0;
  double unlabeled_weight = 2.0;
  bool warmup = false;
  /// Mixed outputs dropped because clipping left them without labels.
  std::size_t dropped_empty = 0;
};

/// Mixup-pairs each current unlabeled image with a distinct cache sample
/// (or, during warm-up, another image of the batch), builds one Mosaic from
/// four images of the 2*n_u pool, then stores the current images in the
/// cache. Unlabeled inputs must already be threshold and empty filtered.
PseudoBatch compose_training_batch(std::vector<LabeledSample> labeled, std::vector<PseudoImage> unlabeled,
                                   PseudoLabelCache& cache, const ComposeOptions& options,
                                   std::int64_t iteration, Rng& rng);

/// All batch rasters zero-padded to the largest size in the batch, labeled
/// first. Requires every image to carry a raster.
std::vector<ImageRaster> assemble_padded(const PseudoBatch& batch);

/// JSON description of where each mixed image came from.
std::string composition_manifest(const PseudoBatch& batch);

/// Writes rasters (raw dump), one COCO results document per image and
/// manifest.json into `dir`.
void dump_batch(const PseudoBatch& batch, const std::filesystem::path& dir);

}  // namespace mixpl
