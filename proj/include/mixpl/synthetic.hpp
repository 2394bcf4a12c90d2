#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mixpl/geometry.hpp"
#include "mixpl/raster.hpp"

namespace mixpl {

/// Procedural dataset description. Category frequencies follow a Zipf law so
/// the generated set is long-tailed; object scales follow `scale_mix`.
struct SyntheticSpec {
  int num_images = 200;
  int num_categories = 80;
  int long_edge = 1333;
  /// Short edge is drawn uniformly from [short_edge_min, short_edge_max].
  int short_edge_min = 750;
  int short_edge_max = 1000;
  double objects_per_image = 7.3;
  /// Fractions of small / medium / large objects (COCO-like by default).
  std::array<double, 3> scale_mix = {0.41, 0.34, 0.25};
  /// Large-object sides have density proportional to side^-a above 96 px,
  /// so most large objects sit near the class boundary as in COCO. 0 gives
  /// uniform sides.
  double large_tail_exponent = 2.0;
  double zipf_exponent = 1.0;
  ImageId first_image_id = 1;
  std::uint64_t seed = 0;
};

DatasetIndex make_synthetic_dataset(const SyntheticSpec& spec);

/// Labeled set in which category k (id k+1) appears in exactly
/// round(fractions[k] * num_images) images, one instance each.
DatasetIndex make_long_tail_dataset(const std::vector<double>& fractions, int num_images,
                                    std::uint64_t seed);

/// Textured background with each annotation painted as a filled rectangle in
/// a category-dependent colour. Deterministic in (image, seed).
ImageRaster render_raster(const LabeledImage& image, std::uint64_t seed);

}  // namespace mixpl
