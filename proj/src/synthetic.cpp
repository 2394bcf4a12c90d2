#include "mixpl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mixpl/error.hpp"
#include "mixpl/rng.hpp"

namespace mixpl {

namespace {

// Side length of a square with an area inside the requested scale band.
double sample_side(Rng& rng, ScaleClass cls, double max_side, double tail) {
  double lo = 8.0, hi = 31.9;
  if (cls == ScaleClass::kMedium) {
    lo = 32.0;
    hi = 96.0;
  } else if (cls == ScaleClass::kLarge) {
    lo = 96.5;
    hi = std::max(lo + 1.0, max_side);
  }
  hi = std::min(hi, std::max(lo, max_side));
  const double u = uniform(rng, 0.0, 1.0);
  if (cls != ScaleClass::kLarge || tail == 0.0) return lo + u * (hi - lo);
  // Inverse CDF of the truncated power law.
  if (std::abs(tail - 1.0) < 1e-12) return lo * std::pow(hi / lo, u);
  const double e = 1.0 - tail;
  return std::pow(std::pow(lo, e) + u * (std::pow(hi, e) - std::pow(lo, e)), 1.0 / e);
}

}  // namespace

DatasetIndex make_synthetic_dataset(const SyntheticSpec& spec) {
  if (spec.num_images < 0 || spec.num_categories <= 0 || spec.long_edge <= 0 ||
      spec.short_edge_min <= 0 || spec.short_edge_max < spec.short_edge_min ||
      spec.short_edge_max > spec.long_edge || spec.objects_per_image < 0.0 || spec.large_tail_exponent < 0.0) {
    throw ValidationError("coco-io", "invalid synthetic dataset spec");
  }
  std::map<CategoryId, std::string> categories;
  std::vector<double> weights;
  for (int k = 0; k < spec.num_categories; ++k) {
    categories[k + 1] = "category_" + std::to_string(k + 1);
    weights.push_back(1.0 / std::pow(static_cast<double>(k + 1), spec.zipf_exponent));
  }
  Rng rng(spec.seed);
  std::discrete_distribution<int> pick_category(weights.begin(), weights.end());
  std::discrete_distribution<int> pick_scale(spec.scale_mix.begin(), spec.scale_mix.end());
  std::poisson_distribution<int> count(spec.objects_per_image);

  std::vector<LabeledImage> images;
  images.reserve(static_cast<std::size_t>(spec.num_images));
  std::int64_t next_ann = 1;
  for (int i = 0; i < spec.num_images; ++i) {
    LabeledImage img;
    img.id = spec.first_image_id + i;
    const int short_edge = uniform_int(rng, spec.short_edge_min, spec.short_edge_max);
    if (bernoulli(rng, 0.5)) {
      img.width = spec.long_edge;
      img.height = short_edge;
    } else {
      img.width = short_edge;
      img.height = spec.long_edge;
    }
    img.file_name = "synthetic_" + std::to_string(img.id) + ".png";
    const int n = spec.objects_per_image > 0.0 ? count(rng) : 0;
    for (int k = 0; k < n; ++k) {
      const auto cls = static_cast<ScaleClass>(pick_scale(rng));
      const double max_side = 0.8 * std::min(img.width, img.height);
      const double side = sample_side(rng, cls, max_side, spec.large_tail_exponent);
      // Area-preserving aspect jitter keeps the scale class of the square.
      const double aspect = std::exp(uniform(rng, std::log(0.5), std::log(2.0)));
      double w = std::min(side * std::sqrt(aspect), img.width - 1.0);
      double h = std::min(side * side / w, img.height - 1.0);
      const double x = uniform(rng, 0.0, img.width - w);
      const double y = uniform(rng, 0.0, img.height - h);
      img.annotations.push_back({next_ann++, BBox(x, y, x + w, y + h), pick_category(rng) + 1});
    }
    images.push_back(std::move(img));
  }
  return DatasetIndex::build(std::move(images), std::move(categories));
}

DatasetIndex make_long_tail_dataset(const std::vector<double>& fractions, int num_images,
                                    std::uint64_t seed) {
  if (num_images <= 0) throw ValidationError("coco-io", "long-tail dataset needs images");
  std::map<CategoryId, std::string> categories;
  std::vector<LabeledImage> images(static_cast<std::size_t>(num_images));
  for (int i = 0; i < num_images; ++i) {
    images[i].id = i + 1;
    images[i].width = 640;
    images[i].height = 480;
  }
  Rng rng(seed);
  std::vector<std::size_t> order(images.size());
  std::iota(order.begin(), order.end(), 0);
  std::int64_t next_ann = 1;
  for (std::size_t k = 0; k < fractions.size(); ++k) {
    if (!(fractions[k] >= 0.0 && fractions[k] <= 1.0)) {
      throw ValidationError("coco-io", "category fractions must lie in [0, 1]");
    }
    const CategoryId cat = static_cast<CategoryId>(k + 1);
    categories[cat] = "category_" + std::to_string(cat);
    const auto n = static_cast<std::size_t>(std::llround(fractions[k] * num_images));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t j = 0; j < n; ++j) {
      auto& img = images[order[j]];
      const double x = uniform(rng, 0.0, 540.0), y = uniform(rng, 0.0, 380.0);
      img.annotations.push_back({next_ann++, BBox(x, y, x + 100.0, y + 100.0), cat});
    }
  }
  return DatasetIndex::build(std::move(images), std::move(categories));
}

ImageRaster render_raster(const LabeledImage& image, std::uint64_t seed) {
  ImageRaster r(image.width, image.height);
  Rng rng = derive_stream(seed, static_cast<std::uint64_t>(image.id));
  const int base = uniform_int(rng, 40, 120);
  // Cheap deterministic texture: per-row offset plus a column ramp.
  std::vector<std::uint8_t> row_shift(static_cast<std::size_t>(image.height));
  for (auto& s : row_shift) s = static_cast<std::uint8_t>(uniform_int(rng, 0, 31));
  for (int y = 0; y < image.height; ++y) {
    std::uint8_t* px = r.row(y);
    for (int x = 0; x < image.width; ++x) {
      const int v = base + row_shift[y] + ((x * 7) & 63);
      px[3 * x + 0] = static_cast<std::uint8_t>(v);
      px[3 * x + 1] = static_cast<std::uint8_t>(v + 20);
      px[3 * x + 2] = static_cast<std::uint8_t>(v + 40);
    }
  }
  for (const auto& a : image.annotations) {
    const int c = a.category;
    const std::uint8_t col[3] = {static_cast<std::uint8_t>(60 + (c * 53) % 196),
                                 static_cast<std::uint8_t>(60 + (c * 97) % 196),
                                 static_cast<std::uint8_t>(60 + (c * 29) % 196)};
    const int x0 = std::clamp(static_cast<int>(std::floor(a.box.x1())), 0, image.width);
    const int x1 = std::clamp(static_cast<int>(std::ceil(a.box.x2())), 0, image.width);
    const int y0 = std::clamp(static_cast<int>(std::floor(a.box.y1())), 0, image.height);
    const int y1 = std::clamp(static_cast<int>(std::ceil(a.box.y2())), 0, image.height);
    for (int y = y0; y < y1; ++y) {
      std::uint8_t* px = r.row(y);
      for (int x = x0; x < x1; ++x) {
        px[3 * x + 0] = col[0];
        px[3 * x + 1] = col[1];
        px[3 * x + 2] = col[2];
      }
    }
  }
  return r;
}

}  // namespace mixpl
