#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "mixpl/augment.hpp"
#include "mixpl/error.hpp"
#include "mixpl/synthetic.hpp"
#include "oracles.hpp"

using namespace mixpl;

namespace {

ImageRaster noise_raster(int w, int h, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> s(static_cast<std::size_t>(w) * h * 3);
  for (auto& v : s) v = static_cast<std::uint8_t>(rng() & 0xff);
  return ImageRaster(w, h, std::move(s));
}

bool near(const BBox& a, double x1, double y1, double x2, double y2, double tol) {
  return std::abs(a.x1() - x1) <= tol && std::abs(a.y1() - y1) <= tol && std::abs(a.x2() - x2) <= tol &&
         std::abs(a.y2() - y2) <= tol;
}

const std::array<GeometricOp, 5> kGeometric{GeometricOp::kShearX, GeometricOp::kShearY, GeometricOp::kTranslateX,
                                            GeometricOp::kTranslateY, GeometricOp::kRotate};

}  // namespace

TEST_CASE("magnitude ranges") {
  CHECK(magnitude_range(ColorOp::kSolarize).lo == 0);
  CHECK(magnitude_range(ColorOp::kSolarize).hi == 256);
  CHECK(magnitude_range(ColorOp::kPosterize).lo == 4);
  CHECK(magnitude_range(ColorOp::kPosterize).hi == 8);
  for (ColorOp op : {ColorOp::kContrast, ColorOp::kColor, ColorOp::kBrightness, ColorOp::kSharpness}) {
    CHECK(magnitude_range(op).lo == doctest::Approx(0.1));
    CHECK(magnitude_range(op).hi == doctest::Approx(1.9));
  }
  CHECK(magnitude_range(GeometricOp::kShearX).hi == doctest::Approx(0.3));
  CHECK(magnitude_range(GeometricOp::kTranslateY).lo == doctest::Approx(-0.1));
  CHECK(magnitude_range(GeometricOp::kRotate).hi == 30);
}

TEST_CASE("resize examples") {
  CHECK(resized_size(500, 400, 800, 1333) == std::pair{1000, 800});
  CHECK(resized_size(4000, 1000, 1200, 1333) == std::pair{1333, 333});
  const ImageRaster r(500, 400);
  const Augmented a = resize_to_short_side(r, {{BBox(10, 10, 20, 20), 1, 1.0}}, 800);
  CHECK(a.raster.width() == 1000);
  CHECK(a.raster.height() == 800);
  REQUIRE(a.labels.size() == 1);
  CHECK(near(a.labels[0].box, 20, 20, 40, 40, 1e-9));
}

TEST_CASE("random resize keeps short side in range and long side capped") {
  Rng rng(1);
  std::uniform_int_distribution<int> side(50, 3000);
  std::mt19937_64 g(2);
  for (int i = 0; i < 5000; ++i) {
    const int w = side(g), h = side(g);
    const Stage s = plan_resize(w, h, {}, rng);
    CHECK(std::max(s.out_w, s.out_h) <= 1333);
    // Aspect ratio preserved up to rounding of each side.
    CHECK(std::abs(static_cast<double>(s.out_w) / s.out_h - static_cast<double>(w) / h) <=
          static_cast<double>(w) / h * (1.0 / s.out_w + 1.0 / s.out_h) + 1e-12);
    const double short_out = std::min(s.out_w, s.out_h);
    if (std::max(s.out_w, s.out_h) < 1333) {
      CHECK(short_out >= 400 - 0.5);
      CHECK(short_out <= 1200 + 0.5);
    }
  }
}

TEST_CASE("flip examples") {
  const ImageRaster r = noise_raster(100, 30, 3);
  Rng rng(0);
  const LabelList labels{{BBox(0, 0, 10, 10), 2, 0.9}};
  const Augmented once = random_flip(r, labels, rng, 1.0);
  REQUIRE(once.labels.size() == 1);
  CHECK(near(once.labels[0].box, 90, 0, 100, 10, 1e-12));
  CHECK(once.raster.at(0, 5, 1) == r.at(99, 5, 1));
  const Augmented twice = random_flip(once.raster, once.labels, rng, 1.0);
  CHECK(twice.raster == r);
  CHECK(twice.labels == labels);

  int flips = 0;
  for (int i = 0; i < 1000; ++i) flips += plan_flip(100, 30, 0.0, rng).name == "flip";
  CHECK(flips == 0);
}

TEST_CASE("enhancement ops at magnitude 1 are the identity") {
  const ImageRaster r = noise_raster(37, 23, 5);
  for (ColorOp op : {ColorOp::kContrast, ColorOp::kColor, ColorOp::kBrightness, ColorOp::kSharpness}) {
    CAPTURE(to_string(op));
    CHECK(apply_color_op(r, op, 1.0) == r);
  }
  CHECK(apply_color_op(r, ColorOp::kPosterize, 8) == r);
  CHECK(apply_color_op(r, ColorOp::kSolarize, 256) == r);
}

TEST_CASE("pointwise colour ops against per-pixel definitions") {
  const ImageRaster r = noise_raster(16, 16, 6);
  const ImageRaster sol = apply_color_op(r, ColorOp::kSolarize, 128);
  const ImageRaster post = apply_color_op(r, ColorOp::kPosterize, 4);
  const ImageRaster dark = apply_color_op(r, ColorOp::kBrightness, 0.5);
  for (std::size_t i = 0; i < r.samples().size(); ++i) {
    const int v = r.samples()[i];
    CHECK(sol.samples()[i] == (v < 128 ? v : 255 - v));
    CHECK(post.samples()[i] == (v & 0xF0));
    CHECK(dark.samples()[i] == static_cast<int>(std::floor(v * 0.5 + 0.5)));
  }
}

TEST_CASE("autocontrast stretches each band to the full range") {
  ImageRaster r(4, 1);
  const int vals[4] = {50, 100, 150, 200};
  for (int x = 0; x < 4; ++x)
    for (int c = 0; c < 3; ++c) r.at(x, 0, c) = static_cast<std::uint8_t>(vals[x]);
  const ImageRaster a = apply_color_op(r, ColorOp::kAutoContrast, 0);
  CHECK(a.at(0, 0, 0) == 0);
  CHECK(a.at(3, 0, 0) == 255);
  // Linear in between: (v - 50) * 255 / 150.
  CHECK(a.at(1, 0, 2) == 85);
  CHECK(a.at(2, 0, 1) == 170);
  const ImageRaster flat(5, 5, 77);
  CHECK(apply_color_op(flat, ColorOp::kAutoContrast, 0) == flat);
  CHECK(apply_color_op(flat, ColorOp::kEqualize, 0) == flat);
}

TEST_CASE("colour RandAugment never touches boxes") {
  const ImageRaster r = noise_raster(64, 48, 8);
  const LabelList labels{{BBox(1.5, 2.5, 30.25, 40), 1, 0.8}, {BBox(10, 10, 60, 47), 4, 0.3}};
  Rng rng(12);
  for (int i = 0; i < 200; ++i) {
    const Augmented a = rand_augment(r, labels, rng, AugmentSpace::kColor);
    CHECK(a.labels == labels);
    CHECK(a.raster.width() == 64);
  }
}

TEST_CASE("translate 0.1 on a width-100 image shifts boxes by 10") {
  const ImageRaster r(100, 50);
  const Augmented a = apply_geometric(r, {{BBox(20, 5, 40, 15), 1, 1.0}, {BBox(85, 5, 98, 15), 1, 1.0}},
                                      GeometricOp::kTranslateX, 0.1);
  REQUIRE(a.labels.size() == 2);
  CHECK(near(a.labels[0].box, 30, 5, 50, 15, 1e-9));
  CHECK(near(a.labels[1].box, 95, 5, 100, 15, 1e-9));
}

TEST_CASE("rotate 30 degrees about the centre") {
  const AffineTransform t = geometric_transform(GeometricOp::kRotate, 30, 100, 100);
  // A point right of centre moves up on screen for a counter-clockwise turn.
  const Point p = t.apply({60, 50});
  CHECK(p.x == doctest::Approx(50 + 10 * std::cos(std::numbers::pi / 6)));
  CHECK(p.y == doctest::Approx(50 - 10 * std::sin(std::numbers::pi / 6)));
  const auto box = t.map_box(BBox(40, 40, 60, 60));
  REQUIRE(box.has_value());
  const double half = 10 * (std::cos(std::numbers::pi / 6) + std::sin(std::numbers::pi / 6));
  CHECK(near(*box, 50 - half, 50 - half, 50 + half, 50 + half, 1e-9));
}

TEST_CASE("analytic box mapping agrees with a dense-point hull") {
  std::mt19937_64 g(99);
  Rng rng(100);
  std::uniform_real_distribution<double> u(0, 1);
  int compared = 0;
  for (int i = 0; i < 1000; ++i) {
    const int w = 200 + static_cast<int>(u(g) * 800), h = 200 + static_cast<int>(u(g) * 800);
    const GeometricOp op = kGeometric[i % 5];
    const auto range = magnitude_range(op);
    const double mag = range.lo + (range.hi - range.lo) * u(g);
    const double x1 = u(g) * (w - 20), y1 = u(g) * (h - 20);
    const BBox b(x1, y1, x1 + 5 + u(g) * (w - x1 - 5), y1 + 5 + u(g) * (h - y1 - 5));
    const LabelList out = transform_labels({{b, 1, 1.0}}, geometric_transform(op, mag, w, h), w, h);
    const auto ref = oracle::dense_hull(op, mag, w, h, {b.x1(), b.y1(), b.x2(), b.y2()});
    if (!ref || ref->x2 - ref->x1 <= 1.0 || ref->y2 - ref->y1 <= 1.0) {
      CHECK(out.empty());
      continue;
    }
    REQUIRE(out.size() == 1);
    CHECK(near(out[0].box, ref->x1, ref->y1, ref->x2, ref->y2, 1.0));
    ++compared;
  }
  CHECK(compared > 900);
}

TEST_CASE("affine inverse round trip") {
  std::mt19937_64 g(5);
  std::uniform_real_distribution<double> u(-1, 1);
  double worst = 0;
  for (int i = 0; i < 10000; ++i) {
    AffineTransform t = compose(AffineTransform::rotate(30 * u(g), 500 * u(g), 500 * u(g)),
                                compose(AffineTransform::shear_x(0.3 * u(g), 400 * u(g)),
                                        compose(AffineTransform::scale(1.5 + u(g), 1.5 + u(g)),
                                                AffineTransform::translate(100 * u(g), 100 * u(g)))));
    if (i % 2) t = compose(AffineTransform::hflip(1000), t);
    worst = std::max(worst, max_abs_diff(compose(t.inverse(), t), AffineTransform::identity()));
    worst = std::max(worst, max_abs_diff(compose(t, t.inverse()), AffineTransform::identity()));
  }
  CHECK(worst < 1e-6);
  CHECK_THROWS_AS(AffineTransform::scale(0, 1).inverse(), ValidationError);
}

TEST_CASE("warp with identity and integer shifts is exact") {
  const ImageRaster r = noise_raster(20, 10, 4);
  CHECK(warp_affine(r, AffineTransform::identity(), 20, 10) == r);
  const ImageRaster s = warp_affine(r, AffineTransform::translate(3, 2), 20, 10, Interpolation::kNearest);
  CHECK(s.at(3, 2, 0) == r.at(0, 0, 0));
  CHECK(s.at(19, 9, 2) == r.at(16, 7, 2));
  CHECK(s.at(1, 1, 1) == 0);
}

TEST_CASE("erasing examples") {
  ErasingParams none;
  none.min_patches = none.max_patches = 0;
  Rng rng(1);
  const ImageRaster r = noise_raster(50, 50, 2);
  const LabelList labels{{BBox(5, 5, 15, 15), 1, 1.0}};
  const Augmented a = random_erasing(r, labels, rng, none);
  CHECK(a.raster == r);
  CHECK(a.labels == labels);
  CHECK(a.erased.empty());

  const std::vector<PixelRect> patch{{0, 0, 20, 20}};
  CHECK(erased_coverage(BBox(5, 5, 15, 15), patch) == 1.0);
  CHECK(filter_erased(labels, patch, 0.7).empty());
  // Left half covered.
  CHECK(erased_coverage(BBox(10, 0, 30, 10), patch) == doctest::Approx(0.5));
  CHECK(filter_erased({{BBox(10, 0, 30, 10), 1, 1.0}}, patch, 0.7).size() == 1);
  // Overlapping patches are not double counted.
  CHECK(erased_coverage(BBox(0, 0, 10, 10), {{0, 0, 10, 10}, {0, 0, 10, 10}}) == 1.0);
}

TEST_CASE("erased coverage equals an exhaustive pixel count") {
  std::mt19937_64 g(17);
  std::uniform_int_distribution<int> pos(0, 90), len(1, 30), count(0, 8);
  for (int i = 0; i < 500; ++i) {
    std::vector<PixelRect> rects;
    for (int k = count(g); k > 0; --k) {
      const int x = pos(g), y = pos(g);
      rects.push_back({x, y, x + len(g), y + len(g)});
    }
    const int x1 = pos(g), y1 = pos(g), x2 = x1 + len(g), y2 = y1 + len(g);
    const double exact = erased_coverage(BBox(x1, y1, x2, y2), rects);
    CHECK(exact == doctest::Approx(oracle::pixel_coverage(x1, y1, x2, y2, rects)).epsilon(1e-12));
  }
}

TEST_CASE("sampled erasing respects the patch ranges and fills zero") {
  Rng rng(3);
  for (int i = 0; i < 300; ++i) {
    const auto rects = sample_erasing(200, 100, {}, rng);
    // Patches that round to zero pixels are discarded.
    CHECK(rects.size() <= 20);
    for (const auto& p : rects) {
      CHECK(p.x1 - p.x0 <= 20);
      CHECK(p.y1 - p.y0 <= 10);
      CHECK(p.x0 >= 0);
      CHECK(p.y1 <= 100);
    }
  }
  const ImageRaster r(200, 100, 9);
  const Augmented a = random_erasing(r, {}, rng);
  for (const auto& p : a.erased)
    for (int y = p.y0; y < p.y1; ++y)
      for (int x = p.x0; x < p.x1; ++x) CHECK(a.raster.at(x, y, 0) == 0);
}

TEST_CASE("pipeline stage order per kind") {
  Rng rng(4);
  AugmentSpec spec;
  spec.kind = PipelineKind::kWeak;
  auto weak = plan_pipeline(spec, 640, 480, rng).stages;
  REQUIRE(weak.size() == 2);
  CHECK(weak[0].type == Stage::Type::kResize);
  CHECK(weak[1].type == Stage::Type::kFlip);

  spec.kind = PipelineKind::kLabeled;
  auto lab = plan_pipeline(spec, 640, 480, rng).stages;
  REQUIRE(lab.size() == 3);
  CHECK(lab[2].type == Stage::Type::kColor);

  spec.kind = PipelineKind::kStrong;
  auto strong = plan_pipeline(spec, 640, 480, rng).stages;
  REQUIRE(strong.size() == 5);
  CHECK(strong[2].type == Stage::Type::kColor);
  CHECK(strong[3].type == Stage::Type::kGeometric);
  CHECK(strong[4].type == Stage::Type::kErase);
}

TEST_CASE("composite transform is the product of the stage transforms") {
  Rng rng(8);
  AugmentSpec spec;
  spec.kind = PipelineKind::kStrong;
  for (int i = 0; i < 200; ++i) {
    const PipelinePlan plan = plan_pipeline(spec, 300 + i, 500, rng);
    AffineTransform product;
    for (const auto& s : plan.stages) product = compose(s.transform, product);
    CHECK(max_abs_diff(product, plan.composite) < 1e-12);
  }
}

TEST_CASE("pipelines are deterministic in seed and image id") {
  LabeledImage img{7, 320, 240, "", {{1, BBox(10, 10, 100, 90), 1}, {2, BBox(150, 60, 300, 200), 2}}};
  const ImageRaster r = render_raster(img, 1);
  AugmentSpec spec;
  spec.kind = PipelineKind::kStrong;
  spec.seed = 42;
  spec.resize = {200, 300, 400};
  const Augmented a = apply_pipeline(spec, r, img.labels(), img.id);
  const Augmented b = apply_pipeline(spec, r, img.labels(), img.id);
  CHECK(a.raster == b.raster);
  CHECK(a.labels == b.labels);
  CHECK(a.trace == b.trace);
  spec.seed = 43;
  const Augmented c = apply_pipeline(spec, r, img.labels(), img.id);
  CHECK_FALSE((c.raster == a.raster && c.trace == a.trace));
}

TEST_CASE("transfer_labels examples") {
  const LabelList labels{{BBox(10, 20, 30, 50), 1, 0.9}};
  const AffineTransform s2 = AffineTransform::scale(2, 2), s4 = AffineTransform::scale(4, 4);
  const auto same = transfer_labels(labels, s2, s2, 1000, 1000);
  REQUIRE(same.size() == 1);
  CHECK(near(same[0].box, 10, 20, 30, 50, 1e-6));

  // Weak-view labels live in the x2 frame; the strong view is x4.
  const auto doubled = transfer_labels({{BBox(20, 40, 60, 100), 1, 0.9}}, s2, s4, 1000, 1000);
  REQUIRE(doubled.size() == 1);
  CHECK(near(doubled[0].box, 40, 80, 120, 200, 1e-9));

  const auto unflipped = transfer_labels({{BBox(70, 20, 90, 50), 1, 0.9}}, AffineTransform::hflip(100),
                                         AffineTransform::identity(), 100, 100);
  REQUIRE(unflipped.size() == 1);
  CHECK(near(unflipped[0].box, 10, 20, 30, 50, 1e-9));
  CHECK(unflipped[0].score == 0.9);
}
