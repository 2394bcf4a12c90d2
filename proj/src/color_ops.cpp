#include <algorithm>
#include <array>
#include <cmath>

#include "mixpl/augment.hpp"
#include "mixpl/error.hpp"

namespace mixpl {

namespace {

using Lut = std::array<std::uint8_t, 256>;

std::uint8_t clip8(double v) { return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L)); }

// ITU-R 601-2 luma with the fixed-point rounding PIL uses for RGB -> L.
std::uint8_t luma(const std::uint8_t* px) {
  return static_cast<std::uint8_t>((px[0] * 19595 + px[1] * 38470 + px[2] * 7471 + 0x8000) >> 16);
}

ImageRaster apply_luts(const ImageRaster& r, const std::array<Lut, 3>& luts) {
  ImageRaster out = r;
  auto s = out.samples();
  for (std::size_t i = 0; i < s.size(); i += 3) {
    s[i] = luts[0][s[i]];
    s[i + 1] = luts[1][s[i + 1]];
    s[i + 2] = luts[2][s[i + 2]];
  }
  return out;
}

std::array<std::array<std::size_t, 256>, 3> histograms(const ImageRaster& r) {
  std::array<std::array<std::size_t, 256>, 3> h{};
  auto s = r.samples();
  for (std::size_t i = 0; i < s.size(); i += 3) {
    ++h[0][s[i]];
    ++h[1][s[i + 1]];
    ++h[2][s[i + 2]];
  }
  return h;
}

ImageRaster autocontrast(const ImageRaster& r) {
  const auto h = histograms(r);
  std::array<Lut, 3> luts;
  for (int c = 0; c < 3; ++c) {
    int lo = 0, hi = 255;
    while (lo < 256 && h[c][lo] == 0) ++lo;
    while (hi >= 0 && h[c][hi] == 0) --hi;
    for (int i = 0; i < 256; ++i) luts[c][i] = static_cast<std::uint8_t>(i);
    if (hi <= lo) continue;
    const double scale = 255.0 / (hi - lo);
    const double offset = -lo * scale;
    for (int i = 0; i < 256; ++i) {
      luts[c][i] = static_cast<std::uint8_t>(std::clamp(static_cast<int>(i * scale + offset), 0, 255));
    }
  }
  return apply_luts(r, luts);
}

ImageRaster equalize(const ImageRaster& r) {
  const auto h = histograms(r);
  std::array<Lut, 3> luts;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 256; ++i) luts[c][i] = static_cast<std::uint8_t>(i);
    std::size_t total = 0, last = 0, nonzero = 0;
    for (int i = 0; i < 256; ++i) {
      if (h[c][i]) {
        total += h[c][i];
        last = h[c][i];
        ++nonzero;
      }
    }
    if (nonzero <= 1) continue;
    const std::size_t step = (total - last) / 255;
    if (step == 0) continue;
    std::size_t n = step / 2;
    for (int i = 0; i < 256; ++i) {
      luts[c][i] = static_cast<std::uint8_t>(std::min<std::size_t>(n / step, 255));
      n += h[c][i];
    }
  }
  return apply_luts(r, luts);
}

ImageRaster lut_all(const ImageRaster& r, const Lut& lut) { return apply_luts(r, {lut, lut, lut}); }

// out = degenerate + factor * (image - degenerate)
ImageRaster blend(const ImageRaster& degenerate, const ImageRaster& image, double factor) {
  ImageRaster out = image;
  auto d = degenerate.samples();
  auto s = out.samples();
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = clip8(d[i] + factor * (static_cast<double>(s[i]) - d[i]));
  return out;
}

ImageRaster grayscale(const ImageRaster& r) {
  ImageRaster g = r;
  auto s = g.samples();
  for (std::size_t i = 0; i < s.size(); i += 3) s[i] = s[i + 1] = s[i + 2] = luma(&s[i]);
  return g;
}

// PIL SMOOTH kernel [[1,1,1],[1,5,1],[1,1,1]] / 13; the one-pixel border keeps
// the original values.
ImageRaster smooth(const ImageRaster& r) {
  ImageRaster out = r;
  const int w = r.storage_width(), h = r.storage_height();
  for (int y = 1; y + 1 < h; ++y) {
    for (int x = 1; x + 1 < w; ++x) {
      for (int c = 0; c < 3; ++c) {
        int acc = 4 * r.at(x, y, c);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) acc += r.at(x + dx, y + dy, c);
        out.at(x, y, c) = clip8(acc / 13.0);
      }
    }
  }
  return out;
}

}  // namespace

std::string to_string(ColorOp op) {
  switch (op) {
    case ColorOp::kAutoContrast: return "AutoContrast";
    case ColorOp::kEqualize: return "Equalize";
    case ColorOp::kSolarize: return "Solarize";
    case ColorOp::kPosterize: return "Posterize";
    case ColorOp::kContrast: return "Contrast";
    case ColorOp::kColor: return "Color";
    case ColorOp::kBrightness: return "Brightness";
    case ColorOp::kSharpness: return "Sharpness";
  }
  return "unknown";
}

MagnitudeRange magnitude_range(ColorOp op) {
  switch (op) {
    case ColorOp::kAutoContrast:
    case ColorOp::kEqualize: return {0.0, 0.0};
    case ColorOp::kSolarize: return {0.0, 256.0};
    case ColorOp::kPosterize: return {4.0, 8.0};
    default: return {0.1, 1.9};
  }
}

ImageRaster apply_color_op(const ImageRaster& r, ColorOp op, double magnitude) {
  switch (op) {
    case ColorOp::kAutoContrast: return autocontrast(r);
    case ColorOp::kEqualize: return equalize(r);
    case ColorOp::kSolarize: {
      Lut lut;
      for (int i = 0; i < 256; ++i) lut[i] = static_cast<std::uint8_t>(i < magnitude ? i : 255 - i);
      return lut_all(r, lut);
    }
    case ColorOp::kPosterize: {
      const int bits = std::clamp(static_cast<int>(std::lround(magnitude)), 1, 8);
      const auto mask = static_cast<std::uint8_t>(~((1u << (8 - bits)) - 1u));
      Lut lut;
      for (int i = 0; i < 256; ++i) lut[i] = static_cast<std::uint8_t>(i & mask);
      return lut_all(r, lut);
    }
    case ColorOp::kContrast: {
      std::uint64_t sum = 0;
      auto s = r.samples();
      for (std::size_t i = 0; i < s.size(); i += 3) sum += luma(&s[i]);
      const double mean = static_cast<double>(sum) / static_cast<double>(s.size() / 3);
      ImageRaster degenerate = r;
      const auto fill = static_cast<std::uint8_t>(static_cast<int>(mean + 0.5));
      std::fill(degenerate.samples().begin(), degenerate.samples().end(), fill);
      return blend(degenerate, r, magnitude);
    }
    case ColorOp::kColor: return blend(grayscale(r), r, magnitude);
    case ColorOp::kBrightness: {
      ImageRaster black = r;
      std::fill(black.samples().begin(), black.samples().end(), std::uint8_t{0});
      return blend(black, r, magnitude);
    }
    case ColorOp::kSharpness: return blend(smooth(r), r, magnitude);
  }
  throw ValidationError("augment", "unknown colour op");
}

}  // namespace mixpl
