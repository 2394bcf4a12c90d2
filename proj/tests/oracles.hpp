#pragma once

// Independent reference implementations used by the tests. None of these
// call into the library code they check.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <optional>
#include <vector>

#include "mixpl/augment.hpp"

namespace oracle {

struct Pt {
  double x, y;
};

struct Box {
  double x1, y1, x2, y2;
};

// Geometric op written out from its prose definition.
inline Pt map_point(mixpl::GeometricOp op, double mag, int w, int h, Pt p) {
  const double cx = w / 2.0, cy = h / 2.0;
  switch (op) {
    case mixpl::GeometricOp::kShearX: return {p.x + mag * (p.y - cy), p.y};
    case mixpl::GeometricOp::kShearY: return {p.x, p.y + mag * (p.x - cx)};
    case mixpl::GeometricOp::kTranslateX: return {p.x + mag * w, p.y};
    case mixpl::GeometricOp::kTranslateY: return {p.x, p.y + mag * h};
    case mixpl::GeometricOp::kRotate: {
      // Counter-clockwise on screen; with y pointing down that flips the sign
      // of the sine terms relative to the textbook matrix.
      const double t = mag * std::numbers::pi / 180.0;
      const double dx = p.x - cx, dy = p.y - cy;
      return {cx + dx * std::cos(t) + dy * std::sin(t), cy - dx * std::sin(t) + dy * std::cos(t)};
    }
  }
  return p;
}

// Hull of a dense lattice of points inside the box (boundary included),
// clipped to the canvas.
inline std::optional<Box> dense_hull(mixpl::GeometricOp op, double mag, int w, int h, Box b, int steps = 64) {
  Box out{1e300, 1e300, -1e300, -1e300};
  for (int i = 0; i <= steps; ++i) {
    for (int j = 0; j <= steps; ++j) {
      const Pt p{b.x1 + (b.x2 - b.x1) * i / steps, b.y1 + (b.y2 - b.y1) * j / steps};
      const Pt q = map_point(op, mag, w, h, p);
      out.x1 = std::min(out.x1, q.x);
      out.y1 = std::min(out.y1, q.y);
      out.x2 = std::max(out.x2, q.x);
      out.y2 = std::max(out.y2, q.y);
    }
  }
  out.x1 = std::clamp(out.x1, 0.0, static_cast<double>(w));
  out.x2 = std::clamp(out.x2, 0.0, static_cast<double>(w));
  out.y1 = std::clamp(out.y1, 0.0, static_cast<double>(h));
  out.y2 = std::clamp(out.y2, 0.0, static_cast<double>(h));
  if (out.x2 - out.x1 <= 0.0 || out.y2 - out.y1 <= 0.0) return std::nullopt;
  return out;
}

// Fraction of an integer-aligned box whose pixels fall in any rectangle,
// by visiting every pixel.
inline double pixel_coverage(int x1, int y1, int x2, int y2, const std::vector<mixpl::PixelRect>& rects) {
  long covered = 0, total = 0;
  for (int y = y1; y < y2; ++y) {
    for (int x = x1; x < x2; ++x) {
      ++total;
      for (const auto& r : rects) {
        if (x >= r.x0 && x < r.x1 && y >= r.y0 && y < r.y1) {
          ++covered;
          break;
        }
      }
    }
  }
  return total ? static_cast<double>(covered) / static_cast<double>(total) : 0.0;
}

// Binary cross-entropy as a function of the logit.
inline double bce_of_logit(double z, int target) {
  // log(1 + e^z) computed stably.
  const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  return target == 1 ? softplus - z : softplus;
}

// Central finite difference of bce_of_logit.
inline double dbce_dlogit(double z, int target, double h = 1e-5) {
  return (bce_of_logit(z + h, target) - bce_of_logit(z - h, target)) / (2.0 * h);
}

}  // namespace oracle
