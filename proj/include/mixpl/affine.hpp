#pragma once

#include <array>
#include <optional>
#include <string_view>

#include "mixpl/geometry.hpp"

namespace mixpl {

enum class TransformKind { kIdentity, kResize, kFlip, kShear, kTranslate, kRotate, kCompose };

std::string_view to_string(TransformKind k);

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// 2x3 affine map in image coordinates (y down):
///   x' = m[0] x + m[1] y + m[2]
///   y' = m[3] x + m[4] y + m[5]
class AffineTransform {
 public:
  AffineTransform() = default;
  AffineTransform(std::array<double, 6> m, TransformKind kind) : m_(m), kind_(kind) {}

  static AffineTransform identity() { return {}; }
  static AffineTransform scale(double sx, double sy);
  static AffineTransform translate(double dx, double dy);
  /// Horizontal mirror of an image of the given width: x' = width - x.
  static AffineTransform hflip(double width);
  /// x' = x + k (y - cy), shearing about the horizontal line through cy.
  static AffineTransform shear_x(double k, double cy);
  /// y' = y + k (x - cx).
  static AffineTransform shear_y(double k, double cx);
  /// Counter-clockwise rotation (as displayed) by `degrees` about (cx, cy).
  static AffineTransform rotate(double degrees, double cx, double cy);

  const std::array<double, 6>& matrix() const { return m_; }
  TransformKind kind() const { return kind_; }

  double determinant() const { return m_[0] * m_[4] - m_[1] * m_[3]; }
  bool invertible() const;

  /// Throws ValidationError when the map is singular.
  AffineTransform inverse() const;

  Point apply(Point p) const {
    return {m_[0] * p.x + m_[1] * p.y + m_[2], m_[3] * p.x + m_[4] * p.y + m_[5]};
  }

  /// Axis-aligned hull of the four mapped corners. nullopt when the hull is
  /// degenerate.
  std::optional<BBox> map_box(const BBox& b) const;

 private:
  std::array<double, 6> m_ = {1, 0, 0, 0, 1, 0};
  TransformKind kind_ = TransformKind::kIdentity;
};

/// outer ∘ inner: apply `inner` first.
AffineTransform compose(const AffineTransform& outer, const AffineTransform& inner);

/// Largest absolute entry-wise difference between two matrices.
double max_abs_diff(const AffineTransform& a, const AffineTransform& b);

}  // namespace mixpl
