#include "mixpl/affine.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mixpl/error.hpp"

namespace mixpl {

std::string_view to_string(TransformKind k) {
  switch (k) {
    case TransformKind::kIdentity: return "identity";
    case TransformKind::kResize: return "resize";
    case TransformKind::kFlip: return "flip";
    case TransformKind::kShear: return "shear";
    case TransformKind::kTranslate: return "translate";
    case TransformKind::kRotate: return "rotate";
    case TransformKind::kCompose: return "compose";
  }
  return "unknown";
}

AffineTransform AffineTransform::scale(double sx, double sy) {
  return {{sx, 0, 0, 0, sy, 0}, TransformKind::kResize};
}

AffineTransform AffineTransform::translate(double dx, double dy) {
  return {{1, 0, dx, 0, 1, dy}, TransformKind::kTranslate};
}

AffineTransform AffineTransform::hflip(double width) {
  return {{-1, 0, width, 0, 1, 0}, TransformKind::kFlip};
}

AffineTransform AffineTransform::shear_x(double k, double cy) {
  return {{1, k, -k * cy, 0, 1, 0}, TransformKind::kShear};
}

AffineTransform AffineTransform::shear_y(double k, double cx) {
  return {{1, 0, 0, k, 1, -k * cx}, TransformKind::kShear};
}

AffineTransform AffineTransform::rotate(double degrees, double cx, double cy) {
  const double t = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(t), s = std::sin(t);
  // y points down, so a visually counter-clockwise turn uses +s on x and -s on y.
  return {{c, s, cx - c * cx - s * cy, -s, c, cy + s * cx - c * cy}, TransformKind::kRotate};
}

bool AffineTransform::invertible() const {
  const double scale = std::max({std::abs(m_[0]), std::abs(m_[1]), std::abs(m_[3]), std::abs(m_[4])});
  return scale > 0.0 && std::abs(determinant()) > 1e-12 * scale * scale;
}

AffineTransform AffineTransform::inverse() const {
  if (!invertible()) throw ValidationError("augment", "affine transform is not invertible");
  const double det = determinant();
  const double a = m_[4] / det, b = -m_[1] / det;
  const double d = -m_[3] / det, e = m_[0] / det;
  return {{a, b, -(a * m_[2] + b * m_[5]), d, e, -(d * m_[2] + e * m_[5])}, kind_};
}

std::optional<BBox> AffineTransform::map_box(const BBox& b) const {
  const Point corners[4] = {apply({b.x1(), b.y1()}), apply({b.x2(), b.y1()}),
                            apply({b.x1(), b.y2()}), apply({b.x2(), b.y2()})};
  double x1 = corners[0].x, x2 = corners[0].x, y1 = corners[0].y, y2 = corners[0].y;
  for (const auto& p : corners) {
    x1 = std::min(x1, p.x);
    x2 = std::max(x2, p.x);
    y1 = std::min(y1, p.y);
    y2 = std::max(y2, p.y);
  }
  return BBox::try_make(x1, y1, x2, y2);
}

AffineTransform compose(const AffineTransform& outer, const AffineTransform& inner) {
  const auto& o = outer.matrix();
  const auto& i = inner.matrix();
  std::array<double, 6> m = {
      o[0] * i[0] + o[1] * i[3], o[0] * i[1] + o[1] * i[4], o[0] * i[2] + o[1] * i[5] + o[2],
      o[3] * i[0] + o[4] * i[3], o[3] * i[1] + o[4] * i[4], o[3] * i[2] + o[4] * i[5] + o[5]};
  TransformKind kind = TransformKind::kCompose;
  if (inner.kind() == TransformKind::kIdentity) kind = outer.kind();
  if (outer.kind() == TransformKind::kIdentity) kind = inner.kind();
  return {m, kind};
}

double max_abs_diff(const AffineTransform& a, const AffineTransform& b) {
  double d = 0.0;
  for (std::size_t k = 0; k < 6; ++k) d = std::max(d, std::abs(a.matrix()[k] - b.matrix()[k]));
  return d;
}

}  // namespace mixpl
