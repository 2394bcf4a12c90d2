#include "mixpl/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "mixpl/error.hpp"

namespace mixpl {

namespace {

bool valid_corners(double x1, double y1, double x2, double y2) {
  return std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2) &&
         x1 < x2 && y1 < y2;
}

}  // namespace

BBox::BBox(double x1, double y1, double x2, double y2) : x1_(x1), y1_(y1), x2_(x2), y2_(y2) {
  if (!valid_corners(x1, y1, x2, y2)) {
    std::ostringstream os;
    os << "invalid box (" << x1 << ", " << y1 << ", " << x2 << ", " << y2 << ")";
    throw ValidationError("core-model", os.str());
  }
}

std::optional<BBox> BBox::try_make(double x1, double y1, double x2, double y2) {
  if (!valid_corners(x1, y1, x2, y2)) return std::nullopt;
  return BBox(x1, y1, x2, y2);
}

std::string_view to_string(ScaleClass s) {
  switch (s) {
    case ScaleClass::kSmall: return "small";
    case ScaleClass::kMedium: return "medium";
    case ScaleClass::kLarge: return "large";
  }
  return "unknown";
}

double intersection_area(const BBox& a, const BBox& b) {
  const double w = std::min(a.x2(), b.x2()) - std::max(a.x1(), b.x1());
  const double h = std::min(a.y2(), b.y2()) - std::max(a.y1(), b.y1());
  if (w <= 0.0 || h <= 0.0) return 0.0;
  return w * h;
}

double iou(const BBox& a, const BBox& b) {
  const double inter = intersection_area(a, b);
  if (inter <= 0.0) return 0.0;
  const double uni = a.area() + b.area() - inter;
  return std::clamp(inter / uni, 0.0, 1.0);
}

ScaleClass area_class(const BBox& b) {
  const double a = b.area();
  if (a < kSmallAreaLimit) return ScaleClass::kSmall;
  if (a > kLargeAreaLimit) return ScaleClass::kLarge;
  return ScaleClass::kMedium;
}

std::optional<BBox> clip_box(const BBox& b, double w, double h) {
  if (!(w > 0.0) || !(h > 0.0)) {
    throw ValidationError("core-model", "clip frame must have positive size");
  }
  return BBox::try_make(std::clamp(b.x1(), 0.0, w), std::clamp(b.y1(), 0.0, h),
                        std::clamp(b.x2(), 0.0, w), std::clamp(b.y2(), 0.0, h));
}

std::optional<BBox> clip_and_filter(const BBox& b, double w, double h, double min_side) {
  auto clipped = clip_box(b, w, h);
  if (!clipped || clipped->width() <= min_side || clipped->height() <= min_side) {
    return std::nullopt;
  }
  return clipped;
}

LabelList LabeledImage::labels() const {
  LabelList out;
  out.reserve(annotations.size());
  for (const auto& a : annotations) out.push_back({a.box, a.category, 1.0});
  return out;
}

DatasetIndex DatasetIndex::build(std::vector<LabeledImage> images,
                                 std::map<CategoryId, std::string> categories) {
  DatasetIndex idx;
  idx.categories_ = std::move(categories);
  for (const auto& [cat, name] : idx.categories_) idx.membership_[cat];
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    if (!idx.by_id_.emplace(img.id, i).second) {
      throw ValidationError("core-model", "duplicate image id " + std::to_string(img.id));
    }
    for (const auto& a : img.annotations) {
      auto it = idx.membership_.find(a.category);
      if (it == idx.membership_.end()) {
        throw ValidationError("core-model", "annotation " + std::to_string(a.id) +
                                                " references unknown category " +
                                                std::to_string(a.category));
      }
      it->second.insert(img.id);
    }
  }
  idx.images_ = std::move(images);
  return idx;
}

const LabeledImage* DatasetIndex::find(ImageId id) const {
  auto it = by_id_.find(id);
  return it == by_id_.end() ? nullptr : &images_[it->second];
}

DatasetIndex DatasetIndex::subset(const std::vector<std::size_t>& positions) const {
  std::vector<LabeledImage> picked;
  picked.reserve(positions.size());
  for (auto p : positions) picked.push_back(images_.at(p));
  return build(std::move(picked), categories_);
}

}  // namespace mixpl
