#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mixpl {

using ImageId = std::int64_t;
using CategoryId = int;

/// Axis-aligned box in corner form, continuous pixel coordinates.
/// Construction rejects non-finite coordinates and zero or negative extent.
class BBox {
 public:
  BBox(double x1, double y1, double x2, double y2);

  /// COCO (x, y, w, h) to corner form.
  static BBox from_xywh(double x, double y, double w, double h) { return {x, y, x + w, y + h}; }

  /// Returns nullopt instead of throwing when the corners do not form a valid box.
  static std::optional<BBox> try_make(double x1, double y1, double x2, double y2);

  double x1() const { return x1_; }
  double y1() const { return y1_; }
  double x2() const { return x2_; }
  double y2() const { return y2_; }
  double width() const { return x2_ - x1_; }
  double height() const { return y2_ - y1_; }
  double area() const { return width() * height(); }

  friend bool operator==(const BBox&, const BBox&) = default;

 private:
  double x1_, y1_, x2_, y2_;
};

enum class ScaleClass { kSmall = 0, kMedium = 1, kLarge = 2 };

inline constexpr double kSmallAreaLimit = 32.0 * 32.0;
inline constexpr double kLargeAreaLimit = 96.0 * 96.0;
/// Boxes whose width or height falls to this many pixels or fewer after a
/// transform are dropped.
inline constexpr double kMinBoxSide = 1.0;

std::string_view to_string(ScaleClass s);

double iou(const BBox& a, const BBox& b);

/// Area of the intersection of two boxes, 0 when disjoint.
double intersection_area(const BBox& a, const BBox& b);

/// COCO convention: small if area < 32², large if area > 96², medium otherwise.
ScaleClass area_class(const BBox& b);

/// Intersect with [0,w]x[0,h]. nullopt when the intersection has no area.
std::optional<BBox> clip_box(const BBox& b, double w, double h);

/// clip_box followed by the minimum-side rule used after geometric transforms.
std::optional<BBox> clip_and_filter(const BBox& b, double w, double h,
                                    double min_side = kMinBoxSide);

/// A box with a category and a confidence. Ground-truth annotations carry
/// score 1 when they travel through the same code paths as pseudo-labels.
struct Detection {
  BBox box;
  CategoryId category = 0;
  double score = 1.0;

  friend bool operator==(const Detection&, const Detection&) = default;
};

using LabelList = std::vector<Detection>;

struct Annotation {
  std::int64_t id = 0;
  BBox box;
  CategoryId category = 0;
};

struct LabeledImage {
  ImageId id = 0;
  int width = 0;
  int height = 0;
  std::string file_name;
  std::vector<Annotation> annotations;

  /// Annotations as score-1 detections.
  LabelList labels() const;
};

/// Immutable collection of labeled images plus derived per-category
/// membership. Use `DatasetIndex::build` to construct; it validates ids.
class DatasetIndex {
 public:
  DatasetIndex() = default;

  static DatasetIndex build(std::vector<LabeledImage> images,
                            std::map<CategoryId, std::string> categories);

  const std::vector<LabeledImage>& images() const { return images_; }
  const std::map<CategoryId, std::string>& categories() const { return categories_; }
  /// Image ids containing at least one instance of each category. Every
  /// category in the table has an entry, possibly empty.
  const std::map<CategoryId, std::set<ImageId>>& membership() const { return membership_; }

  std::size_t size() const { return images_.size(); }
  bool empty() const { return images_.empty(); }
  const LabeledImage* find(ImageId id) const;

  /// Subset of this index in the given order, keeping the category table.
  DatasetIndex subset(const std::vector<std::size_t>& positions) const;

 private:
  std::vector<LabeledImage> images_;
  std::map<CategoryId, std::string> categories_;
  std::map<CategoryId, std::set<ImageId>> membership_;
  std::map<ImageId, std::size_t> by_id_;
};

}  // namespace mixpl
