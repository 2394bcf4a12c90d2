#include "mixpl/coco_io.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "mixpl/error.hpp"
#include "mixpl/rng.hpp"

namespace mixpl {

using nlohmann::json;

namespace {

constexpr const char* kModule = "coco-io";

json parse_json(std::string_view text) {
  try {
    return json::parse(text.begin(), text.end());
  } catch (const json::parse_error& e) {
    throw ParseError(kModule, "malformed JSON", "byte " + std::to_string(e.byte));
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.is_object()) throw ParseError(kModule, "expected an object", where);
  auto it = obj.find(key);
  if (it == obj.end()) throw ParseError(kModule, std::string("missing field '") + key + "'", where);
  return *it;
}

template <typename T>
T get_as(const json& obj, const char* key, const std::string& where) {
  const json& v = require(obj, key, where);
  try {
    return v.get<T>();
  } catch (const json::exception&) {
    throw ParseError(kModule, std::string("field '") + key + "' has the wrong type", where + "/" + key);
  }
}

const json& require_array(const json& doc, const char* key) {
  const json& arr = require(doc, key, "/");
  if (!arr.is_array()) throw ParseError(kModule, std::string("'") + key + "' must be an array", std::string("/") + key);
  return arr;
}

std::array<double, 4> get_bbox(const json& obj, const std::string& where) {
  const json& b = require(obj, "bbox", where);
  if (!b.is_array() || b.size() != 4 || !std::all_of(b.begin(), b.end(), [](const json& v) { return v.is_number(); })) {
    throw ParseError(kModule, "bbox must be an array of 4 numbers", where + "/bbox");
  }
  return {b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>()};
}

std::string join_ids(const std::vector<std::int64_t>& ids) {
  std::ostringstream os;
  for (std::size_t i = 0; i < ids.size(); ++i) os << (i ? ", " : "") << ids[i];
  return os.str();
}

}  // namespace

DatasetIndex parse_dataset(std::string_view text, LoadReport* report) {
  const json doc = parse_json(text);
  if (!doc.is_object()) throw ParseError(kModule, "COCO document must be an object", "/");
  auto warn = [&](std::string msg) {
    if (report) report->warnings.push_back(std::move(msg));
  };

  std::map<CategoryId, std::string> categories;
  const json& cats = require_array(doc, "categories");
  for (std::size_t i = 0; i < cats.size(); ++i) {
    const std::string where = "/categories/" + std::to_string(i);
    const auto id = get_as<CategoryId>(cats[i], "id", where);
    std::string name = cats[i].contains("name") ? get_as<std::string>(cats[i], "name", where) : std::to_string(id);
    if (!categories.emplace(id, std::move(name)).second) {
      throw ValidationError(kModule, "duplicate category id " + std::to_string(id));
    }
  }

  std::vector<LabeledImage> images;
  std::map<ImageId, std::size_t> by_id;
  const json& imgs = require_array(doc, "images");
  images.reserve(imgs.size());
  for (std::size_t i = 0; i < imgs.size(); ++i) {
    const std::string where = "/images/" + std::to_string(i);
    LabeledImage img;
    img.id = get_as<ImageId>(imgs[i], "id", where);
    img.width = get_as<int>(imgs[i], "width", where);
    img.height = get_as<int>(imgs[i], "height", where);
    if (imgs[i].contains("file_name")) img.file_name = get_as<std::string>(imgs[i], "file_name", where);
    if (img.width <= 0 || img.height <= 0) {
      throw ValidationError(kModule, "image " + std::to_string(img.id) + " has non-positive size");
    }
    if (!by_id.emplace(img.id, images.size()).second) {
      throw ValidationError(kModule, "duplicate image id " + std::to_string(img.id));
    }
    images.push_back(std::move(img));
  }

  std::vector<std::int64_t> missing_image, unknown_category;
  const json& anns = require_array(doc, "annotations");
  for (std::size_t i = 0; i < anns.size(); ++i) {
    const std::string where = "/annotations/" + std::to_string(i);
    const auto ann_id = get_as<std::int64_t>(anns[i], "id", where);
    const auto image_id = get_as<ImageId>(anns[i], "image_id", where);
    const auto cat = get_as<CategoryId>(anns[i], "category_id", where);
    const auto xywh = get_bbox(anns[i], where);
    const int crowd = anns[i].contains("iscrowd") ? get_as<int>(anns[i], "iscrowd", where) : 0;

    auto img_it = by_id.find(image_id);
    if (img_it == by_id.end()) {
      missing_image.push_back(ann_id);
      continue;
    }
    if (!categories.count(cat)) {
      unknown_category.push_back(ann_id);
      continue;
    }
    if (crowd) {
      warn("annotation " + std::to_string(ann_id) + ": iscrowd=1 ignored");
      continue;
    }
    LabeledImage& img = images[img_it->second];
    auto box = BBox::try_make(xywh[0], xywh[1], xywh[0] + xywh[2], xywh[1] + xywh[3]);
    std::optional<BBox> clipped;
    if (box) clipped = clip_box(*box, img.width, img.height);
    if (!clipped) {
      warn("annotation " + std::to_string(ann_id) + ": empty box after clipping, skipped");
      continue;
    }
    img.annotations.push_back({ann_id, *clipped, cat});
  }
  if (!missing_image.empty()) {
    throw ValidationError(kModule, "annotations reference unknown image ids: " + join_ids(missing_image));
  }
  if (!unknown_category.empty()) {
    throw ValidationError(kModule, "annotations reference unknown categories: " + join_ids(unknown_category));
  }
  return DatasetIndex::build(std::move(images), std::move(categories));
}

std::string read_text_file(const std::filesystem::path& path, std::string_view module) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(std::string(module), "cannot open " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text, std::string_view module) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(std::string(module), "cannot open " + path.string() + " for writing");
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!os) throw Error(std::string(module), "failed writing " + path.string());
}

DatasetIndex load_dataset(const std::filesystem::path& path, LoadReport* report) {
  return parse_dataset(read_text_file(path, kModule), report);
}

std::string dataset_to_json(const DatasetIndex& index) {
  json images = json::array(), annotations = json::array(), categories = json::array();
  for (const auto& [id, name] : index.categories()) categories.push_back({{"id", id}, {"name", name}});
  for (const auto& img : index.images()) {
    json j = {{"id", img.id}, {"width", img.width}, {"height", img.height}};
    if (!img.file_name.empty()) j["file_name"] = img.file_name;
    images.push_back(std::move(j));
    for (const auto& a : img.annotations) {
      annotations.push_back({{"id", a.id},
                             {"image_id", img.id},
                             {"category_id", a.category},
                             {"bbox", {a.box.x1(), a.box.y1(), a.box.width(), a.box.height()}},
                             {"area", a.box.area()},
                             {"iscrowd", 0}});
    }
  }
  json doc = {{"images", std::move(images)}, {"annotations", std::move(annotations)}, {"categories", std::move(categories)}};
  return doc.dump();
}

void write_dataset(const DatasetIndex& index, const std::filesystem::path& path) {
  write_text_file(path, dataset_to_json(index), kModule);
}

DatasetSplit split_dataset(const DatasetIndex& index, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw ValidationError(kModule, "split fraction must be in (0, 1], got " + std::to_string(fraction));
  }
  const std::size_t n = index.size();
  const auto n_labeled = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> labeled(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_labeled));
  std::vector<std::size_t> unlabeled(order.begin() + static_cast<std::ptrdiff_t>(n_labeled), order.end());
  std::sort(labeled.begin(), labeled.end());
  std::sort(unlabeled.begin(), unlabeled.end());
  return {index.subset(labeled), index.subset(unlabeled)};
}

std::string detections_to_json(const std::vector<ImageDetections>& dets) {
  json out = json::array();
  for (const auto& per_image : dets) {
    for (const auto& d : per_image.detections) {
      out.push_back({{"image_id", per_image.image_id},
                     {"category_id", d.category},
                     {"bbox", {d.box.x1(), d.box.y1(), d.box.width(), d.box.height()}},
                     {"score", d.score}});
    }
  }
  return out.dump();
}

void emit_detections(const std::vector<ImageDetections>& dets, const std::filesystem::path& path) {
  write_text_file(path, detections_to_json(dets), kModule);
}

std::vector<ImageDetections> parse_detections(std::string_view text) {
  const json doc = parse_json(text);
  if (!doc.is_array()) throw ParseError(kModule, "results document must be an array", "/");
  std::vector<ImageDetections> out;
  std::map<ImageId, std::size_t> slot;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const std::string where = "/" + std::to_string(i);
    const auto image_id = get_as<ImageId>(doc[i], "image_id", where);
    const auto cat = get_as<CategoryId>(doc[i], "category_id", where);
    const auto score = get_as<double>(doc[i], "score", where);
    const auto xywh = get_bbox(doc[i], where);
    auto box = BBox::try_make(xywh[0], xywh[1], xywh[0] + xywh[2], xywh[1] + xywh[3]);
    if (!box) throw ValidationError(kModule, "result " + std::to_string(i) + " has an empty box");
    if (!(score >= 0.0 && score <= 1.0)) {
      throw ValidationError(kModule, "result " + std::to_string(i) + " has score outside [0,1]");
    }
    auto [it, inserted] = slot.emplace(image_id, out.size());
    if (inserted) out.push_back({image_id, {}});
    out[it->second].detections.push_back({*box, cat, score});
  }
  return out;
}

std::vector<ImageDetections> load_detections(const std::filesystem::path& path) {
  return parse_detections(read_text_file(path, kModule));
}

}  // namespace mixpl
