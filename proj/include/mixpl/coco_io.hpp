#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mixpl/geometry.hpp"

namespace mixpl {

struct LoadReport {
  std::vector<std::string> warnings;
};

/// Parses a COCO annotation document (`images`, `annotations`, `categories`).
/// (x,y,w,h) boxes become corner form clipped to the image; crowd annotations
/// and boxes that clip to nothing are skipped with a warning.
/// Throws ParseError on malformed JSON or schema, ValidationError on dangling
/// image or category references.
DatasetIndex parse_dataset(std::string_view text, LoadReport* report = nullptr);
DatasetIndex load_dataset(const std::filesystem::path& path, LoadReport* report = nullptr);

std::string dataset_to_json(const DatasetIndex& index);
void write_dataset(const DatasetIndex& index, const std::filesystem::path& path);

struct DatasetSplit {
  DatasetIndex labeled;
  DatasetIndex unlabeled;
};

/// Uniform random partition: round(fraction * N) labeled images, the rest
/// unlabeled, both in original order. Requires 0 < fraction <= 1.
DatasetSplit split_dataset(const DatasetIndex& index, double fraction, std::uint64_t seed);

struct ImageDetections {
  ImageId image_id = 0;
  LabelList detections;
};

/// COCO results format: flat array of {image_id, category_id, bbox, score}.
std::string detections_to_json(const std::vector<ImageDetections>& dets);
void emit_detections(const std::vector<ImageDetections>& dets, const std::filesystem::path& path);

/// Inverse of emit_detections. Records are grouped per image id in order of
/// first appearance.
std::vector<ImageDetections> parse_detections(std::string_view text);
std::vector<ImageDetections> load_detections(const std::filesystem::path& path);

std::string read_text_file(const std::filesystem::path& path, std::string_view module);
void write_text_file(const std::filesystem::path& path, std::string_view text, std::string_view module);

}  // namespace mixpl
