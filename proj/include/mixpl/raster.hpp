#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

namespace mixpl {

/// Padding record of a raster: the storage grows to target_w x target_h with
/// zero fill at the bottom/right; the content keeps its original size.
struct PadState {
  int target_w = 0;
  int target_h = 0;
  friend bool operator==(const PadState&, const PadState&) = default;
};

/// H x W x 3 8-bit raster, row-major interleaved.
class ImageRaster {
 public:
  static constexpr int kChannels = 3;

  ImageRaster() = default;
  ImageRaster(int width, int height, std::uint8_t fill = 0);
  ImageRaster(int width, int height, std::vector<std::uint8_t> samples);

  /// Content size (the original size when padded).
  int width() const { return width_; }
  int height() const { return height_; }
  /// Storage size: equal to content size unless padded.
  int storage_width() const { return pad_ ? pad_->target_w : width_; }
  int storage_height() const { return pad_ ? pad_->target_h : height_; }
  int channels() const { return kChannels; }

  bool padded() const { return pad_.has_value(); }
  const std::optional<PadState>& pad_state() const { return pad_; }

  std::span<const std::uint8_t> samples() const { return data_; }
  std::span<std::uint8_t> samples() { return data_; }

  std::uint8_t at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * storage_width() + x) * kChannels + c];
  }
  std::uint8_t& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * storage_width() + x) * kChannels + c];
  }
  const std::uint8_t* row(int y) const {
    return data_.data() + static_cast<std::size_t>(y) * storage_width() * kChannels;
  }
  std::uint8_t* row(int y) {
    return data_.data() + static_cast<std::size_t>(y) * storage_width() * kChannels;
  }

  bool empty() const { return data_.empty(); }

  friend bool operator==(const ImageRaster&, const ImageRaster&) = default;

 private:
  friend ImageRaster pad_to(const ImageRaster& r, int w, int h);
  friend ImageRaster unpad(const ImageRaster& r);

  int width_ = 0;
  int height_ = 0;
  std::optional<PadState> pad_;
  std::vector<std::uint8_t> data_;
};

/// Zero-fill to w x h at the bottom/right. Throws if the raster is already
/// padded or the target is smaller than the content.
ImageRaster pad_to(const ImageRaster& r, int w, int h);
/// Drop the padding recorded in the raster. Throws if it is not padded.
ImageRaster unpad(const ImageRaster& r);

/// Raw dump: "MXPL", u32 width, u32 height, u8 channels (little endian), then
/// samples row-major. Padded rasters are written at storage size.
std::vector<std::uint8_t> encode_raw(const ImageRaster& r);
ImageRaster decode_raw(std::span<const std::uint8_t> bytes);
void write_raw(const ImageRaster& r, const std::filesystem::path& path);
ImageRaster read_raw(const std::filesystem::path& path);

/// Lossless 8-bit RGB PNG.
void write_png(const ImageRaster& r, const std::filesystem::path& path);
ImageRaster read_png(const std::filesystem::path& path);

/// Reads either format, chosen by extension (.png, anything else is raw).
ImageRaster read_raster(const std::filesystem::path& path);

}  // namespace mixpl
