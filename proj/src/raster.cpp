#include "mixpl/raster.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mixpl/error.hpp"

namespace mixpl {

namespace {

constexpr std::array<std::uint8_t, 4> kRawMagic = {'M', 'X', 'P', 'L'};
constexpr std::size_t kRawHeader = 4 + 4 + 4 + 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t off) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[off + i]) << (8 * i);
  return v;
}

void check_dims(int width, int height) {
  if (width <= 0 || height <= 0) {
    throw ValidationError("coco-io", "raster dimensions must be positive");
  }
}

}  // namespace

ImageRaster::ImageRaster(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  check_dims(width, height);
  data_.assign(static_cast<std::size_t>(width) * height * kChannels, fill);
}

ImageRaster::ImageRaster(int width, int height, std::vector<std::uint8_t> samples)
    : width_(width), height_(height), data_(std::move(samples)) {
  check_dims(width, height);
  if (data_.size() != static_cast<std::size_t>(width) * height * kChannels) {
    throw ValidationError("coco-io", "raster sample count does not match width*height*3");
  }
}

ImageRaster pad_to(const ImageRaster& r, int w, int h) {
  if (r.padded()) throw ValidationError("coco-io", "raster is already padded");
  if (w < r.width() || h < r.height()) {
    throw ValidationError("coco-io", "pad target " + std::to_string(w) + "x" + std::to_string(h) +
                                         " is smaller than raster " + std::to_string(r.width()) +
                                         "x" + std::to_string(r.height()));
  }
  ImageRaster out;
  out.width_ = r.width();
  out.height_ = r.height();
  out.pad_ = PadState{w, h};
  out.data_.assign(static_cast<std::size_t>(w) * h * ImageRaster::kChannels, 0);
  const std::size_t row_bytes = static_cast<std::size_t>(r.width()) * ImageRaster::kChannels;
  for (int y = 0; y < r.height(); ++y) std::memcpy(out.row(y), r.row(y), row_bytes);
  return out;
}

ImageRaster unpad(const ImageRaster& r) {
  if (!r.padded()) throw ValidationError("coco-io", "raster is not padded");
  ImageRaster out;
  out.width_ = r.width();
  out.height_ = r.height();
  out.data_.resize(static_cast<std::size_t>(r.width()) * r.height() * ImageRaster::kChannels);
  const std::size_t row_bytes = static_cast<std::size_t>(r.width()) * ImageRaster::kChannels;
  for (int y = 0; y < r.height(); ++y) std::memcpy(out.row(y), r.row(y), row_bytes);
  return out;
}

std::vector<std::uint8_t> encode_raw(const ImageRaster& r) {
  std::vector<std::uint8_t> out(kRawMagic.begin(), kRawMagic.end());
  put_u32(out, static_cast<std::uint32_t>(r.storage_width()));
  put_u32(out, static_cast<std::uint32_t>(r.storage_height()));
  out.push_back(static_cast<std::uint8_t>(r.channels()));
  out.resize(kRawHeader + r.samples().size());
  std::copy(r.samples().begin(), r.samples().end(), out.begin() + kRawHeader);
  return out;
}

ImageRaster decode_raw(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kRawHeader || !std::equal(kRawMagic.begin(), kRawMagic.end(), bytes.begin())) {
    throw ParseError("coco-io", "missing MXPL raster header", "byte 0");
  }
  const auto w = get_u32(bytes, 4);
  const auto h = get_u32(bytes, 8);
  const auto c = bytes[12];
  if (c != ImageRaster::kChannels) {
    throw ParseError("coco-io", "unsupported channel count " + std::to_string(c), "byte 12");
  }
  const std::size_t expected = static_cast<std::size_t>(w) * h * c;
  if (bytes.size() - kRawHeader != expected) {
    throw ParseError("coco-io", "raster payload has " + std::to_string(bytes.size() - kRawHeader) +
                                    " bytes, expected " + std::to_string(expected),
                     "byte " + std::to_string(kRawHeader));
  }
  return ImageRaster(static_cast<int>(w), static_cast<int>(h),
                     std::vector<std::uint8_t>(bytes.begin() + kRawHeader, bytes.end()));
}

void write_raw(const ImageRaster& r, const std::filesystem::path& path) {
  const auto bytes = encode_raw(r);
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("coco-io", "cannot open " + path.string() + " for writing");
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error("coco-io", "failed writing " + path.string());
}

ImageRaster read_raw(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("coco-io", "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  return decode_raw(bytes);
}

void write_png(const ImageRaster& r, const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(r.storage_width());
  img.height = static_cast<png_uint_32>(r.storage_height());
  img.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&img, path.c_str(), 0, r.samples().data(), 0, nullptr)) {
    throw Error("coco-io", "cannot write PNG " + path.string() + ": " + img.message);
  }
}

ImageRaster read_png(const std::filesystem::path& path) {
  png_image img;
  std::memset(&img, 0, sizeof(img));
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&img, path.c_str())) {
    throw ParseError("coco-io", std::string("cannot read PNG: ") + img.message, path.string());
  }
  img.format = PNG_FORMAT_RGB;
  std::vector<std::uint8_t> samples(PNG_IMAGE_SIZE(img));
  if (!png_image_finish_read(&img, nullptr, samples.data(), 0, nullptr)) {
    png_image_free(&img);
    throw ParseError("coco-io", std::string("cannot decode PNG: ") + img.message, path.string());
  }
  return ImageRaster(static_cast<int>(img.width), static_cast<int>(img.height), std::move(samples));
}

ImageRaster read_raster(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" ? read_png(path) : read_raw(path);
}

}  // namespace mixpl
