#include "mixpl/pseudo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "mixpl/augment.hpp"
#include "mixpl/coco_io.hpp"
#include "mixpl/error.hpp"

namespace mixpl {

namespace {

constexpr const char* kModule = "pseudo-pipeline";

ImageRaster unpadded(const ImageRaster& r) { return r.padded() ? unpad(r) : r; }

}  // namespace

std::string to_string(MixKind k) { return k == MixKind::kMixup ? "mixup" : "mosaic"; }

LabelList filter_by_threshold(const LabelList& dets, double thr) {
  if (!(thr >= 0.0 && thr <= 1.0)) throw ValidationError(kModule, "threshold must lie in [0, 1]");
  LabelList out;
  std::copy_if(dets.begin(), dets.end(), std::back_inserter(out), [thr](const Detection& d) { return d.score >= thr; });
  return out;
}

EmptyFilterResult filter_empty_images(std::vector<PseudoImage> batch) {
  EmptyFilterResult result;
  result.kept.reserve(batch.size());
  for (auto& img : batch) {
    if (img.detections().empty()) {
      ++result.removed;
    } else {
      result.kept.push_back(std::move(img));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------

PseudoLabelCache::PseudoLabelCache(std::size_t window) : window_(window) {
  if (window == 0) throw ValidationError(kModule, "cache window must be at least 1");
}

void PseudoLabelCache::put(std::vector<PseudoImage> entries, std::int64_t iteration) {
  if (entries.empty()) return;
  std::vector<CacheEntry> stored;
  stored.reserve(entries.size());
  for (auto& e : entries) {
    if (e.raster && e.raster->padded()) e.raster = unpad(*e.raster);
    e.labels.iteration = iteration;
    stored.push_back({std::move(e), iteration});
  }
  iterations_.push_back(std::move(stored));
  while (iterations_.size() > window_) iterations_.pop_front();
}

std::size_t PseudoLabelCache::size() const {
  std::size_t n = 0;
  for (const auto& it : iterations_) n += it.size();
  return n;
}

std::vector<CacheEntry> PseudoLabelCache::entries() const {
  std::vector<CacheEntry> all;
  for (const auto& it : iterations_) all.insert(all.end(), it.begin(), it.end());
  return all;
}

std::vector<CacheEntry> PseudoLabelCache::sample(std::size_t k, Rng& rng) const {
  const auto all = entries();
  if (all.empty()) throw CacheWarmupError();
  std::vector<CacheEntry> out;
  out.reserve(k);
  if (k <= all.size()) {
    std::vector<std::size_t> idx(all.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first k positions are a uniform k-subset.
    for (std::size_t i = 0; i < k; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(all.size() - 1 - i)));
      std::swap(idx[i], idx[j]);
      out.push_back(all[idx[i]]);
    }
  } else {
    for (std::size_t i = 0; i < k; ++i) {
      out.push_back(all[static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(all.size() - 1)))]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

MixedImage pseudo_mixup(const PseudoImage& a, const PseudoImage& b, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError(kModule, "mixup alpha must lie in [0, 1]");
  if (a.raster.has_value() != b.raster.has_value()) {
    throw ValidationError(kModule, "mixup inputs must both carry rasters or both be geometry-only");
  }
  MixedImage out;
  out.kind = MixKind::kMixup;
  out.width = std::max(a.width, b.width);
  out.height = std::max(a.height, b.height);
  out.labels = a.detections();
  out.labels.insert(out.labels.end(), b.detections().begin(), b.detections().end());
  out.labels_before_clip = out.labels.size();
  out.sources = {{a.image_id(), a.labels.iteration, false}, {b.image_id(), b.labels.iteration, false}};
  if (a.raster) {
    const ImageRaster pa = pad_to(unpadded(*a.raster), out.width, out.height);
    const ImageRaster pb = pad_to(unpadded(*b.raster), out.width, out.height);
    ImageRaster blended(out.width, out.height);
    auto sa = pa.samples(), sb = pb.samples();
    auto so = blended.samples();
    for (std::size_t i = 0; i < so.size(); ++i) {
      so[i] = static_cast<std::uint8_t>(std::min(255.0, std::floor(alpha * sa[i] + (1.0 - alpha) * sb[i] + 0.5)));
    }
    out.raster = std::move(blended);
  }
  return out;
}

MosaicLayout mosaic_layout(std::span<const std::pair<int, int>> sizes, int long_edge) {
  if (sizes.size() != 4) throw ValidationError(kModule, "mosaic needs exactly 4 inputs");
  if (long_edge <= 0) throw ValidationError(kModule, "mosaic long edge must be positive");
  MosaicLayout m;
  m.long_edge = long_edge;
  for (std::size_t i = 0; i < 4; ++i) {
    const auto [w, h] = sizes[i];
    if (w <= 0 || h <= 0) throw ValidationError(kModule, "mosaic input has non-positive size");
    const double f = static_cast<double>(long_edge) / std::max(w, h);
    m.resized_w[i] = std::max(1, static_cast<int>(std::lround(w * f)));
    m.resized_h[i] = std::max(1, static_cast<int>(std::lround(h * f)));
  }
  const int col0 = std::max(m.resized_w[0], m.resized_w[2]);
  const int col1 = std::max(m.resized_w[1], m.resized_w[3]);
  const int row0 = std::max(m.resized_h[0], m.resized_h[1]);
  const int row1 = std::max(m.resized_h[2], m.resized_h[3]);
  m.origin = {Point{0, 0}, Point{static_cast<double>(col0), 0}, Point{0, static_cast<double>(row0)},
              Point{static_cast<double>(col0), static_cast<double>(row0)}};
  m.out_w = col0 + col1;
  m.out_h = row0 + row1;
  for (std::size_t i = 0; i < 4; ++i) {
    const double sx = static_cast<double>(m.resized_w[i]) / sizes[i].first;
    const double sy = static_cast<double>(m.resized_h[i]) / sizes[i].second;
    m.placement[i] = AffineTransform({sx, 0, m.origin[i].x, 0, sy, m.origin[i].y}, TransformKind::kCompose);
  }
  return m;
}

MixedImage pseudo_mosaic_fixed(std::span<const PseudoImage> four, int long_edge) {
  if (four.size() != 4) {
    throw ValidationError(kModule, "mosaic needs exactly 4 inputs, got " + std::to_string(four.size()));
  }
  const bool with_pixels = four[0].raster.has_value();
  std::array<std::pair<int, int>, 4> sizes;
  for (std::size_t i = 0; i < 4; ++i) {
    if (four[i].raster.has_value() != with_pixels) {
      throw ValidationError(kModule, "mosaic inputs must all carry rasters or all be geometry-only");
    }
    sizes[i] = {four[i].width, four[i].height};
  }
  const MosaicLayout layout = mosaic_layout(sizes, long_edge);

  MixedImage out;
  out.kind = MixKind::kMosaic;
  out.width = layout.out_w;
  out.height = layout.out_h;
  for (std::size_t i = 0; i < 4; ++i) {
    out.sources.push_back({four[i].image_id(), four[i].labels.iteration, false});
    for (const auto& d : four[i].detections()) {
      ++out.labels_before_clip;
      auto mapped = layout.placement[i].map_box(d.box);
      std::optional<BBox> clipped;
      if (mapped) clipped = clip_and_filter(*mapped, layout.out_w, layout.out_h);
      if (clipped) {
        out.labels.push_back({*clipped, d.category, d.score});
      } else {
        ++out.dropped_labels;
      }
    }
  }
  if (with_pixels) {
    ImageRaster canvas(layout.out_w, layout.out_h);
    for (std::size_t i = 0; i < 4; ++i) {
      const ImageRaster part = resize_raster(unpadded(*four[i].raster), layout.resized_w[i], layout.resized_h[i]);
      const int ox = static_cast<int>(layout.origin[i].x), oy = static_cast<int>(layout.origin[i].y);
      for (int y = 0; y < part.height(); ++y) {
        std::copy(part.row(y), part.row(y) + 3 * part.width(), canvas.row(oy + y) + 3 * ox);
      }
    }
    out.raster = std::move(canvas);
  }
  return out;
}

MixedImage pseudo_mosaic(std::span<const PseudoImage> four, const MosaicRange& range, Rng& rng) {
  if (range.lo <= 0 || range.hi < range.lo) throw ValidationError(kModule, "invalid mosaic size range");
  if (four.size() != 4) {
    throw ValidationError(kModule, "mosaic needs exactly 4 inputs, got " + std::to_string(four.size()));
  }
  return pseudo_mosaic_fixed(four, uniform_int(rng, range.lo, range.hi));
}

// ---------------------------------------------------------------------------

PseudoBatch compose_training_batch(std::vector<LabeledSample> labeled, std::vector<PseudoImage> unlabeled,
                                   PseudoLabelCache& cache, const ComposeOptions& options,
                                   std::int64_t iteration, Rng& rng) {
  for (const auto& img : unlabeled) {
    if (img.detections().empty()) {
      throw ValidationError(kModule, "unlabeled image " + std::to_string(img.image_id()) +
                                         " has no pseudo-labels; filter empty images first");
    }
  }
  PseudoBatch batch;
  batch.iteration = iteration;
  batch.labeled = std::move(labeled);
  batch.labeled_weight = 1.0;
  batch.unlabeled_weight = options.unlabeled_weight;

  const std::size_t n = unlabeled.size();
  for (auto& img : unlabeled) img.labels.iteration = iteration;

  // Mixup partners: distinct cache samples, or other batch images in warm-up.
  std::vector<PseudoImage> partners;
  std::vector<bool> partner_from_cache;
  if (n > 0) {
    if (!cache.empty()) {
      for (auto& e : cache.sample(n, rng)) {
        partners.push_back(std::move(e.image));
        partner_from_cache.push_back(true);
      }
    } else {
      batch.warmup = true;
      for (std::size_t i = 0; i < n; ++i) {
        std::size_t j = i;
        if (n > 1) {
          j = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(n) - 2));
          if (j >= i) ++j;
        }
        partners.push_back(unlabeled[j]);
        partner_from_cache.push_back(false);
      }
    }
  }

  auto keep = [&](MixedImage m) {
    if (m.labels.empty()) {
      ++batch.dropped_empty;
    } else {
      batch.mixed.push_back(std::move(m));
    }
  };

  for (std::size_t i = 0; i < n; ++i) {
    MixedImage m = pseudo_mixup(unlabeled[i], partners[i], options.mixup_alpha);
    m.sources[1].from_cache = partner_from_cache[i];
    keep(std::move(m));
  }

  if (n > 0) {
    // Pool: current images first, then their partners.
    const std::size_t pool = 2 * n;
    std::vector<std::size_t> pick;
    if (pool >= 4) {
      std::vector<std::size_t> idx(pool);
      std::iota(idx.begin(), idx.end(), 0);
      for (std::size_t i = 0; i < 4; ++i) {
        const auto j = i + static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool - 1 - i)));
        std::swap(idx[i], idx[j]);
        pick.push_back(idx[i]);
      }
    } else {
      for (std::size_t i = 0; i < 4; ++i) pick.push_back(static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(pool) - 1)));
    }
    std::vector<PseudoImage> four;
    std::vector<bool> four_cache;
    for (auto p : pick) {
      if (p < n) {
        four.push_back(unlabeled[p]);
        four_cache.push_back(false);
      } else {
        four.push_back(partners[p - n]);
        four_cache.push_back(partner_from_cache[p - n]);
      }
    }
    MixedImage m = pseudo_mosaic(four, options.mosaic, rng);
    for (std::size_t i = 0; i < 4; ++i) m.sources[i].from_cache = four_cache[i];
    keep(std::move(m));
  }

  cache.put(std::move(unlabeled), iteration);
  return batch;
}

std::vector<ImageRaster> assemble_padded(const PseudoBatch& batch) {
  int w = 0, h = 0;
  for (const auto& l : batch.labeled) w = std::max(w, l.width), h = std::max(h, l.height);
  for (const auto& m : batch.mixed) w = std::max(w, m.width), h = std::max(h, m.height);
  std::vector<ImageRaster> out;
  auto add = [&](const std::optional<ImageRaster>& r) {
    if (!r) throw ValidationError(kModule, "batch image has no raster to pad");
    out.push_back(pad_to(unpadded(*r), w, h));
  };
  for (const auto& l : batch.labeled) add(l.raster);
  for (const auto& m : batch.mixed) add(m.raster);
  return out;
}

std::string composition_manifest(const PseudoBatch& batch) {
  using nlohmann::json;
  json mixed = json::array();
  for (std::size_t i = 0; i < batch.mixed.size(); ++i) {
    const auto& m = batch.mixed[i];
    json sources = json::array();
    for (const auto& s : m.sources) {
      sources.push_back({{"image_id", s.image_id}, {"iteration", s.iteration}, {"from_cache", s.from_cache}});
    }
    mixed.push_back({{"index", i},
                     {"kind", to_string(m.kind)},
                     {"width", m.width},
                     {"height", m.height},
                     {"labels", m.labels.size()},
                     {"labels_before_clip", m.labels_before_clip},
                     {"dropped_labels", m.dropped_labels},
                     {"loss_weight", batch.unlabeled_weight},
                     {"sources", std::move(sources)}});
  }
  json labeled = json::array();
  for (const auto& l : batch.labeled) {
    labeled.push_back({{"image_id", l.image_id}, {"labels", l.labels.size()}, {"loss_weight", batch.labeled_weight}});
  }
  json doc = {{"iteration", batch.iteration},
              {"warmup", batch.warmup},
              {"dropped_empty", batch.dropped_empty},
              {"labeled", std::move(labeled)},
              {"mixed", std::move(mixed)}};
  return doc.dump(2);
}

void dump_batch(const PseudoBatch& batch, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write_one = [&](const std::string& stem, ImageId id, const std::optional<ImageRaster>& r, const LabelList& labels) {
    if (r) write_raw(*r, dir / (stem + ".mxpl"));
    emit_detections({{id, labels}}, dir / (stem + ".json"));
  };
  for (std::size_t i = 0; i < batch.labeled.size(); ++i) {
    const auto& l = batch.labeled[i];
    write_one("labeled_" + std::to_string(i), l.image_id, l.raster, l.labels);
  }
  for (std::size_t i = 0; i < batch.mixed.size(); ++i) {
    write_one("mixed_" + std::to_string(i), static_cast<ImageId>(i), batch.mixed[i].raster, batch.mixed[i].labels);
  }
  write_text_file(dir / "manifest.json", composition_manifest(batch), kModule);
}

}  // namespace mixpl
