#include "commands.hpp"

#include <cstdio>
#include <cstdlib>
#include <map>
#include <sstream>

#include <json.hpp>

#include "mixpl/coco_io.hpp"
#include "mixpl/error.hpp"
#include "mixpl/grad_analysis.hpp"
#include "mixpl/pseudo.hpp"
#include "mixpl/raster.hpp"
#include "mixpl/resample.hpp"
#include "mixpl/simulation.hpp"
#include "mixpl/synthetic.hpp"

namespace mixpl::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kModule = "cli";

std::pair<int, int> parse_range(const std::string& s) {
  const auto colon = s.find(':');
  try {
    if (colon == std::string::npos) throw std::invalid_argument(s);
    std::size_t used = 0;
    const int lo = std::stoi(s.substr(0, colon), &used);
    if (used != colon) throw std::invalid_argument(s);
    const std::string rest = s.substr(colon + 1);
    const int hi = std::stoi(rest, &used);
    if (used != rest.size()) throw std::invalid_argument(s);
    return {lo, hi};
  } catch (const std::logic_error&) {
    throw ValidationError(kModule, "--mosaic-range expects lo:hi, got '" + s + "'");
  }
}

fs::path prepare_out(const Config& c) {
  fs::create_directories(c.output_dir);
  return c.output_dir;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), f, v);
  return buf;
}

TeacherProfile profile_for(const Config& c, const DatasetIndex& dataset) {
  TeacherProfile p = c.teacher_profile();
  p.category_decile = category_deciles(dataset);
  return p;
}

json source_json(const SourceRef& s) {
  return {{"image_id", s.image_id}, {"iteration", s.iteration}, {"from_cache", s.from_cache}};
}

// Pseudo-labeled inputs either from files or from the configured dataset
// run through the simulated teacher.
std::vector<PseudoImage> pseudo_inputs(const Config& c, const MixArgs& args, std::size_t count) {
  std::vector<PseudoImage> out;
  const double thr = c.effective_threshold();
  if (!args.images.empty()) {
    if (args.images.size() != count) {
      throw ValidationError(kModule, "expected " + std::to_string(count) + " images, got " +
                                         std::to_string(args.images.size()));
    }
    std::map<ImageId, LabelList> dets;
    if (args.detections) {
      for (auto& d : load_detections(*args.detections)) dets[d.image_id] = std::move(d.detections);
    }
    for (std::size_t i = 0; i < count; ++i) {
      ImageRaster r = read_raster(args.images[i]);
      const auto id = static_cast<ImageId>(i + 1);
      LabelList labels = filter_by_threshold(dets[id], thr);
      LabelList clipped;
      for (const auto& d : labels) {
        if (auto b = clip_box(d.box, r.width(), r.height())) clipped.push_back({*b, d.category, d.score});
      }
      const int w = r.width(), h = r.height();
      out.push_back(PseudoImage{w, h, std::move(r), PseudoLabelSet{id, std::move(clipped), 0}});
    }
    return out;
  }
  const DatasetIndex dataset = load_configured_dataset(c);
  if (dataset.images().size() < count) {
    throw ValidationError(kModule, "dataset has fewer than " + std::to_string(count) + " images");
  }
  const TeacherProfile profile = profile_for(c, dataset);
  Rng rng = derive_stream(c.seed, 0x6d6978);
  for (std::size_t i = 0; i < count; ++i) {
    const LabeledImage& img = dataset.images()[i];
    const TeacherPrediction pred = simulate_predictions(profile, img, static_cast<double>(c.iterations), rng);
    out.push_back(PseudoImage{img.width, img.height, render_raster(img, c.seed),
                              PseudoLabelSet{img.id, filter_by_threshold(pred.detections, thr), c.iterations}});
  }
  return out;
}

std::vector<fs::path> write_mixed(const Config& c, const MixedImage& m, const std::string& stem) {
  const fs::path dir = prepare_out(c);
  std::vector<fs::path> files{dir / (stem + ".png"), dir / (stem + ".json"), dir / (stem + "_manifest.json")};
  write_png(*m.raster, files[0]);
  emit_detections({ImageDetections{0, m.labels}}, files[1]);
  json sources = json::array();
  for (const auto& s : m.sources) sources.push_back(source_json(s));
  const json manifest = {{"kind", to_string(m.kind)},       {"width", m.width},
                         {"height", m.height},              {"sources", sources},
                         {"labels", m.labels.size()},       {"labels_before_clip", m.labels_before_clip},
                         {"dropped_labels", m.dropped_labels}};
  write_text_file(files[2], manifest.dump(2) + "\n", kModule);
  return files;
}

}  // namespace

Config resolve_config(const Overrides& o) {
  Config c = o.config ? load_config(*o.config) : Config{};
  if (const char* env = std::getenv("MIXPL_OUT"); env && *env) c.output_dir = env;
  if (o.seed) c.seed = *o.seed;
  if (o.out) c.output_dir = *o.out;
  if (o.preset) {
    c.preset = *o.preset;
    c.threshold.reset();
  }
  if (o.power) c.resample_power = *o.power;
  if (o.thr) c.threshold = *o.thr;
  if (o.wu) c.compose.unlabeled_weight = *o.wu;
  if (o.iters) c.iterations = *o.iters;
  if (o.mosaic_range) {
    const auto [lo, hi] = parse_range(*o.mosaic_range);
    c.compose.mosaic = {lo, hi};
  }
  if (o.alpha) c.compose.mixup_alpha = *o.alpha;
  c.validate();
  return c;
}

std::vector<fs::path> run_split(const Config& config, const SplitArgs& args) {
  const DatasetIndex dataset = load_configured_dataset(config);
  const DatasetSplit split = split_dataset(dataset, args.fraction.value_or(config.split_fraction), config.split_seed);
  const fs::path dir = prepare_out(config);
  std::vector<fs::path> files{dir / "labeled.json", dir / "unlabeled.json"};
  write_dataset(split.labeled, files[0]);
  write_dataset(split.unlabeled, files[1]);
  return files;
}

std::vector<fs::path> run_mix(const Config& config, const MixArgs& args) {
  const auto inputs = pseudo_inputs(config, args, 2);
  return write_mixed(config, pseudo_mixup(inputs[0], inputs[1], config.compose.mixup_alpha), "mixup");
}

std::vector<fs::path> run_mosaic(const Config& config, const MixArgs& args) {
  const auto inputs = pseudo_inputs(config, args, 4);
  Rng rng = derive_stream(config.seed, 0x6d6f73);
  return write_mixed(config, pseudo_mosaic(inputs, config.compose.mosaic, rng), "mosaic");
}

std::vector<fs::path> run_resample_plan(const Config& config, std::string* table) {
  const DatasetIndex dataset = load_configured_dataset(config);
  const RepeatPlan plan = repeat_factors(dataset, config.resample_power);
  std::ostringstream cats;
  cats << "category,f,r_cat\n";
  for (const auto& [cat, f] : plan.fraction) {
    cats << cat << ',' << fmt("%.4f", f) << ',' << fmt("%.4f", plan.category_factor.at(cat)) << '\n';
  }
  std::ostringstream imgs;
  imgs << "image_id,r_img\n";
  for (std::size_t i = 0; i < plan.image_ids.size(); ++i) {
    imgs << plan.image_ids[i] << ',' << fmt("%.4f", plan.image_factor[i]) << '\n';
  }
  const fs::path dir = prepare_out(config);
  std::vector<fs::path> files{dir / "resample_categories.csv", dir / "resample_images.csv"};
  write_text_file(files[0], cats.str(), kModule);
  write_text_file(files[1], imgs.str(), kModule);
  if (table) *table = cats.str();
  return files;
}

std::vector<fs::path> run_grad_density(const Config& config, const GradArgs& args) {
  const DatasetIndex dataset = load_configured_dataset(config);
  const TeacherProfile profile = profile_for(config, dataset);
  Rng rng = derive_stream(config.seed, 0x677264);
  std::vector<AnalysisScene> scenes;
  const auto n = std::min<std::size_t>(dataset.images().size(), static_cast<std::size_t>(config.grad.scenes));
  for (std::size_t i = 0; i < n; ++i) {
    scenes.push_back(make_scene(profile, dataset.images()[i], static_cast<double>(config.iterations), rng));
  }
  ResponseModel model;
  model.strong_gain = config.grad.strong_gain;
  model.mixup_alpha = config.compose.mixup_alpha;
  for (std::size_t s = 0; s < 3; ++s) model.scale_mean[s] = profile.score[s].mean();
  AnalysisOptions options;
  options.thresholds = config.grad.thresholds;
  options.bins = config.grad.bins;
  options.stride = config.grad.stride;
  options.mosaic_lo = config.compose.mosaic.lo;
  options.mosaic_hi = config.compose.mosaic.hi;
  options.seed = config.seed;
  const HistogramFamily family = compare_augmentations(scenes, model, options);

  const fs::path dir = prepare_out(config);
  std::vector<fs::path> files;
  for (const auto& h : family.histograms) {
    const fs::path f = dir / ("density_" + to_string(h.taxonomy) + "_" + h.augmentation + "_thr" +
                              fmt("%.2f", h.threshold) + ".csv");
    write_text_file(f, histogram_csv(h), kModule);
    files.push_back(f);
  }
  files.push_back(dir / "density_summary.csv");
  write_text_file(files.back(), family_summary_csv(family), kModule);
  if (args.svg.value_or(config.grad.svg)) {
    for (double thr : config.grad.thresholds) {
      files.push_back(dir / ("density_thr" + fmt("%.2f", thr) + ".svg"));
      write_text_file(files.back(), family_svg(family, thr), kModule);
    }
  }
  return files;
}

std::vector<fs::path> run_simulate(const Config& config) {
  const DatasetIndex dataset = load_configured_dataset(config);
  const DatasetSplit split = split_dataset(dataset, config.split_fraction, config.split_seed);
  const TeacherProfile profile = profile_for(config, dataset);
  std::string last_manifest;
  const auto stats = run_simulation(split.labeled, split.unlabeled, profile, config.sim_config(),
                                    [&](const PseudoBatch& b) { last_manifest = composition_manifest(b); });
  const fs::path dir = prepare_out(config);
  std::vector<fs::path> files{dir / "sim_stats.csv"};
  write_text_file(files[0], stats_to_csv(stats, dataset.categories()), kModule);
  if (!last_manifest.empty()) {
    files.push_back(dir / "last_batch_manifest.json");
    write_text_file(files.back(), last_manifest, kModule);
  }
  return files;
}

std::vector<fs::path> run_stats(const Config& config, const StatsArgs& args) {
  const DatasetIndex dataset = load_configured_dataset(config);
  struct Row {
    std::size_t images = 0, instances = 0;
    std::array<std::size_t, 3> scale{};
  };
  std::map<CategoryId, Row> rows;
  std::array<std::size_t, 3> gt{};
  for (const auto& [cat, name] : dataset.categories()) rows[cat];
  for (const auto& img : dataset.images()) {
    std::map<CategoryId, bool> present;
    for (const auto& a : img.annotations) {
      auto& r = rows[a.category];
      ++r.instances;
      const auto s = static_cast<std::size_t>(area_class(a.box));
      ++r.scale[s];
      ++gt[s];
      present[a.category] = true;
    }
    for (const auto& [cat, yes] : present) ++rows[cat].images;
  }
  std::ostringstream cats;
  cats << "category,name,images,instances,small,medium,large\n";
  for (const auto& [cat, r] : rows) {
    cats << cat << ',' << dataset.categories().at(cat) << ',' << r.images << ',' << r.instances << ',' << r.scale[0]
         << ',' << r.scale[1] << ',' << r.scale[2] << '\n';
  }
  std::ostringstream scales;
  scales << "source,small,medium,large\n";
  scales << "gt," << gt[0] << ',' << gt[1] << ',' << gt[2] << '\n';
  if (args.detections) {
    std::array<std::size_t, 3> pl{};
    const double thr = config.effective_threshold();
    for (const auto& d : load_detections(*args.detections)) {
      for (const auto& det : filter_by_threshold(d.detections, thr)) ++pl[static_cast<std::size_t>(area_class(det.box))];
    }
    scales << "pl," << pl[0] << ',' << pl[1] << ',' << pl[2] << '\n';
  }
  const fs::path dir = prepare_out(config);
  std::vector<fs::path> files{dir / "category_stats.csv", dir / "scale_stats.csv"};
  write_text_file(files[0], cats.str(), kModule);
  write_text_file(files[1], scales.str(), kModule);
  return files;
}

}  // namespace mixpl::cli
