#include "mixpl/config.hpp"

#include <set>

#include "mixpl/coco_io.hpp"
#include "mixpl/error.hpp"

namespace mixpl {

namespace {

constexpr const char* kModule = "cli";
using nlohmann::json;

// Walks one JSON object, checking types and rejecting keys nobody asked for.
class Reader {
 public:
  Reader(const json& j, std::string pointer) : j_(j), pointer_(std::move(pointer)) {
    if (!j_.is_object()) throw ParseError(kModule, "expected an object", where());
  }

  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions()) return;
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ParseError(kModule, "unknown key '" + key + "'", pointer_ + "/" + key);
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ParseError(kModule, "wrong type for '" + key + "'", pointer_ + "/" + key);
    }
  }

  Reader sub(const std::string& key) {
    seen_.insert(key);
    return Reader(j_.at(key), pointer_ + "/" + key);
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string where() const { return pointer_.empty() ? "/" : pointer_; }
  std::string where(const std::string& key) const { return pointer_ + "/" + key; }

 private:
  const json& j_;
  std::string pointer_;
  std::set<std::string> seen_;
};

void read_dataset(Reader r, DatasetConfig& d) {
  r.get("source", d.source);
  std::string path;
  r.get("path", path);
  if (!path.empty()) d.path = path;
  if (r.has("synthetic")) {
    Reader s = r.sub("synthetic");
    auto& sp = d.synthetic;
    s.get("num_images", sp.num_images);
    s.get("num_categories", sp.num_categories);
    s.get("long_edge", sp.long_edge);
    s.get("short_edge_min", sp.short_edge_min);
    s.get("short_edge_max", sp.short_edge_max);
    s.get("objects_per_image", sp.objects_per_image);
    s.get("scale_mix", sp.scale_mix);
    s.get("large_tail_exponent", sp.large_tail_exponent);
    s.get("zipf_exponent", sp.zipf_exponent);
    s.get("first_image_id", sp.first_image_id);
    s.get("seed", sp.seed);
  }
  r.get("long_tail", d.long_tail);
  r.get("long_tail_images", d.long_tail_images);
}

void read_teacher(Reader r, TeacherConfig& t) {
  r.get("base", t.base);
  if (r.has("score_means")) {
    std::array<double, 3> m{};
    r.get("score_means", m);
    t.score_means = m;
  }
  static const std::set<std::string> kOverrides{"recall", "decile_factor", "score_sigma", "fp_per_image",
                                                "fp_scale_mix", "fp_score", "jitter", "category_override"};
  for (const auto& key : kOverrides) {
    if (r.has(key)) t.overrides[key] = r.raw(key);
  }
}

LogisticCurve curve_from(const json& j, const std::string& where) {
  try {
    return LogisticCurve{j.at("start").get<double>(), j.at("end").get<double>(), j.at("midpoint").get<double>(),
                         j.at("width").get<double>()};
  } catch (const json::exception&) {
    throw ParseError(kModule, "curve needs numeric start, end, midpoint, width", where);
  }
}

}  // namespace

double preset_threshold(const std::string& preset) {
  if (preset == "ce-loss") return 0.7;
  if (preset == "focal") return 0.4;
  if (preset == "fcos") return 0.3;
  throw ValidationError(kModule, "unknown preset '" + preset + "' (expected ce-loss, focal or fcos)");
}

std::string preset_teacher(const std::string& preset) {
  preset_threshold(preset);
  return preset == "ce-loss" ? "faster-rcnn" : "retinanet";
}

TeacherProfile named_profile(const std::string& name) {
  if (name == "faster-rcnn") return faster_rcnn_profile();
  if (name == "retinanet") return retinanet_profile();
  if (name == "perfect") return perfect_profile();
  throw ValidationError(kModule, "unknown teacher profile '" + name + "'");
}

double Config::effective_threshold() const { return threshold ? *threshold : preset_threshold(preset); }

TeacherProfile Config::teacher_profile() const {
  TeacherProfile p = named_profile(teacher.base.empty() ? preset_teacher(preset) : teacher.base);
  std::array<double, 3> means{p.score[0].mean(), p.score[1].mean(), p.score[2].mean()};
  const json& o = teacher.overrides;
  try {
    if (o.contains("recall")) {
      const json& r = o.at("recall");
      if (!r.is_array() || r.size() != 3) throw ParseError(kModule, "recall needs 3 curves", "/teacher/recall");
      for (std::size_t i = 0; i < 3; ++i) p.recall[i] = curve_from(r[i], "/teacher/recall/" + std::to_string(i));
    }
    if (o.contains("decile_factor")) p.decile_factor = o.at("decile_factor").get<std::array<double, 10>>();
    if (o.contains("score_sigma")) {
      const auto s = o.at("score_sigma").get<std::array<double, 3>>();
      for (std::size_t i = 0; i < 3; ++i) p.score[i].sigma = s[i];
    }
    if (o.contains("fp_per_image")) p.fp_per_image = curve_from(o.at("fp_per_image"), "/teacher/fp_per_image");
    if (o.contains("fp_scale_mix")) p.fp_scale_mix = o.at("fp_scale_mix").get<std::array<double, 3>>();
    if (o.contains("fp_score")) {
      p.fp_score = TruncatedNormal{o.at("fp_score").at("mu").get<double>(), o.at("fp_score").at("sigma").get<double>()};
    }
    if (o.contains("jitter")) p.jitter = o.at("jitter").get<double>();
    if (o.contains("category_override")) {
      for (const auto& [k, v] : o.at("category_override").items()) p.category_override[std::stoi(k)] = v.get<double>();
    }
  } catch (const json::exception& e) {
    throw ParseError(kModule, std::string("bad teacher override: ") + e.what(), "/teacher");
  } catch (const std::logic_error&) {
    throw ParseError(kModule, "category_override keys must be category ids", "/teacher/category_override");
  }
  if (teacher.score_means) means = *teacher.score_means;
  if (teacher.score_means || o.contains("score_sigma")) p = calibrate_scores(std::move(p), means);
  p.validate();
  return p;
}

SimConfig Config::sim_config() const {
  SimConfig s;
  s.n_labeled = n_labeled;
  s.n_unlabeled = n_unlabeled;
  s.threshold = effective_threshold();
  s.filter_empty = filter_empty;
  s.compose = compose;
  s.resample_power = resample_power;
  s.resize = resize;
  s.flip_prob = flip_prob;
  s.erasing = erasing;
  s.cache_window = cache_window;
  s.iterations = iterations;
  s.seed = seed;
  return s;
}

void Config::validate() const {
  auto fail = [](const std::string& what) { throw ValidationError(kModule, what); };
  if (version != kConfigVersion) fail("unsupported config version " + std::to_string(version));
  if (dataset.source != "synthetic" && dataset.source != "long-tail" && dataset.source != "coco") {
    fail("dataset.source must be synthetic, long-tail or coco");
  }
  if (dataset.source == "coco" && dataset.path.empty()) fail("dataset.path is required for a coco source");
  if (!(split_fraction > 0.0 && split_fraction <= 1.0)) fail("split_fraction must lie in (0, 1]");
  preset_threshold(preset);
  const double thr = effective_threshold();
  if (!(thr >= 0.0 && thr <= 1.0)) fail("threshold must lie in [0, 1]");
  if (n_labeled < 0 || n_unlabeled < 1) fail("batch needs n_labeled >= 0 and n_unlabeled >= 1");
  if (compose.unlabeled_weight < 0.0) fail("unlabeled_weight must be non-negative");
  if (!(compose.mixup_alpha >= 0.0 && compose.mixup_alpha <= 1.0)) fail("mixup_alpha must lie in [0, 1]");
  if (compose.mosaic.lo <= 0 || compose.mosaic.lo > compose.mosaic.hi) fail("mosaic range needs 0 < lo <= hi");
  if (!(resample_power >= 0.0 && resample_power <= 1.0)) fail("resample_power must lie in [0, 1]");
  if (!(ema_momentum >= 0.0 && ema_momentum <= 1.0)) fail("ema_momentum must lie in [0, 1]");
  if (iterations < 0) fail("iterations must be non-negative");
  if (cache_window < 1) fail("cache_window must be at least 1");
  if (grad.scenes < 1 || grad.bins < 1 || grad.stride < 1) fail("grad scenes, bins and stride must be positive");
}

Config parse_config(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(kModule, "malformed config", "byte " + std::to_string(e.byte));
  }
  Config c;
  {
    Reader r(j, "");
    if (!r.has("version")) throw ParseError(kModule, "missing 'version'", "/version");
    r.get("version", c.version);
    if (c.version != kConfigVersion) {
      throw ParseError(kModule, "unsupported config version " + std::to_string(c.version), "/version");
    }
    if (r.has("dataset")) read_dataset(r.sub("dataset"), c.dataset);
    if (r.has("split")) {
      Reader s = r.sub("split");
      s.get("fraction", c.split_fraction);
      s.get("seed", c.split_seed);
    }
    r.get("preset", c.preset);
    if (r.has("threshold")) {
      double t = 0.0;
      r.get("threshold", t);
      c.threshold = t;
    }
    if (r.has("batch")) {
      Reader b = r.sub("batch");
      b.get("n_labeled", c.n_labeled);
      b.get("n_unlabeled", c.n_unlabeled);
    }
    r.get("unlabeled_weight", c.compose.unlabeled_weight);
    r.get("mixup_alpha", c.compose.mixup_alpha);
    if (r.has("mosaic_range")) {
      std::array<int, 2> m{};
      r.get("mosaic_range", m);
      c.compose.mosaic = {m[0], m[1]};
    }
    r.get("resample_power", c.resample_power);
    r.get("filter_empty", c.filter_empty);
    if (r.has("augment")) {
      Reader a = r.sub("augment");
      if (a.has("resize")) {
        Reader z = a.sub("resize");
        z.get("short_min", c.resize.short_min);
        z.get("short_max", c.resize.short_max);
        z.get("long_cap", c.resize.long_cap);
      }
      a.get("flip_prob", c.flip_prob);
      if (a.has("erasing")) {
        Reader e = a.sub("erasing");
        e.get("min_patches", c.erasing.min_patches);
        e.get("max_patches", c.erasing.max_patches);
        e.get("min_ratio", c.erasing.min_ratio);
        e.get("max_ratio", c.erasing.max_ratio);
        e.get("drop_threshold", c.erasing.drop_threshold);
      }
    }
    r.get("cache_window", c.cache_window);
    if (r.has("teacher")) read_teacher(r.sub("teacher"), c.teacher);
    r.get("ema_momentum", c.ema_momentum);
    if (r.has("grad")) {
      Reader g = r.sub("grad");
      g.get("scenes", c.grad.scenes);
      g.get("thresholds", c.grad.thresholds);
      g.get("bins", c.grad.bins);
      g.get("stride", c.grad.stride);
      g.get("strong_gain", c.grad.strong_gain);
      g.get("svg", c.grad.svg);
    }
    r.get("iterations", c.iterations);
    r.get("seed", c.seed);
    std::string out;
    r.get("output_dir", out);
    if (!out.empty()) c.output_dir = out;
  }
  c.validate();
  return c;
}

Config load_config(const std::filesystem::path& path) { return parse_config(read_text_file(path, kModule)); }

json config_to_json(const Config& c) {
  json j;
  j["version"] = c.version;
  const auto& sp = c.dataset.synthetic;
  j["dataset"] = {{"source", c.dataset.source},
                  {"path", c.dataset.path.string()},
                  {"synthetic",
                   {{"num_images", sp.num_images},
                    {"num_categories", sp.num_categories},
                    {"long_edge", sp.long_edge},
                    {"short_edge_min", sp.short_edge_min},
                    {"short_edge_max", sp.short_edge_max},
                    {"objects_per_image", sp.objects_per_image},
                    {"scale_mix", sp.scale_mix},
                    {"large_tail_exponent", sp.large_tail_exponent},
                    {"zipf_exponent", sp.zipf_exponent},
                    {"first_image_id", sp.first_image_id},
                    {"seed", sp.seed}}},
                  {"long_tail", c.dataset.long_tail},
                  {"long_tail_images", c.dataset.long_tail_images}};
  j["split"] = {{"fraction", c.split_fraction}, {"seed", c.split_seed}};
  j["preset"] = c.preset;
  if (c.threshold) j["threshold"] = *c.threshold;
  j["batch"] = {{"n_labeled", c.n_labeled}, {"n_unlabeled", c.n_unlabeled}};
  j["unlabeled_weight"] = c.compose.unlabeled_weight;
  j["mixup_alpha"] = c.compose.mixup_alpha;
  j["mosaic_range"] = {c.compose.mosaic.lo, c.compose.mosaic.hi};
  j["resample_power"] = c.resample_power;
  j["filter_empty"] = c.filter_empty;
  j["augment"] = {{"resize", {{"short_min", c.resize.short_min}, {"short_max", c.resize.short_max}, {"long_cap", c.resize.long_cap}}},
                  {"flip_prob", c.flip_prob},
                  {"erasing",
                   {{"min_patches", c.erasing.min_patches},
                    {"max_patches", c.erasing.max_patches},
                    {"min_ratio", c.erasing.min_ratio},
                    {"max_ratio", c.erasing.max_ratio},
                    {"drop_threshold", c.erasing.drop_threshold}}}};
  j["cache_window"] = c.cache_window;
  json t = c.teacher.overrides;
  if (!c.teacher.base.empty()) t["base"] = c.teacher.base;
  if (c.teacher.score_means) t["score_means"] = *c.teacher.score_means;
  j["teacher"] = t;
  j["ema_momentum"] = c.ema_momentum;
  j["grad"] = {{"scenes", c.grad.scenes}, {"thresholds", c.grad.thresholds}, {"bins", c.grad.bins},
               {"stride", c.grad.stride}, {"strong_gain", c.grad.strong_gain}, {"svg", c.grad.svg}};
  j["iterations"] = c.iterations;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir.string();
  return j;
}

DatasetIndex load_configured_dataset(const Config& config) {
  const auto& d = config.dataset;
  if (d.source == "coco") return load_dataset(d.path);
  if (d.source == "long-tail") return make_long_tail_dataset(d.long_tail, d.long_tail_images, config.seed);
  return make_synthetic_dataset(d.synthetic);
}

}  // namespace mixpl
