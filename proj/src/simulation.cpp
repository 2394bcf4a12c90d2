#include "mixpl/simulation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mixpl/error.hpp"
#include "mixpl/resample.hpp"
#include "mixpl/synthetic.hpp"

namespace mixpl {

namespace {

constexpr const char* kModule = "sim-teacher";

std::uint64_t stream_key(std::int64_t iteration, ImageId id, std::uint64_t salt) {
  return (static_cast<std::uint64_t>(iteration) << 32) ^ static_cast<std::uint64_t>(id) ^ (salt << 60);
}

// Cycles through an id sequence, refilling it when exhausted.
class Sampler {
 public:
  Sampler(std::function<std::vector<ImageId>(Rng&)> refill, Rng rng) : refill_(std::move(refill)), rng_(std::move(rng)) {}

  ImageId next() {
    if (pos_ >= order_.size()) {
      order_ = refill_(rng_);
      pos_ = 0;
      if (order_.empty()) throw ValidationError(kModule, "sampler produced an empty epoch");
    }
    return order_[pos_++];
  }

 private:
  std::function<std::vector<ImageId>(Rng&)> refill_;
  Rng rng_;
  std::vector<ImageId> order_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<IterationStats> run_simulation(const DatasetIndex& labeled, const DatasetIndex& unlabeled,
                                           const TeacherProfile& profile, const SimConfig& config,
                                           const BatchObserver& observer) {
  profile.validate();
  if (config.iterations < 0) throw ValidationError(kModule, "iteration count must be non-negative");
  if (config.n_labeled < 0 || config.n_unlabeled < 0) throw ValidationError(kModule, "batch sizes must be non-negative");
  std::vector<IterationStats> stats;
  if (config.iterations == 0) return stats;
  if (config.n_unlabeled > 0 && unlabeled.empty()) throw ValidationError(kModule, "unlabeled split is empty");

  // Labeled images without annotations cannot enter a batch.
  std::vector<std::size_t> annotated;
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    if (!labeled.images()[i].annotations.empty()) annotated.push_back(i);
  }
  if (config.n_labeled > 0 && annotated.empty()) throw ValidationError(kModule, "labeled split has no annotated images");
  const DatasetIndex labeled_pool = labeled.subset(annotated);
  std::optional<RepeatPlan> plan;
  if (!labeled_pool.empty()) plan = repeat_factors(labeled_pool, config.resample_power);

  Sampler labeled_sampler([&](Rng& rng) { return build_epoch(*plan, rng); }, derive_stream(config.seed, 1));
  Sampler unlabeled_sampler(
      [&](Rng& rng) {
        std::vector<ImageId> ids;
        for (const auto& img : unlabeled.images()) ids.push_back(img.id);
        std::shuffle(ids.begin(), ids.end(), rng);
        return ids;
      },
      derive_stream(config.seed, 2));

  AugmentSpec labeled_spec{PipelineKind::kLabeled, config.resize, config.flip_prob, 1, 1, config.erasing};
  AugmentSpec weak_spec{PipelineKind::kWeak, config.resize, config.flip_prob, 1, 1, config.erasing};
  AugmentSpec strong_spec{PipelineKind::kStrong, config.resize, config.flip_prob, 1, 1, config.erasing};

  PseudoLabelCache cache(config.cache_window);
  Rng compose_rng = derive_stream(config.seed, 3);

  for (std::int64_t it = 0; it < config.iterations; ++it) {
    IterationStats st;
    st.iteration = it;

    std::vector<LabeledSample> labeled_batch;
    for (int i = 0; i < config.n_labeled; ++i) {
      const LabeledImage& img = *labeled_pool.find(labeled_sampler.next());
      Rng rng = derive_stream(config.seed, stream_key(it, img.id, 1));
      const auto lp = plan_pipeline(labeled_spec, img.width, img.height, rng);
      LabeledSample s{img.id, lp.out_w, lp.out_h, std::nullopt, map_labels(lp, img.labels())};
      if (config.render) s.raster = execute(lp, render_raster(img, config.seed), {}).raster;
      labeled_batch.push_back(std::move(s));
    }

    std::vector<PseudoImage> pseudo;
    for (int i = 0; i < config.n_unlabeled; ++i) {
      const LabeledImage& img = *unlabeled.find(unlabeled_sampler.next());
      Rng rng = derive_stream(config.seed, stream_key(it, img.id, 2));
      const auto weak = plan_pipeline(weak_spec, img.width, img.height, rng);
      const auto strong = plan_pipeline(strong_spec, img.width, img.height, rng);

      // The teacher sees the weak view; predictions are bookkept in the
      // original frame so scale classes compare with the ground truth.
      const TeacherPrediction pred = simulate_predictions(profile, img, static_cast<double>(it), rng);
      const LabelList kept = filter_by_threshold(pred.detections, config.threshold);
      st.detected_gt += pred.detected_gt;
      st.raw_fp += pred.false_positives;
      st.threshold_filtered += pred.detections.size() - kept.size();
      for (const auto& a : img.annotations) {
        ++st.gt[static_cast<int>(area_class(a.box))];
        ++st.gt_per_category[a.category];
      }
      for (std::size_t k = 0; k < pred.detections.size(); ++k) {
        const auto& d = pred.detections[k];
        if (d.score < config.threshold) continue;
        ++st.pl[static_cast<int>(area_class(d.box))];
        ++st.pl_per_category[d.category];
        if (!pred.gt_index[k]) ++st.fp_count;
      }

      const LabelList weak_labels = transform_labels(kept, weak.composite, weak.out_w, weak.out_h);
      LabelList strong_labels = transfer_labels(weak_labels, weak.composite, strong.composite, strong.out_w, strong.out_h);
      strong_labels = filter_erased(strong_labels, strong.erased, config.erasing.drop_threshold);

      PseudoImage p;
      p.width = strong.out_w;
      p.height = strong.out_h;
      p.labels = {img.id, std::move(strong_labels), it};
      if (config.render) p.raster = execute(strong, render_raster(img, config.seed), {}).raster;
      pseudo.push_back(std::move(p));
    }

    std::size_t empties = 0;
    for (const auto& p : pseudo) empties += p.detections().empty() ? 1 : 0;
    st.empty_images = empties;
    if (config.filter_empty) {
      pseudo = filter_empty_images(std::move(pseudo)).kept;
    } else {
      // compose_training_batch rejects empty images; without filtering they
      // simply do not take part in mixing.
      std::erase_if(pseudo, [](const PseudoImage& p) { return p.detections().empty(); });
    }

    st.labeled_images = labeled_batch.size();
    PseudoBatch batch = compose_training_batch(std::move(labeled_batch), std::move(pseudo), cache, config.compose, it, compose_rng);
    st.mixed_images = batch.mixed.size();
    st.cache_occupancy = cache.size();
    if (observer) observer(batch);
    stats.push_back(std::move(st));
  }
  return stats;
}

std::string stats_to_csv(const std::vector<IterationStats>& stats, const std::map<CategoryId, std::string>& categories) {
  std::ostringstream os;
  os << "iter,gt_s,gt_m,gt_l,pl_s,pl_m,pl_l,empty_images,fp_count";
  for (const auto& [id, name] : categories) os << ",log_gt_" << id << ",log_pl_" << id;
  os << '\n';
  char buf[32];
  for (const auto& s : stats) {
    os << s.iteration << ',' << s.gt[0] << ',' << s.gt[1] << ',' << s.gt[2] << ',' << s.pl[0] << ',' << s.pl[1]
       << ',' << s.pl[2] << ',' << s.empty_images << ',' << s.fp_count;
    for (const auto& [id, name] : categories) {
      auto g = s.gt_per_category.find(id);
      auto p = s.pl_per_category.find(id);
      const double lg = std::log1p(static_cast<double>(g == s.gt_per_category.end() ? 0 : g->second));
      const double lp = std::log1p(static_cast<double>(p == s.pl_per_category.end() ? 0 : p->second));
      std::snprintf(buf, sizeof(buf), ",%.6f", lg);
      os << buf;
      std::snprintf(buf, sizeof(buf), ",%.6f", lp);
      os << buf;
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace mixpl
