#include "dcorr/training/trainer.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "dcorr/core/error.hpp"
#include "dcorr/core/log.hpp"
#include "dcorr/datapipe/image_io.hpp"
#include "dcorr/datapipe/sampling.hpp"

namespace dcorr {
namespace fs = std::filesystem;

VideoPairSource::VideoPairSource(VideoIndex index, const DataConfig& data, uint64_t seed)
    : index_(std::move(index)), data_(data), seed_(seed) {
  if (index_.videos.empty()) throw DataError("video pair source: the index is empty");
}

TrainBatch VideoPairSource::batch(int64_t step, int64_t batch_size) const {
  auto rng = make_rng(seed_, 0, uint64_t(step));
  std::uniform_int_distribution<size_t> pick(0, index_.videos.size() - 1);
  TrainBatch out;
  std::vector<torch::Tensor> a, b;
  for (int64_t i = 0; i < batch_size; ++i) {
    // Videos too short for the minimum interval are skipped and redrawn.
    for (int attempt = 0;; ++attempt) {
      const auto& video = index_.videos[pick(rng)];
      try {
        auto idx = sample_pair_indices(video, data_.interval, rng);
        auto f1 = resize_shorter_side(load_image(video.frame_paths[size_t(idx.first)]), data_.resize_shorter);
        auto f2 = resize_shorter_side(load_image(video.frame_paths[size_t(idx.second)]), data_.resize_shorter);
        if (f1.sizes() != f2.sizes()) throw DataError("frames of video " + video.id + " differ in size");
        auto [c1, c2] = random_crop_pair(f1, f2, data_.crop, data_.crop, rng, data_.shared_crop);
        a.push_back(c1);
        b.push_back(c2);
        out.ids.push_back(video.id + ":" + std::to_string(video.frame_numbers[size_t(idx.first)]) + "-" +
                          std::to_string(video.frame_numbers[size_t(idx.second)]));
        break;
      } catch (const DataError& e) {
        if (attempt >= 100) throw DataError(std::string("no usable frame pair after 100 draws: ") + e.what());
      }
    }
  }
  out.image1 = torch::stack(a);
  out.image2 = torch::stack(b);
  return out;
}

TranslationPairSource::TranslationPairSource(std::vector<TranslationPair> pairs, uint64_t seed)
    : pairs_(std::move(pairs)), seed_(seed) {
  if (pairs_.empty()) throw DataError("translation pair source: no pairs");
}

TrainBatch TranslationPairSource::batch(int64_t step, int64_t batch_size) const {
  auto rng = make_rng(seed_, 0, uint64_t(step));
  std::uniform_int_distribution<size_t> pick(0, pairs_.size() - 1);
  TrainBatch out;
  std::vector<torch::Tensor> a, b;
  for (int64_t i = 0; i < batch_size; ++i) {
    const auto k = pick(rng);
    a.push_back(pairs_[k].image1);
    b.push_back(pairs_[k].image2);
    out.ids.push_back("synthetic:" + std::to_string(k));
  }
  out.image1 = torch::stack(a);
  out.image2 = torch::stack(b);
  return out;
}

std::unique_ptr<PairSource> make_pair_source(const PipelineConfig& config) {
  const auto& d = config.data;
  if (d.kind == DataKind::SyntheticTranslation) {
    return std::make_unique<TranslationPairSource>(
        make_translation_dataset(d.synthetic_count, d.synthetic_size, d.synthetic_max_shift, d.synthetic_seed),
        config.seed);
  }
  if (d.root.empty()) throw ConfigurationError("config: data.root is required for data.kind = videos");
  return std::make_unique<VideoPairSource>(index_videos(d.root), d, config.seed);
}

VisibilityTargets visibility_targets(const CorrespondenceModel& model, const FlowPrediction& prediction,
                                     const torch::Tensor& image1) {
  torch::NoGradGuard no_grad;
  const auto& cfg = model.config();
  const auto b = image1.size(0), hh = image1.size(2), ww = image1.size(3);
  VisibilityTargets out;
  out.visible_mask = torch::ones({b, hh, ww}, torch::kBool);
  out.regions = torch::empty({b, hh / kFeatureStride, ww / kFeatureStride}, torch::kInt64);
  auto similarity = max_similarity_map(prediction.cost).data;
  for (int64_t i = 0; i < b; ++i) {
    auto segments = model.segmenter().segment(image1[i]);
    auto labels = downsample_regions(segments);
    if (cfg.visibility.enabled) {
      auto scores = segment_scores(similarity[i], segments);
      auto sel = select_visible_regions(segments, scores, cfg.visibility.top_k);
      out.visible_mask[i] = sel.data;
      if (!sel.fallback) {
        // Distance pairs are only drawn from the selected regions.
        auto keep = torch::zeros({segments.size(0) + 1}, torch::kBool);
        for (auto s : sel.selected) keep[s + 1] = true;
        labels = torch::where(keep.index({labels + 1}), labels, torch::full_like(labels, -1));
      }
      out.selections.push_back(std::move(sel));
    }
    out.regions[i] = labels;
  }
  return out;
}

Trainer::Trainer(CorrespondenceModel& model) : model_(model) {
  const auto& t = model.config().train;
  optimizer_ = std::make_unique<torch::optim::AdamW>(
      model.encoder()->parameters(),
      torch::optim::AdamWOptions(t.learning_rate).weight_decay(t.weight_decay));
}

double Trainer::learning_rate_at(int64_t completed_steps) const {
  const auto& t = model_.config().train;
  if (t.warmup_steps <= 0) return t.learning_rate;
  return t.learning_rate * std::min(1.0, double(completed_steps + 1) / double(t.warmup_steps));
}

LossBreakdown Trainer::train_step(const TrainBatch& batch) {
  auto& encoder = model_.encoder();
  encoder->train();
  const auto dtype = encoder->parameters().front().scalar_type();
  auto i1 = batch.image1.to(dtype), i2 = batch.image2.to(dtype);

  auto pred = model_.predict(i1, i2);
  auto targets = visibility_targets(model_, pred, i1);
  LossInputs in{i1, i2, pred.full, pred.feature, pred.semantic1, pred.semantic2, targets.visible_mask,
                targets.regions};
  LossBreakdown loss;
  try {
    loss = total_loss(in, model_.config().loss);
  } catch (const TrainingError& e) {
    std::ostringstream ids;
    for (size_t i = 0; i < batch.ids.size(); ++i) ids << (i ? ", " : "") << batch.ids[i];
    throw TrainingError(std::string(e.what()) + " at step " + std::to_string(step_ + 1) + "; batch: " + ids.str());
  }

  optimizer_->zero_grad();
  loss.total.backward();
  torch::nn::utils::clip_grad_norm_(encoder->parameters(), model_.config().train.grad_clip_norm);
  const double lr = learning_rate_at(step_);
  for (auto& group : optimizer_->param_groups()) {
    static_cast<torch::optim::AdamWOptions&>(group.options()).lr(lr);
  }
  optimizer_->step();
  ++step_;
  return loss;
}

std::vector<int64_t> checkpoint_schedule(int64_t start, int64_t steps, int64_t every) {
  std::vector<int64_t> out;
  if (every <= 0) throw ArgumentError("checkpoint_schedule: cadence must be positive");
  for (int64_t s = (start / every + 1) * every; s < steps; s += every) out.push_back(s);
  if (steps > start) out.push_back(steps);
  return out;
}

FitResult fit(const PipelineConfig& config, const PairSource& source, const FitOptions& options) {
  if (config.strict_determinism) at::globalContext().setDeterministicAlgorithms(true, true);
  FitResult result;
  result.model = std::make_unique<CorrespondenceModel>(config);
  Trainer trainer(*result.model);

  if (options.resume) {
    auto ckpt = read_checkpoint(*options.resume);
    const auto expected = config_hash(config);
    if (ckpt.config_hash != expected) {
      throw ConfigurationError("refusing to resume from " + options.resume->string() + ": its config hash " +
                               ckpt.config_hash + " differs from the current config hash " + expected +
                               "; resume with the configuration the checkpoint was trained with");
    }
    restore_weights(ckpt, *result.model);
    restore_optimizer(ckpt, *result.model, trainer.optimizer());
    trainer.set_step(ckpt.step);
  }

  const int64_t start = trainer.step();
  const int64_t end = options.stop_after ? std::min(*options.stop_after, config.train.steps) : config.train.steps;
  auto schedule = checkpoint_schedule(start, end, config.train.checkpoint_every);

  std::ofstream metrics;
  if (!options.out_dir.empty()) {
    fs::create_directories(options.out_dir);
    metrics.open(options.out_dir / "metrics.jsonl", start > 0 ? std::ios::app : std::ios::trunc);
    if (!metrics) throw DataError("cannot write " + (options.out_dir / "metrics.jsonl").string());
  }

  size_t next_ckpt = 0;
  while (trainer.step() < end) {
    const auto batch = source.batch(trainer.step(), config.train.batch_size);
    const double lr = trainer.learning_rate_at(trainer.step());
    const auto loss = trainer.train_step(batch);
    StepRecord rec{trainer.step(), loss.value, loss.photometric, loss.feature_metric, loss.distance, lr};
    result.history.push_back(rec);
    if (metrics.is_open()) {
      metrics << nlohmann::json{{"step", rec.step},
                                {"L", rec.loss},
                                {"L_p", rec.photometric},
                                {"L_f", rec.feature_metric},
                                {"L_d", rec.distance},
                                {"lr", rec.learning_rate}}
                     .dump()
              << '\n';
      metrics.flush();
    }
    if (options.on_step) options.on_step(rec);
    if (next_ckpt < schedule.size() && schedule[next_ckpt] == trainer.step()) {
      ++next_ckpt;
      if (!options.out_dir.empty()) {
        auto path = options.out_dir / ("ckpt_" + std::to_string(trainer.step()) + ".dck");
        write_checkpoint(capture_checkpoint(*result.model, &trainer.optimizer(), trainer.step()), path);
        result.checkpoints.push_back(path);
        log_info("checkpoint " + path.string());
      }
    }
  }
  result.final_step = trainer.step();
  return result;
}

}  // namespace dcorr
