#pragma once

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "dcorr/datapipe/synthetic.hpp"
#include "dcorr/datapipe/video_index.hpp"
#include "dcorr/losses/losses.hpp"
#include "dcorr/training/checkpoint.hpp"

namespace dcorr {

struct TrainBatch {
  torch::Tensor image1, image2;  // [B,3,H,W]
  std::vector<std::string> ids;  // one per element, for diagnostics
};

// Deterministic batch provider: the batch for a step depends only on the
// configuration and the step number.
class PairSource {
 public:
  virtual ~PairSource() = default;
  virtual TrainBatch batch(int64_t step, int64_t batch_size) const = 0;
};

// Frame pairs sampled from indexed videos, resized and randomly cropped.
class VideoPairSource final : public PairSource {
 public:
  VideoPairSource(VideoIndex index, const DataConfig& data, uint64_t seed);
  TrainBatch batch(int64_t step, int64_t batch_size) const override;

 private:
  VideoIndex index_;
  DataConfig data_;
  uint64_t seed_;
};

// A fixed set of synthetic translation pairs, drawn uniformly per step.
class TranslationPairSource final : public PairSource {
 public:
  TranslationPairSource(std::vector<TranslationPair> pairs, uint64_t seed);
  TrainBatch batch(int64_t step, int64_t batch_size) const override;
  const std::vector<TranslationPair>& pairs() const { return pairs_; }

 private:
  std::vector<TranslationPair> pairs_;
  uint64_t seed_;
};

std::unique_ptr<PairSource> make_pair_source(const PipelineConfig& config);

// Per-step scalars as written to the metric log.
struct StepRecord {
  int64_t step = 0;  // 1-based index of the completed update
  double loss = 0.0;
  double photometric = 0.0;
  double feature_metric = 0.0;
  double distance = 0.0;
  double learning_rate = 0.0;
};

// Loss inputs for a batch: visible-region masks from the detached similarity
// map and per-cell region labels restricted to the selected regions.
struct VisibilityTargets {
  torch::Tensor visible_mask;  // bool [B,H,W]
  torch::Tensor regions;       // int64 [B,h,w]
  std::vector<VisibleRegionMask> selections;
};
VisibilityTargets visibility_targets(const CorrespondenceModel& model, const FlowPrediction& prediction,
                                     const torch::Tensor& image1);

// AdamW on the encoder parameters with linear warmup and global-norm clipping.
class Trainer {
 public:
  explicit Trainer(CorrespondenceModel& model);

  // One update. Throws TrainingError (naming the batch ids) on a non-finite
  // loss; the parameters are left untouched in that case.
  LossBreakdown train_step(const TrainBatch& batch);

  double learning_rate_at(int64_t completed_steps) const;
  int64_t step() const { return step_; }
  void set_step(int64_t step) { step_ = step; }
  torch::optim::AdamW& optimizer() { return *optimizer_; }
  CorrespondenceModel& model() { return model_; }

 private:
  CorrespondenceModel& model_;
  std::unique_ptr<torch::optim::AdamW> optimizer_;
  int64_t step_ = 0;
};

// Steps at which fit() writes a checkpoint: multiples of `every` after
// `start`, plus the final step.
std::vector<int64_t> checkpoint_schedule(int64_t start, int64_t steps, int64_t every);

struct FitOptions {
  std::filesystem::path out_dir;                // checkpoints and metrics.jsonl; empty = none
  std::optional<std::filesystem::path> resume;  // checkpoint to continue from
  std::optional<int64_t> stop_after;            // stop early at this step (still checkpointed)
  std::function<void(const StepRecord&)> on_step;
};

struct FitResult {
  int64_t final_step = 0;
  std::vector<StepRecord> history;
  std::vector<std::filesystem::path> checkpoints;
  std::unique_ptr<CorrespondenceModel> model;
};

// Runs config.train.steps updates (or continues a resumed run up to that
// many). Resuming from a checkpoint whose config hash differs from `config`
// raises ConfigurationError.
FitResult fit(const PipelineConfig& config, const PairSource& source, const FitOptions& options);

}  // namespace dcorr
