#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "dcorr/datapipe/sampling.hpp"
#include "dcorr/encoders/correspondence_encoder.hpp"
#include "dcorr/encoders/segmenter.hpp"
#include "dcorr/encoders/semantic_encoder.hpp"
#include "dcorr/losses/losses.hpp"
#include "dcorr/matching/matching.hpp"
#include "dcorr/visibility/visibility.hpp"

namespace dcorr {

struct SemanticConfig {
  std::string backend = "handcrafted";
  HandcraftedSemanticOptions handcrafted;
};

struct VisibilityConfig {
  bool enabled = true;  // false applies the losses on the whole image
  int top_k = kDefaultTopK;
};

struct TrainSchedule {
  int64_t steps = 2000;
  int64_t batch_size = 8;
  double learning_rate = 1e-4;
  double weight_decay = 1e-4;
  int64_t warmup_steps = 500;
  double grad_clip_norm = 1.0;
  int64_t checkpoint_every = 100;
};

enum class DataKind { Videos, SyntheticTranslation };

struct DataConfig {
  DataKind kind = DataKind::Videos;
  std::filesystem::path root;  // video root, resolved against the config file
  int64_t crop = 256;
  int64_t resize_shorter = 288;
  IntervalRange interval;
  bool shared_crop = false;
  int64_t synthetic_count = 200;
  int64_t synthetic_size = 96;
  int synthetic_max_shift = 24;
  uint64_t synthetic_seed = 1234;
};

// Everything a run depends on. Serialized into every checkpoint; its hash
// guards resumption.
struct PipelineConfig {
  uint64_t seed = 0;
  bool strict_determinism = true;
  EncoderOptions encoder;
  SemanticConfig semantic;
  SegmenterOptions segmenter;
  double candidate_fraction = kDefaultCandidateFraction;
  VisibilityConfig visibility;
  LossOptions loss;
  TrainSchedule train;
  DataConfig data;
};

// Nested JSON with sections encoder, semantic, segmenter, matching,
// visibility, loss, train, data. Unknown keys and invalid values raise
// ConfigurationError naming the dotted key.
PipelineConfig config_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
nlohmann::json config_to_json(const PipelineConfig& config);
PipelineConfig load_config(const std::filesystem::path& path);

// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string config_hash(const PipelineConfig& config);

}  // namespace dcorr
