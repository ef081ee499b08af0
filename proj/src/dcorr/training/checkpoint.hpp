#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "dcorr/training/model.hpp"

namespace dcorr {

// In-memory checkpoint. Tensor names are "encoder/<param>" for weights and
// "adamw/<param>/exp_avg", "adamw/<param>/exp_avg_sq" for optimizer moments.
struct Checkpoint {
  PipelineConfig config;
  std::string config_hash;
  int64_t step = 0;
  std::vector<std::pair<std::string, torch::Tensor>> tensors;
  std::map<std::string, int64_t> optimizer_steps;  // per-parameter AdamW step counts
};

// Byte layout: "DCK1", u32 little-endian header length, JSON header (config,
// hash, step, tensor table with dtype/shape/offset), then the raw
// little-endian tensor payload. Encoding is deterministic, so
// decode -> encode reproduces the input bytes.
std::string encode_checkpoint(const Checkpoint& checkpoint);
Checkpoint decode_checkpoint(const std::string& bytes);

// Written to a temporary sibling and renamed into place.
void write_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// `optimizer` may be null (weights only).
Checkpoint capture_checkpoint(const CorrespondenceModel& model, const torch::optim::AdamW* optimizer,
                              int64_t step);
void restore_weights(const Checkpoint& checkpoint, CorrespondenceModel& model);
void restore_optimizer(const Checkpoint& checkpoint, const CorrespondenceModel& model,
                       torch::optim::AdamW& optimizer);

std::unique_ptr<CorrespondenceModel> model_from_checkpoint(const Checkpoint& checkpoint);
std::unique_ptr<CorrespondenceModel> load_model(const std::filesystem::path& checkpoint_path);

}  // namespace dcorr
