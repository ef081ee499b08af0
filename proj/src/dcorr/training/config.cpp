#include "dcorr/training/config.hpp"

#include <cstdio>
#include <fstream>
#include <set>

#include "dcorr/core/error.hpp"

namespace dcorr {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads keys out of one JSON object and rejects any it was not asked about.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j.is_object()) throw ConfigurationError("config: " + name() + " must be an object");
  }

  template <typename T>
  void get(const std::string& key, T& out) {
    seen_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      throw ConfigurationError("config: invalid value for " + dotted(key));
    }
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(j_.contains(key) ? j_.at(key) : empty, dotted(key));
  }

  std::string dotted(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) throw ConfigurationError("config: unknown key " + dotted(key));
    }
  }

 private:
  std::string name() const { return path_.empty() ? "root" : path_; }
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigurationError("config: " + key + " " + what);
}

}  // namespace

PipelineConfig config_from_json(const json& j, const fs::path& base_dir) {
  PipelineConfig c;
  Section root(j, "");
  root.get("seed", c.seed);
  std::string determinism = c.strict_determinism ? "strict" : "relaxed";
  root.get("determinism", determinism);
  require(determinism == "strict" || determinism == "relaxed", "determinism", "must be strict or relaxed");
  c.strict_determinism = determinism == "strict";

  auto enc = root.child("encoder");
  enc.get("channels", c.encoder.channels);
  enc.get("blocks", c.encoder.blocks);
  enc.get("heads", c.encoder.heads);
  enc.get("stem_channels", c.encoder.stem_channels);
  enc.get("mlp_ratio", c.encoder.mlp_ratio);
  enc.finish();
  require(c.encoder.channels > 0 && c.encoder.channels % 4 == 0, "encoder.channels", "must be a positive multiple of 4");
  require(c.encoder.blocks >= 0, "encoder.blocks", "must be >= 0");
  require(c.encoder.heads > 0 && c.encoder.channels % c.encoder.heads == 0, "encoder.heads", "must divide encoder.channels");
  require(c.encoder.stem_channels > 0 && c.encoder.mlp_ratio > 0, "encoder.stem_channels", "and mlp_ratio must be positive");

  auto sem = root.child("semantic");
  sem.get("backend", c.semantic.backend);
  sem.get("channels", c.semantic.handcrafted.channels);
  sem.get("histogram_bins", c.semantic.handcrafted.histogram_bins);
  sem.get("position_weight", c.semantic.handcrafted.position_weight);
  sem.get("seed", c.semantic.handcrafted.seed);
  sem.finish();
  require(c.semantic.handcrafted.channels > 0, "semantic.channels", "must be positive");

  auto seg = root.child("segmenter");
  seg.get("backend", c.segmenter.backend);
  seg.get("max_regions", c.segmenter.max_regions);
  seg.get("levels", c.segmenter.levels);
  seg.get("min_area", c.segmenter.min_area);
  seg.get("grid_rows", c.segmenter.grid_rows);
  seg.get("grid_cols", c.segmenter.grid_cols);
  seg.finish();
  require(c.segmenter.max_regions >= 1, "segmenter.max_regions", "must be >= 1");

  auto match = root.child("matching");
  match.get("candidate_fraction", c.candidate_fraction);
  match.finish();
  require(c.candidate_fraction > 0.0 && c.candidate_fraction <= 1.0, "matching.candidate_fraction", "must lie in (0, 1]");

  auto vis = root.child("visibility");
  vis.get("top_k", c.visibility.top_k);
  vis.get("enabled", c.visibility.enabled);
  std::string fallback = "full-image";
  vis.get("fallback", fallback);
  vis.finish();
  require(c.visibility.top_k >= 1, "visibility.top_k", "must be >= 1");
  require(fallback == "full-image", "visibility.fallback", "only supports full-image");

  auto loss = root.child("loss");
  loss.get("charbonnier_eps", c.loss.charbonnier.eps);
  loss.get("charbonnier_alpha", c.loss.charbonnier.alpha);
  loss.get("smoothness_ablation", c.loss.smoothness_ablation);
  std::string pairs = "within";
  loss.get("distance_pairs", pairs);
  require(pairs == "within" || pairs == "union", "loss.distance_pairs", "must be within or union");
  c.loss.pair_rule = pairs == "within" ? PairRule::WithinRegion : PairRule::UnionOfRegions;
  auto weights = loss.child("weights");
  weights.get("photo", c.loss.weights.photometric);
  weights.get("feat", c.loss.weights.feature_metric);
  weights.get("dist", c.loss.weights.distance);
  weights.finish();
  loss.finish();
  require(c.loss.charbonnier.eps > 0.0, "loss.charbonnier_eps", "must be positive");
  require(c.loss.weights.photometric >= 0 && c.loss.weights.feature_metric >= 0 && c.loss.weights.distance >= 0,
          "loss.weights", "must be non-negative");

  auto train = root.child("train");
  train.get("steps", c.train.steps);
  train.get("batch_size", c.train.batch_size);
  train.get("lr", c.train.learning_rate);
  train.get("weight_decay", c.train.weight_decay);
  train.get("warmup_steps", c.train.warmup_steps);
  train.get("grad_clip", c.train.grad_clip_norm);
  train.get("checkpoint_every", c.train.checkpoint_every);
  train.finish();
  require(c.train.steps > 0, "train.steps", "must be positive");
  require(c.train.batch_size > 0, "train.batch_size", "must be positive");
  require(c.train.learning_rate > 0, "train.lr", "must be positive");
  require(c.train.weight_decay >= 0, "train.weight_decay", "must be non-negative");
  require(c.train.warmup_steps >= 0, "train.warmup_steps", "must be non-negative");
  require(c.train.grad_clip_norm > 0, "train.grad_clip", "must be positive");
  require(c.train.checkpoint_every > 0, "train.checkpoint_every", "must be positive");

  auto data = root.child("data");
  std::string kind = c.data.kind == DataKind::Videos ? "videos" : "synthetic_translation";
  data.get("kind", kind);
  require(kind == "videos" || kind == "synthetic_translation", "data.kind", "must be videos or synthetic_translation");
  c.data.kind = kind == "videos" ? DataKind::Videos : DataKind::SyntheticTranslation;
  std::string root_dir;
  data.get("root", root_dir);
  if (!root_dir.empty()) {
    fs::path p(root_dir);
    c.data.root = p.is_relative() && !base_dir.empty() ? fs::weakly_canonical(base_dir / p) : p;
  }
  data.get("crop", c.data.crop);
  data.get("resize_shorter", c.data.resize_shorter);
  data.get("interval_min", c.data.interval.min_seconds);
  data.get("interval_max", c.data.interval.max_seconds);
  data.get("shared_crop", c.data.shared_crop);
  data.get("synthetic_count", c.data.synthetic_count);
  data.get("synthetic_size", c.data.synthetic_size);
  data.get("synthetic_max_shift", c.data.synthetic_max_shift);
  data.get("synthetic_seed", c.data.synthetic_seed);
  data.finish();
  require(c.data.crop > 0 && c.data.crop % kFeatureStride == 0, "data.crop", "must be a positive multiple of 8");
  require(c.data.resize_shorter >= c.data.crop, "data.resize_shorter", "must be at least data.crop");
  require(c.data.interval.min_seconds > 0 && c.data.interval.max_seconds >= c.data.interval.min_seconds,
          "data.interval_min/max", "must satisfy 0 < min <= max");
  require(c.data.synthetic_size > 0 && c.data.synthetic_size % kFeatureStride == 0, "data.synthetic_size",
          "must be a positive multiple of 8");
  require(c.data.synthetic_count > 0 && c.data.synthetic_max_shift >= 0, "data.synthetic_count",
          "must be positive (and max shift non-negative)");
  if (c.data.kind == DataKind::Videos) {
    // The root may legitimately be absent for inference-only configs; the
    // trainer checks it before indexing.
  }
  root.finish();
  return c;
}

json config_to_json(const PipelineConfig& c) {
  return json{
      {"seed", c.seed},
      {"determinism", c.strict_determinism ? "strict" : "relaxed"},
      {"encoder",
       {{"channels", c.encoder.channels}, {"blocks", c.encoder.blocks}, {"heads", c.encoder.heads},
        {"stem_channels", c.encoder.stem_channels}, {"mlp_ratio", c.encoder.mlp_ratio}}},
      {"semantic",
       {{"backend", c.semantic.backend}, {"channels", c.semantic.handcrafted.channels},
        {"histogram_bins", c.semantic.handcrafted.histogram_bins},
        {"position_weight", c.semantic.handcrafted.position_weight}, {"seed", c.semantic.handcrafted.seed}}},
      {"segmenter",
       {{"backend", c.segmenter.backend}, {"max_regions", c.segmenter.max_regions}, {"levels", c.segmenter.levels},
        {"min_area", c.segmenter.min_area}, {"grid_rows", c.segmenter.grid_rows}, {"grid_cols", c.segmenter.grid_cols}}},
      {"matching", {{"candidate_fraction", c.candidate_fraction}}},
      {"visibility", {{"top_k", c.visibility.top_k}, {"enabled", c.visibility.enabled}, {"fallback", "full-image"}}},
      {"loss",
       {{"charbonnier_eps", c.loss.charbonnier.eps},
        {"charbonnier_alpha", c.loss.charbonnier.alpha},
        {"smoothness_ablation", c.loss.smoothness_ablation},
        {"distance_pairs", c.loss.pair_rule == PairRule::WithinRegion ? "within" : "union"},
        {"weights",
         {{"photo", c.loss.weights.photometric}, {"feat", c.loss.weights.feature_metric},
          {"dist", c.loss.weights.distance}}}}},
      {"train",
       {{"steps", c.train.steps}, {"batch_size", c.train.batch_size}, {"lr", c.train.learning_rate},
        {"weight_decay", c.train.weight_decay}, {"warmup_steps", c.train.warmup_steps},
        {"grad_clip", c.train.grad_clip_norm}, {"checkpoint_every", c.train.checkpoint_every}}},
      {"data",
       {{"kind", c.data.kind == DataKind::Videos ? "videos" : "synthetic_translation"},
        {"root", c.data.root.string()},
        {"crop", c.data.crop},
        {"resize_shorter", c.data.resize_shorter},
        {"interval_min", c.data.interval.min_seconds},
        {"interval_max", c.data.interval.max_seconds},
        {"shared_crop", c.data.shared_crop},
        {"synthetic_count", c.data.synthetic_count},
        {"synthetic_size", c.data.synthetic_size},
        {"synthetic_max_shift", c.data.synthetic_max_shift},
        {"synthetic_seed", c.data.synthetic_seed}}},
  };
}

PipelineConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigurationError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigurationError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, fs::absolute(path).parent_path());
}

std::string config_hash(const PipelineConfig& config) {
  const std::string canonical = config_to_json(config).dump();
  uint64_t h = 1469598103934665603ull;
  for (unsigned char ch : canonical) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace dcorr
