#pragma once

#include "dcorr/training/config.hpp"

namespace dcorr::testing {

// A tiny synthetic-translation configuration that trains in well under a
// second per step.
inline PipelineConfig small_config(uint64_t seed = 1) {
  PipelineConfig c;
  c.seed = seed;
  c.encoder.channels = 16;
  c.encoder.blocks = 1;
  c.encoder.heads = 2;
  c.encoder.stem_channels = 8;
  c.semantic.handcrafted.channels = 16;
  c.candidate_fraction = 0.25;
  c.segmenter.backend = "grid";
  c.segmenter.grid_rows = 2;
  c.segmenter.grid_cols = 2;
  c.visibility.top_k = 3;
  c.train.steps = 6;
  c.train.batch_size = 2;
  c.train.learning_rate = 1e-3;
  c.train.warmup_steps = 2;
  c.train.checkpoint_every = 3;
  c.data.kind = DataKind::SyntheticTranslation;
  c.data.synthetic_count = 8;
  c.data.synthetic_size = 32;
  c.data.synthetic_max_shift = 6;
  c.data.crop = 32;
  c.data.resize_shorter = 32;
  return c;
}

}  // namespace dcorr::testing
