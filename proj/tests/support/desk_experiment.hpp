#pragma once

#include <vector>

#include "dcorr/datapipe/synthetic.hpp"
#include "dcorr/training/trainer.hpp"

namespace dcorr::testing {

inline constexpr double kDeskCandidateFraction = 0.2;
inline constexpr int64_t kDeskSteps = 2000;
inline constexpr int64_t kDeskEvalEvery = 100;

// Configuration of the synthetic translation experiment.
PipelineConfig desk_config(uint64_t seed, double candidate_fraction, int64_t steps);

// Held-out pairs, disjoint from the training set by seed.
std::vector<TranslationPair> held_out_pairs(int64_t count = 50);

// Mean endpoint error in full-resolution pixels of the feature-resolution
// flow, over cells whose true match stays inside the target image.
double feature_epe(CorrespondenceModel& model, const std::vector<TranslationPair>& pairs);

struct DeskRun {
  double initial_epe = 0.0;
  double final_epe = 0.0;
  std::vector<std::pair<int64_t, double>> curve;  // (step, EPE)
  std::vector<double> losses;
};

// Trains for config.train.steps, measuring held-out EPE every `eval_every`
// steps.
DeskRun run_desk_experiment(const PipelineConfig& config, const std::vector<TranslationPair>& held_out,
                            int64_t eval_every);

}  // namespace dcorr::testing
