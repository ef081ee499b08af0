#pragma once

#include <cstdint>
#include <vector>

#include "dcorr/datapipe/annotations.hpp"
#include "dcorr/datapipe/sampling.hpp"

namespace dcorr {

// Multi-octave color value noise with a few solid shapes, [3,h,w] in [0,1].
torch::Tensor procedural_texture(int64_t h, int64_t w, Rng& rng);

// Two size x size crops of one texture. The second crop is offset by an
// integer shift in [-max_shift, max_shift]^2, so the true flow from image1 to
// image2 is constant: (flow_x, flow_y) = -shift.
struct TranslationPair {
  torch::Tensor image1, image2;
  double flow_x = 0.0;
  double flow_y = 0.0;
};

TranslationPair make_translation_pair(int64_t size, int max_shift, Rng& rng);
std::vector<TranslationPair> make_translation_dataset(int64_t count, int64_t size, int max_shift,
                                                      uint64_t seed);

// Ray-cast scene: a textured rectangular panel hinged on a revolute joint in
// front of a textured wall, seen by a pinhole camera in two joint states.
struct RevoluteSceneOptions {
  int64_t size = 128;
  double min_angle_deg = 20.0;
  double max_angle_deg = 40.0;
};

ArticulatedPairAnnotation render_revolute_pair(const RevoluteSceneOptions& options, Rng& rng);

}  // namespace dcorr
