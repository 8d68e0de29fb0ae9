#pragma once

#include <cstdint>

#include "lwf/tensor/prng.hpp"
#include "lwf/tensor/tensor.hpp"

namespace lwf::data {

struct AugPolicy {
  bool enabled = false;
  int max_translate_px = 3;
  bool vertical_translate = true;
  double hflip_prob = 0.5;
  double brightness = 0.3;
  double contrast = 0.3;
  double saturation = 0.3;
  double hue = 0.2;

  void validate(std::size_t width) const;
};

/// Concrete draws for one image.
struct AugParams {
  int dx = 0;
  int dy = 0;
  bool flip = false;
  double brightness = 1.0;
  double contrast = 1.0;
  double saturation = 1.0;
  double hue = 0.0;
};

/// Draw order: dx, dy, flip, brightness, contrast, saturation, hue (7 draws).
AugParams sample_aug_params(const AugPolicy& policy, Prng& rng);

/// Translate (reflect), flip, brightness, contrast, saturation, hue, clamp.
/// image is [3, H, W] with values in [0, 1]; src and dst may not alias.
void apply_aug(const float* src, float* dst, std::size_t height, std::size_t width, const AugParams& p);

Tensor<float> apply_aug(const Tensor<float>& image, const AugParams& p);

/// Identity when the policy is disabled.
Tensor<float> augment(const Tensor<float>& image, const AugPolicy& policy, Prng& rng);

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v);
void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b);

}  // namespace lwf::data
