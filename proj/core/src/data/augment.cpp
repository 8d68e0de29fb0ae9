#include "lwf/data/augment.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "lwf/tensor/ops.hpp"

namespace lwf::data {

namespace {

constexpr float kLumaR = 0.299f, kLumaG = 0.587f, kLumaB = 0.114f;

inline float clamp01(float v) { return std::clamp(v, 0.0f, 1.0f); }

}  // namespace

void AugPolicy::validate(std::size_t width) const {
  require(max_translate_px >= 0, ErrorKind::config, "augmentation translate must be >= 0");
  require(static_cast<std::size_t>(max_translate_px) < width, ErrorKind::config,
          "augmentation translate must be smaller than the image width");
  require(hflip_prob >= 0.0 && hflip_prob <= 1.0, ErrorKind::config, "flip probability must be in [0,1]");
  require(brightness >= 0.0 && contrast >= 0.0 && saturation >= 0.0 && hue >= 0.0, ErrorKind::config,
          "jitter magnitudes must be >= 0");
  require(brightness <= 1.0 && contrast <= 1.0 && saturation <= 1.0, ErrorKind::config,
          "brightness/contrast/saturation jitter must be <= 1");
  require(hue <= 0.5, ErrorKind::config, "hue jitter must be <= 0.5");
}

AugParams sample_aug_params(const AugPolicy& policy, Prng& rng) {
  AugParams p;
  const int m = policy.max_translate_px;
  p.dx = static_cast<int>(rng.uniform_int(-m, m));
  const int dy = static_cast<int>(rng.uniform_int(-m, m));
  p.dy = policy.vertical_translate ? dy : 0;
  p.flip = rng.bernoulli(policy.hflip_prob);
  p.brightness = rng.uniform(1.0 - policy.brightness, 1.0 + policy.brightness);
  p.contrast = rng.uniform(1.0 - policy.contrast, 1.0 + policy.contrast);
  p.saturation = rng.uniform(1.0 - policy.saturation, 1.0 + policy.saturation);
  p.hue = rng.uniform(-policy.hue, policy.hue);
  return p;
}

void rgb_to_hsv(float r, float g, float b, float& h, float& s, float& v) {
  const float mx = std::max({r, g, b});
  const float mn = std::min({r, g, b});
  const float c = mx - mn;
  v = mx;
  s = mx > 0.0f ? c / mx : 0.0f;
  if (c <= 0.0f) {
    h = 0.0f;
    return;
  }
  float hh;
  if (mx == r)
    hh = (g - b) / c;
  else if (mx == g)
    hh = 2.0f + (b - r) / c;
  else
    hh = 4.0f + (r - g) / c;
  hh /= 6.0f;
  if (hh < 0.0f) hh += 1.0f;
  h = hh;
}

void hsv_to_rgb(float h, float s, float v, float& r, float& g, float& b) {
  const float h6 = h * 6.0f;
  const float fi = std::floor(h6);
  const float f = h6 - fi;
  const int i = static_cast<int>(fi) % 6;
  const float p = v * (1.0f - s);
  const float q = v * (1.0f - s * f);
  const float t = v * (1.0f - s * (1.0f - f));
  switch (i) {
    case 0: r = v, g = t, b = p; break;
    case 1: r = q, g = v, b = p; break;
    case 2: r = p, g = v, b = t; break;
    case 3: r = p, g = q, b = v; break;
    case 4: r = t, g = p, b = v; break;
    default: r = v, g = p, b = q; break;
  }
}

void apply_aug(const float* src, float* dst, std::size_t height, std::size_t width, const AugParams& p) {
  const std::size_t plane = height * width;
  require(static_cast<std::size_t>(std::abs(p.dx)) < width && static_cast<std::size_t>(std::abs(p.dy)) < height,
          ErrorKind::argument, "translation must be smaller than the image");

  // Translation with reflection, then horizontal flip, as one gather.
  for (std::size_t c = 0; c < 3; ++c)
    for (std::size_t y = 0; y < height; ++y) {
      const std::size_t sy = reflect_index(static_cast<std::ptrdiff_t>(y) - p.dy, height);
      for (std::size_t x = 0; x < width; ++x) {
        const std::size_t fx = p.flip ? width - 1 - x : x;
        const std::size_t sx = reflect_index(static_cast<std::ptrdiff_t>(fx) - p.dx, width);
        dst[c * plane + y * width + x] = src[c * plane + sy * width + sx];
      }
    }

  float* r = dst;
  float* g = dst + plane;
  float* b = dst + 2 * plane;

  if (p.brightness != 1.0) {
    const auto f = static_cast<float>(p.brightness);
    for (std::size_t i = 0; i < 3 * plane; ++i) dst[i] = clamp01(dst[i] * f);
  }
  if (p.contrast != 1.0) {
    double mean = 0.0;
    for (std::size_t i = 0; i < plane; ++i) mean += kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
    const auto m = static_cast<float>(mean / static_cast<double>(plane));
    const auto f = static_cast<float>(p.contrast);
    for (std::size_t i = 0; i < 3 * plane; ++i) dst[i] = clamp01(dst[i] * f + m * (1.0f - f));
  }
  if (p.saturation != 1.0) {
    const auto f = static_cast<float>(p.saturation);
    for (std::size_t i = 0; i < plane; ++i) {
      const float l = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
      r[i] = clamp01(r[i] * f + l * (1.0f - f));
      g[i] = clamp01(g[i] * f + l * (1.0f - f));
      b[i] = clamp01(b[i] * f + l * (1.0f - f));
    }
  }
  if (p.hue != 0.0) {
    const auto off = static_cast<float>(p.hue);
    for (std::size_t i = 0; i < plane; ++i) {
      float h, s, v;
      rgb_to_hsv(r[i], g[i], b[i], h, s, v);
      h += off;
      h -= std::floor(h);
      if (h >= 1.0f) h = 0.0f;
      hsv_to_rgb(h, s, v, r[i], g[i], b[i]);
    }
  }
  for (std::size_t i = 0; i < 3 * plane; ++i) dst[i] = clamp01(dst[i]);
}

Tensor<float> apply_aug(const Tensor<float>& image, const AugParams& p) {
  require(image.rank() == 3 && image.dim(0) == 3, ErrorKind::shape,
          "augment expects [3,H,W], got " + shape_string(image.shape()));
  Tensor<float> out(image.shape());
  apply_aug(image.raw(), out.raw(), image.dim(1), image.dim(2), p);
  return out;
}

Tensor<float> augment(const Tensor<float>& image, const AugPolicy& policy, Prng& rng) {
  if (!policy.enabled) return image;
  return apply_aug(image, sample_aug_params(policy, rng));
}

}  // namespace lwf::data
