// Training-time augmentation for binary marker images.
//
// Three augmenters are provided, all closed over binary images and all
// label-preserving:
//   noisy_cutout  per image: draw one window size s, tile the image with
//                 non-overlapping s×s windows (partial windows at the right
//                 and bottom edges participate at their clipped size), mask
//                 each window with a fixed probability — all-white or
//                 all-black with equal odds — then apply a separable
//                 Gaussian blur drawn from a small kernel set and threshold
//                 every non-zero value back to 1.
//   salt_pepper   each pixel is independently set to 1 with probability
//                 amount/2 and to 0 with probability amount/2.
//   cutout        one fixed-size square zero-mask at a uniformly random
//                 centre, clipped at the borders.
//
// Every augmenter consumes a random stream that does not depend on the
// image content, so a given (config, seed) pair touches the same locations
// on any input. Blur kernels are (horizontal extent, vertical extent); the
// per-axis Gaussian sigma follows sigma = 0.3*((k-1)/2 - 1) + 0.8 and the
// border is zero-padded.
#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "mbul/common.hpp"
#include "mbul/image.hpp"
#include "mbul/synthgen.hpp"

namespace mbul {

struct NoisyCutoutConfig {
  int window_min_px = 1;
  int window_max_px = 31;
  double mask_probability = 0.05;
  double white_fraction = 0.5;
  std::vector<std::pair<int, int>> blur_kernels = {
      {1, 1}, {1, 3}, {3, 1}, {3, 3}};

  void validate() const {
    check_config(window_min_px >= 1 && window_min_px <= window_max_px &&
                     window_max_px <= 31,
                 "NoisyCutoutConfig: window sizes must satisfy 1 <= min <= "
                 "max <= 31");
    check_config(mask_probability >= 0.0 && mask_probability <= 1.0,
                 "NoisyCutoutConfig: mask_probability must be in [0,1]");
    check_config(white_fraction >= 0.0 && white_fraction <= 1.0,
                 "NoisyCutoutConfig: white_fraction must be in [0,1]");
    check_config(!blur_kernels.empty(),
                 "NoisyCutoutConfig: need at least one blur kernel");
    for (const auto& [kx, ky] : blur_kernels)
      check_config(kx >= 1 && ky >= 1 && kx % 2 == 1 && ky % 2 == 1,
                   "NoisyCutoutConfig: kernel extents must be odd and >= 1");
  }
};

struct SpCutoutConfig {
  double amount = 0.05;
  int mask_size_px = 16;

  void validate() const {
    check_config(amount >= 0.0 && amount <= 1.0,
                 "SpCutoutConfig: amount must be in [0,1]");
    check_config(mask_size_px >= 1, "SpCutoutConfig: mask size must be >= 1");
  }
};

namespace detail {

inline std::vector<double> gaussian_taps(int k) {
  const double sigma = 0.3 * ((k - 1) * 0.5 - 1.0) + 0.8;
  const int c = (k - 1) / 2;
  std::vector<double> taps(static_cast<std::size_t>(k));
  double sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const double x = i - c;
    taps[static_cast<std::size_t>(i)] =
        std::exp(-x * x / (2.0 * sigma * sigma));
    sum += taps[static_cast<std::size_t>(i)];
  }
  for (double& t : taps) t /= sum;
  return taps;
}

// Separable zero-padded Gaussian blur followed by a >0 threshold. All taps
// and inputs are non-negative, so a pixel survives exactly when some pixel
// under the kernel support was lit.
inline BinaryImage blur_and_binarise(const BinaryImage& img, int kx, int ky) {
  if (kx == 1 && ky == 1) return img;
  const std::vector<double> tx = gaussian_taps(kx);
  const std::vector<double> ty = gaussian_taps(ky);
  const int rx = (kx - 1) / 2, ry = (ky - 1) / 2;
  std::vector<double> horiz(img.data.size(), 0.0);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int i = -rx; i <= rx; ++i) {
        const int xx = x + i;
        if (xx < 0 || xx >= img.width) continue;
        acc += tx[static_cast<std::size_t>(i + rx)] * img.at(xx, y);
      }
      horiz[img.index(x, y)] = acc;
    }
  BinaryImage out = ImageU8::zeros(img.width, img.height, 1);
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      double acc = 0.0;
      for (int j = -ry; j <= ry; ++j) {
        const int yy = y + j;
        if (yy < 0 || yy >= img.height) continue;
        acc += ty[static_cast<std::size_t>(j + ry)] * horiz[img.index(x, yy)];
      }
      out.at(x, y) = acc > 0.0 ? 1 : 0;
    }
  return out;
}

}  // namespace detail

inline BinaryImage noisy_cutout(const BinaryImage& img,
                                const NoisyCutoutConfig& cfg, Rng& rng) {
  cfg.validate();
  check_data(is_binary(img), "noisy_cutout: input must be binary");
  BinaryImage out = img;
  const int s = static_cast<int>(
      rng.uniform_int(cfg.window_min_px, cfg.window_max_px));
  for (int wy = 0; wy < img.height; wy += s)
    for (int wx = 0; wx < img.width; wx += s) {
      if (!rng.bernoulli(cfg.mask_probability)) continue;
      const std::uint8_t fill = rng.bernoulli(cfg.white_fraction) ? 1 : 0;
      const int x_end = std::min(wx + s, img.width);
      const int y_end = std::min(wy + s, img.height);
      for (int y = wy; y < y_end; ++y)
        for (int x = wx; x < x_end; ++x) out.at(x, y) = fill;
    }
  const auto& [kx, ky] = cfg.blur_kernels[static_cast<std::size_t>(
      rng.uniform_int(0, static_cast<std::int64_t>(cfg.blur_kernels.size()) -
                             1))];
  return detail::blur_and_binarise(out, kx, ky);
}

inline BinaryImage salt_pepper(const BinaryImage& img, double amount,
                               Rng& rng) {
  check_config(amount >= 0.0 && amount <= 1.0,
               "salt_pepper: amount must be in [0,1]");
  BinaryImage out = img;
  for (auto& v : out.data) {
    const double r = rng.uniform();
    if (r < 0.5 * amount)
      v = 1;
    else if (r < amount)
      v = 0;
  }
  return out;
}

inline BinaryImage cutout(const BinaryImage& img, int mask_size_px, Rng& rng) {
  check_config(mask_size_px >= 1, "cutout: mask size must be >= 1");
  BinaryImage out = img;
  const int cx = static_cast<int>(rng.uniform_int(0, img.width - 1));
  const int cy = static_cast<int>(rng.uniform_int(0, img.height - 1));
  const int x_lo = std::max(cx - mask_size_px / 2, 0);
  const int y_lo = std::max(cy - mask_size_px / 2, 0);
  const int x_hi = std::min(cx - mask_size_px / 2 + mask_size_px, img.width);
  const int y_hi = std::min(cy - mask_size_px / 2 + mask_size_px, img.height);
  for (int y = y_lo; y < y_hi; ++y)
    for (int x = x_lo; x < x_hi; ++x) out.at(x, y) = 0;
  return out;
}

inline BinaryImage sp_cutout(const BinaryImage& img, const SpCutoutConfig& cfg,
                             Rng& rng) {
  cfg.validate();
  return cutout(salt_pepper(img, cfg.amount, rng), cfg.mask_size_px, rng);
}

// ---------------------------------------------------------------------------
// Labelled wrappers and the augmenter handle used by training
// ---------------------------------------------------------------------------

inline LabeledBinaryImage noisy_cutout(const LabeledBinaryImage& img,
                                       const NoisyCutoutConfig& cfg, Rng& rng) {
  LabeledBinaryImage out = img;
  out.pixels = noisy_cutout(img.pixels, cfg, rng);
  return out;
}

inline LabeledBinaryImage sp_cutout(const LabeledBinaryImage& img,
                                    const SpCutoutConfig& cfg, Rng& rng) {
  LabeledBinaryImage out = img;
  out.pixels = sp_cutout(img.pixels, cfg, rng);
  return out;
}

// An augmenter maps pixels to pixels under an explicit random stream; the
// caller owns label handling (labels never change under augmentation).
using Augmenter = std::function<BinaryImage(const BinaryImage&, Rng&)>;

inline Augmenter make_noisy_cutout(const NoisyCutoutConfig& cfg = {}) {
  cfg.validate();
  return [cfg](const BinaryImage& img, Rng& rng) {
    return noisy_cutout(img, cfg, rng);
  };
}

inline Augmenter make_sp_cutout(const SpCutoutConfig& cfg = {}) {
  cfg.validate();
  return [cfg](const BinaryImage& img, Rng& rng) {
    return sp_cutout(img, cfg, rng);
  };
}

inline Augmenter make_identity_augmenter() {
  return [](const BinaryImage& img, Rng&) { return img; };
}

// Named augmenters as selected from experiment configuration.
inline Augmenter make_augmenter(const std::string& name) {
  if (name == "noisy_cutout") return make_noisy_cutout();
  if (name == "sp_cutout") return make_sp_cutout();
  if (name == "none") return make_identity_augmenter();
  throw ConfigError("unknown augmenter: " + name +
                    " (expected noisy_cutout, sp_cutout, or none)");
}

}  // namespace mbul
