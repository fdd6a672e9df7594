#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "scenefusion/common/error.hpp"

namespace scenefusion::vision {

/// Dense height x width x channels array, channel-last.
struct Tensor3 {
  int height = 0;
  int width = 0;
  int channels = 0;
  std::vector<double> data;

  Tensor3() = default;
  Tensor3(int h, int w, int c, double fill = 0.0)
      : height(h), width(w), channels(c), data(static_cast<std::size_t>(h) * w * c, fill) {
    require(h >= 1 && w >= 1 && c >= 1, "Tensor3: dimensions must be >= 1");
  }

  std::size_t index(int y, int x, int c) const {
    return (static_cast<std::size_t>(y) * width + x) * channels + c;
  }
  double& operator()(int y, int x, int c) { return data[index(y, x, c)]; }
  double operator()(int y, int x, int c) const { return data[index(y, x, c)]; }
  std::size_t size() const { return data.size(); }

  friend bool operator==(const Tensor3&, const Tensor3&) = default;
};

// Values in [0, 1]; preprocessed images are square with 3 channels.
using ImageTensor = Tensor3;

constexpr int kDefaultImageSize = 128;

/// Largest centred square; an odd excess puts the extra row/column after.
inline Tensor3 center_crop_square(const Tensor3& img) {
  const int side = std::min(img.height, img.width);
  if (img.height == side && img.width == side) return img;
  const int y0 = (img.height - side) / 2;
  const int x0 = (img.width - side) / 2;
  Tensor3 out(side, side, img.channels);
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x)
      for (int c = 0; c < img.channels; ++c) out(y, x, c) = img(y0 + y, x0 + x, c);
  return out;
}

/// Bilinear resampling with pixel-centre alignment; a same-size resize is
/// an exact copy.
inline Tensor3 resize_bilinear(const Tensor3& img, int out_h, int out_w) {
  require(out_h >= 1 && out_w >= 1, "resize_bilinear: target must be >= 1");
  if (img.height == out_h && img.width == out_w) return img;
  Tensor3 out(out_h, out_w, img.channels);
  const double sy = static_cast<double>(img.height) / out_h;
  const double sx = static_cast<double>(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, static_cast<double>(img.height - 1));
    const int y0 = static_cast<int>(std::floor(fy));
    const int y1 = std::min(y0 + 1, img.height - 1);
    const double wy = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, static_cast<double>(img.width - 1));
      const int x0 = static_cast<int>(std::floor(fx));
      const int x1 = std::min(x0 + 1, img.width - 1);
      const double wx = fx - x0;
      for (int c = 0; c < img.channels; ++c) {
        const double top = img(y0, x0, c) * (1.0 - wx) + img(y0, x1, c) * wx;
        const double bottom = img(y1, x0, c) * (1.0 - wx) + img(y1, x1, c) * wx;
        out(y, x, c) = top * (1.0 - wy) + bottom * wy;
      }
    }
  }
  return out;
}

/// Centre-crop to square, then resize to size x size. Idempotent on
/// conformant input.
inline ImageTensor preprocess(const Tensor3& img, int size = kDefaultImageSize) {
  require(img.channels == 3, "preprocess: expected 3 channels");
  return resize_bilinear(center_crop_square(img), size, size);
}

}  // namespace scenefusion::vision
