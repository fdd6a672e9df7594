#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "scenefusion/common/error.hpp"
#include "scenefusion/vision/tensor.hpp"

namespace scenefusion::vision {

/// out_channels x size x size x in_channels kernels plus one bias per
/// output channel.
struct ConvKernels {
  int out_channels = 0;
  int size = 0;
  int in_channels = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  ConvKernels() = default;
  ConvKernels(int out_c, int k, int in_c)
      : out_channels(out_c),
        size(k),
        in_channels(in_c),
        weights(static_cast<std::size_t>(out_c) * k * k * in_c, 0.0),
        bias(static_cast<std::size_t>(out_c), 0.0) {
    require(out_c >= 1 && k >= 1 && in_c >= 1, "ConvKernels: dims must be >= 1");
  }

  std::size_t index(int o, int ky, int kx, int c) const {
    return ((static_cast<std::size_t>(o) * size + ky) * size + kx) * in_channels + c;
  }
  double& operator()(int o, int ky, int kx, int c) { return weights[index(o, ky, kx, c)]; }
  double operator()(int o, int ky, int kx, int c) const { return weights[index(o, ky, kx, c)]; }
};

inline int conv_output_dim(int in, int kernel, int stride, int padding) {
  return (in + 2 * padding - kernel) / stride + 1;
}

/// Cross-correlation with zero padding; output side is
/// floor((in + 2*padding - k) / stride) + 1.
inline Tensor3 conv2d(const Tensor3& input, const ConvKernels& k, int stride = 1, int padding = 0) {
  require(stride >= 1 && padding >= 0, "conv2d: stride must be >= 1 and padding >= 0");
  require(k.in_channels == input.channels, "conv2d: kernel channels do not match input");
  require(k.size <= input.height + 2 * padding && k.size <= input.width + 2 * padding,
          "conv2d: kernel larger than input");
  const int oh = conv_output_dim(input.height, k.size, stride, padding);
  const int ow = conv_output_dim(input.width, k.size, stride, padding);
  Tensor3 out(oh, ow, k.out_channels);
  const int cin = input.channels;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      double* acc = &out(oy, ox, 0);
      for (int o = 0; o < k.out_channels; ++o) acc[o] = k.bias[o];
      for (int ky = 0; ky < k.size; ++ky) {
        const int iy = oy * stride + ky - padding;
        if (iy < 0 || iy >= input.height) continue;
        for (int kx = 0; kx < k.size; ++kx) {
          const int ix = ox * stride + kx - padding;
          if (ix < 0 || ix >= input.width) continue;
          const double* px = input.data.data() + input.index(iy, ix, 0);
          for (int o = 0; o < k.out_channels; ++o) {
            const double* w = &k.weights[k.index(o, ky, kx, 0)];
            double s = 0.0;
            for (int c = 0; c < cin; ++c) s += w[c] * px[c];
            acc[o] += s;
          }
        }
      }
    }
  }
  return out;
}

struct ConvGrad {
  Tensor3 input;
  std::vector<double> weights;
  std::vector<double> bias;
};

/// Gradients of a conv2d call given d(loss)/d(output).
inline ConvGrad conv2d_backward(const Tensor3& input, const ConvKernels& k, const Tensor3& grad_out, int stride = 1,
                                int padding = 0) {
  const int oh = conv_output_dim(input.height, k.size, stride, padding);
  const int ow = conv_output_dim(input.width, k.size, stride, padding);
  require(grad_out.height == oh && grad_out.width == ow && grad_out.channels == k.out_channels,
          "conv2d_backward: grad_out shape mismatch");
  ConvGrad g{Tensor3(input.height, input.width, input.channels), std::vector<double>(k.weights.size(), 0.0),
             std::vector<double>(k.bias.size(), 0.0)};
  const int cin = input.channels;
  for (int oy = 0; oy < oh; ++oy) {
    for (int ox = 0; ox < ow; ++ox) {
      const double* go = grad_out.data.data() + grad_out.index(oy, ox, 0);
      for (int o = 0; o < k.out_channels; ++o) g.bias[o] += go[o];
      for (int ky = 0; ky < k.size; ++ky) {
        const int iy = oy * stride + ky - padding;
        if (iy < 0 || iy >= input.height) continue;
        for (int kx = 0; kx < k.size; ++kx) {
          const int ix = ox * stride + kx - padding;
          if (ix < 0 || ix >= input.width) continue;
          const double* px = input.data.data() + input.index(iy, ix, 0);
          double* gpx = &g.input(iy, ix, 0);
          for (int o = 0; o < k.out_channels; ++o) {
            const double d = go[o];
            if (d == 0.0) continue;
            const std::size_t base = k.index(o, ky, kx, 0);
            for (int c = 0; c < cin; ++c) {
              g.weights[base + c] += d * px[c];
              gpx[c] += d * k.weights[base + c];
            }
          }
        }
      }
    }
  }
  return g;
}

/// Non-overlapping window x window maximum per channel.
inline Tensor3 maxpool2d(const Tensor3& input, int window) {
  require(window >= 1, "maxpool2d: window must be >= 1");
  require(input.height % window == 0 && input.width % window == 0,
          "maxpool2d: spatial dims " + std::to_string(input.height) + "x" + std::to_string(input.width) +
              " not divisible by window " + std::to_string(window));
  Tensor3 out(input.height / window, input.width / window, input.channels);
  for (int oy = 0; oy < out.height; ++oy)
    for (int ox = 0; ox < out.width; ++ox)
      for (int c = 0; c < input.channels; ++c) {
        double m = -std::numeric_limits<double>::infinity();
        for (int dy = 0; dy < window; ++dy)
          for (int dx = 0; dx < window; ++dx) m = std::max(m, input(oy * window + dy, ox * window + dx, c));
        out(oy, ox, c) = m;
      }
  return out;
}

/// Routes each output gradient to the first maximal element of its window.
inline Tensor3 maxpool2d_backward(const Tensor3& input, int window, const Tensor3& grad_out) {
  require(grad_out.height * window == input.height && grad_out.width * window == input.width &&
              grad_out.channels == input.channels,
          "maxpool2d_backward: grad_out shape mismatch");
  Tensor3 g(input.height, input.width, input.channels);
  for (int oy = 0; oy < grad_out.height; ++oy)
    for (int ox = 0; ox < grad_out.width; ++ox)
      for (int c = 0; c < input.channels; ++c) {
        int by = oy * window, bx = ox * window;
        for (int dy = 0; dy < window; ++dy)
          for (int dx = 0; dx < window; ++dx) {
            const int y = oy * window + dy, x = ox * window + dx;
            if (input(y, x, c) > input(by, bx, c)) by = y, bx = x;
          }
        g(by, bx, c) += grad_out(oy, ox, c);
      }
  return g;
}

inline Tensor3 relu(Tensor3 t) {
  for (double& v : t.data) v = v > 0.0 ? v : 0.0;
  return t;
}

}  // namespace scenefusion::vision
