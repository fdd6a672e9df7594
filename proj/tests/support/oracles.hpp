#pragma once

// Brute-force reference implementations used only by tests. They share no
// code with the library paths they check.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

namespace oracle {

// X_k = sum_n x_n cos(pi/N (n + 1/2) k), evaluated literally.
inline std::vector<double> dct(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    long double acc = 0;
    for (std::size_t i = 0; i < n; ++i)
      acc += x[i] * std::cos(std::numbers::pi_v<long double> / n * (i + 0.5L) * k);
    out[k] = static_cast<double>(acc);
  }
  return out;
}

// O(N^2) DFT with an exact integer-reduced twiddle table.
inline std::vector<double> power_spectrum(const std::vector<double>& frame, int fft_size) {
  std::vector<double> x(fft_size, 0.0);
  std::copy(frame.begin(), frame.end(), x.begin());
  std::vector<double> c(fft_size), s(fft_size);
  for (int m = 0; m < fft_size; ++m) {
    c[m] = std::cos(2.0 * std::numbers::pi * m / fft_size);
    s[m] = std::sin(2.0 * std::numbers::pi * m / fft_size);
  }
  std::vector<double> out(fft_size / 2 + 1);
  for (int k = 0; k <= fft_size / 2; ++k) {
    double re = 0, im = 0;
    long long idx = 0;
    for (int n = 0; n < fft_size; ++n) {
      re += x[n] * c[idx];
      im -= x[n] * s[idx];
      idx += k;
      if (idx >= fft_size) idx -= fft_size;
    }
    out[k] = (re * re + im * im) / fft_size;
  }
  return out;
}

inline double mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double inv_mel(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

// Row-per-filter triangular weights; each row scaled to peak 1.
inline std::vector<std::vector<double>> mel_bank(int filters, int fft_size, int sample_rate) {
  const double top = mel(sample_rate / 2.0);
  std::vector<std::vector<double>> bank(filters, std::vector<double>(fft_size / 2 + 1, 0.0));
  for (int i = 0; i < filters; ++i) {
    const double lo = inv_mel(top * i / (filters + 1));
    const double mid = inv_mel(top * (i + 1) / (filters + 1));
    const double hi = inv_mel(top * (i + 2) / (filters + 1));
    double peak = 0;
    for (int b = 0; b <= fft_size / 2; ++b) {
      const double f = b * static_cast<double>(sample_rate) / fft_size;
      double w = 0;
      if (f > lo && f <= mid) w = (f - lo) / (mid - lo);
      if (f > mid && f < hi) w = (hi - f) / (hi - mid);
      bank[i][b] = w;
      peak = std::max(peak, w);
    }
    for (double& w : bank[i]) w /= peak;
  }
  return bank;
}

inline std::vector<double> mfcc(const std::vector<double>& frame, int coeffs = 13, int filters = 26,
                                int fft_size = 4096, int sample_rate = 16000, double floor = 1e-10) {
  const auto p = power_spectrum(frame, fft_size);
  const auto bank = mel_bank(filters, fft_size, sample_rate);
  std::vector<double> logmel(filters);
  for (int i = 0; i < filters; ++i) {
    double e = 0;
    for (std::size_t b = 0; b < p.size(); ++b) e += bank[i][b] * p[b];
    logmel[i] = std::log(std::max(e, floor));
  }
  auto c = dct(logmel);
  c.resize(coeffs);
  return c;
}

// Plain matrix arithmetic: layers of (W, b, relu?) applied in order.
struct Layer {
  std::vector<std::vector<double>> w;
  std::vector<double> b;
  bool relu;
};

inline std::vector<double> forward(const std::vector<Layer>& layers, std::vector<double> x) {
  for (const auto& l : layers) {
    std::vector<double> y(l.b);
    for (std::size_t o = 0; o < y.size(); ++o)
      for (std::size_t i = 0; i < x.size(); ++i) y[o] += l.w[o][i] * x[i];
    if (l.relu)
      for (double& v : y) v = std::max(v, 0.0);
    x = y;
  }
  return x;
}

// in[y][x][c], k[o][ky][kx][c]; valid padding.
using Image = std::vector<std::vector<std::vector<double>>>;
using Kernel = std::vector<std::vector<std::vector<std::vector<double>>>>;

inline Image conv(const Image& in, const Kernel& k, int stride) {
  const int h = in.size(), w = in[0].size(), c = in[0][0].size();
  const int oc = k.size(), ks = k[0].size();
  const int oh = (h - ks) / stride + 1, ow = (w - ks) / stride + 1;
  Image out(oh, std::vector<std::vector<double>>(ow, std::vector<double>(oc, 0.0)));
  for (int o = 0; o < oc; ++o)
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        for (int ky = 0; ky < ks; ++ky)
          for (int kx = 0; kx < ks; ++kx)
            for (int ch = 0; ch < c; ++ch) out[y][x][o] += in[y * stride + ky][x * stride + kx][ch] * k[o][ky][kx][ch];
  return out;
}

}  // namespace oracle
