#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "scenefusion/common/error.hpp"
#include "scenefusion/dsp/fft.hpp"

namespace scenefusion::dsp {

/// Mono audio with amplitudes in [-1, 1].
struct AudioClip {
  std::vector<double> samples;
  int sample_rate = 16000;

  double duration_seconds() const {
    return static_cast<double>(samples.size()) / static_cast<double>(sample_rate);
  }
};

using AudioFeatureVector = std::vector<double>;

/// Feature-extraction settings. Defaults give 8 windows x 13 coefficients
/// = 104 values for a one-second clip at 16 kHz.
struct MfccConfig {
  double window_seconds = 0.25;
  int windows_per_clip = 8;
  int coefficients_per_window = 13;
  int mel_filters = 26;
  int fft_size = 4096;
  double log_floor = 1e-10;
  int sample_rate = 16000;
  // Off by default; the reference pipeline uses a rectangular window and no
  // pre-emphasis.
  bool hamming_window = false;
  double pre_emphasis = 0.0;

  int frame_length() const {
    return static_cast<int>(std::lround(window_seconds * sample_rate));
  }
  int clip_length() const { return sample_rate; }
  int feature_length() const { return windows_per_clip * coefficients_per_window; }
  int spectrum_bins() const { return fft_size / 2 + 1; }

  void validate() const {
    require(sample_rate > 0, "mfcc: sample_rate must be positive");
    require(window_seconds > 0.0, "mfcc: window_seconds must be positive");
    require(windows_per_clip >= 1, "mfcc: windows_per_clip must be >= 1");
    require(coefficients_per_window >= 1, "mfcc: coefficients_per_window must be >= 1");
    require(mel_filters >= 2, "mfcc: mel_filters must be >= 2");
    require(fft_size > 0 && is_power_of_two(static_cast<std::size_t>(fft_size)),
            "mfcc: fft_size must be a power of two");
    require(coefficients_per_window <= mel_filters, "mfcc: coefficients_per_window exceeds mel_filters");
    require(mel_filters <= fft_size / 2, "mfcc: mel_filters exceeds fft_size/2");
    require(frame_length() >= 1 && frame_length() <= fft_size, "mfcc: frame length exceeds fft_size");
    require(log_floor > 0.0, "mfcc: log_floor must be positive");
    require(pre_emphasis >= 0.0 && pre_emphasis < 1.0, "mfcc: pre_emphasis must be in [0, 1)");
  }
};

/// Values are row-major, rows x cols.
struct FilterBank {
  int rows = 0;
  int cols = 0;
  std::vector<double> weights;
  std::vector<double> center_hz;

  double operator()(int r, int c) const { return weights[static_cast<std::size_t>(r) * cols + c]; }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

/// Unnormalized DCT-II: X_k = sum_n x_n cos(pi/N (n + 1/2) k).
inline std::vector<double> dct_ii(std::span<const double> x) {
  const std::size_t n = x.size();
  require(n >= 1, "dct_ii: empty input");
  std::vector<double> out(n, 0.0);
  const double scale = std::numbers::pi / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i] * std::cos(scale * (static_cast<double>(i) + 0.5) * static_cast<double>(k));
    }
    out[k] = acc;
  }
  return out;
}

/// One-sided |DFT|^2 / fft_size of a frame zero-padded to fft_size.
inline std::vector<double> power_spectrum(std::span<const double> frame, int fft_size) {
  require(fft_size > 0 && is_power_of_two(static_cast<std::size_t>(fft_size)),
          "power_spectrum: fft_size must be a power of two");
  require(frame.size() <= static_cast<std::size_t>(fft_size), "power_spectrum: frame longer than fft_size");
  std::vector<std::complex<double>> buf(static_cast<std::size_t>(fft_size));
  std::copy(frame.begin(), frame.end(), buf.begin());
  fft_inplace(buf);
  const std::size_t bins = static_cast<std::size_t>(fft_size) / 2 + 1;
  std::vector<double> power(bins);
  const double inv_n = 1.0 / static_cast<double>(fft_size);
  for (std::size_t k = 0; k < bins; ++k) power[k] = std::norm(buf[k]) * inv_n;
  return power;
}

/// Triangular filters with centres equally spaced in mel between 0 Hz and
/// Nyquist. Filter i rises from point i to point i+1 and falls to point i+2,
/// so neighbours share edges. Each row is rescaled so its largest bin is 1.
inline FilterBank mel_filterbank(const MfccConfig& cfg) {
  require(cfg.mel_filters >= 2, "mel_filterbank: mel_filters must be >= 2");
  cfg.validate();
  const int m = cfg.mel_filters;
  const int bins = cfg.spectrum_bins();
  const double nyquist = cfg.sample_rate / 2.0;
  const double mel_max = hz_to_mel(nyquist);

  std::vector<double> edge_hz(static_cast<std::size_t>(m) + 2);
  for (int j = 0; j < m + 2; ++j) edge_hz[j] = mel_to_hz(mel_max * j / (m + 1));

  FilterBank bank;
  bank.rows = m;
  bank.cols = bins;
  bank.weights.assign(static_cast<std::size_t>(m) * bins, 0.0);
  bank.center_hz.assign(edge_hz.begin() + 1, edge_hz.end() - 1);

  const double bin_hz = static_cast<double>(cfg.sample_rate) / cfg.fft_size;
  for (int i = 0; i < m; ++i) {
    const double lo = edge_hz[i], mid = edge_hz[i + 1], hi = edge_hz[i + 2];
    double peak = 0.0;
    for (int b = 0; b < bins; ++b) {
      const double f = b * bin_hz;
      double w = 0.0;
      if (f > lo && f <= mid) {
        w = (f - lo) / (mid - lo);
      } else if (f > mid && f < hi) {
        w = (hi - f) / (hi - mid);
      }
      bank.weights[static_cast<std::size_t>(i) * bins + b] = w;
      peak = std::max(peak, w);
    }
    require(peak > 0.0, "mel_filterbank: filter " + std::to_string(i) + " covers no FFT bin; raise fft_size");
    for (int b = 0; b < bins; ++b) bank.weights[static_cast<std::size_t>(i) * bins + b] /= peak;
  }
  return bank;
}

/// Natural-log mel energies of one frame, floored at cfg.log_floor.
inline std::vector<double> mel_log_energies(std::span<const double> frame, const MfccConfig& cfg,
                                            const FilterBank& bank) {
  std::vector<double> windowed(frame.begin(), frame.end());
  if (cfg.pre_emphasis > 0.0) {
    for (std::size_t i = windowed.size(); i-- > 1;) windowed[i] -= cfg.pre_emphasis * windowed[i - 1];
  }
  if (cfg.hamming_window && windowed.size() > 1) {
    const double denom = static_cast<double>(windowed.size() - 1);
    for (std::size_t i = 0; i < windowed.size(); ++i) {
      windowed[i] *= 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / denom);
    }
  }
  const auto power = power_spectrum(windowed, cfg.fft_size);
  std::vector<double> log_mel(static_cast<std::size_t>(bank.rows));
  for (int i = 0; i < bank.rows; ++i) {
    double e = 0.0;
    for (int b = 0; b < bank.cols; ++b) e += bank(i, b) * power[b];
    log_mel[i] = std::log(std::max(e, cfg.log_floor));
  }
  return log_mel;
}

/// Stateless extractor holding a precomputed filterbank. Safe to share
/// across threads.
class MfccExtractor {
 public:
  explicit MfccExtractor(MfccConfig cfg = {}) : cfg_(cfg), bank_((cfg.validate(), mel_filterbank(cfg))) {}

  const MfccConfig& config() const { return cfg_; }
  const FilterBank& filterbank() const { return bank_; }

  std::vector<double> frame(std::span<const double> samples) const {
    require(samples.size() == static_cast<std::size_t>(cfg_.frame_length()),
            "mfcc_frame: expected " + std::to_string(cfg_.frame_length()) + " samples, got " +
                std::to_string(samples.size()));
    auto cepstrum = dct_ii(mel_log_energies(samples, cfg_, bank_));
    cepstrum.resize(static_cast<std::size_t>(cfg_.coefficients_per_window));
    return cepstrum;
  }

  // Window i starts at i * clip_length / windows_per_clip; windows running
  // past the clip end are zero-padded.
  AudioFeatureVector clip(const AudioClip& clip) const {
    require(clip.sample_rate == cfg_.sample_rate,
            "clip_features: sample rate " + std::to_string(clip.sample_rate) + " != " +
                std::to_string(cfg_.sample_rate));
    require(clip.samples.size() == static_cast<std::size_t>(cfg_.clip_length()),
            "clip_features: expected " + std::to_string(cfg_.clip_length()) + " samples, got " +
                std::to_string(clip.samples.size()));
    const std::size_t frame_len = static_cast<std::size_t>(cfg_.frame_length());
    const std::size_t clip_len = clip.samples.size();
    std::vector<double> features;
    features.reserve(static_cast<std::size_t>(cfg_.feature_length()));
    std::vector<double> window(frame_len);
    for (int w = 0; w < cfg_.windows_per_clip; ++w) {
      const std::size_t offset = static_cast<std::size_t>(w) * clip_len / cfg_.windows_per_clip;
      std::fill(window.begin(), window.end(), 0.0);
      const std::size_t avail = std::min(frame_len, clip_len - offset);
      std::copy_n(clip.samples.begin() + static_cast<std::ptrdiff_t>(offset), avail, window.begin());
      const auto coeffs = frame(window);
      features.insert(features.end(), coeffs.begin(), coeffs.end());
    }
    return features;
  }

 private:
  MfccConfig cfg_;
  FilterBank bank_;
};

inline std::vector<double> mfcc_frame(std::span<const double> frame, const MfccConfig& cfg) {
  return MfccExtractor(cfg).frame(frame);
}

inline AudioFeatureVector clip_features(const AudioClip& clip, const MfccConfig& cfg) {
  return MfccExtractor(cfg).clip(clip);
}

}  // namespace scenefusion::dsp
