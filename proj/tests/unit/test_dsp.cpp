#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numbers>
#include <vector>

#include "scenefusion/common/random.hpp"
#include "scenefusion/dsp/mfcc.hpp"
#include "scenefusion/io/wav.hpp"
#include "support/oracles.hpp"

namespace sf = scenefusion;
using sf::dsp::MfccConfig;

namespace {

std::vector<double> random_vector(sf::Rng& rng, std::size_t n, double lo = -1.0, double hi = 1.0) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

sf::dsp::AudioClip tone_clip(double hz, double amp = 0.5, int rate = 16000) {
  sf::dsp::AudioClip clip;
  clip.sample_rate = rate;
  clip.samples.resize(rate);
  for (int n = 0; n < rate; ++n) clip.samples[n] = amp * std::sin(2.0 * std::numbers::pi * hz * n / rate);
  return clip;
}

}  // namespace

TEST(DctII, ConstantSignalConcentratesInDc) {
  const auto x = sf::dsp::dct_ii(std::vector<double>{1, 1, 1, 1});
  EXPECT_NEAR(x[0], 4.0, 1e-12);
  for (int k = 1; k < 4; ++k) EXPECT_NEAR(x[k], 0.0, 1e-12);
}

TEST(DctII, TwoPointHandEvaluated) {
  const auto x = sf::dsp::dct_ii(std::vector<double>{1, 0});
  EXPECT_NEAR(x[0], 1.0, 1e-12);
  EXPECT_NEAR(x[1], 0.70710678118654757, 1e-12);
}

TEST(DctII, SinglePointIsIdentity) {
  EXPECT_EQ(sf::dsp::dct_ii(std::vector<double>{5})[0], 5.0);
}

TEST(DctII, EmptyInputThrows) {
  EXPECT_THROW(sf::dsp::dct_ii(std::vector<double>{}), sf::InvalidArgument);
}

TEST(DctII, IsLinear) {
  sf::Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + static_cast<std::size_t>(rng.uniform_int(0, 40));
    const auto x = random_vector(rng, n), y = random_vector(rng, n);
    const double a = rng.uniform(-3, 3), b = rng.uniform(-3, 3);
    std::vector<double> mix(n);
    for (std::size_t i = 0; i < n; ++i) mix[i] = a * x[i] + b * y[i];
    const auto lhs = sf::dsp::dct_ii(mix);
    const auto dx = sf::dsp::dct_ii(x), dy = sf::dsp::dct_ii(y);
    for (std::size_t k = 0; k < n; ++k) EXPECT_NEAR(lhs[k], a * dx[k] + b * dy[k], 1e-9);
  }
}

TEST(DctII, MatchesOracle) {
  sf::Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_vector(rng, 26, -30, 5);
    const auto got = sf::dsp::dct_ii(x);
    const auto want = oracle::dct(x);
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_NEAR(got[k], want[k], 1e-9);
  }
}

TEST(PowerSpectrum, ZeroFrameGivesZeroSpectrum) {
  const auto p = sf::dsp::power_spectrum(std::vector<double>(4000, 0.0), 4096);
  ASSERT_EQ(p.size(), 2049u);
  for (double v : p) EXPECT_EQ(v, 0.0);
}

TEST(PowerSpectrum, PureToneAtExactBinPeaksThere) {
  const int n = 1024;
  for (int k : {1, 37, 200, 511}) {
    std::vector<double> frame(n);
    for (int i = 0; i < n; ++i) frame[i] = std::cos(2.0 * std::numbers::pi * k * i / n);
    const auto p = sf::dsp::power_spectrum(frame, n);
    const auto peak = std::max_element(p.begin(), p.end()) - p.begin();
    EXPECT_EQ(peak, k);
  }
}

TEST(PowerSpectrum, ParsevalAgainstTimeDomainEnergy) {
  sf::Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto frame = random_vector(rng, 4000);
    const auto p = sf::dsp::power_spectrum(frame, 4096);
    double spectral = p.front() + p.back();
    for (std::size_t k = 1; k + 1 < p.size(); ++k) spectral += 2.0 * p[k];
    double energy = 0.0;
    for (double v : frame) energy += v * v;
    EXPECT_NEAR(spectral / energy, 1.0, 1e-9);
  }
}

TEST(PowerSpectrum, NonNegativeAndMatchesDirectDft) {
  sf::Rng rng(4);
  for (int trial = 0; trial < 3; ++trial) {
    const auto frame = random_vector(rng, 700);
    const auto got = sf::dsp::power_spectrum(frame, 1024);
    const auto want = oracle::power_spectrum(frame, 1024);
    for (std::size_t k = 0; k < got.size(); ++k) {
      EXPECT_GE(got[k], 0.0);
      EXPECT_NEAR(got[k], want[k], 1e-9);
    }
  }
}

TEST(PowerSpectrum, RejectsOversizedFrameAndBadFftSize) {
  EXPECT_THROW(sf::dsp::power_spectrum(std::vector<double>(4097, 0.0), 4096), sf::InvalidArgument);
  EXPECT_THROW(sf::dsp::power_spectrum(std::vector<double>(10, 0.0), 1000), sf::InvalidArgument);
}

TEST(MelScale, ClosedFormValues) {
  EXPECT_EQ(sf::dsp::hz_to_mel(0.0), 0.0);
  EXPECT_NEAR(sf::dsp::hz_to_mel(700.0), 781.17283874803, 1e-9);
  EXPECT_NEAR(sf::dsp::mel_to_hz(sf::dsp::hz_to_mel(1234.5)), 1234.5, 1e-9);
}

TEST(MelFilterbank, ShapeCentresAndPeaks) {
  const MfccConfig cfg;
  const auto bank = sf::dsp::mel_filterbank(cfg);
  ASSERT_EQ(bank.rows, 26);
  ASSERT_EQ(bank.cols, 2049);
  const double top = oracle::mel(8000.0);
  for (int i = 0; i < bank.rows; ++i) {
    if (i > 0) EXPECT_GT(bank.center_hz[i], bank.center_hz[i - 1]);
    EXPECT_NEAR(bank.center_hz[i], oracle::inv_mel(top * (i + 1) / 27.0), 1e-9);
    double peak = 0;
    for (int b = 0; b < bank.cols; ++b) peak = std::max(peak, bank(i, b));
    EXPECT_DOUBLE_EQ(peak, 1.0);
  }
}

TEST(MelFilterbank, MatchesOracleAndCoversBandWithoutGaps) {
  const MfccConfig cfg;
  const auto bank = sf::dsp::mel_filterbank(cfg);
  const auto want = oracle::mel_bank(26, 4096, 16000);
  const double bin_hz = 16000.0 / 4096;
  for (int b = 0; b < bank.cols; ++b) {
    double cover = 0;
    for (int i = 0; i < bank.rows; ++i) {
      EXPECT_NEAR(bank(i, b), want[i][b], 1e-12);
      cover += bank(i, b);
    }
    const double f = b * bin_hz;
    if (f > bank.center_hz.front() && f < bank.center_hz.back()) EXPECT_GT(cover, 0.0) << "gap at bin " << b;
  }
}

TEST(MelFilterbank, RejectsTooFewFilters) {
  MfccConfig cfg;
  cfg.mel_filters = 1;
  cfg.coefficients_per_window = 1;
  EXPECT_THROW(sf::dsp::mel_filterbank(cfg), sf::InvalidArgument);
}

TEST(MfccConfig, ValidatesCoefficientOrdering) {
  MfccConfig cfg;
  cfg.coefficients_per_window = 30;
  EXPECT_THROW(cfg.validate(), sf::InvalidArgument);
  cfg = MfccConfig{};
  cfg.fft_size = 2048;  // 4000-sample frame no longer fits
  EXPECT_THROW(cfg.validate(), sf::InvalidArgument);
  EXPECT_NO_THROW(MfccConfig{}.validate());
  EXPECT_EQ(MfccConfig{}.frame_length(), 4000);
  EXPECT_EQ(MfccConfig{}.feature_length(), 104);
}

TEST(MfccFrame, ThirteenCoefficientsPerWindow) {
  const sf::dsp::MfccExtractor ex;
  EXPECT_EQ(ex.frame(std::vector<double>(4000, 0.1)).size(), 13u);
  EXPECT_THROW(ex.frame(std::vector<double>(3999, 0.0)), sf::InvalidArgument);
}

TEST(MfccFrame, SilenceOnlyHasDcCoefficient) {
  const auto c = sf::dsp::mfcc_frame(std::vector<double>(4000, 0.0), MfccConfig{});
  EXPECT_NEAR(c[0], 26.0 * std::log(1e-10), 1e-9);
  for (std::size_t k = 1; k < c.size(); ++k) EXPECT_NEAR(c[k], 0.0, 1e-9);
}

TEST(MfccFrame, ToneMatchesBruteForceOracle) {
  std::vector<double> frame(4000);
  for (int n = 0; n < 4000; ++n) frame[n] = std::sin(2.0 * std::numbers::pi * 440.0 * n / 16000.0);
  const auto got = sf::dsp::mfcc_frame(frame, MfccConfig{});
  const auto want = oracle::mfcc(frame);
  for (int k = 0; k < 13; ++k) EXPECT_NEAR(got[k], want[k], 1e-6);
}

TEST(ClipFeatures, OneHundredFourValues) {
  const auto f = sf::dsp::clip_features(tone_clip(440.0), MfccConfig{});
  EXPECT_EQ(f.size(), 104u);
  for (double v : f) EXPECT_TRUE(std::isfinite(v));
}

TEST(ClipFeatures, SilentClipGivesIdenticalBlocks) {
  sf::dsp::AudioClip silent{std::vector<double>(16000, 0.0), 16000};
  const auto f = sf::dsp::clip_features(silent, MfccConfig{});
  for (int w = 1; w < 8; ++w)
    for (int k = 0; k < 13; ++k) EXPECT_EQ(f[w * 13 + k], f[k]);
}

TEST(ClipFeatures, StationaryToneGivesEqualUnpaddedBlocks) {
  // 400 Hz: 40-sample period divides the 2000-sample hop.
  const auto f = sf::dsp::clip_features(tone_clip(400.0), MfccConfig{});
  for (int w = 1; w < 7; ++w)
    for (int k = 0; k < 13; ++k) EXPECT_NEAR(f[w * 13 + k], f[k], 1e-9) << "block " << w;
  // The last window is half padding, so its energy drops.
  EXPECT_LT(f[7 * 13], f[0]);
}

TEST(ClipFeatures, AmplitudeScalingOnlyShiftsDc) {
  sf::Rng rng(5);
  sf::dsp::AudioClip clip{random_vector(rng, 16000, -0.3, 0.3), 16000};
  auto scaled = clip;
  const double c = 2.5;
  for (double& s : scaled.samples) s *= c;
  const auto a = sf::dsp::clip_features(clip, MfccConfig{});
  const auto b = sf::dsp::clip_features(scaled, MfccConfig{});
  for (int w = 0; w < 8; ++w) {
    EXPECT_NEAR(b[w * 13] - a[w * 13], 26.0 * 2.0 * std::log(c), 1e-6);
    for (int k = 1; k < 13; ++k) EXPECT_NEAR(b[w * 13 + k], a[w * 13 + k], 1e-6);
  }
}

TEST(ClipFeatures, RejectsWrongLengthOrRate) {
  EXPECT_THROW(sf::dsp::clip_features({std::vector<double>(15999, 0.0), 16000}, MfccConfig{}), sf::InvalidArgument);
  EXPECT_THROW(sf::dsp::clip_features({std::vector<double>(16000, 0.0), 8000}, MfccConfig{}), sf::InvalidArgument);
}

TEST(ClipFeatures, OutputLengthFollowsConfig) {
  for (auto [windows, coeffs] : {std::pair{4, 13}, std::pair{8, 20}, std::pair{6, 2}}) {
    MfccConfig cfg;
    cfg.windows_per_clip = windows;
    cfg.coefficients_per_window = coeffs;
    EXPECT_EQ(sf::dsp::clip_features(tone_clip(300.0), cfg).size(), static_cast<std::size_t>(windows * coeffs));
  }
}

TEST(ClipFeatures, Deterministic) {
  sf::Rng rng(6);
  sf::dsp::AudioClip clip{random_vector(rng, 16000), 16000};
  const auto a = sf::dsp::clip_features(clip, MfccConfig{});
  const auto b = sf::dsp::clip_features(clip, MfccConfig{});
  EXPECT_EQ(a, b);
}

TEST(Wav, Pcm16RoundTrip) {
  auto clip = tone_clip(440.0, 0.7);
  const auto decoded = sf::io::decode_wav(sf::io::encode_wav_pcm16(clip));
  ASSERT_EQ(decoded.sample_rate, 16000);
  ASSERT_EQ(decoded.samples.size(), clip.samples.size());
  for (std::size_t i = 0; i < clip.samples.size(); ++i) EXPECT_NEAR(decoded.samples[i], clip.samples[i], 0.5 / 32768);
}

TEST(Wav, StereoFloatIsAveragedToMono) {
  // Hand-built 2-channel float32 file with frames (0.5, -0.5) and (1.0, 0.0).
  std::vector<unsigned char> b;
  auto u32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) b.push_back((v >> (8 * i)) & 0xff); };
  auto u16 = [&](std::uint16_t v) { b.push_back(v & 0xff); b.push_back(v >> 8); };
  auto f32 = [&](float f) { std::uint32_t v; std::memcpy(&v, &f, 4); u32(v); };
  b.insert(b.end(), {'R', 'I', 'F', 'F'});
  u32(36 + 16);
  b.insert(b.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  u32(16); u16(3); u16(2); u32(8000); u32(8000 * 8); u16(8); u16(32);
  b.insert(b.end(), {'d', 'a', 't', 'a'});
  u32(16);
  f32(0.5f); f32(-0.5f); f32(1.0f); f32(0.0f);
  const auto clip = sf::io::decode_wav(b);
  EXPECT_EQ(clip.sample_rate, 8000);
  ASSERT_EQ(clip.samples.size(), 2u);
  EXPECT_EQ(clip.samples[0], 0.0);
  EXPECT_EQ(clip.samples[1], 0.5);
}

TEST(Wav, RejectsGarbage) {
  EXPECT_THROW(sf::io::decode_wav(std::vector<unsigned char>(40, 'x')), sf::IoError);
  EXPECT_THROW(sf::io::read_wav("/nonexistent/file.wav"), sf::NotFound);
}
