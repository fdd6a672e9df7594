#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "scenefusion/common/error.hpp"
#include "scenefusion/dsp/mfcc.hpp"

namespace scenefusion::io {

namespace wav_detail {

inline std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}
inline void put32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>((v >> (8 * i)) & 0xff));
}
inline void put16(std::vector<unsigned char>& out, std::uint16_t v) {
  out.push_back(static_cast<unsigned char>(v & 0xff));
  out.push_back(static_cast<unsigned char>(v >> 8));
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xfffe;

}  // namespace wav_detail

/// Decodes RIFF/WAVE bytes holding 16-bit PCM or 32-bit float samples.
/// Multi-channel audio is averaged to mono.
inline dsp::AudioClip decode_wav(const std::vector<unsigned char>& bytes, const std::string& name = "<memory>") {
  using namespace wav_detail;
  auto fail = [&](const std::string& why) { throw IoError("wav " + name + ": " + why); };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 || std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
    fail("not a RIFF/WAVE file");
  }
  std::uint16_t format = 0, channels = 0, bits = 0;
  std::uint32_t rate = 0;
  const unsigned char* data = nullptr;
  std::size_t data_size = 0;
  std::size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    const unsigned char* chunk = bytes.data() + pos;
    const std::uint32_t size = le32(chunk + 4);
    const std::size_t body = pos + 8;
    if (body + size > bytes.size()) {
      if (std::memcmp(chunk, "data", 4) == 0) {
        data_size = bytes.size() - body;  // tolerate truncated streaming headers
        data = bytes.data() + body;
        break;
      }
      fail("chunk overruns file");
    }
    if (std::memcmp(chunk, "fmt ", 4) == 0) {
      if (size < 16) fail("fmt chunk too short");
      format = le16(chunk + 8);
      channels = le16(chunk + 10);
      rate = le32(chunk + 12);
      bits = le16(chunk + 22);
      if (format == kFormatExtensible && size >= 40) format = le16(chunk + 32);
    } else if (std::memcmp(chunk, "data", 4) == 0) {
      data = bytes.data() + body;
      data_size = size;
    }
    pos = body + size + (size & 1);
  }
  if (channels == 0) fail("missing fmt chunk");
  if (data == nullptr) fail("missing data chunk");
  const bool pcm16 = format == kFormatPcm && bits == 16;
  const bool float32 = format == kFormatFloat && bits == 32;
  if (!pcm16 && !float32) fail("unsupported encoding (need PCM16 or float32)");

  const std::size_t bytes_per_frame = static_cast<std::size_t>(channels) * (bits / 8);
  const std::size_t frames = data_size / bytes_per_frame;
  dsp::AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(frames);
  for (std::size_t f = 0; f < frames; ++f) {
    double acc = 0.0;
    for (std::size_t c = 0; c < channels; ++c) {
      const unsigned char* p = data + f * bytes_per_frame + c * (bits / 8);
      if (pcm16) {
        acc += static_cast<std::int16_t>(le16(p)) / 32768.0;
      } else {
        const std::uint32_t raw = le32(p);
        float v;
        std::memcpy(&v, &raw, sizeof v);
        acc += v;
      }
    }
    clip.samples[f] = acc / channels;
  }
  return clip;
}

inline dsp::AudioClip read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("wav file not found: " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_wav(bytes, path.string());
}

/// Mono 16-bit PCM. Samples are clamped to [-1, 1] and rounded.
inline std::vector<unsigned char> encode_wav_pcm16(const dsp::AudioClip& clip) {
  using namespace wav_detail;
  const auto n = static_cast<std::uint32_t>(clip.samples.size());
  std::vector<unsigned char> out;
  out.reserve(44 + 2 * static_cast<std::size_t>(n));
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + 2 * n);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, kFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(clip.sample_rate));
  put32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, 2 * n);
  for (double s : clip.samples) {
    const long v = std::clamp(std::lround(s * 32768.0), -32768L, 32767L);
    put16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  return out;
}

inline void write_wav_pcm16(const std::filesystem::path& path, const dsp::AudioClip& clip) {
  const auto bytes = encode_wav_pcm16(clip);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write wav: " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write: " + path.string());
}

}  // namespace scenefusion::io
