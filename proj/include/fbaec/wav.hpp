// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_WAV_HPP_
#define FBAEC_WAV_HPP_

#include <cstdint>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "fbaec/audio.hpp"
#include "fbaec/common.hpp"

namespace fbaec {

// RIFF/WAVE reader and writer: mono, PCM 16-bit or IEEE float 32-bit.
// Float32 round trips are bit-exact; PCM16 is quantized to 1 LSB.

enum class WavFormat { kPcm16, kFloat32 };

namespace wav_detail {

inline void put_u32(std::vector<uint8_t>& b, uint32_t v) {
  b.push_back(static_cast<uint8_t>(v & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 16) & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 24) & 0xff));
}

inline void put_u16(std::vector<uint8_t>& b, uint16_t v) {
  b.push_back(static_cast<uint8_t>(v & 0xff));
  b.push_back(static_cast<uint8_t>((v >> 8) & 0xff));
}

inline uint32_t get_u32(const uint8_t* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

inline uint16_t get_u16(const uint8_t* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

}  // namespace wav_detail

inline void wav_write(const std::string& path, const AudioBuffer& audio,
                      WavFormat fmt = WavFormat::kFloat32) {
  using namespace wav_detail;
  const uint16_t format_tag = (fmt == WavFormat::kFloat32) ? 3 : 1;
  const uint16_t bits = (fmt == WavFormat::kFloat32) ? 32 : 16;
  const uint32_t byte_rate =
      static_cast<uint32_t>(audio.sample_rate) * bits / 8;
  const uint32_t data_bytes =
      static_cast<uint32_t>(audio.size()) * bits / 8;

  std::vector<uint8_t> out;
  out.reserve(44 + data_bytes);
  const char* riff = "RIFF";
  out.insert(out.end(), riff, riff + 4);
  put_u32(out, 36 + data_bytes);
  const char* wave = "WAVEfmt ";
  out.insert(out.end(), wave, wave + 8);
  put_u32(out, 16);
  put_u16(out, format_tag);
  put_u16(out, 1);  // mono
  put_u32(out, static_cast<uint32_t>(audio.sample_rate));
  put_u32(out, byte_rate);
  put_u16(out, static_cast<uint16_t>(bits / 8));
  put_u16(out, bits);
  const char* data = "data";
  out.insert(out.end(), data, data + 4);
  put_u32(out, data_bytes);

  if (fmt == WavFormat::kFloat32) {
    for (double s : audio.samples) {
      const float f = static_cast<float>(s);
      uint32_t u;
      std::memcpy(&u, &f, 4);
      put_u32(out, u);
    }
  } else {
    for (double s : audio.samples) {
      double v = s;
      if (v > 1.0) v = 1.0;
      if (v < -1.0) v = -1.0;
      const int q = static_cast<int>(std::lround(v * 32767.0));
      put_u16(out, static_cast<uint16_t>(static_cast<int16_t>(q)));
    }
  }

  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("wav_write: cannot open " + path);
  f.write(reinterpret_cast<const char*>(out.data()),
          static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("wav_write: write failed for " + path);
}

inline AudioBuffer wav_read(const std::string& path,
                            int expected_rate = 0) {
  using namespace wav_detail;
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("wav_read: cannot open " + path);
  std::vector<uint8_t> raw((std::istreambuf_iterator<char>(f)),
                           std::istreambuf_iterator<char>());
  if (raw.size() < 44 || std::memcmp(raw.data(), "RIFF", 4) != 0 ||
      std::memcmp(raw.data() + 8, "WAVE", 4) != 0)
    throw DataError("wav_read: not a RIFF/WAVE file: " + path);

  uint16_t format_tag = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;
  size_t pos = 12;
  while (pos + 8 <= raw.size()) {
    const uint32_t chunk_len = get_u32(raw.data() + pos + 4);
    if (std::memcmp(raw.data() + pos, "fmt ", 4) == 0) {
      if (pos + 8 + 16 > raw.size())
        throw DataError("wav_read: truncated fmt chunk: " + path);
      const uint8_t* p = raw.data() + pos + 8;
      format_tag = get_u16(p);
      channels = get_u16(p + 2);
      rate = get_u32(p + 4);
      bits = get_u16(p + 14);
    } else if (std::memcmp(raw.data() + pos, "data", 4) == 0) {
      data_off = pos + 8;
      data_len = chunk_len;
    }
    pos += 8 + chunk_len + (chunk_len & 1);
  }
  if (data_off == 0) throw DataError("wav_read: no data chunk: " + path);
  if (channels != 1)
    throw DataError("wav_read: expected mono, got " +
                    std::to_string(channels) + " channels: " + path);
  if (expected_rate != 0 && static_cast<int>(rate) != expected_rate)
    throw DataError("wav_read: expected sample rate " +
                    std::to_string(expected_rate) + ", got " +
                    std::to_string(rate) + ": " + path);
  if (data_off + data_len > raw.size())
    data_len = raw.size() - data_off;

  AudioBuffer audio;
  audio.sample_rate = static_cast<int>(rate);
  if (format_tag == 3 && bits == 32) {
    const size_t n = data_len / 4;
    audio.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      uint32_t u = get_u32(raw.data() + data_off + 4 * i);
      float v;
      std::memcpy(&v, &u, 4);
      audio.samples[i] = static_cast<double>(v);
    }
  } else if (format_tag == 1 && bits == 16) {
    const size_t n = data_len / 2;
    audio.samples.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const int16_t v = static_cast<int16_t>(
          get_u16(raw.data() + data_off + 2 * i));
      audio.samples[i] = static_cast<double>(v) / 32767.0;
    }
  } else {
    throw DataError("wav_read: unsupported format tag " +
                    std::to_string(format_tag) + " / " +
                    std::to_string(bits) + " bits: " + path);
  }
  return audio;
}

}  // namespace fbaec

#endif  // FBAEC_WAV_HPP_
