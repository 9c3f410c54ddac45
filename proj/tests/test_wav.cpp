// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cstdio>
#include <string>

#include "doctest.h"
#include "fbaec/wav.hpp"

using namespace fbaec;

namespace {

struct TempPath {
  std::string path;
  explicit TempPath(const std::string& name)
      : path("/tmp/fbaec_test_" + name) {}
  ~TempPath() { std::remove(path.c_str()); }
};

AudioBuffer ramp(size_t n) {
  AudioBuffer out(n, 48000);
  SplitMix64 rng(13);
  for (auto& s : out.samples)
    s = static_cast<float>(0.9 * (2.0 * rng.next_double() - 1.0));
  return out;
}

}  // namespace

TEST_CASE("float32 wav round trip is bit-exact") {
  TempPath tmp("rt_f32.wav");
  AudioBuffer a = ramp(4801);
  wav_write(tmp.path, a, WavFormat::kFloat32);
  AudioBuffer b = wav_read(tmp.path, 48000);
  REQUIRE(b.size() == a.size());
  CHECK(b.sample_rate == 48000);
  for (size_t i = 0; i < a.size(); ++i) CHECK(a.samples[i] == b.samples[i]);

  // write -> read -> write -> read fixed point
  TempPath tmp2("rt_f32b.wav");
  wav_write(tmp2.path, b, WavFormat::kFloat32);
  AudioBuffer c = wav_read(tmp2.path, 48000);
  for (size_t i = 0; i < a.size(); ++i) CHECK(c.samples[i] == b.samples[i]);
}

TEST_CASE("pcm16 wav round trip within one LSB") {
  TempPath tmp("rt_p16.wav");
  AudioBuffer a = ramp(9600);
  wav_write(tmp.path, a, WavFormat::kPcm16);
  AudioBuffer b = wav_read(tmp.path, 48000);
  REQUIRE(b.size() == a.size());
  for (size_t i = 0; i < a.size(); ++i)
    CHECK(std::abs(a.samples[i] - b.samples[i]) <= 1.0 / 32767.0);
}

TEST_CASE("wrong sample rate names expected and actual") {
  TempPath tmp("rate.wav");
  AudioBuffer a = ramp(100);
  a.sample_rate = 16000;
  wav_write(tmp.path, a);
  try {
    wav_read(tmp.path, 48000);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("48000") != std::string::npos);
    CHECK(msg.find("16000") != std::string::npos);
  }
}

TEST_CASE("non-wav file is rejected") {
  TempPath tmp("bogus.wav");
  std::ofstream f(tmp.path, std::ios::binary);
  f << "this is not a wav file at all, not even close";
  f.close();
  CHECK_THROWS_AS(wav_read(tmp.path), DataError);
}
