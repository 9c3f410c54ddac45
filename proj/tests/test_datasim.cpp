// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "fbaec/datasim.hpp"

using namespace fbaec;

namespace {

// Schroeder back-integration oracle: least-squares fit of the energy decay
// curve between -15 and -35 dB, extrapolated to -60.
double schroeder_rt60(const std::vector<double>& h, int fs) {
  std::vector<double> edc(h.size());
  double acc = 0.0;
  for (size_t i = h.size(); i-- > 0;) {
    acc += h[i] * h[i];
    edc[i] = acc;
  }
  const double total = acc;
  double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
  size_t n = 0;
  for (size_t i = 0; i < h.size(); ++i) {
    if (edc[i] <= 0.0) break;
    const double db = 10.0 * std::log10(edc[i] / total);
    if (db > -15.0 || db < -35.0) continue;
    const double t = static_cast<double>(i) / fs;
    sx += t;
    sy += db;
    sxx += t * t;
    sxy += t * db;
    ++n;
  }
  REQUIRE(n > 10);
  const double slope = (static_cast<double>(n) * sxy - sx * sy) /
                       (static_cast<double>(n) * sxx - sx * sx);
  return -60.0 / slope;
}

std::vector<double> direct_convolve(const std::vector<double>& a,
                                    const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i)
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

}  // namespace

TEST_CASE("gen_rir rt60 via Schroeder integration") {
  const std::array<double, 3> room = {6.0, 4.0, 3.0};
  const std::array<double, 3> src = {1.5, 2.0, 1.2};
  const std::array<double, 3> rcv = {4.0, 1.5, 1.6};
  for (double rt : {0.2, 0.5, 1.0}) {
    const auto h = gen_rir(room, rt, src, rcv, 77);
    const double measured = schroeder_rt60(h, 48000);
    CHECK(measured >= 0.8 * rt);
    CHECK(measured <= 1.2 * rt);
  }
}

TEST_CASE("gen_rir determinism and normalization") {
  const std::array<double, 3> room = {5.5, 3.5, 3.0};
  const std::array<double, 3> src = {1.0, 1.0, 1.5};
  const std::array<double, 3> rcv = {4.5, 2.5, 1.5};
  const auto a = gen_rir(room, 0.4, src, rcv, 5);
  const auto b = gen_rir(room, 0.4, src, rcv, 5);
  REQUIRE(a.size() == b.size());
  for (size_t i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
  CHECK(signal_energy(a) == doctest::Approx(1.0).epsilon(1e-9));

  const auto c = gen_rir(room, 0.4, src, rcv, 6);
  bool differs = false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != c[i]) differs = true;
  CHECK(differs);
}

TEST_CASE("gen_rir direct path arrives at distance/343") {
  const std::array<double, 3> room = {7.0, 4.5, 3.2};
  const std::array<double, 3> src = {1.2, 1.1, 1.0};
  const std::array<double, 3> rcv = {5.2, 3.6, 2.2};
  const double dist = std::sqrt(std::pow(src[0] - rcv[0], 2) +
                                std::pow(src[1] - rcv[1], 2) +
                                std::pow(src[2] - rcv[2], 2));
  const auto h = gen_rir(room, 0.3, src, rcv, 9);
  const double expected = dist / 343.0 * 48000.0;
  // Nothing arrives before the direct path, so the first strong arrival
  // (argmax over the window ending just past the expected position) must sit
  // at distance/343 within a sample. Coincident later reflections can beat
  // the direct path in amplitude, so an unrestricted argmax would not probe
  // arrival time.
  const size_t window_end = static_cast<size_t>(expected) + 40;
  size_t peak = 0;
  double best = 0.0;
  for (size_t i = 0; i < window_end && i < h.size(); ++i)
    if (std::abs(h[i]) > best) {
      best = std::abs(h[i]);
      peak = i;
    }
  CHECK(std::abs(static_cast<double>(peak) - expected) <= 1.0);
}

TEST_CASE("gen_rir rejects invalid geometry") {
  const std::array<double, 3> room = {5.0, 3.0, 3.0};
  CHECK_THROWS_AS(
      gen_rir(room, 0.3, {6.0, 1.0, 1.0}, {2.0, 2.0, 1.0}, 1),
      ConfigError);
}

TEST_CASE("nonlinear_distort") {
  SplitMix64 rng(3);
  AudioBuffer x(9600, 48000);
  for (auto& v : x.samples) v = 0.8 * (2.0 * rng.next_double() - 1.0);

  SUBCASE("tiny gain and no clip is the identity within 1e-4") {
    NonlinearityParams p{1.0, 1e-3};
    AudioBuffer y = nonlinear_distort(x, p);
    for (size_t i = 0; i < x.size(); ++i)
      CHECK(std::abs(y.samples[i] - x.samples[i]) <= 1e-4);
  }

  SUBCASE("constant above the clip level comes out clipped") {
    AudioBuffer c(1000, 48000);
    for (size_t i = 0; i < c.size(); ++i)
      c.samples[i] = (i < 500) ? 1.0 : 0.2;  // peak 1.0
    NonlinearityParams p{0.5, 0.0};          // clip at 0.5, no tanh
    AudioBuffer y = nonlinear_distort(c, p);
    for (size_t i = 0; i < 500; ++i) CHECK(y.samples[i] == 0.5);
  }

  SUBCASE("sine develops the third harmonic") {
    AudioBuffer s(48000, 48000);
    const double pi = 3.14159265358979323846;
    for (size_t i = 0; i < s.size(); ++i)
      s.samples[i] = 0.9 * std::sin(2.0 * pi * 500.0 * i / 48000.0);
    NonlinearityParams p{1.0, 3.0};
    AudioBuffer y = nonlinear_distort(s, p);
    // FFT oracle on one second: compare energy at 500 Hz and 1500 Hz.
    std::vector<std::complex<double>> buf(48000);
    for (size_t i = 0; i < buf.size(); ++i) buf[i] = y.samples[i];
    fft_forward(buf);
    const double fund = std::abs(buf[500]);
    const double third = std::abs(buf[1500]);
    CHECK(third > 1e-3 * fund);  // clearly above numerical floor
    CHECK(third > 1e3 * std::abs(buf[1400]));  // and spectrally localized
  }
}

TEST_CASE("make_echo") {
  SplitMix64 rng(5);
  AudioBuffer x(24000, 48000);
  for (auto& v : x.samples) v = 0.4 * rng.next_gaussian();

  SUBCASE("unit-impulse RIR, no delay, no distortion") {
    std::vector<double> rir = {1.0};
    AudioBuffer z = make_echo(x, rir, 0);
    for (size_t i = 0; i < x.size(); ++i)
      CHECK(z.samples[i] == doctest::Approx(x.samples[i]).epsilon(1e-12));
  }

  SUBCASE("delay produces leading zeros") {
    std::vector<double> rir = {1.0, 0.3};
    AudioBuffer z = make_echo(x, rir, 960);
    for (size_t i = 0; i < 960; ++i) CHECK(z.samples[i] == 0.0);
  }

  SUBCASE("matches the direct O(N*K) convolution oracle") {
    SplitMix64 r2(6);
    std::vector<double> rir(64);
    for (auto& v : rir) v = 0.2 * r2.next_gaussian();
    AudioBuffer z = make_echo(x, rir, 100);
    const auto want = direct_convolve(x.samples, rir);
    for (size_t i = 100; i < z.size(); ++i) {
      const double w = want[i - 100];
      CHECK(std::abs(z.samples[i] - w) <= 1e-6 * (1.0 + std::abs(w)));
    }
  }
}

TEST_CASE("mix_scene basics") {
  SyntheticCorpus corpus;
  SceneSpec spec;
  spec.seed = 11;
  spec.duration = 4.0;
  spec.scenario = Scenario::kDt;
  spec.ser_db = 0.0;
  spec.snr_db = 12.0;
  spec.rt60 = 0.3;
  Scene scene = mix_scene(spec, corpus);

  SUBCASE("mixture identity d = s+r+v+z holds sample-exactly") {
    CHECK(check_scene(scene).identity_exact);
  }

  SUBCASE("SER 0 dB means equal active powers within 1e-6") {
    const auto chk = check_scene(scene);
    REQUIRE(chk.has_ser);
    CHECK(std::abs(chk.ser_db - 0.0) <= 1e-6);
  }

  SUBCASE("re-measured SNR matches the requested value within 0.01 dB") {
    const auto chk = check_scene(scene);
    REQUIRE(chk.has_snr);
    CHECK(std::abs(chk.snr_db - spec.snr_db) <= 0.01);
  }

  SUBCASE("determinism") {
    Scene again = mix_scene(spec, corpus);
    REQUIRE(again.d.size() == scene.d.size());
    for (size_t i = 0; i < scene.d.size(); ++i)
      CHECK(again.d.samples[i] == scene.d.samples[i]);
  }
}

TEST_CASE("ST-FE scene has no near-end and d == v + z exactly") {
  SyntheticCorpus corpus;
  SceneSpec spec;
  spec.seed = 21;
  spec.duration = 3.0;
  spec.scenario = Scenario::kStFe;
  Scene scene = mix_scene(spec, corpus);
  for (double v : scene.s.samples) CHECK(v == 0.0);
  for (double v : scene.r.samples) CHECK(v == 0.0);
  for (size_t i = 0; i < scene.d.size(); ++i)
    CHECK(scene.d.samples[i] == scene.v.samples[i] + scene.z.samples[i]);
  for (uint8_t l : scene.vad_labels) CHECK(l == 0);
}

TEST_CASE("ST-NE scene has no echo") {
  SyntheticCorpus corpus;
  SceneSpec spec;
  spec.seed = 31;
  spec.duration = 3.0;
  spec.scenario = Scenario::kStNe;
  Scene scene = mix_scene(spec, corpus);
  for (double v : scene.z.samples) CHECK(v == 0.0);
  const auto chk = check_scene(scene);
  CHECK(std::abs(chk.snr_db - spec.snr_db) <= 0.01);
}

TEST_CASE("vad labels implement the -40 dBFS frame rule directly") {
  SyntheticCorpus corpus;
  SceneSpec spec;
  spec.seed = 41;
  spec.duration = 3.0;
  spec.scenario = Scenario::kDt;
  Scene scene = mix_scene(spec, corpus);

  const auto e = datasim_detail::frame_energies(scene.s.samples, 480);
  double peak = 0.0;
  for (double v : e) peak = std::max(peak, v);
  REQUIRE(scene.vad_labels.size() == e.size());
  int active = 0;
  for (size_t t = 0; t < e.size(); ++t) {
    const uint8_t want = e[t] > peak * 1e-4 ? 1 : 0;
    CHECK(scene.vad_labels[t] == want);
    active += want;
  }
  // The synthetic speech has pauses, so both classes appear.
  CHECK(active > 0);
  CHECK(active < static_cast<int>(e.size()));
}

TEST_CASE("scene spec json round trip and ranged draw") {
  SceneSpec sp = SceneSpec::random_from(123, Scenario::kDt);
  CHECK(sp.room[0] >= 5.0);
  CHECK(sp.room[0] <= 8.0);
  CHECK(sp.rt60 >= 0.2);
  CHECK(sp.rt60 <= 1.2);
  CHECK(sp.snr_db >= 0.0);
  CHECK(sp.snr_db <= 25.0);
  CHECK(sp.ser_db >= -15.0);
  CHECK(sp.ser_db <= 15.0);
  CHECK(sp.delay >= 0);
  CHECK(sp.delay <= 24000);

  SceneSpec back = SceneSpec::from_json(sp.to_json());
  CHECK(back.seed == sp.seed);
  CHECK(back.rt60 == sp.rt60);
  CHECK(back.snr_db == sp.snr_db);
  CHECK(back.ser_db == sp.ser_db);
  CHECK(back.delay == sp.delay);
  CHECK(back.scenario == sp.scenario);
}
