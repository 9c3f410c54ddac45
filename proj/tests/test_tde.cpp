// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <algorithm>
#include <cmath>
#include <vector>

#include "doctest.h"
#include "fbaec/fft.hpp"
#include "fbaec/tde.hpp"

using namespace fbaec;

namespace {

// Speech-like stand-in: white noise under a slowly varying random envelope.
// Envelope modulation is what sub-band correlation keys on.
AudioBuffer speech_like(size_t n, uint64_t seed, int rate = 48000) {
  SplitMix64 rng(seed);
  const size_t ctrl_hop = static_cast<size_t>(rate) / 8;  // 125 ms segments
  std::vector<double> ctrl(n / ctrl_hop + 2);
  for (auto& c : ctrl) c = 0.05 + 0.95 * rng.next_double();
  AudioBuffer out(n, rate);
  for (size_t i = 0; i < n; ++i) {
    const size_t seg = i / ctrl_hop;
    const double frac = static_cast<double>(i % ctrl_hop) / ctrl_hop;
    const double env = ctrl[seg] * (1.0 - frac) + ctrl[seg + 1] * frac;
    out.samples[i] = env * rng.next_gaussian() * 0.3;
  }
  return out;
}

AudioBuffer white(size_t n, uint64_t seed) {
  SplitMix64 rng(seed);
  AudioBuffer out(n, 48000);
  for (auto& s : out.samples) s = 0.3 * rng.next_gaussian();
  return out;
}

std::vector<double> short_rir(uint64_t seed, size_t len = 64) {
  SplitMix64 rng(seed);
  std::vector<double> h(len);
  h[0] = 1.0;
  for (size_t i = 1; i < len; ++i)
    h[i] = 0.4 * rng.next_gaussian() * std::exp(-6.0 * static_cast<double>(i) / len);
  return h;
}

AudioBuffer make_echo_signal(const AudioBuffer& ref,
                             const std::vector<double>& rir, size_t delay) {
  auto conv = fft_convolve(ref.samples, rir);
  AudioBuffer out(ref.size(), ref.sample_rate);
  for (size_t n = delay; n < out.size(); ++n)
    if (n - delay < conv.size()) out.samples[n] = conv[n - delay];
  return out;
}

// Brute-force full cross-correlation argmax over [0, max_lag], via FFT (exact
// up to rounding, independent of the sub-band implementation under test).
long xcorr_argmax(const AudioBuffer& mic, const AudioBuffer& ref,
                  long max_lag) {
  std::vector<double> rev(ref.samples.rbegin(), ref.samples.rend());
  auto full = fft_convolve(mic.samples, rev);
  const long base = static_cast<long>(ref.size()) - 1;
  long best = 0;
  double best_v = -1e300;
  for (long lag = 0; lag <= max_lag; ++lag) {
    const double v = full[static_cast<size_t>(base + lag)];
    if (v > best_v) {
      best_v = v;
      best = lag;
    }
  }
  return best;
}

}  // namespace

TEST_CASE("tde config validation") {
  TdeConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  TdeConfig bad = cfg;
  bad.smoothing = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = cfg;
  bad.max_delay = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("identical signals give zero delay with high confidence") {
  AudioBuffer x = speech_like(96000, 42);
  DelayEstimate est = estimate_delay(x, x);
  CHECK(est.delay <= 480.0);
  CHECK(est.confidence > 0.9);
}

TEST_CASE("echo through short RIR at 4800 samples") {
  AudioBuffer ref = speech_like(4 * 48000, 7);
  AudioBuffer mic = make_echo_signal(ref, short_rir(17), 4800);
  DelayEstimate est = estimate_delay(mic, ref);
  CHECK(est.delay >= 4800.0 - 480.0);
  CHECK(est.delay <= 4800.0 + 480.0);
  CHECK(est.confidence > 0.5);

  // Brute-force cross-correlation oracle on the same pair agrees.
  const long oracle = xcorr_argmax(mic, ref, 24000);
  CHECK(std::abs(static_cast<double>(oracle) - est.delay) <= 480.0);
}

TEST_CASE("independent noise has low confidence") {
  for (uint64_t seed : {100u, 101u, 102u, 103u, 104u}) {
    AudioBuffer a = white(96000, seed);
    AudioBuffer b = white(96000, seed + 5000);
    DelayEstimate est = estimate_delay(a, b);
    CHECK(est.confidence < 0.3);
  }
}

TEST_CASE("align") {
  AudioBuffer ref = white(4800, 1);
  SUBCASE("delay 0 is identity") {
    DelayEstimate d{0.0, 1.0};
    AudioBuffer out = align(ref, d);
    for (size_t i = 0; i < ref.size(); ++i)
      CHECK(out.samples[i] == ref.samples[i]);
  }
  SUBCASE("delay 480 prepends zeros") {
    DelayEstimate d{480.0, 1.0};
    AudioBuffer out = align(ref, d);
    for (size_t i = 0; i < 480; ++i) CHECK(out.samples[i] == 0.0);
    for (size_t i = 480; i < ref.size(); ++i)
      CHECK(out.samples[i] == ref.samples[i - 480]);
  }
}

TEST_CASE("align then re-estimate leaves small residual") {
  AudioBuffer ref = speech_like(4 * 48000, 23);
  AudioBuffer mic = make_echo_signal(ref, short_rir(5), 9600);
  DelayEstimate est = estimate_delay(mic, ref);
  AudioBuffer aligned = align(ref, est);
  DelayEstimate residual = estimate_delay(mic, aligned);
  CHECK(residual.delay <= 480.0);
}

TEST_CASE("shift equivariance within one hop") {
  AudioBuffer ref = speech_like(4 * 48000, 31);
  AudioBuffer mic = make_echo_signal(ref, short_rir(3), 2400);
  DelayEstimate base = estimate_delay(mic, ref);
  for (size_t k : {960u, 4800u, 12000u}) {
    AudioBuffer mic2 = shift_by(mic, k);
    DelayEstimate est = estimate_delay(mic2, ref);
    CHECK(std::abs(est.delay - (base.delay + static_cast<double>(k))) <=
          480.0);
  }
}

TEST_CASE("amplitude invariance") {
  AudioBuffer ref = speech_like(3 * 48000, 57);
  AudioBuffer mic = make_echo_signal(ref, short_rir(9), 7200);
  DelayEstimate base = estimate_delay(mic, ref);

  AudioBuffer scaled = ref;
  for (auto& s : scaled.samples) s *= 4.0;  // power of two: bit-exact scaling
  DelayEstimate est4 = estimate_delay(mic, scaled);
  CHECK(est4.delay == base.delay);

  AudioBuffer scaled2 = ref;
  for (auto& s : scaled2.samples) s *= 3.7;
  DelayEstimate est37 = estimate_delay(mic, scaled2);
  CHECK(std::abs(est37.delay - base.delay) < 1.0);
}

TEST_CASE("determinism") {
  AudioBuffer ref = speech_like(2 * 48000, 77);
  AudioBuffer mic = make_echo_signal(ref, short_rir(2), 1200);
  DelayEstimate a = estimate_delay(mic, ref);
  DelayEstimate b = estimate_delay(mic, ref);
  CHECK(a.delay == b.delay);
  CHECK(a.confidence == b.confidence);
}

TEST_CASE("signals shorter than 1 s are rejected") {
  AudioBuffer a = white(24000, 1);
  AudioBuffer b = white(24000, 2);
  CHECK_THROWS_AS(estimate_delay(a, b), DataError);
}

TEST_CASE("streaming tracker converges to the scene delay") {
  TdeConfig cfg;
  AudioBuffer ref = speech_like(5 * 48000, 91);
  AudioBuffer mic = make_echo_signal(ref, short_rir(21), 6000);

  Spectrogram sm = stft(mic, cfg.stft);
  Spectrogram sr = stft(ref, cfg.stft);
  const auto em = tde_detail::subband_envelopes(sm, cfg);
  const auto er = tde_detail::subband_envelopes(sr, cfg);

  DelayTracker tracker(cfg);
  const int bands = cfg.num_subbands;
  for (int t = 0; t < sm.frames; ++t) {
    std::vector<double> me(em.begin() + static_cast<long>(t) * bands,
                           em.begin() + static_cast<long>(t + 1) * bands);
    std::vector<double> re(er.begin() + static_cast<long>(t) * bands,
                           er.begin() + static_cast<long>(t + 1) * bands);
    tracker.push(me, re);
  }
  REQUIRE(tracker.has_estimate());
  CHECK(std::abs(tracker.current().delay - 6000.0) <= 960.0);
}
