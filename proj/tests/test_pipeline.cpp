// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <vector>

#include "doctest.h"
#include "fbaec/datasim.hpp"
#include "fbaec/losses.hpp"
#include "fbaec/pipeline.hpp"

using namespace fbaec;

namespace {

TbnnConfig tiny_tbnn() {
  TbnnConfig cfg;
  cfg.channels = 8;
  cfg.ftlstm_f_hidden = 8;
  cfg.ftlstm_t_hidden = 8;
  cfg.vad_gru_hidden = 8;
  cfg.hbpf_conv_channels = 12;
  cfg.hbpf_pointwise_channels = 6;
  cfg.hbpf_gru_hidden = 16;
  return cfg;
}

// Echo-only scene: speech-like far end through a short decaying FIR plus a
// bulk delay. Returns (mic, ref, ground-truth delay).
struct EchoScene {
  AudioBuffer mic, ref;
  long true_delay;
};

EchoScene echo_scene(uint64_t seed, double seconds, int delay) {
  SyntheticCorpus corpus;
  const size_t len = static_cast<size_t>(seconds * 48000);
  EchoScene sc;
  sc.ref = corpus.speech(seed, len);
  SplitMix64 rng(seed + 77);
  std::vector<double> fir(64, 0.0);
  fir[0] = 1.0;
  for (size_t i = 1; i < fir.size(); ++i)
    fir[i] = 0.35 * rng.next_gaussian() *
             std::exp(-5.0 * static_cast<double>(i) / 64.0);
  sc.mic = make_echo(sc.ref, fir, delay);
  sc.true_delay = delay;
  return sc;
}

}  // namespace

TEST_CASE("linear path: near-end only passes the mic through exactly") {
  EngineConfig cfg;
  cfg.linear_only = true;
  SyntheticCorpus corpus;
  AudioBuffer mic = corpus.speech(5, 3 * 48000);
  AudioBuffer ref(mic.size(), 48000);  // silent far end

  auto [out, diag] = AecEngine::process(cfg, mic, ref);
  REQUIRE(out.size() == mic.size());
  // Silent reference means y = 0 and e = d bit-exactly.
  for (size_t i = 0; i < mic.size(); ++i)
    REQUIRE(out.samples[i] == mic.samples[i]);
}

TEST_CASE("linear path cancels a synthetic echo by 30 dB") {
  EngineConfig cfg;
  cfg.linear_only = true;
  EchoScene sc = echo_scene(11, 10.0, 6000);

  auto [out, diag] = AecEngine::process(cfg, sc.mic, sc.ref);
  // ERLE over the final 3 s, measured by the metrics module.
  const size_t tail = 3 * 48000;
  const size_t begin = sc.mic.size() - tail;
  const double erle = erle_db(sc.mic, out, begin, sc.mic.size());
  MESSAGE("linear ERLE over final 3 s: ", erle, " dB");
  CHECK(erle >= 30.0);

  // The delay tracker found the bulk delay.
  CHECK(std::abs(diag.delay.delay - static_cast<double>(sc.true_delay)) <=
        960.0);
}

TEST_CASE("streaming equivalence across chunk sizes") {
  EngineConfig cfg;
  cfg.tbnn = tiny_tbnn();
  cfg.weight_seed = 3;
  EchoScene sc = echo_scene(21, 2.0, 2400);

  auto run = [&](size_t chunk) {
    AecEngine eng(cfg);
    std::vector<double> out;
    size_t pos = 0;
    while (pos < sc.mic.size()) {
      const size_t n = std::min(chunk, sc.mic.size() - pos);
      eng.push(sc.mic.samples.data() + pos, sc.ref.samples.data() + pos, n);
      auto part = eng.pull();
      out.insert(out.end(), part.begin(), part.end());
      pos += n;
    }
    auto tail = eng.finish();
    out.insert(out.end(), tail.begin(), tail.end());
    out.resize(sc.mic.size(), 0.0);
    return out;
  };

  const auto whole = run(sc.mic.size());
  for (size_t chunk : {480u, 4800u, 7777u}) {
    const auto chunked = run(chunk);
    REQUIRE(chunked.size() == whole.size());
    for (size_t i = 0; i < whole.size(); ++i)
      REQUIRE(chunked[i] == whole[i]);
  }
}

TEST_CASE("end-to-end causality: outputs precede any input change") {
  EngineConfig cfg;
  cfg.tbnn = tiny_tbnn();
  cfg.weight_seed = 5;
  EchoScene sc = echo_scene(31, 1.5, 1200);

  const size_t m = 36000;  // perturb from this sample on
  AudioBuffer mic2 = sc.mic;
  SplitMix64 rng(32);
  for (size_t i = m; i < mic2.size(); ++i)
    mic2.samples[i] += 0.1 * rng.next_gaussian();

  auto [a, da] = AecEngine::process(cfg, sc.mic, sc.ref);
  auto [b, db] = AecEngine::process(cfg, mic2, sc.ref);
  // Output lags input by win - hop = 480 samples.
  for (size_t i = 0; i + 480 < m; ++i)
    REQUIRE(a.samples[i] == b.samples[i]);
}

TEST_CASE("reset equals a fresh engine") {
  EngineConfig cfg;
  cfg.tbnn = tiny_tbnn();
  EchoScene sc = echo_scene(41, 1.0, 960);

  AecEngine eng(cfg);
  eng.push(sc.mic.samples, sc.ref.samples);
  eng.pull();
  eng.finish();
  eng.reset();
  eng.push(sc.mic.samples, sc.ref.samples);
  auto out1 = eng.pull();
  auto t1 = eng.finish();
  out1.insert(out1.end(), t1.begin(), t1.end());

  AecEngine fresh(cfg);
  fresh.push(sc.mic.samples, sc.ref.samples);
  auto out2 = fresh.pull();
  auto t2 = fresh.finish();
  out2.insert(out2.end(), t2.begin(), t2.end());

  REQUIRE(out1.size() == out2.size());
  for (size_t i = 0; i < out1.size(); ++i) REQUIRE(out1[i] == out2[i]);
}

TEST_CASE("full pipeline emits finite output with diagnostics") {
  EngineConfig cfg;
  cfg.tbnn = tiny_tbnn();
  cfg.emit_y = true;
  EchoScene sc = echo_scene(51, 2.0, 4800);

  AecEngine eng(cfg);
  eng.push(sc.mic.samples, sc.ref.samples);
  auto out = eng.pull();
  auto tail = eng.finish();
  out.insert(out.end(), tail.begin(), tail.end());
  auto y = eng.pull_y();

  CHECK(out.size() >= sc.mic.size() - 480);
  for (double v : out) CHECK(std::isfinite(v));
  CHECK(!y.empty());
  const auto& diag = eng.diagnostics();
  CHECK(diag.vad.size() == static_cast<size_t>(eng.stats().frames));
  for (double v : diag.vad) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
  CHECK(!diag.erle_trace.empty());
  CHECK(eng.stats().linear_seconds > 0.0);
  CHECK(eng.stats().postfilter_seconds > 0.0);
}

TEST_CASE("non-finite input is rejected with a stage label") {
  EngineConfig cfg;
  cfg.linear_only = true;
  AecEngine eng(cfg);
  std::vector<double> mic(960, 0.1), ref(960, 0.1);
  mic[700] = std::nan("");
  try {
    eng.push(mic, ref);
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("linear-filter stage") !=
          std::string::npos);
  }
}

TEST_CASE("process keeps the input length and rejects mismatches") {
  EngineConfig cfg;
  cfg.linear_only = true;
  SyntheticCorpus corpus;
  AudioBuffer mic = corpus.speech(61, 50000);  // not a hop multiple
  AudioBuffer ref = corpus.speech(62, 50000);
  auto [out, diag] = AecEngine::process(cfg, mic, ref);
  CHECK(out.size() == mic.size());

  AudioBuffer short_ref = corpus.speech(63, 40000);
  CHECK_THROWS_AS(AecEngine::process(cfg, mic, short_ref), DataError);
}

TEST_CASE("linear path never bursts on noisy reverberant far-end scenes") {
  // Far-end pauses used to blow the filter up: near-end noise drove the
  // per-bin update while the reference power sat at the bare regularizer.
  SyntheticCorpus corpus;
  for (uint64_t seed : {43u, 47u, 53u}) {
    SceneSpec spec = SceneSpec::random_from(seed, Scenario::kStFe);
    spec.duration = 4.0;
    Scene sc = mix_scene(spec, corpus);
    EngineConfig cfg;
    cfg.linear_only = true;
    auto [out, diag] = AecEngine::process(cfg, sc.d, sc.x);
    for (int sec = 0; sec < 4; ++sec) {
      double pd = 0.0, pe = 0.0;
      for (size_t i = static_cast<size_t>(sec) * 48000;
           i < static_cast<size_t>(sec + 1) * 48000; ++i) {
        pd += sc.d.samples[i] * sc.d.samples[i];
        pe += out.samples[i] * out.samples[i];
      }
      // Error energy stays at or below the mic energy (2 dB slack for
      // adaptation transients); before alignment it is a pure passthrough.
      CHECK(pe <= 1.6 * pd + 1e-12);
    }
  }
}
