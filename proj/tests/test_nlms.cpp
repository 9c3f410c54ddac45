// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <cmath>
#include <complex>
#include <vector>

#include "doctest.h"
#include "fbaec/nlms.hpp"
#include "fbaec/common.hpp"

using namespace fbaec;
using cd = std::complex<double>;

namespace {

std::vector<cd> random_frame(SplitMix64& rng, int bins, double amp = 1.0) {
  std::vector<cd> out(static_cast<size_t>(bins));
  for (auto& c : out)
    c = amp * cd(rng.next_gaussian(), rng.next_gaussian());
  return out;
}

}  // namespace

TEST_CASE("nlms_init shapes and validation") {
  NlmsConfig cfg;
  NlmsState st = nlms_init(cfg);
  CHECK(st.bins == 481);
  CHECK(st.taps == 8);
  CHECK(st.weights.size() == 481u * 8u);
  for (const auto& w : st.weights) CHECK(std::abs(w) == 0.0);

  NlmsConfig one_tap = cfg;
  one_tap.taps = 1;
  CHECK(nlms_init(one_tap).weights.size() == 481u);

  NlmsConfig bad = cfg;
  bad.mu = 3.0;
  CHECK_THROWS_AS(nlms_init(bad), ConfigError);
}

TEST_CASE("zero reference passes mic through untouched") {
  NlmsConfig cfg;
  NlmsState st = nlms_init(cfg);
  SplitMix64 rng(3);
  std::vector<cd> e(481), y(481);
  for (int t = 0; t < 50; ++t) {
    auto mic = random_frame(rng, 481);
    std::vector<cd> ref(481, cd(0.0, 0.0));
    nlms_step(st, cfg, mic.data(), ref.data(), e.data(), y.data());
    for (int k = 0; k < 481; ++k) {
      CHECK(y[static_cast<size_t>(k)] == cd(0.0, 0.0));
      CHECK(e[static_cast<size_t>(k)] == mic[static_cast<size_t>(k)]);
    }
  }
  for (const auto& w : st.weights) CHECK(std::abs(w) == 0.0);
}

TEST_CASE("e is the exact floating-point complement of y") {
  NlmsConfig cfg;
  cfg.bins = 64;
  NlmsState st = nlms_init(cfg);
  SplitMix64 rng(5);
  std::vector<cd> e(64), y(64);
  for (int t = 0; t < 200; ++t) {
    auto mic = random_frame(rng, 64);
    auto ref = random_frame(rng, 64);
    nlms_step(st, cfg, mic.data(), ref.data(), e.data(), y.data());
    for (int k = 0; k < 64; ++k)
      CHECK(e[static_cast<size_t>(k)] ==
            mic[static_cast<size_t>(k)] - y[static_cast<size_t>(k)]);
  }
}

TEST_CASE("single-tap scalar path converges to 0.5") {
  NlmsConfig cfg;
  cfg.taps = 1;
  cfg.bins = 32;
  NlmsState st = nlms_init(cfg);
  SplitMix64 rng(11);

  // Independent scalar oracle: the same recurrence written out longhand for
  // bin 0, kept separate from the implementation under test.
  cd w_oracle(0.0, 0.0);

  std::vector<cd> e(32), y(32);
  for (int t = 0; t < 200; ++t) {
    auto ref = random_frame(rng, 32);
    std::vector<cd> mic(32);
    for (int k = 0; k < 32; ++k)
      mic[static_cast<size_t>(k)] = 0.5 * ref[static_cast<size_t>(k)];

    const cd x0 = ref[0];
    const cd y_o = std::conj(w_oracle) * x0;
    const cd e_o = mic[0] - y_o;
    w_oracle += cfg.mu * x0 * std::conj(e_o) / (std::norm(x0) + cfg.delta);

    nlms_step(st, cfg, mic.data(), ref.data(), e.data(), y.data());
    CHECK(std::abs(st.w(0, 0) - w_oracle) < 1e-12);
  }
  for (int k = 0; k < 32; ++k) {
    CHECK(std::abs(st.w(k, 0) - cd(0.5, 0.0)) < 0.025);  // within 5%
  }
  // Error nearly vanishes once converged.
  double e_pow = 0.0, m_pow = 0.0;
  SplitMix64 rng2(12);
  for (int t = 0; t < 50; ++t) {
    auto ref = random_frame(rng2, 32);
    std::vector<cd> mic(32);
    for (int k = 0; k < 32; ++k)
      mic[static_cast<size_t>(k)] = 0.5 * ref[static_cast<size_t>(k)];
    nlms_step(st, cfg, mic.data(), ref.data(), e.data(), y.data());
    for (int k = 0; k < 32; ++k) {
      e_pow += std::norm(e[static_cast<size_t>(k)]);
      m_pow += std::norm(mic[static_cast<size_t>(k)]);
    }
  }
  CHECK(e_pow < 1e-4 * m_pow);
}

TEST_CASE("multi-tap filter identifies a per-bin FIR echo path") {
  // Echo synthesized directly in the transform domain: per bin,
  // mic_t = sum_i g_i * ref_(t-i), a 4-tap path the filter can match exactly.
  NlmsConfig cfg;
  cfg.taps = 6;
  cfg.bins = 48;
  NlmsState st = nlms_init(cfg);
  SplitMix64 rng(21);
  const std::vector<cd> path = {
      {1.0, 0.0}, {0.5, -0.2}, {-0.3, 0.1}, {0.2, 0.0}};

  std::vector<std::vector<cd>> ref_hist;
  std::vector<cd> e(48), y(48);
  double mic_pow = 0.0, err_pow = 0.0;
  for (int t = 0; t < 400; ++t) {
    ref_hist.push_back(random_frame(rng, 48));
    std::vector<cd> mic(48, cd(0.0, 0.0));
    for (size_t i = 0; i < path.size(); ++i) {
      if (i >= ref_hist.size()) break;
      const auto& r = ref_hist[ref_hist.size() - 1 - i];
      for (int k = 0; k < 48; ++k)
        mic[static_cast<size_t>(k)] += path[i] * r[static_cast<size_t>(k)];
    }
    nlms_step(st, cfg, mic.data(), ref_hist.back().data(), e.data(), y.data());
    if (t >= 300) {
      for (int k = 0; k < 48; ++k) {
        mic_pow += std::norm(mic[static_cast<size_t>(k)]);
        err_pow += std::norm(e[static_cast<size_t>(k)]);
      }
    }
  }
  const double erle_db = 10.0 * std::log10(mic_pow / err_pow);
  CHECK(erle_db >= 30.0);
}

TEST_CASE("scaling mic and ref together leaves the trajectory unchanged") {
  NlmsConfig cfg;
  cfg.bins = 32;
  NlmsState a = nlms_init(cfg);
  NlmsState b = nlms_init(cfg);
  SplitMix64 rng(31);
  std::vector<cd> e(32), y(32), e2(32), y2(32);
  double max_rel = 0.0;
  for (int t = 0; t < 200; ++t) {
    auto ref = random_frame(rng, 32, 10.0);
    auto mic = random_frame(rng, 32, 10.0);
    std::vector<cd> mic2(32), ref2(32);
    for (int k = 0; k < 32; ++k) {
      mic2[static_cast<size_t>(k)] = 2.0 * mic[static_cast<size_t>(k)];
      ref2[static_cast<size_t>(k)] = 2.0 * ref[static_cast<size_t>(k)];
    }
    nlms_step(a, cfg, mic.data(), ref.data(), e.data(), y.data());
    nlms_step(b, cfg, mic2.data(), ref2.data(), e2.data(), y2.data());
    double frame_pow = 0.0;
    for (int k = 0; k < 32; ++k)
      frame_pow += std::norm(2.0 * e[static_cast<size_t>(k)]);
    const double frame_rms = std::sqrt(frame_pow / 32.0);
    for (int k = 0; k < 32; ++k) {
      const double scale_err =
          std::abs(e2[static_cast<size_t>(k)] - 2.0 * e[static_cast<size_t>(k)]);
      max_rel = std::max(max_rel, scale_err / (1e-30 + frame_rms));
    }
  }
  for (size_t i = 0; i < a.weights.size(); ++i) {
    const double d = std::abs(a.weights[i] - b.weights[i]);
    CHECK(d <= 1e-6 * std::max(1.0, std::abs(a.weights[i])));
  }
  CHECK(max_rel <= 1e-6);
}

TEST_CASE("non-finite input rejects the frame and leaves state untouched") {
  NlmsConfig cfg;
  cfg.bins = 8;
  NlmsState st = nlms_init(cfg);
  SplitMix64 rng(41);
  std::vector<cd> e(8), y(8);
  auto mic = random_frame(rng, 8);
  auto ref = random_frame(rng, 8);
  nlms_step(st, cfg, mic.data(), ref.data(), e.data(), y.data());
  const NlmsState before = st;

  auto bad = random_frame(rng, 8);
  bad[3] = cd(std::nan(""), 0.0);
  CHECK_THROWS_AS(
      nlms_step(st, cfg, bad.data(), ref.data(), e.data(), y.data()),
      NumericError);
  for (size_t i = 0; i < st.weights.size(); ++i) {
    CHECK(st.weights[i] == before.weights[i]);
    CHECK(st.ref_history[i] == before.ref_history[i]);
  }
}

TEST_CASE("no divergence over many frames") {
  NlmsConfig cfg;
  cfg.bins = 16;
  NlmsState st = nlms_init(cfg);
  SplitMix64 rng(51);
  std::vector<cd> e(16), y(16);
  for (int t = 0; t < 10000; ++t) {
    auto ref = random_frame(rng, 16);
    auto mic = random_frame(rng, 16);
    nlms_step(st, cfg, mic.data(), ref.data(), e.data(), y.data());
  }
  CHECK(nlms_weights_finite(st));
  CHECK(nlms_weight_norm(st) < 100.0);
}
