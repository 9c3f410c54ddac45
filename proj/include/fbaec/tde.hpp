// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_TDE_HPP_
#define FBAEC_TDE_HPP_

#include <algorithm>
#include <cmath>
#include <deque>
#include <vector>

#include "fbaec/audio.hpp"
#include "fbaec/common.hpp"
#include "fbaec/stft.hpp"

namespace fbaec {

// Sub-band cross-correlation time delay estimation. Magnitude envelopes of
// uniform STFT bin groups over 0-8 kHz are Pearson-correlated between mic and
// reference per candidate lag; the mean over sub-bands picks the delay.
// Envelope correlation (rather than raw waveform correlation) survives the
// loudspeaker nonlinearity; mean removal keeps unrelated signals near zero.
struct TdeConfig {
  int max_delay = 24000;    // samples (500 ms at 48 kHz)
  int num_subbands = 32;    // uniform groups over 0-8 kHz
  int block = 100;          // frames per streaming correlation update
  double smoothing = 0.9;   // exponential smoothing of the delay track
  StftConfig stft;

  void validate() const {
    if (max_delay <= 0) throw ConfigError("tde: max_delay must be > 0");
    if (num_subbands < 1) throw ConfigError("tde: num_subbands must be >= 1");
    if (smoothing < 0.0 || smoothing >= 1.0)
      throw ConfigError("tde: smoothing must be in [0, 1)");
    if (block < 2) throw ConfigError("tde: block must be >= 2");
    stft.validate();
  }

  int max_lag_frames() const {
    return (max_delay + stft.hop - 1) / stft.hop;
  }
};

struct DelayEstimate {
  double delay = 0.0;       // samples, >= 0
  double confidence = 0.0;  // winning mean correlation, clamped to [0, 1]
};

namespace tde_detail {

// Mean magnitude of each uniform sub-band group for one spectral frame.
inline std::vector<double> frame_envelope(const std::complex<double>* frame,
                                          int bins, const TdeConfig& cfg) {
  const int top_bin = cfg.stft.fft_size * 8000 / cfg.stft.sample_rate;  // 160
  const int width = std::max(1, top_bin / cfg.num_subbands);
  std::vector<double> env(static_cast<size_t>(cfg.num_subbands));
  for (int b = 0; b < cfg.num_subbands; ++b) {
    double acc = 0.0;
    const int k0 = b * width;
    for (int k = k0; k < k0 + width && k < bins; ++k)
      acc += std::abs(frame[k]);
    env[static_cast<size_t>(b)] = acc / width;
  }
  return env;
}

// Envelope matrix [frames x bands].
inline std::vector<double> subband_envelopes(const Spectrogram& spec,
                                             const TdeConfig& cfg) {
  std::vector<double> env;
  env.reserve(static_cast<size_t>(spec.frames) * cfg.num_subbands);
  for (int t = 0; t < spec.frames; ++t) {
    const auto fe = frame_envelope(spec.frame(t), spec.bins, cfg);
    env.insert(env.end(), fe.begin(), fe.end());
  }
  return env;
}

// Mean over bands of the Pearson correlation between mic(t) and ref(t - lag),
// evaluated for every lag in [0, max_lag]. mic rows [t0, t1) are used.
inline std::vector<double> lag_correlation(const std::vector<double>& mic_env,
                                           const std::vector<double>& ref_env,
                                           int bands, int t0, int t1,
                                           int max_lag) {
  std::vector<double> corr(static_cast<size_t>(max_lag) + 1, 0.0);
  const int ref_frames = static_cast<int>(ref_env.size()) / bands;
  std::vector<double> a, b;
  for (int lag = 0; lag <= max_lag; ++lag) {
    double band_sum = 0.0;
    int band_cnt = 0;
    for (int band = 0; band < bands; ++band) {
      a.clear();
      b.clear();
      for (int t = t0; t < t1; ++t) {
        const int tr = t - lag;
        if (tr < 0 || tr >= ref_frames) continue;
        a.push_back(mic_env[static_cast<size_t>(t) * bands + band]);
        b.push_back(ref_env[static_cast<size_t>(tr) * bands + band]);
      }
      if (a.size() < 8) continue;
      const double n = static_cast<double>(a.size());
      double ma = 0.0, mb = 0.0;
      for (size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
      }
      ma /= n;
      mb /= n;
      double sab = 0.0, saa = 0.0, sbb = 0.0;
      for (size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
      }
      const double den = std::sqrt(saa * sbb);
      if (den > 0.0) {
        band_sum += sab / den;
        ++band_cnt;
      }
    }
    corr[static_cast<size_t>(lag)] = band_cnt > 0 ? band_sum / band_cnt : 0.0;
  }
  return corr;
}

// Parabolic refinement of a correlation peak; returns fractional lag offset.
inline double parabolic_offset(const std::vector<double>& c, int peak) {
  if (peak <= 0 || peak + 1 >= static_cast<int>(c.size())) return 0.0;
  const double cm = c[static_cast<size_t>(peak) - 1];
  const double c0 = c[static_cast<size_t>(peak)];
  const double cp = c[static_cast<size_t>(peak) + 1];
  const double den = cm - 2.0 * c0 + cp;
  if (std::abs(den) < 1e-12) return 0.0;
  return std::clamp(0.5 * (cm - cp) / den, -1.0, 1.0);
}

inline DelayEstimate pick_peak(const std::vector<double>& corr, int hop,
                               int max_delay) {
  int best = 0;
  for (int l = 1; l < static_cast<int>(corr.size()); ++l)
    if (corr[static_cast<size_t>(l)] > corr[static_cast<size_t>(best)])
      best = l;
  const double frac = parabolic_offset(corr, best);
  DelayEstimate est;
  est.delay = std::clamp((best + frac) * hop, 0.0,
                         static_cast<double>(max_delay));
  est.confidence = std::clamp(corr[static_cast<size_t>(best)], 0.0, 1.0);
  return est;
}

}  // namespace tde_detail

// Whole-signal estimate. Both signals must be at least one second long.
inline DelayEstimate estimate_delay(const AudioBuffer& mic,
                                    const AudioBuffer& ref,
                                    const TdeConfig& cfg = {}) {
  cfg.validate();
  if (mic.sample_rate != ref.sample_rate)
    throw ConfigError("tde: sample rate mismatch");
  if (mic.size() < static_cast<size_t>(mic.sample_rate) ||
      ref.size() < static_cast<size_t>(ref.sample_rate))
    throw DataError("tde: signals shorter than 1 s");

  const Spectrogram sm = stft(mic, cfg.stft);
  const Spectrogram sr = stft(ref, cfg.stft);
  const auto em = tde_detail::subband_envelopes(sm, cfg);
  const auto er = tde_detail::subband_envelopes(sr, cfg);
  const auto corr = tde_detail::lag_correlation(
      em, er, cfg.num_subbands, 0, sm.frames, cfg.max_lag_frames());
  return tde_detail::pick_peak(corr, cfg.stft.hop, cfg.max_delay);
}

// output[n] = ref[n - delay], zero fill for n < delay.
inline AudioBuffer align(const AudioBuffer& ref, const DelayEstimate& d) {
  const long delay = std::lround(std::max(0.0, d.delay));
  return shift_by(ref, static_cast<size_t>(delay));
}

// Streaming tracker fed with per-frame sub-band envelopes. Re-estimates every
// `block` frames, median-filters the last five block estimates against
// double-talk corruption, then smooths exponentially.
class DelayTracker {
 public:
  explicit DelayTracker(const TdeConfig& cfg) : cfg_(cfg) {
    cfg_.validate();
    history_frames_ = cfg_.block + cfg_.max_lag_frames();
  }

  void push(const std::vector<double>& mic_env,
            const std::vector<double>& ref_env) {
    mic_.insert(mic_.end(), mic_env.begin(), mic_env.end());
    ref_.insert(ref_.end(), ref_env.begin(), ref_env.end());
    ++frames_;
    const size_t keep = static_cast<size_t>(history_frames_) *
                        static_cast<size_t>(cfg_.num_subbands);
    if (mic_.size() > keep) mic_.erase(mic_.begin(), mic_.end() - keep);
    if (ref_.size() > keep) ref_.erase(ref_.begin(), ref_.end() - keep);
    if (frames_ % cfg_.block == 0 && frames_ >= cfg_.block) update();
  }

  bool has_estimate() const { return have_; }
  DelayEstimate current() const { return current_; }

 private:
  void update() {
    const int have_frames = static_cast<int>(mic_.size()) / cfg_.num_subbands;
    const int t1 = have_frames;
    const int t0 = std::max(0, t1 - cfg_.block);
    const auto corr = tde_detail::lag_correlation(
        mic_, ref_, cfg_.num_subbands, t0, t1, cfg_.max_lag_frames());
    DelayEstimate est =
        tde_detail::pick_peak(corr, cfg_.stft.hop, cfg_.max_delay);

    recent_.push_back(est.delay);
    if (recent_.size() > 5) recent_.pop_front();
    std::vector<double> sorted(recent_.begin(), recent_.end());
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[sorted.size() / 2];

    if (!have_) {
      smoothed_ = median;
      have_ = true;
    } else {
      smoothed_ = cfg_.smoothing * smoothed_ + (1.0 - cfg_.smoothing) * median;
    }
    current_.delay = std::clamp(smoothed_, 0.0,
                                static_cast<double>(cfg_.max_delay));
    current_.confidence = est.confidence;
  }

  TdeConfig cfg_;
  int history_frames_ = 0;
  long frames_ = 0;
  std::vector<double> mic_, ref_;  // rolling envelope history [t x bands]
  std::deque<double> recent_;
  double smoothed_ = 0.0;
  bool have_ = false;
  DelayEstimate current_;
};

}  // namespace fbaec

#endif  // FBAEC_TDE_HPP_
