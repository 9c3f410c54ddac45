// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_PIPELINE_HPP_
#define FBAEC_PIPELINE_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <complex>
#include <memory>
#include <utility>
#include <vector>

#include "fbaec/audio.hpp"
#include "fbaec/common.hpp"
#include "fbaec/nlms.hpp"
#include "fbaec/nn/manifest.hpp"
#include "fbaec/postfilter.hpp"
#include "fbaec/stft.hpp"
#include "fbaec/tde.hpp"

namespace fbaec {

// Streaming engine tying the pipeline together:
//   tde -> align -> nlms (overlap-save, time-domain e and y)
//       -> stft(d, e, y) -> compress -> band split -> wbpf -> hbpf
//       -> merge -> decompress -> istft
// Processing advances in hop-sized steps regardless of chunk size, so the
// output is bit-identical whether fed sample by sample or all at once. The
// post-filtered output lags the input by win_len - hop samples (one frame);
// the linear-only output is sample-aligned with the microphone.
struct EngineConfig {
  StftConfig stft;
  TdeConfig tde;
  NlmsConfig nlms;
  TbnnConfig tbnn = TbnnConfig::preset("small");
  bool linear_only = false;  // stop after the NLMS error signal
  bool emit_y = false;       // also expose the linear echo estimate
  // The applied alignment backs off from the raw delay estimate so residual
  // delay stays positive where the multi-tap NLMS can absorb it.
  int delay_backoff = 960;
  uint64_t weight_seed = 1;  // seeded init when no manifest is given
};

struct EngineStats {
  double linear_seconds = 0.0;      // TDE + alignment + NLMS
  double postfilter_seconds = 0.0;  // STFT stack + TBNN + resynthesis
  long frames = 0;

  double audio_seconds(int hop, int rate) const {
    return static_cast<double>(frames) * hop / rate;
  }
};

struct EngineDiagnostics {
  DelayEstimate delay;              // final tracker state
  std::vector<double> vad;          // per frame
  std::vector<double> erle_trace;   // per frame, smoothed dB
  std::vector<double> delay_track;  // applied delay per frame, samples
};

class AecEngine {
 public:
  explicit AecEngine(const EngineConfig& cfg) : cfg_(fixup(cfg)) {
    cfg_.stft.validate();
    cfg_.nlms.validate();
    if (cfg_.nlms.bins != cfg_.stft.hop + 1)
      throw ConfigError("engine: nlms bins must equal hop + 1");
    tracker_ = std::make_unique<DelayTracker>(cfg_.tde);
    ols_ = std::make_unique<NlmsOls>(cfg_.nlms, cfg_.stft.hop);
    if (!cfg_.linear_only) {
      tbnn_ = std::make_unique<Tbnn>(cfg_.tbnn);
      tbnn_->seed(cfg_.weight_seed);
    }
    init_buffers();
  }

  AecEngine(const EngineConfig& cfg, const nn::WeightManifest& weights)
      : AecEngine(cfg) {
    if (tbnn_) tbnn_->load(weights);
  }

  const EngineConfig& config() const { return cfg_; }
  const EngineStats& stats() const { return stats_; }
  const EngineDiagnostics& diagnostics() const { return diag_; }

  void reset() {
    tracker_ = std::make_unique<DelayTracker>(cfg_.tde);
    ols_ = std::make_unique<NlmsOls>(cfg_.nlms, cfg_.stft.hop);
    if (tbnn_) tbnn_->reset();
    stats_ = {};
    diag_ = {};
    init_buffers();
  }

  // Feed chunks; mic and ref advance independently, processing happens once
  // both cover the next hop.
  void push(const double* mic, const double* ref, size_t n) {
    pending_mic_.insert(pending_mic_.end(), mic, mic + n);
    pending_ref_.insert(pending_ref_.end(), ref, ref + n);
    drain();
  }

  void push(const std::vector<double>& mic, const std::vector<double>& ref) {
    if (mic.size() != ref.size())
      throw ContractError("engine: mic/ref chunk sizes differ");
    push(mic.data(), ref.data(), mic.size());
  }

  // Drain output produced so far.
  std::vector<double> pull() { return std::exchange(out_, {}); }
  std::vector<double> pull_y() { return std::exchange(out_y_, {}); }

  // Flush: pads the final partial hop, processes everything, and returns the
  // remaining output. Callers truncate to the pushed length.
  std::vector<double> finish() {
    const size_t hop = static_cast<size_t>(cfg_.stft.hop);
    auto pad_to_hop = [hop](std::vector<double>& v) {
      const size_t rem = v.size() % hop;
      if (rem != 0) v.resize(v.size() + (hop - rem), 0.0);
    };
    if (!pending_mic_.empty() || !pending_ref_.empty()) {
      pad_to_hop(pending_mic_);
      pad_to_hop(pending_ref_);
      drain();
    }
    if (!cfg_.linear_only) {
      // Final partial region from the overlap carry, single-frame norm.
      const int tail_len = cfg_.stft.win_len - cfg_.stft.hop;
      for (int i = 0; i < tail_len && frames_done_ > 0; ++i) {
        const double w1 = window_[static_cast<size_t>(cfg_.stft.hop + i)];
        const double ww = std::max(w1 * w1, 1e-12);
        out_.push_back(carry_s_[static_cast<size_t>(i)] / ww);
      }
    }
    return std::exchange(out_, {});
  }

  // Whole-signal convenience: push + finish + truncate to the input length.
  static std::pair<AudioBuffer, EngineDiagnostics> process(
      const EngineConfig& cfg, const AudioBuffer& mic, const AudioBuffer& ref,
      const nn::WeightManifest* weights = nullptr) {
    if (mic.sample_rate != ref.sample_rate)
      throw DataError("process: sample rate mismatch");
    if (mic.size() != ref.size())
      throw DataError("process: mic and ref lengths differ");
    std::unique_ptr<AecEngine> eng =
        weights ? std::make_unique<AecEngine>(cfg, *weights)
                : std::make_unique<AecEngine>(cfg);
    eng->push(mic.samples, ref.samples);
    std::vector<double> out = eng->pull();
    std::vector<double> tail = eng->finish();
    out.insert(out.end(), tail.begin(), tail.end());
    out.resize(mic.size(), 0.0);
    return {AudioBuffer(std::move(out), mic.sample_rate),
            eng->diagnostics()};
  }

 private:
  using clock = std::chrono::steady_clock;

  static EngineConfig fixup(EngineConfig cfg) {
    cfg.tde.stft = cfg.stft;  // one transform config everywhere
    return cfg;
  }

  void init_buffers() {
    const int win = cfg_.stft.win_len;
    const int hop = cfg_.stft.hop;
    window_ = make_window(cfg_.stft);
    fft_ = std::make_unique<Fft>(cfg_.stft.fft_size);
    ring_mic_.assign(static_cast<size_t>(2 * win + 4 * hop), 0.0);
    ring_e_.assign(static_cast<size_t>(2 * win + 4 * hop), 0.0);
    ring_y_.assign(static_cast<size_t>(2 * win + 4 * hop), 0.0);
    ring_ref_.assign(
        static_cast<size_t>(cfg_.tde.max_delay + 2 * win + 4 * hop), 0.0);
    pending_mic_.clear();
    pending_ref_.clear();
    carry_s_.assign(static_cast<size_t>(win - hop), 0.0);
    out_.clear();
    out_y_.clear();
    fed_ = 0;
    frames_done_ = 0;
    applied_delay_ = 0;
    adapt_enabled_ = false;
    erle_smoothed_ = 0.0;
    have_erle_ = false;
  }

  void drain() {
    const size_t hop = static_cast<size_t>(cfg_.stft.hop);
    size_t avail = std::min(pending_mic_.size(), pending_ref_.size());
    size_t used = 0;
    while (avail - used >= hop) {
      for (size_t i = 0; i < hop; ++i) {
        ring_mic_[(fed_ + i) % ring_mic_.size()] = pending_mic_[used + i];
        ring_ref_[(fed_ + i) % ring_ref_.size()] = pending_ref_[used + i];
      }
      fed_ += hop;
      used += hop;
      step_hop();
    }
    pending_mic_.erase(pending_mic_.begin(),
                       pending_mic_.begin() + static_cast<long>(used));
    pending_ref_.erase(pending_ref_.begin(),
                       pending_ref_.begin() + static_cast<long>(used));
  }

  static double ring_at(const std::vector<double>& ring, size_t fill,
                        long abs_idx) {
    if (abs_idx < 0 || abs_idx >= static_cast<long>(fill)) return 0.0;
    return ring[static_cast<size_t>(abs_idx) % ring.size()];
  }

  // sqrt-Hann windowed FFT of the frame ending at (frame+1)*hop, read from a
  // ring at an alignment offset.
  std::vector<std::complex<double>> frame_fft(const std::vector<double>& ring,
                                              size_t fill, long frame,
                                              long delay) {
    const int win = cfg_.stft.win_len;
    const int hop = cfg_.stft.hop;
    const long start = frame * hop - (win - hop);
    std::vector<std::complex<double>> buf(
        static_cast<size_t>(cfg_.stft.fft_size));
    for (int n = 0; n < win; ++n)
      buf[static_cast<size_t>(n)] =
          ring_at(ring, fill, start + n - delay) *
          window_[static_cast<size_t>(n)];
    fft_->forward(buf);
    buf.resize(static_cast<size_t>(cfg_.stft.bins()));
    return buf;
  }

  static void compress_frame(std::vector<std::complex<double>>& f, double p) {
    for (auto& c : f) {
      const double m = std::abs(c);
      c = (m > 0.0) ? c * std::pow(m, p - 1.0)
                    : std::complex<double>(0.0, 0.0);
    }
  }

  static void decompress_frame(std::vector<std::complex<double>>& f,
                               double p) {
    for (auto& c : f) {
      const double m = std::abs(c);
      c = (m > 0.0) ? c * std::pow(m, 1.0 / p - 1.0)
                    : std::complex<double>(0.0, 0.0);
    }
  }

  // Inverse FFT + synthesis window + overlap-add; emits hop samples once the
  // first (pad-covering) frame has passed.
  void ola_emit(const std::vector<std::complex<double>>& spec,
                std::vector<double>& carry, std::vector<double>& dst) {
    const int win = cfg_.stft.win_len;
    const int hop = cfg_.stft.hop;
    std::vector<std::complex<double>> buf(
        static_cast<size_t>(cfg_.stft.fft_size));
    for (int k = 0; k < cfg_.stft.bins(); ++k)
      buf[static_cast<size_t>(k)] = spec[static_cast<size_t>(k)];
    for (int k = cfg_.stft.bins(); k < cfg_.stft.fft_size; ++k)
      buf[static_cast<size_t>(k)] =
          std::conj(spec[static_cast<size_t>(cfg_.stft.fft_size - k)]);
    fft_->inverse(buf);

    const bool warm = frames_done_ > 0;
    for (int i = 0; i < hop; ++i) {
      const double w0 = window_[static_cast<size_t>(i)];
      const double contribution = buf[static_cast<size_t>(i)].real() * w0;
      if (warm) {
        const double w1 = window_[static_cast<size_t>(hop + i)];
        const double wsum = w0 * w0 + w1 * w1;
        dst.push_back((carry[static_cast<size_t>(i)] + contribution) /
                      std::max(wsum, 1e-12));
      }
    }
    for (int i = 0; i < win - hop; ++i)
      carry[static_cast<size_t>(i)] =
          buf[static_cast<size_t>(hop + i)].real() *
          window_[static_cast<size_t>(hop + i)];
  }

  void step_hop() {
    const int hop = cfg_.stft.hop;
    const long t = frames_done_;
    const auto t0 = clock::now();

    // Delay tracking on sub-band envelopes of the unaligned pair.
    auto d_frame = frame_fft(ring_mic_, fed_, t, 0);
    {
      auto xr_frame = frame_fft(ring_ref_, fed_, t, 0);
      tracker_->push(
          tde_detail::frame_envelope(d_frame.data(), cfg_.stft.bins(),
                                     cfg_.tde),
          tde_detail::frame_envelope(xr_frame.data(), cfg_.stft.bins(),
                                     cfg_.tde));
    }
    if (tracker_->has_estimate()) {
      const DelayEstimate cur = tracker_->current();
      // Hysteresis: re-align only on a confident estimate that moved by more
      // than a hop, otherwise small per-block wobble would keep shifting the
      // reference under the converged filter.
      if (cur.confidence >= 0.15) {
        adapt_enabled_ = true;  // reference alignment is trustworthy now
        const long cand = std::clamp<long>(
            std::lround(cur.delay) - cfg_.delay_backoff, 0,
            cfg_.tde.max_delay);
        if (std::labs(cand - applied_delay_) > cfg_.stft.hop) {
          applied_delay_ = cand;
          // The converged partitions model the old alignment; restart the
          // filter instead of unlearning a now-garbage solution.
          ols_ = std::make_unique<NlmsOls>(cfg_.nlms, cfg_.stft.hop);
        }
      }
      diag_.delay = cur;
    }
    diag_.delay_track.push_back(static_cast<double>(applied_delay_));

    // Linear stage on time blocks: mic block t, aligned ref window.
    std::vector<double> mic_block(static_cast<size_t>(hop));
    for (int i = 0; i < hop; ++i)
      mic_block[static_cast<size_t>(i)] =
          ring_at(ring_mic_, fed_, t * hop + i);
    std::vector<double> ref_window(static_cast<size_t>(2 * hop));
    for (int i = 0; i < 2 * hop; ++i)
      ref_window[static_cast<size_t>(i)] =
          ring_at(ring_ref_, fed_, (t - 1) * hop + i - applied_delay_);

    std::vector<double> e_block(static_cast<size_t>(hop)),
        y_block(static_cast<size_t>(hop));
    try {
      ols_->step(mic_block.data(), ref_window.data(), e_block.data(),
                 y_block.data(), adapt_enabled_);
    } catch (const Error& e) {
      throw NumericError(std::string("linear-filter stage: ") + e.what());
    }
    for (int i = 0; i < hop; ++i) {
      ring_e_[(static_cast<size_t>(t) * hop + i) % ring_e_.size()] =
          e_block[static_cast<size_t>(i)];
      ring_y_[(static_cast<size_t>(t) * hop + i) % ring_y_.size()] =
          y_block[static_cast<size_t>(i)];
    }
    const auto t1 = clock::now();
    stats_.linear_seconds += std::chrono::duration<double>(t1 - t0).count();

    size_t out_before = out_.size();
    if (cfg_.linear_only || !tbnn_) {
      out_.insert(out_.end(), e_block.begin(), e_block.end());
      diag_.vad.push_back(0.0);
    } else {
      try {
        const size_t efill = static_cast<size_t>(t + 1) * hop;
        auto e_frame = frame_fft(ring_e_, efill, t, 0);
        auto y_frame = frame_fft(ring_y_, efill, t, 0);
        const double p = cfg_.tbnn.compression;
        compress_frame(d_frame, p);
        compress_frame(e_frame, p);
        compress_frame(y_frame, p);
        auto res = tbnn_->step(d_frame.data(), e_frame.data(), y_frame.data());
        decompress_frame(res.s_hat, p);
        diag_.vad.push_back(res.vad);
        ola_emit(res.s_hat, carry_s_, out_);
      } catch (const Error& e) {
        throw NumericError(std::string("postfilter stage: ") + e.what());
      }
    }
    if (cfg_.emit_y)
      out_y_.insert(out_y_.end(), y_block.begin(), y_block.end());
    const auto t2 = clock::now();
    stats_.postfilter_seconds +=
        std::chrono::duration<double>(t2 - t1).count();

    // Smoothed per-frame ERLE trace against the matching mic segment.
    if (out_.size() > out_before) {
      double e_out = 0.0;
      for (size_t i = out_before; i < out_.size(); ++i)
        e_out += out_[i] * out_[i];
      const long seg = cfg_.linear_only ? t : t - 1;
      double e_mic = 0.0;
      for (int i = 0; i < hop; ++i) {
        const double v = ring_at(ring_mic_, fed_, seg * hop + i);
        e_mic += v * v;
      }
      const double inst =
          10.0 * std::log10(std::max(e_mic, 1e-12) / std::max(e_out, 1e-12));
      erle_smoothed_ = have_erle_ ? 0.95 * erle_smoothed_ + 0.05 * inst : inst;
      have_erle_ = true;
      diag_.erle_trace.push_back(erle_smoothed_);
    }

    ++frames_done_;
    ++stats_.frames;
  }

  EngineConfig cfg_;
  std::vector<double> window_;
  std::unique_ptr<Fft> fft_;
  std::unique_ptr<DelayTracker> tracker_;
  std::unique_ptr<NlmsOls> ols_;
  std::unique_ptr<Tbnn> tbnn_;

  std::vector<double> pending_mic_, pending_ref_;
  std::vector<double> ring_mic_, ring_ref_, ring_e_, ring_y_;
  size_t fed_ = 0;
  long frames_done_ = 0;
  long applied_delay_ = 0;
  bool adapt_enabled_ = false;

  std::vector<double> carry_s_;
  std::vector<double> out_, out_y_;

  EngineStats stats_;
  EngineDiagnostics diag_;
  double erle_smoothed_ = 0.0;
  bool have_erle_ = false;
};

}  // namespace fbaec

#endif  // FBAEC_PIPELINE_HPP_
