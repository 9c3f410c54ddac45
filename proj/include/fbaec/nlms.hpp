// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_NLMS_HPP_
#define FBAEC_NLMS_HPP_

#include <cmath>
#include <complex>
#include <vector>

#include "fbaec/common.hpp"
#include "fbaec/fft.hpp"

namespace fbaec {

// Frequency-domain NLMS: one independent multi-tap adaptive filter per STFT
// bin, operating on aligned reference frames. Produces the linear echo
// estimate y and the error e = mic - y per frame.
struct NlmsConfig {
  int taps = 8;
  double mu = 0.5;
  double delta = 1e-6;
  int bins = 481;

  void validate() const {
    if (!(mu > 0.0 && mu <= 2.0))
      throw ConfigError("nlms: mu must satisfy 0 < mu <= 2");
    if (taps < 1) throw ConfigError("nlms: taps must be >= 1");
    if (delta <= 0.0) throw ConfigError("nlms: delta must be > 0");
    if (bins < 1) throw ConfigError("nlms: bins must be >= 1");
  }
};

struct NlmsState {
  int bins = 0;
  int taps = 0;
  // [bin][tap], tap 0 = most recent reference frame.
  std::vector<std::complex<double>> weights;
  std::vector<std::complex<double>> ref_history;

  std::complex<double>& w(int k, int i) {
    return weights[static_cast<size_t>(k) * taps + i];
  }
  std::complex<double>& h(int k, int i) {
    return ref_history[static_cast<size_t>(k) * taps + i];
  }
};

inline NlmsState nlms_init(const NlmsConfig& cfg) {
  cfg.validate();
  NlmsState st;
  st.bins = cfg.bins;
  st.taps = cfg.taps;
  st.weights.assign(static_cast<size_t>(cfg.bins) * cfg.taps, {0.0, 0.0});
  st.ref_history.assign(static_cast<size_t>(cfg.bins) * cfg.taps, {0.0, 0.0});
  return st;
}

// One frame update. Per bin k:
//   push ref[k] into the tap history x_k
//   y[k] = sum_i conj(w_k[i]) * x_k[i]
//   e[k] = mic[k] - y[k]
//   w_k += mu * x_k * conj(e[k]) / (||x_k||^2 + delta)
// Non-finite input rejects the frame before any state is touched.
inline void nlms_step(NlmsState& st, const NlmsConfig& cfg,
                      const std::complex<double>* mic_frame,
                      const std::complex<double>* ref_frame,
                      std::complex<double>* e_out,
                      std::complex<double>* y_out) {
  for (int k = 0; k < st.bins; ++k) {
    if (!std::isfinite(mic_frame[k].real()) ||
        !std::isfinite(mic_frame[k].imag()) ||
        !std::isfinite(ref_frame[k].real()) ||
        !std::isfinite(ref_frame[k].imag()))
      throw NumericError("nlms: non-finite input at bin " + std::to_string(k));
  }
  const int taps = st.taps;
  for (int k = 0; k < st.bins; ++k) {
    std::complex<double>* h = &st.ref_history[static_cast<size_t>(k) * taps];
    std::complex<double>* w = &st.weights[static_cast<size_t>(k) * taps];
    for (int i = taps - 1; i > 0; --i) h[i] = h[i - 1];
    h[0] = ref_frame[k];

    std::complex<double> y(0.0, 0.0);
    double nrm = 0.0;
    for (int i = 0; i < taps; ++i) {
      y += std::conj(w[i]) * h[i];
      nrm += std::norm(h[i]);
    }
    const std::complex<double> e = mic_frame[k] - y;
    const std::complex<double> g =
        cfg.mu * std::conj(e) / (nrm + cfg.delta);
    for (int i = 0; i < taps; ++i) w[i] += h[i] * g;

    e_out[k] = e;
    y_out[k] = y;
  }
}

inline bool nlms_weights_finite(const NlmsState& st) {
  for (const auto& w : st.weights)
    if (!std::isfinite(w.real()) || !std::isfinite(w.imag())) return false;
  return true;
}

inline double nlms_weight_norm(const NlmsState& st) {
  double acc = 0.0;
  for (const auto& w : st.weights) acc += std::norm(w);
  return std::sqrt(acc);
}

// Partitioned-block overlap-save realization of the per-bin multi-tap NLMS.
// Each 10 ms block is filtered through `taps` frequency-domain partitions of
// a 2-block FFT, the error is formed in the time domain, and the update
// gradient is projected back onto causal partitions. Unlike windowed-STFT
// per-bin filtering this models true linear convolution, so a static echo
// path can be cancelled to the adaptation floor rather than the window's
// crossband-aliasing floor. The spectral state reuses NlmsState: weights and
// reference history are [bins x taps] with bins = block + 1.
class NlmsOls {
 public:
  NlmsOls(const NlmsConfig& cfg, int block)
      : cfg_(cfg), block_(block), fft_n_(2 * block),
        fft_(2 * block),
        st_(nlms_init(cfg)) {
    cfg_.validate();
    if (cfg.bins != block + 1)
      throw ConfigError("nlms_ols: bins must equal block + 1");
  }

  const NlmsState& state() const { return st_; }
  const NlmsConfig& config() const { return cfg_; }

  // mic_block: `block` samples; ref_window: 2*block samples ending at the
  // same instant (previous + current block of the aligned reference).
  // Emits the same-length time-domain error and echo estimate, with
  // e = mic - y per sample by construction. `adapt` gates the weight update
  // (filtering always runs); the caller holds it off until the reference is
  // aligned.
  void step(const double* mic_block, const double* ref_window,
            double* e_block, double* y_block, bool adapt = true) {
    for (int i = 0; i < block_; ++i)
      if (!std::isfinite(mic_block[i]) || !std::isfinite(ref_window[i]) ||
          !std::isfinite(ref_window[block_ + i]))
        throw NumericError("nlms_ols: non-finite input");

    const int bins = cfg_.bins;
    const int taps = cfg_.taps;

    // Reference spectrum of [prev, cur]; push into the tap history.
    buf_.assign(static_cast<size_t>(fft_n_), {0.0, 0.0});
    for (int i = 0; i < fft_n_; ++i) buf_[static_cast<size_t>(i)] = ref_window[i];
    fft_.forward(buf_);
    for (int k = 0; k < bins; ++k) {
      std::complex<double>* h = &st_.ref_history[static_cast<size_t>(k) * taps];
      for (int i = taps - 1; i > 0; --i) h[i] = h[i - 1];
      h[0] = buf_[static_cast<size_t>(k)];
    }

    // Y = sum_tap W .* X, back to time, keep the valid (second) half.
    spec_.assign(static_cast<size_t>(bins), {0.0, 0.0});
    for (int k = 0; k < bins; ++k) {
      const std::complex<double>* h =
          &st_.ref_history[static_cast<size_t>(k) * taps];
      const std::complex<double>* w =
          &st_.weights[static_cast<size_t>(k) * taps];
      std::complex<double> acc(0.0, 0.0);
      for (int i = 0; i < taps; ++i) acc += w[i] * h[i];
      spec_[static_cast<size_t>(k)] = acc;
    }
    to_time(spec_, time_);
    for (int i = 0; i < block_; ++i) {
      y_block[i] = time_[static_cast<size_t>(block_ + i)];
      e_block[i] = mic_block[i] - y_block[i];
    }

    if (!adapt) return;

    // Constrained error spectrum: zeros in the invalid half.
    buf_.assign(static_cast<size_t>(fft_n_), {0.0, 0.0});
    for (int i = 0; i < block_; ++i)
      buf_[static_cast<size_t>(block_ + i)] = e_block[i];
    fft_.forward(buf_);

    // Per-bin NLMS update, gradient projected onto the causal half so the
    // partitions stay linear-convolution filters. The normalization floor
    // tracks the broadband reference power (fast attack, slow decay): bins
    // with no reference energy must not adapt on near-end content during
    // far-end pauses, or the weights wander and burst when speech resumes.
    gain_.resize(static_cast<size_t>(bins));
    norms_.resize(static_cast<size_t>(bins));
    double mean_nrm = 0.0;
    for (int k = 0; k < bins; ++k) {
      const std::complex<double>* h =
          &st_.ref_history[static_cast<size_t>(k) * taps];
      double nrm = 0.0;
      for (int i = 0; i < taps; ++i) nrm += std::norm(h[i]);
      norms_[static_cast<size_t>(k)] = nrm;
      mean_nrm += nrm;
    }
    mean_nrm /= static_cast<double>(bins);
    power_track_ = std::max(mean_nrm, 0.998 * power_track_);
    const double floor = cfg_.delta + 1e-2 * power_track_;
    for (int k = 0; k < bins; ++k)
      gain_[static_cast<size_t>(k)] =
          cfg_.mu * buf_[static_cast<size_t>(k)] /
          (norms_[static_cast<size_t>(k)] + floor);
    for (int tap = 0; tap < taps; ++tap) {
      for (int k = 0; k < bins; ++k)
        spec_[static_cast<size_t>(k)] =
            std::conj(
                st_.ref_history[static_cast<size_t>(k) * taps + tap]) *
            gain_[static_cast<size_t>(k)];
      to_time(spec_, time_);
      for (int i = block_; i < fft_n_; ++i) time_[static_cast<size_t>(i)] = 0.0;
      buf2_.assign(static_cast<size_t>(fft_n_), {0.0, 0.0});
      for (int i = 0; i < block_; ++i)
        buf2_[static_cast<size_t>(i)] = time_[static_cast<size_t>(i)];
      fft_.forward(buf2_);
      for (int k = 0; k < bins; ++k)
        st_.weights[static_cast<size_t>(k) * taps + tap] +=
            buf2_[static_cast<size_t>(k)];
    }
  }

 private:
  // Hermitian-extend a bins-length half spectrum and inverse transform.
  void to_time(const std::vector<std::complex<double>>& half,
               std::vector<double>& out) {
    buf2_.assign(static_cast<size_t>(fft_n_), {0.0, 0.0});
    for (int k = 0; k < cfg_.bins; ++k) buf2_[static_cast<size_t>(k)] = half[static_cast<size_t>(k)];
    for (int k = cfg_.bins; k < fft_n_; ++k)
      buf2_[static_cast<size_t>(k)] =
          std::conj(half[static_cast<size_t>(fft_n_ - k)]);
    fft_.inverse(buf2_);
    out.resize(static_cast<size_t>(fft_n_));
    for (int i = 0; i < fft_n_; ++i) out[static_cast<size_t>(i)] = buf2_[static_cast<size_t>(i)].real();
  }

  NlmsConfig cfg_;
  int block_, fft_n_;
  Fft fft_;
  NlmsState st_;
  std::vector<std::complex<double>> buf_, buf2_, spec_, gain_;
  std::vector<double> time_, norms_;
  double power_track_ = 0.0;
};

}  // namespace fbaec

#endif  // FBAEC_NLMS_HPP_
