// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_STFT_HPP_
#define FBAEC_STFT_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <vector>

#include "fbaec/audio.hpp"
#include "fbaec/common.hpp"
#include "fbaec/fft.hpp"

namespace fbaec {

// 48 kHz full-band framing: 20 ms windows, 10 ms hop, 960-point FFT,
// 481 bins. Square-root Hann analysis and synthesis (COLA at 50% overlap).
struct StftConfig {
  int sample_rate = 48000;
  int win_len = 960;
  int hop = 480;
  int fft_size = 960;
  std::string window = "sqrthann";

  int bins() const { return fft_size / 2 + 1; }

  void validate() const {
    if (win_len != fft_size)
      throw ConfigError("stft: win_len must equal fft_size");
    if (hop <= 0 || win_len % hop != 0)
      throw ConfigError("stft: hop must divide win_len exactly");
    if (window != "sqrthann")
      throw ConfigError("stft: unknown window '" + window + "'");
  }
};

// Complex time-frequency matrix [frames x bins], row-major per frame.
// compression_exponent 1.0 means linear, 0.5 means power-compressed.
struct Spectrogram {
  int frames = 0;
  int bins = 0;
  double compression_exponent = 1.0;
  std::vector<std::complex<double>> data;

  Spectrogram() = default;
  Spectrogram(int t, int k, double comp = 1.0)
      : frames(t),
        bins(k),
        compression_exponent(comp),
        data(static_cast<size_t>(t) * k) {}

  std::complex<double>& at(int t, int k) {
    return data[static_cast<size_t>(t) * bins + k];
  }
  const std::complex<double>& at(int t, int k) const {
    return data[static_cast<size_t>(t) * bins + k];
  }
  const std::complex<double>* frame(int t) const {
    return data.data() + static_cast<size_t>(t) * bins;
  }
  std::complex<double>* frame(int t) {
    return data.data() + static_cast<size_t>(t) * bins;
  }
};

inline std::vector<double> make_window(const StftConfig& cfg) {
  cfg.validate();
  std::vector<double> w(static_cast<size_t>(cfg.win_len));
  const double pi = 3.14159265358979323846;
  for (int n = 0; n < cfg.win_len; ++n) {
    const double hann = 0.5 - 0.5 * std::cos(2.0 * pi * n / cfg.win_len);
    w[static_cast<size_t>(n)] = std::sqrt(hann);
  }
  return w;
}

inline int stft_frame_count(size_t len, const StftConfig& cfg) {
  return static_cast<int>((len + static_cast<size_t>(cfg.hop) - 1) /
                          static_cast<size_t>(cfg.hop));
}

// Causal framing: the signal is prepended with win_len - hop zeros and padded
// at the tail to complete the last frame, so frame t covers original samples
// [t*hop - (win_len-hop), t*hop + hop) and never looks ahead of (t+1)*hop.
inline Spectrogram stft(const AudioBuffer& signal, const StftConfig& cfg) {
  cfg.validate();
  if (signal.sample_rate != cfg.sample_rate)
    throw ConfigError("stft: sample rate mismatch, signal " +
                      std::to_string(signal.sample_rate) + " vs config " +
                      std::to_string(cfg.sample_rate));
  if (signal.empty()) throw ContractError("stft: empty signal");

  const auto w = make_window(cfg);
  const int lead = cfg.win_len - cfg.hop;
  const int frames = stft_frame_count(signal.size(), cfg);
  Spectrogram spec(frames, cfg.bins(), 1.0);

  std::vector<std::complex<double>> buf(static_cast<size_t>(cfg.fft_size));
  Fft plan(cfg.fft_size);
  for (int t = 0; t < frames; ++t) {
    const long start = static_cast<long>(t) * cfg.hop - lead;
    for (int n = 0; n < cfg.win_len; ++n) {
      const long idx = start + n;
      const double s =
          (idx >= 0 && idx < static_cast<long>(signal.size()))
              ? signal.samples[static_cast<size_t>(idx)]
              : 0.0;
      buf[static_cast<size_t>(n)] = s * w[static_cast<size_t>(n)];
    }
    plan.forward(buf);
    for (int k = 0; k < cfg.bins(); ++k)
      spec.at(t, k) = buf[static_cast<size_t>(k)];
  }
  return spec;
}

// Overlap-add resynthesis. Returns frames*hop samples aligned with the
// original signal's indexing; interior reconstruction is exact under COLA.
inline AudioBuffer istft(const Spectrogram& spec, const StftConfig& cfg) {
  cfg.validate();
  if (spec.compression_exponent != 1.0)
    throw ContractError("istft: input must be uncompressed");
  if (spec.bins != cfg.bins())
    throw ContractError("istft: expected " + std::to_string(cfg.bins()) +
                        " bins, got " + std::to_string(spec.bins));

  const auto w = make_window(cfg);
  const int lead = cfg.win_len - cfg.hop;
  const size_t out_len = static_cast<size_t>(spec.frames) * cfg.hop;
  std::vector<double> acc(out_len + cfg.win_len, 0.0);
  std::vector<double> norm(out_len + cfg.win_len, 0.0);

  std::vector<std::complex<double>> buf(static_cast<size_t>(cfg.fft_size));
  Fft plan(cfg.fft_size);
  for (int t = 0; t < spec.frames; ++t) {
    for (int k = 0; k < cfg.bins(); ++k) buf[static_cast<size_t>(k)] = spec.at(t, k);
    for (int k = cfg.bins(); k < cfg.fft_size; ++k)
      buf[static_cast<size_t>(k)] = std::conj(spec.at(t, cfg.fft_size - k));
    plan.inverse(buf);
    const long start = static_cast<long>(t) * cfg.hop - lead;
    for (int n = 0; n < cfg.win_len; ++n) {
      const long idx = start + n;
      if (idx < 0) continue;
      const double ww = w[static_cast<size_t>(n)];
      acc[static_cast<size_t>(idx)] += buf[static_cast<size_t>(n)].real() * ww;
      norm[static_cast<size_t>(idx)] += ww * ww;
    }
  }

  AudioBuffer out(out_len, cfg.sample_rate);
  for (size_t n = 0; n < out_len; ++n)
    out.samples[n] = acc[n] / std::max(norm[n], 1e-12);
  return out;
}

// Magnitude |c|^p with the phase untouched: c -> |c|^p * e^(j*arg c),
// computed as c * |c|^(p-1). Zero maps to zero.
inline Spectrogram compress(const Spectrogram& spec, double p = 0.5) {
  if (spec.compression_exponent != 1.0)
    throw ContractError("compress: input already compressed");
  Spectrogram out = spec;
  out.compression_exponent = p;
  for (auto& c : out.data) {
    const double m = std::abs(c);
    c = (m > 0.0) ? c * std::pow(m, p - 1.0) : std::complex<double>(0.0, 0.0);
  }
  return out;
}

inline Spectrogram decompress(const Spectrogram& spec) {
  if (spec.compression_exponent == 1.0) return spec;
  const double p = spec.compression_exponent;
  Spectrogram out = spec;
  out.compression_exponent = 1.0;
  for (auto& c : out.data) {
    const double m = std::abs(c);
    c = (m > 0.0) ? c * std::pow(m, 1.0 / p - 1.0)
                  : std::complex<double>(0.0, 0.0);
  }
  return out;
}

// Full-band split at 16 kHz: bin 320 (exactly 16 kHz) belongs to the wide
// band, so WB = bins [0, 320] (321 bins) and HB = bins [321, 480] (160 bins).
struct BandSplitSpec {
  int total_bins = 481;
  int wb_bins = 321;

  int hb_bins() const { return total_bins - wb_bins; }
};

inline std::pair<Spectrogram, Spectrogram> band_split(const Spectrogram& spec,
                                                      const BandSplitSpec& bs) {
  if (spec.bins != bs.total_bins)
    throw ContractError("band_split: expected " +
                        std::to_string(bs.total_bins) + " bins, got " +
                        std::to_string(spec.bins));
  Spectrogram wb(spec.frames, bs.wb_bins, spec.compression_exponent);
  Spectrogram hb(spec.frames, bs.hb_bins(), spec.compression_exponent);
  for (int t = 0; t < spec.frames; ++t) {
    for (int k = 0; k < bs.wb_bins; ++k) wb.at(t, k) = spec.at(t, k);
    for (int k = 0; k < bs.hb_bins(); ++k)
      hb.at(t, k) = spec.at(t, bs.wb_bins + k);
  }
  return {wb, hb};
}

inline Spectrogram band_merge(const Spectrogram& wb, const Spectrogram& hb,
                              const BandSplitSpec& bs) {
  if (wb.bins != bs.wb_bins || hb.bins != bs.hb_bins())
    throw ContractError("band_merge: band widths do not match split spec");
  if (wb.frames != hb.frames)
    throw ContractError("band_merge: frame count mismatch");
  if (wb.compression_exponent != hb.compression_exponent)
    throw ContractError("band_merge: compression mismatch");
  Spectrogram full(wb.frames, bs.total_bins, wb.compression_exponent);
  for (int t = 0; t < wb.frames; ++t) {
    for (int k = 0; k < bs.wb_bins; ++k) full.at(t, k) = wb.at(t, k);
    for (int k = 0; k < bs.hb_bins(); ++k)
      full.at(t, bs.wb_bins + k) = hb.at(t, k);
  }
  return full;
}

// Real/imaginary feature stack [channels x frames x bins], float32 — the
// representation the post-filter networks consume. Channel order is
// [re(s1), im(s1), re(s2), im(s2), ...].
struct BandStack {
  int channels = 0;
  int frames = 0;
  int bins = 0;
  std::vector<float> data;

  float& at(int c, int t, int k) {
    return data[(static_cast<size_t>(c) * frames + t) * bins + k];
  }
  float at(int c, int t, int k) const {
    return data[(static_cast<size_t>(c) * frames + t) * bins + k];
  }
};

inline BandStack stack_reim(const std::vector<const Spectrogram*>& specs) {
  if (specs.empty()) throw ContractError("stack_reim: no inputs");
  const Spectrogram& first = *specs.front();
  for (const Spectrogram* s : specs) {
    if (s->frames != first.frames || s->bins != first.bins)
      throw ContractError("stack_reim: shape mismatch");
    if (s->compression_exponent != first.compression_exponent)
      throw ContractError("stack_reim: compression mismatch");
  }
  BandStack out;
  out.channels = 2 * static_cast<int>(specs.size());
  out.frames = first.frames;
  out.bins = first.bins;
  out.data.resize(static_cast<size_t>(out.channels) * out.frames * out.bins);
  for (size_t i = 0; i < specs.size(); ++i) {
    const Spectrogram& s = *specs[i];
    for (int t = 0; t < out.frames; ++t) {
      for (int k = 0; k < out.bins; ++k) {
        out.at(static_cast<int>(2 * i), t, k) =
            static_cast<float>(s.at(t, k).real());
        out.at(static_cast<int>(2 * i + 1), t, k) =
            static_cast<float>(s.at(t, k).imag());
      }
    }
  }
  return out;
}

inline std::vector<Spectrogram> unstack_reim(const BandStack& stack,
                                             double compression_exponent) {
  if (stack.channels % 2 != 0)
    throw ContractError("unstack_reim: odd channel count");
  std::vector<Spectrogram> out;
  for (int i = 0; i < stack.channels / 2; ++i) {
    Spectrogram s(stack.frames, stack.bins, compression_exponent);
    for (int t = 0; t < stack.frames; ++t)
      for (int k = 0; k < stack.bins; ++k)
        s.at(t, k) = std::complex<double>(stack.at(2 * i, t, k),
                                          stack.at(2 * i + 1, t, k));
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fbaec

#endif  // FBAEC_STFT_HPP_
