// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_AUDIO_HPP_
#define FBAEC_AUDIO_HPP_

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <vector>

#include "fbaec/common.hpp"

namespace fbaec {

// Mono sample sequence at a declared rate; the time-domain currency of the
// pipeline. Samples are doubles so transform round trips keep full precision;
// WAV I/O narrows to the on-disk format.
struct AudioBuffer {
  std::vector<double> samples;
  int sample_rate = 48000;

  AudioBuffer() = default;
  AudioBuffer(std::vector<double> s, int rate)
      : samples(std::move(s)), sample_rate(rate) {}
  explicit AudioBuffer(size_t n, int rate = 48000)
      : samples(n, 0.0), sample_rate(rate) {}

  size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  double& operator[](size_t i) { return samples[i]; }
  double operator[](size_t i) const { return samples[i]; }
};

inline double signal_power(const std::vector<double>& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

inline double signal_energy(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

inline double peak_abs(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

inline bool all_finite(const std::vector<double>& x) {
  for (double v : x)
    if (!std::isfinite(v)) return false;
  return true;
}

// out[n] = in[n - delay], zero fill at the head, same length as input.
inline AudioBuffer shift_by(const AudioBuffer& in, size_t delay) {
  AudioBuffer out(in.size(), in.sample_rate);
  for (size_t n = delay; n < in.size(); ++n)
    out.samples[n] = in.samples[n - delay];
  return out;
}

}  // namespace fbaec

#endif  // FBAEC_AUDIO_HPP_
