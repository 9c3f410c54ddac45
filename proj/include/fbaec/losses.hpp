// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_LOSSES_HPP_
#define FBAEC_LOSSES_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <vector>

#include "fbaec/audio.hpp"
#include "fbaec/common.hpp"
#include "fbaec/stft.hpp"

namespace fbaec {

// Training-loss suite with analytic gradients, exported for third-party
// trainers and exercised by the finite-difference oracle. Inputs arrive
// uncompressed; each loss applies the power-law compression internally.

struct LossWeights {
  double w_mask = 0.5;
  double w_vad = 0.1;
  double alpha = 10.0;
  double plcpa_p = 0.5;
  double echo_weight_beta = 1.0;

  void validate() const {
    if (w_mask < 0 || w_vad < 0 || alpha < 0 || plcpa_p <= 0 ||
        echo_weight_beta < 0)
      throw ConfigError("loss weights must be non-negative (p > 0)");
  }
};

// Gradient is packed per bin as d/d(re) + j*d/d(im) of the estimate.
struct LossResult {
  double value = 0.0;
  Spectrogram grad;
  bool empty_active_set = false;
};

namespace loss_detail {

inline void check_pair(const Spectrogram& est, const Spectrogram& ref) {
  if (est.frames != ref.frames || est.bins != ref.bins)
    throw ContractError("loss: shape mismatch");
  if (est.compression_exponent != 1.0 || ref.compression_exponent != 1.0)
    throw ContractError("loss: inputs must be uncompressed");
}

constexpr double kMagFloor = 1e-12;

}  // namespace loss_detail

// Power-law compressed phase-aware loss:
//   mean over bins of (|S|^p - |Sh|^p)^2 + | |S|^p e^(j phS) - |Sh|^p e^(j phSh) |^2
inline LossResult loss_plcpa(const Spectrogram& est, const Spectrogram& ref,
                             double p = 0.5) {
  loss_detail::check_pair(est, ref);
  const size_t n = est.data.size();
  LossResult res;
  res.grad = Spectrogram(est.frames, est.bins, 1.0);
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const std::complex<double> sh = est.data[i];
    const std::complex<double> s = ref.data[i];
    const double mh = std::abs(sh);
    const double m = std::abs(s);
    const double mhp = std::pow(mh, p);
    const double mp = std::pow(m, p);
    const std::complex<double> c_ref =
        (m > 0.0) ? s * std::pow(m, p - 1.0) : std::complex<double>(0.0, 0.0);
    const std::complex<double> c_est =
        (mh > 0.0) ? sh * std::pow(mh, p - 1.0)
                   : std::complex<double>(0.0, 0.0);
    const double mag_term = (mp - mhp) * (mp - mhp);
    const double cplx_term = std::norm(c_ref - c_est);
    acc += mag_term + cplx_term;

    if (mh > loss_detail::kMagFloor) {
      const double a = sh.real(), b = sh.imag();
      // d(mh^p)/da = p*mh^(p-2)*a
      const double dmp_da = p * std::pow(mh, p - 2.0) * a;
      const double dmp_db = p * std::pow(mh, p - 2.0) * b;
      double ga = -2.0 * (mp - mhp) * dmp_da;
      double gb = -2.0 * (mp - mhp) * dmp_db;
      // c_est = mh^(p-1) * sh; d c_est/da = mh^(p-1) + (p-1) mh^(p-3) a sh
      const std::complex<double> diff = c_est - c_ref;
      const double mh_p1 = std::pow(mh, p - 1.0);
      const double mh_p3 = std::pow(mh, p - 3.0);
      const std::complex<double> dc_da =
          std::complex<double>(mh_p1, 0.0) + (p - 1.0) * mh_p3 * a * sh;
      const std::complex<double> dc_db =
          std::complex<double>(0.0, mh_p1) + (p - 1.0) * mh_p3 * b * sh;
      ga += 2.0 * (diff.real() * dc_da.real() + diff.imag() * dc_da.imag());
      gb += 2.0 * (diff.real() * dc_db.real() + diff.imag() * dc_db.imag());
      res.grad.data[i] = std::complex<double>(ga, gb) / static_cast<double>(n);
    }
  }
  res.value = acc / static_cast<double>(n);
  return res;
}

// Echo power weighted magnitude loss:
//   mean over bins of w * (|S|^p - |Sh|^p)^2, w = 1 + beta*|Z|^p/mean(|Z|^p)
inline LossResult loss_echo_weighted(const Spectrogram& est,
                                     const Spectrogram& ref,
                                     const Spectrogram& echo, double p = 0.5,
                                     double beta = 1.0) {
  loss_detail::check_pair(est, ref);
  if (echo.frames != est.frames || echo.bins != est.bins)
    throw ContractError("loss: echo shape mismatch");
  const size_t n = est.data.size();
  double zp_mean = 0.0;
  std::vector<double> zp(n);
  for (size_t i = 0; i < n; ++i) {
    zp[i] = std::pow(std::abs(echo.data[i]), p);
    zp_mean += zp[i];
  }
  zp_mean /= static_cast<double>(n);

  LossResult res;
  res.grad = Spectrogram(est.frames, est.bins, 1.0);
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double w = (zp_mean > 0.0) ? 1.0 + beta * zp[i] / zp_mean : 1.0;
    const double mh = std::abs(est.data[i]);
    const double m = std::abs(ref.data[i]);
    const double mhp = std::pow(mh, p);
    const double mp = std::pow(m, p);
    acc += w * (mp - mhp) * (mp - mhp);
    if (mh > loss_detail::kMagFloor) {
      const double base = -2.0 * w * (mp - mhp) * p * std::pow(mh, p - 2.0) /
                          static_cast<double>(n);
      res.grad.data[i] = std::complex<double>(base * est.data[i].real(),
                                              base * est.data[i].imag());
    }
  }
  res.value = acc / static_cast<double>(n);
  return res;
}

// Masked MSE over re/im of the complex mask, restricted to active bins.
inline LossResult loss_mask(const Spectrogram& est_mask,
                            const Spectrogram& ideal_mask,
                            const std::vector<uint8_t>& activity) {
  if (est_mask.frames != ideal_mask.frames ||
      est_mask.bins != ideal_mask.bins)
    throw ContractError("loss_mask: shape mismatch");
  if (activity.size() != est_mask.data.size())
    throw ContractError("loss_mask: activity mask shape mismatch");
  LossResult res;
  res.grad = Spectrogram(est_mask.frames, est_mask.bins, 1.0);
  size_t n_active = 0;
  double acc = 0.0;
  for (size_t i = 0; i < activity.size(); ++i)
    if (activity[i]) ++n_active;
  if (n_active == 0) {
    res.empty_active_set = true;
    return res;
  }
  for (size_t i = 0; i < activity.size(); ++i) {
    if (!activity[i]) continue;
    const std::complex<double> d = est_mask.data[i] - ideal_mask.data[i];
    acc += std::norm(d);
    res.grad.data[i] = 2.0 * d / static_cast<double>(n_active);
  }
  res.value = acc / static_cast<double>(n_active);
  return res;
}

// Ideal complex ratio mask S/I, clipped to |m| <= clip; activity marks bins
// whose reference-mix energy is above -60 dB of the utterance peak.
inline std::pair<Spectrogram, std::vector<uint8_t>> ideal_mask(
    const Spectrogram& target, const Spectrogram& mix, double clip = 2.0) {
  if (target.frames != mix.frames || target.bins != mix.bins)
    throw ContractError("ideal_mask: shape mismatch");
  double peak = 0.0;
  for (const auto& c : mix.data) peak = std::max(peak, std::norm(c));
  const double thresh = peak * 1e-6;  // -60 dB in power
  Spectrogram mask(target.frames, target.bins, 1.0);
  std::vector<uint8_t> active(mix.data.size(), 0);
  for (size_t i = 0; i < mix.data.size(); ++i) {
    if (std::norm(mix.data[i]) <= thresh) continue;
    active[i] = 1;
    std::complex<double> m = target.data[i] / mix.data[i];
    const double mag = std::abs(m);
    if (mag > clip) m *= clip / mag;
    mask.data[i] = m;
  }
  return {std::move(mask), std::move(active)};
}

struct VadLossResult {
  double value = 0.0;
  std::vector<double> grad;
};

// Binary cross-entropy, mean over frames, probabilities clamped to
// [eps, 1-eps].
inline VadLossResult loss_vad(const std::vector<double>& pred,
                              const std::vector<double>& label) {
  if (pred.size() != label.size())
    throw ContractError("loss_vad: length mismatch");
  if (pred.empty()) throw ContractError("loss_vad: empty input");
  constexpr double eps = 1e-7;
  VadLossResult res;
  res.grad.assign(pred.size(), 0.0);
  const double n = static_cast<double>(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) {
    const double p = std::clamp(pred[i], eps, 1.0 - eps);
    const double y = label[i];
    res.value += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    if (pred[i] > eps && pred[i] < 1.0 - eps)
      res.grad[i] = (-y / p + (1.0 - y) / (1.0 - p)) / n;
  }
  res.value /= n;
  return res;
}

struct LossComponents {
  double echo_weighted = 0.0;
  double plcpa = 0.0;
  double mask = 0.0;
  double vad = 0.0;
};

inline double loss_wb(const LossComponents& c, const LossWeights& w = {}) {
  return c.echo_weighted + c.plcpa + w.w_mask * c.mask + w.w_vad * c.vad;
}

// The high-band loss carries no VAD term.
inline double loss_hb(const LossComponents& c, const LossWeights& w = {}) {
  return c.echo_weighted + c.plcpa + w.w_mask * c.mask;
}

inline double loss_final(double hb, double wb, const LossWeights& w = {}) {
  return w.alpha * hb + wb;
}

// ---------------------------------------------------------------------------
// Evaluation metrics.
// ---------------------------------------------------------------------------

// Echo return loss enhancement over a sample range [begin, end).
inline double erle_db(const AudioBuffer& mic, const AudioBuffer& out,
                      size_t begin = 0, size_t end = 0) {
  if (end == 0) end = std::min(mic.size(), out.size());
  if (begin >= end) throw ContractError("erle: empty segment");
  double pm = 0.0, po = 0.0;
  for (size_t i = begin; i < end && i < mic.size() && i < out.size(); ++i) {
    pm += mic.samples[i] * mic.samples[i];
    po += out.samples[i] * out.samples[i];
  }
  return 10.0 * std::log10(std::max(pm, 1e-300) / std::max(po, 1e-300));
}

struct SiSdrResult {
  double value_db = 0.0;
  bool capped = false;
};

// Scale-invariant SDR versus the clean reference, capped at +60 dB for the
// degenerate exact-match case.
inline SiSdrResult si_sdr_db(const AudioBuffer& est, const AudioBuffer& ref,
                             double cap_db = 60.0) {
  const size_t n = std::min(est.size(), ref.size());
  if (n == 0) throw ContractError("si_sdr: empty input");
  double dot = 0.0, ref_pow = 0.0;
  for (size_t i = 0; i < n; ++i) {
    dot += est.samples[i] * ref.samples[i];
    ref_pow += ref.samples[i] * ref.samples[i];
  }
  if (ref_pow <= 0.0) throw ContractError("si_sdr: silent reference");
  const double scale = dot / ref_pow;
  double target_pow = 0.0, err_pow = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double tgt = scale * ref.samples[i];
    const double err = est.samples[i] - tgt;
    target_pow += tgt * tgt;
    err_pow += err * err;
  }
  SiSdrResult res;
  if (err_pow <= target_pow * 1e-30) {
    res.value_db = cap_db;
    res.capped = true;
    return res;
  }
  res.value_db = 10.0 * std::log10(target_pow / err_pow);
  if (res.value_db > cap_db) {
    res.value_db = cap_db;
    res.capped = true;
  }
  return res;
}

// ---------------------------------------------------------------------------
// Finite-difference oracle.
// ---------------------------------------------------------------------------

// Central differences on a seeded subset of coordinates (all when the input
// is small). Returns the max relative error against the analytic gradient.
inline double grad_check(
    const std::function<double(const std::vector<double>&)>& f,
    const std::vector<double>& x0, const std::vector<double>& analytic,
    double step = 1e-4, size_t max_coords = 200, uint64_t seed = 0) {
  if (x0.size() != analytic.size())
    throw ContractError("grad_check: gradient length mismatch");
  std::vector<size_t> coords;
  if (x0.size() <= max_coords) {
    for (size_t i = 0; i < x0.size(); ++i) coords.push_back(i);
  } else {
    SplitMix64 rng(seed);
    for (size_t i = 0; i < max_coords; ++i)
      coords.push_back(static_cast<size_t>(rng.next_u64() % x0.size()));
  }
  std::vector<double> x = x0;
  double max_rel = 0.0;
  for (size_t i : coords) {
    const double save = x[i];
    x[i] = save + step;
    const double fp = f(x);
    x[i] = save - step;
    const double fm = f(x);
    x[i] = save;
    const double fd = (fp - fm) / (2.0 * step);
    const double an = analytic[i];
    const double rel =
        std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-10});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

// Flatten a complex spectrogram into [re0, im0, re1, im1, ...] coordinates.
inline std::vector<double> flatten_spec(const Spectrogram& s) {
  std::vector<double> out(2 * s.data.size());
  for (size_t i = 0; i < s.data.size(); ++i) {
    out[2 * i] = s.data[i].real();
    out[2 * i + 1] = s.data[i].imag();
  }
  return out;
}

inline Spectrogram unflatten_spec(const std::vector<double>& x, int frames,
                                  int bins) {
  Spectrogram s(frames, bins, 1.0);
  for (size_t i = 0; i < s.data.size(); ++i)
    s.data[i] = std::complex<double>(x[2 * i], x[2 * i + 1]);
  return s;
}

}  // namespace fbaec

#endif  // FBAEC_LOSSES_HPP_
