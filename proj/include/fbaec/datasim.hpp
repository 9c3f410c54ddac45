// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_DATASIM_HPP_
#define FBAEC_DATASIM_HPP_

#include <algorithm>
#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "json.hpp"

#include "fbaec/audio.hpp"
#include "fbaec/common.hpp"
#include "fbaec/fft.hpp"
#include "fbaec/wav.hpp"

namespace fbaec {

// Double-talk scene simulator for the additive microphone model
// d = s + r + v + z with z = h * F(x): image-source early reflections plus a
// stochastic reverberant tail, memoryless loudspeaker distortion, delayed
// echo injection, and SNR/SER-controlled mixing with ground truth.

enum class Scenario { kDt, kStFe, kStNe };

inline std::string scenario_name(Scenario s) {
  switch (s) {
    case Scenario::kDt: return "DT";
    case Scenario::kStFe: return "ST-FE";
    case Scenario::kStNe: return "ST-NE";
  }
  return "?";
}

inline Scenario scenario_from_name(const std::string& n) {
  if (n == "DT") return Scenario::kDt;
  if (n == "ST-FE") return Scenario::kStFe;
  if (n == "ST-NE") return Scenario::kStNe;
  throw DataError("unknown scenario '" + n + "'");
}

struct NonlinearityParams {
  double clip_ratio = 0.8;  // hard clip at clip_ratio * peak
  double tanh_gain = 2.0;   // soft saturation tanh(g*x)/g
};

struct SceneSpec {
  uint64_t seed = 0;
  std::array<double, 3> room = {6.0, 4.0, 3.0};  // meters
  double rt60 = 0.4;                             // seconds
  double snr_db = 10.0;
  double ser_db = 0.0;
  int delay = 4800;  // samples
  bool nearend_reverb = false;
  NonlinearityParams nonlinearity;
  Scenario scenario = Scenario::kDt;
  double duration = 8.0;  // seconds
  int sample_rate = 48000;

  void validate() const {
    if (room[0] < 1.0 || room[1] < 1.0 || room[2] < 1.0)
      throw ConfigError("scene: room too small");
    if (rt60 < 0.05 || rt60 > 3.0) throw ConfigError("scene: rt60 out of range");
    if (delay < 0) throw ConfigError("scene: negative delay");
    if (duration < 1.0) throw ConfigError("scene: duration under 1 s");
  }

  // Draws every field from the corpus recipe: rooms 5x3x3 to 8x5x4, rt60
  // 0.2-1.2 s, SNR 0-25 dB, SER -15-15 dB, delay up to 500 ms, 30% of
  // near-end speech reverberated.
  static SceneSpec random_from(uint64_t seed, Scenario scenario) {
    SplitMix64 rng(seed * 0x9e3779b97f4a7c15ULL + 1);
    SceneSpec sp;
    sp.seed = seed;
    sp.scenario = scenario;
    sp.room = {rng.next_uniform(5.0, 8.0), rng.next_uniform(3.0, 5.0),
               rng.next_uniform(3.0, 4.0)};
    sp.rt60 = rng.next_uniform(0.2, 1.2);
    sp.snr_db = rng.next_uniform(0.0, 25.0);
    sp.ser_db = rng.next_uniform(-15.0, 15.0);
    sp.delay = rng.next_int(0, 24000);
    sp.nearend_reverb = rng.next_double() < 0.3;
    sp.nonlinearity.clip_ratio = rng.next_uniform(0.6, 0.95);
    sp.nonlinearity.tanh_gain = rng.next_uniform(1.0, 4.0);
    return sp;
  }

  nlohmann::json to_json() const {
    return nlohmann::json{
        {"seed", seed},
        {"room", room},
        {"rt60", rt60},
        {"snr_db", snr_db},
        {"ser_db", ser_db},
        {"delay", delay},
        {"nearend_reverb", nearend_reverb},
        {"clip_ratio", nonlinearity.clip_ratio},
        {"tanh_gain", nonlinearity.tanh_gain},
        {"scenario", scenario_name(scenario)},
        {"duration", duration},
        {"sample_rate", sample_rate}};
  }

  static SceneSpec from_json(const nlohmann::json& j) {
    SceneSpec sp;
    sp.seed = j.at("seed").get<uint64_t>();
    const auto r = j.at("room").get<std::vector<double>>();
    sp.room = {r.at(0), r.at(1), r.at(2)};
    sp.rt60 = j.at("rt60").get<double>();
    sp.snr_db = j.at("snr_db").get<double>();
    sp.ser_db = j.at("ser_db").get<double>();
    sp.delay = j.at("delay").get<int>();
    sp.nearend_reverb = j.at("nearend_reverb").get<bool>();
    sp.nonlinearity.clip_ratio = j.at("clip_ratio").get<double>();
    sp.nonlinearity.tanh_gain = j.at("tanh_gain").get<double>();
    sp.scenario = scenario_from_name(j.at("scenario").get<std::string>());
    sp.duration = j.at("duration").get<double>();
    sp.sample_rate = j.at("sample_rate").get<int>();
    return sp;
  }
};

struct Scene {
  AudioBuffer d, s, r, v, z, x;
  std::vector<uint8_t> vad_labels;
  SceneSpec spec;
};

// ---------------------------------------------------------------------------
// RIR synthesis: image-source early part, seeded exponentially decaying
// noise tail matched to rt60, unit-energy normalization.
// ---------------------------------------------------------------------------

namespace datasim_detail {

constexpr double kSpeedOfSound = 343.0;

inline void add_sinc_impulse(std::vector<double>& h, double pos,
                             double amp) {
  // Hann-windowed sinc, 64 taps, centered on the fractional sample position.
  constexpr int kHalf = 32;
  const double pi = 3.14159265358979323846;
  const int lo = static_cast<int>(std::floor(pos)) - kHalf + 1;
  for (int i = lo; i < lo + 2 * kHalf; ++i) {
    if (i < 0 || i >= static_cast<int>(h.size())) continue;
    const double t = static_cast<double>(i) - pos;
    const double sinc = (t == 0.0) ? 1.0 : std::sin(pi * t) / (pi * t);
    const double win = 0.5 * (1.0 + std::cos(pi * t / kHalf));
    h[static_cast<size_t>(i)] += amp * sinc * win;
  }
}

}  // namespace datasim_detail

inline std::vector<double> gen_rir(const std::array<double, 3>& room,
                                   double rt60,
                                   const std::array<double, 3>& source,
                                   const std::array<double, 3>& receiver,
                                   uint64_t seed, int fs = 48000) {
  using namespace datasim_detail;
  for (int i = 0; i < 3; ++i) {
    if (source[i] <= 0.05 || source[i] >= room[i] - 0.05 ||
        receiver[i] <= 0.05 || receiver[i] >= room[i] - 0.05)
      throw ConfigError("gen_rir: source/receiver outside the room");
  }
  if (rt60 < 0.05) throw ConfigError("gen_rir: rt60 too small");

  const double vol = room[0] * room[1] * room[2];
  const double surf = 2.0 * (room[0] * room[1] + room[0] * room[2] +
                             room[1] * room[2]);
  double alpha = 0.161 * vol / (surf * rt60);  // Sabine
  alpha = std::min(alpha, 0.95);
  const double beta = std::sqrt(1.0 - alpha);

  const double dx = source[0] - receiver[0];
  const double dy = source[1] - receiver[1];
  const double dz = source[2] - receiver[2];
  const double direct_dist = std::sqrt(dx * dx + dy * dy + dz * dz);
  const double t0 = direct_dist / kSpeedOfSound;
  const double t_cross = t0 + 0.04;  // hand over to the stochastic tail

  const size_t len = static_cast<size_t>(rt60 * fs) + 2400;
  std::vector<double> h(len, 0.0);

  // Image sources within the crossover window.
  constexpr int kMaxOrder = 3;
  for (int mx = -kMaxOrder; mx <= kMaxOrder; ++mx) {
    for (int my = -kMaxOrder; my <= kMaxOrder; ++my) {
      for (int mz = -kMaxOrder; mz <= kMaxOrder; ++mz) {
        for (int q = 0; q <= 1; ++q) {
          for (int j = 0; j <= 1; ++j) {
            for (int k = 0; k <= 1; ++k) {
              const double ix =
                  (1 - 2 * q) * source[0] - receiver[0] + 2.0 * mx * room[0];
              const double iy =
                  (1 - 2 * j) * source[1] - receiver[1] + 2.0 * my * room[1];
              const double iz =
                  (1 - 2 * k) * source[2] - receiver[2] + 2.0 * mz * room[2];
              const double dist =
                  std::max(0.1, std::sqrt(ix * ix + iy * iy + iz * iz));
              const double t = dist / kSpeedOfSound;
              if (t >= t_cross) continue;
              const int order = std::abs(mx - q) + std::abs(mx) +
                                std::abs(my - j) + std::abs(my) +
                                std::abs(mz - k) + std::abs(mz);
              const double amp =
                  std::pow(beta, order) / (4.0 * 3.14159265358979323846 * dist);
              add_sinc_impulse(h, t * fs, amp);
            }
          }
        }
      }
    }
  }

  // Tail: white noise under exp(-6.9078 (t - t0) / rt60), power-matched to
  // the last 5 ms of the image-source part at the crossover.
  const size_t i_cross = static_cast<size_t>(t_cross * fs);
  double early_pow = 0.0;
  size_t early_cnt = 0;
  for (size_t i = i_cross > 240 ? i_cross - 240 : 0; i < i_cross && i < len;
       ++i) {
    early_pow += h[i] * h[i];
    ++early_cnt;
  }
  early_pow = early_cnt ? early_pow / static_cast<double>(early_cnt) : 0.0;
  const double decay = 6.907755278982137 / rt60;  // ln(1e3): -60 dB amplitude
  const double env_cross = std::exp(-decay * (t_cross - t0));
  const double tail_amp = (early_pow > 0.0 && env_cross > 0.0)
                              ? std::sqrt(early_pow) / env_cross
                              : 1e-4;
  SplitMix64 rng(seed ^ 0x5151515151515151ULL);
  for (size_t i = i_cross; i < len; ++i) {
    const double t = static_cast<double>(i) / fs;
    h[i] += tail_amp * std::exp(-decay * (t - t0)) * rng.next_gaussian();
  }

  const double energy = signal_energy(h);
  if (energy <= 0.0) throw NumericError("gen_rir: produced a silent RIR");
  const double scale = 1.0 / std::sqrt(energy);
  for (auto& v : h) v *= scale;
  return h;
}

// Memoryless loudspeaker distortion: hard clip followed by a tanh
// saturation, both bypassed for degenerate parameter values.
inline AudioBuffer nonlinear_distort(const AudioBuffer& x,
                                     const NonlinearityParams& p) {
  AudioBuffer out = x;
  const double peak = peak_abs(x.samples);
  const double clip = p.clip_ratio * peak;
  if (peak > 0.0 && p.clip_ratio > 0.0 && p.clip_ratio < 1.0) {
    for (auto& v : out.samples) v = std::clamp(v, -clip, clip);
  }
  if (p.tanh_gain > 1e-6) {
    const double g = p.tanh_gain;
    for (auto& v : out.samples) v = std::tanh(g * v) / g;
  }
  return out;
}

// z = shift(conv(distort(x), rir), delay), truncated to the input length.
inline AudioBuffer make_echo(const AudioBuffer& x,
                             const std::vector<double>& rir, int delay,
                             const NonlinearityParams& p = {0.0, 0.0}) {
  AudioBuffer driven = nonlinear_distort(x, p);
  const std::vector<double> conv = fft_convolve(driven.samples, rir);
  AudioBuffer z(x.size(), x.sample_rate);
  for (size_t n = static_cast<size_t>(delay); n < z.size(); ++n) {
    const size_t src = n - static_cast<size_t>(delay);
    if (src < conv.size()) z.samples[n] = conv[src];
  }
  return z;
}

// ---------------------------------------------------------------------------
// Source material. SyntheticCorpus generates seeded speech stand-ins
// (envelope-modulated noise with pauses) and filtered noise so the test
// suite never depends on external datasets; DirectoryCorpus ingests a
// directory of 48 kHz mono WAVs through a JSON manifest.
// ---------------------------------------------------------------------------

class Corpus {
 public:
  virtual ~Corpus() = default;
  virtual AudioBuffer speech(uint64_t seed, size_t len) const = 0;
  virtual AudioBuffer noise(uint64_t seed, size_t len) const = 0;
};

class SyntheticCorpus : public Corpus {
 public:
  AudioBuffer speech(uint64_t seed, size_t len) const override {
    SplitMix64 rng(seed ^ 0xabcdef12345ULL);
    const size_t ctrl_hop = 6000;  // 125 ms envelope segments
    std::vector<double> ctrl(len / ctrl_hop + 2);
    for (auto& c : ctrl) {
      const double u = rng.next_double();
      c = (u < 0.25) ? 0.0 : rng.next_uniform(0.1, 1.0);  // pauses
    }
    AudioBuffer out(len, 48000);
    double lp = 0.0;
    for (size_t i = 0; i < len; ++i) {
      const size_t seg = i / ctrl_hop;
      const double frac = static_cast<double>(i % ctrl_hop) / ctrl_hop;
      const double env = ctrl[seg] * (1.0 - frac) + ctrl[seg + 1] * frac;
      // Mild spectral tilt so energy sits speech-like in the low bands.
      lp = 0.6 * lp + 0.4 * rng.next_gaussian();
      out.samples[i] = 0.35 * env * lp;
    }
    return out;
  }

  AudioBuffer noise(uint64_t seed, size_t len) const override {
    SplitMix64 rng(seed ^ 0x123456789abULL);
    AudioBuffer out(len, 48000);
    double lp = 0.0;
    for (size_t i = 0; i < len; ++i) {
      lp = 0.8 * lp + 0.2 * rng.next_gaussian();
      out.samples[i] = 0.3 * lp;
    }
    return out;
  }
};

class DirectoryCorpus : public Corpus {
 public:
  explicit DirectoryCorpus(const std::string& manifest_path) {
    std::ifstream f(manifest_path);
    if (!f) throw DataError("corpus: cannot open manifest " + manifest_path);
    nlohmann::json j;
    try {
      f >> j;
    } catch (const std::exception& e) {
      throw DataError(std::string("corpus: manifest parse error: ") +
                      e.what());
    }
    const auto base = dir_of(manifest_path);
    for (const auto& p : j.value("speech", std::vector<std::string>{}))
      speech_.push_back(base + p);
    for (const auto& p : j.value("noise", std::vector<std::string>{}))
      noise_.push_back(base + p);
    if (speech_.empty()) throw DataError("corpus: no speech entries");
    if (noise_.empty()) throw DataError("corpus: no noise entries");
  }

  AudioBuffer speech(uint64_t seed, size_t len) const override {
    return pull(speech_, seed, len);
  }
  AudioBuffer noise(uint64_t seed, size_t len) const override {
    return pull(noise_, seed, len);
  }

 private:
  static std::string dir_of(const std::string& path) {
    const size_t slash = path.find_last_of('/');
    return slash == std::string::npos ? "" : path.substr(0, slash + 1);
  }

  AudioBuffer pull(const std::vector<std::string>& list, uint64_t seed,
                   size_t len) const {
    SplitMix64 rng(seed);
    const auto& path = list[rng.next_u64() % list.size()];
    AudioBuffer clip = wav_read(path, 48000);
    if (clip.empty()) throw DataError("corpus: empty clip " + path);
    AudioBuffer out(len, 48000);
    size_t start = rng.next_u64() % clip.size();
    for (size_t i = 0; i < len; ++i)
      out.samples[i] = clip.samples[(start + i) % clip.size()];
    return out;
  }

  std::vector<std::string> speech_, noise_;
};

// ---------------------------------------------------------------------------
// Scene assembly.
// ---------------------------------------------------------------------------

namespace datasim_detail {

// Per-frame energies on hop-sized chunks; the frame count matches the STFT
// framing convention (ceil(len/hop)).
inline std::vector<double> frame_energies(const std::vector<double>& x,
                                          int hop = 480) {
  const size_t frames = (x.size() + static_cast<size_t>(hop) - 1) /
                        static_cast<size_t>(hop);
  std::vector<double> e(frames, 0.0);
  for (size_t i = 0; i < x.size(); ++i) {
    e[i / static_cast<size_t>(hop)] += x[i] * x[i];
  }
  return e;
}

// Label rule: frame active iff its energy exceeds -40 dB of the utterance
// peak frame energy.
inline std::vector<uint8_t> activity_labels(const std::vector<double>& x,
                                            int hop = 480) {
  const auto e = frame_energies(x, hop);
  double peak = 0.0;
  for (double v : e) peak = std::max(peak, v);
  std::vector<uint8_t> lab(e.size(), 0);
  if (peak <= 0.0) return lab;
  const double thresh = peak * 1e-4;  // -40 dB
  for (size_t i = 0; i < e.size(); ++i) lab[i] = e[i] > thresh ? 1 : 0;
  return lab;
}

// Mean power of x over the frames marked active.
inline double active_power(const std::vector<double>& x,
                           const std::vector<uint8_t>& active,
                           int hop = 480) {
  const auto e = frame_energies(x, hop);
  double acc = 0.0;
  size_t samples = 0;
  for (size_t t = 0; t < e.size() && t < active.size(); ++t) {
    if (!active[t]) continue;
    acc += e[t];
    samples += static_cast<size_t>(hop);
  }
  return samples ? acc / static_cast<double>(samples) : 0.0;
}

}  // namespace datasim_detail

inline Scene mix_scene(const SceneSpec& spec, const Corpus& corpus) {
  using namespace datasim_detail;
  spec.validate();
  const size_t len =
      static_cast<size_t>(spec.duration * spec.sample_rate);
  SplitMix64 rng(spec.seed ^ 0x5ce9e5a1b2c3d4e5ULL);

  Scene scene;
  scene.spec = spec;
  scene.x = corpus.speech(spec.seed * 3 + 1, len);

  // Seeded geometry: loudspeaker and microphone inside the room with margin.
  auto pos = [&rng, &spec]() {
    return std::array<double, 3>{rng.next_uniform(0.5, spec.room[0] - 0.5),
                                 rng.next_uniform(0.5, spec.room[1] - 0.5),
                                 rng.next_uniform(0.5, spec.room[2] - 0.5)};
  };
  const auto spk = pos();
  const auto mic = pos();
  const auto rir = gen_rir(spec.room, spec.rt60, spk, mic, spec.seed ^ 0xe1,
                           spec.sample_rate);

  const bool has_echo = spec.scenario != Scenario::kStNe;
  const bool has_near = spec.scenario != Scenario::kStFe;

  scene.z = has_echo
                ? make_echo(scene.x, rir, spec.delay, spec.nonlinearity)
                : AudioBuffer(len, spec.sample_rate);

  scene.s = AudioBuffer(len, spec.sample_rate);
  scene.r = AudioBuffer(len, spec.sample_rate);
  if (has_near) {
    AudioBuffer dry = corpus.speech(spec.seed * 3 + 2, len);
    if (spec.nearend_reverb) {
      const auto talker = pos();
      const auto rir_ne = gen_rir(spec.room, spec.rt60, talker, mic,
                                  spec.seed ^ 0xe2, spec.sample_rate);
      // Direct + early reflections stay in s, the late tail becomes r.
      size_t peak_idx = 0;
      double peak = 0.0;
      for (size_t i = 0; i < rir_ne.size(); ++i)
        if (std::abs(rir_ne[i]) > peak) {
          peak = std::abs(rir_ne[i]);
          peak_idx = i;
        }
      const size_t split = std::min(rir_ne.size(), peak_idx + 2400);  // 50 ms
      std::vector<double> early(rir_ne.begin(),
                                rir_ne.begin() + static_cast<long>(split));
      std::vector<double> late(rir_ne.begin() + static_cast<long>(split),
                               rir_ne.end());
      const auto s_full = fft_convolve(dry.samples, early);
      for (size_t i = 0; i < len; ++i)
        scene.s.samples[i] = i < s_full.size() ? s_full[i] : 0.0;
      if (!late.empty()) {
        const auto r_full = fft_convolve(dry.samples, late);
        for (size_t i = split; i < len; ++i)
          scene.r.samples[i] =
              (i - split) < r_full.size() ? r_full[i - split] : 0.0;
      }
    } else {
      scene.s = dry;
    }
  }

  scene.v = corpus.noise(spec.seed * 3 + 3, len);

  // Scale echo against near-end for SER, then noise for SNR. Powers are
  // measured over near-end-active frames; far-end single talk has no
  // near-end, so its SNR is anchored to the echo instead.
  const auto s_active = activity_labels(scene.s.samples);
  const auto z_active = activity_labels(scene.z.samples);
  if (has_near && has_echo) {
    const double ps = active_power(scene.s.samples, s_active);
    const double pz = active_power(scene.z.samples, s_active);
    if (ps > 0.0 && pz > 0.0) {
      const double gz =
          std::sqrt(ps / (pz * db_to_lin_power(spec.ser_db)));
      for (auto& v : scene.z.samples) v *= gz;
    }
  }
  {
    const auto& anchor_active = has_near ? s_active : z_active;
    const auto& anchor = has_near ? scene.s.samples : scene.z.samples;
    const double pa = active_power(anchor, anchor_active);
    const double pv = active_power(scene.v.samples, anchor_active);
    if (pa > 0.0 && pv > 0.0) {
      const double gv =
          std::sqrt(pa / (pv * db_to_lin_power(spec.snr_db)));
      for (auto& v : scene.v.samples) v *= gv;
    }
  }

  // Components are quantized to float32 values before the mixture is formed,
  // so the additive identity survives the float32 WAV round trip (the sum of
  // four floats re-quantizes to the stored d). The conversion goes through
  // real float storage; gcc at -O3 elides an inline double->float->double
  // round trip.
  for (auto* buf : {&scene.s, &scene.r, &scene.v, &scene.z, &scene.x}) {
    std::vector<float> q(buf->samples.begin(), buf->samples.end());
    for (size_t i = 0; i < q.size(); ++i)
      buf->samples[i] = static_cast<double>(q[i]);
  }

  scene.d = AudioBuffer(len, spec.sample_rate);
  for (size_t i = 0; i < len; ++i)
    scene.d.samples[i] = scene.s.samples[i] + scene.r.samples[i] +
                         scene.v.samples[i] + scene.z.samples[i];
  if (!all_finite(scene.d.samples))
    throw NumericError("mix_scene: non-finite mixture");

  scene.vad_labels = activity_labels(scene.s.samples);
  return scene;
}

// Re-measurement used by `evaluate --check` and the acceptance suite.
struct SceneCheck {
  bool identity_exact = false;
  double snr_db = 0.0;
  double ser_db = 0.0;
  bool has_snr = false;
  bool has_ser = false;
};

// float_file_semantics: the scene came back through float32 WAVs, so the
// stored mixture is the float32 rounding of the component sum; compare after
// re-quantization. In-memory scenes hold the exact double identity.
inline SceneCheck check_scene(const Scene& scene,
                              bool float_file_semantics = false) {
  using namespace datasim_detail;
  SceneCheck out;
  out.identity_exact = true;
  for (size_t i = 0; i < scene.d.size(); ++i) {
    const double sum = scene.s.samples[i] + scene.r.samples[i] +
                       scene.v.samples[i] + scene.z.samples[i];
    double want = sum;
    if (float_file_semantics) {
      volatile float q = static_cast<float>(sum);  // forced rounding
      want = static_cast<double>(q);
    }
    if (scene.d.samples[i] != want) {
      out.identity_exact = false;
      break;
    }
  }
  const auto s_active = activity_labels(scene.s.samples);
  const auto z_active = activity_labels(scene.z.samples);
  const bool has_near = scene.spec.scenario != Scenario::kStFe;
  const auto& anchor_active = has_near ? s_active : z_active;
  const auto& anchor = has_near ? scene.s.samples : scene.z.samples;
  const double pa = active_power(anchor, anchor_active);
  const double pv = active_power(scene.v.samples, anchor_active);
  if (pa > 0.0 && pv > 0.0) {
    out.snr_db = lin_power_to_db(pa / pv);
    out.has_snr = true;
  }
  if (has_near && scene.spec.scenario != Scenario::kStNe) {
    const double ps = active_power(scene.s.samples, s_active);
    const double pz = active_power(scene.z.samples, s_active);
    if (ps > 0.0 && pz > 0.0) {
      out.ser_db = lin_power_to_db(ps / pz);
      out.has_ser = true;
    }
  }
  return out;
}

}  // namespace fbaec

#endif  // FBAEC_DATASIM_HPP_
