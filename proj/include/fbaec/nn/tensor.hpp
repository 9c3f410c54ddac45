// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_NN_TENSOR_HPP_
#define FBAEC_NN_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fbaec/common.hpp"

namespace fbaec::nn {

// One time step of features: [channels x bins], row-major, float32.
struct Frame {
  int ch = 0;
  int bins = 0;
  std::vector<float> v;

  Frame() = default;
  Frame(int c, int b) : ch(c), bins(b), v(static_cast<size_t>(c) * b, 0.0f) {}

  float& at(int c, int f) { return v[static_cast<size_t>(c) * bins + f]; }
  float at(int c, int f) const { return v[static_cast<size_t>(c) * bins + f]; }
  const float* row(int c) const { return v.data() + static_cast<size_t>(c) * bins; }
  float* row(int c) { return v.data() + static_cast<size_t>(c) * bins; }

  // Single feature vector view: [ch*bins] as channels with one bin.
  Frame flattened() const {
    Frame out;
    out.ch = ch * bins;
    out.bins = 1;
    out.v = v;
    return out;
  }
};

// Sequence tensor [channels x frames x bins], row-major, float32.
struct Tensor {
  int ch = 0;
  int frames = 0;
  int bins = 0;
  std::vector<float> v;

  Tensor() = default;
  Tensor(int c, int t, int b)
      : ch(c), frames(t), bins(b),
        v(static_cast<size_t>(c) * t * b, 0.0f) {}

  float& at(int c, int t, int f) {
    return v[(static_cast<size_t>(c) * frames + t) * bins + f];
  }
  float at(int c, int t, int f) const {
    return v[(static_cast<size_t>(c) * frames + t) * bins + f];
  }

  Frame frame(int t) const {
    Frame out(ch, bins);
    for (int c = 0; c < ch; ++c)
      for (int f = 0; f < bins; ++f) out.at(c, f) = at(c, t, f);
    return out;
  }

  void set_frame(int t, const Frame& fr) {
    for (int c = 0; c < ch; ++c)
      for (int f = 0; f < bins; ++f) at(c, t, f) = fr.at(c, f);
  }
};

inline bool frame_finite(const Frame& f) {
  for (float x : f.v)
    if (!std::isfinite(x)) return false;
  return true;
}

// How seed_init fills a parameter when no trained weights are bound.
enum class Init {
  kFanInUniform,  // U(-1/sqrt(fan_in), 1/sqrt(fan_in))
  kZero,
  kOne,
  kConst25,       // PReLU slope
};

struct ParamTensor {
  std::vector<int> shape;
  std::vector<float> v;
  Init init = Init::kFanInUniform;
  int fan_in = 1;

  ParamTensor() = default;
  ParamTensor(std::vector<int> s, Init i, int fi = 1)
      : shape(std::move(s)), init(i), fan_in(fi) {
    size_t n = 1;
    for (int d : shape) n *= static_cast<size_t>(d);
    // Constants take their neutral value immediately; weight tensors stay
    // zero until seed_init or a manifest binds them.
    float fill = 0.0f;
    if (i == Init::kOne) fill = 1.0f;
    if (i == Init::kConst25) fill = 0.25f;
    v.assign(n, fill);
  }

  size_t size() const { return v.size(); }
};

using ParamMap = std::vector<std::pair<std::string, ParamTensor*>>;

inline size_t param_count(const ParamMap& params) {
  size_t n = 0;
  for (const auto& [name, p] : params) n += p->size();
  return n;
}

// Deterministic cross-platform initialization: one splitmix64 stream per
// tensor, keyed by the global seed and the tensor name.
inline void seed_init(const ParamMap& params, uint64_t seed) {
  for (const auto& [name, p] : params) {
    SplitMix64 rng(seed ^ fnv1a64(name));
    switch (p->init) {
      case Init::kZero:
        for (auto& x : p->v) x = 0.0f;
        break;
      case Init::kOne:
        for (auto& x : p->v) x = 1.0f;
        break;
      case Init::kConst25:
        for (auto& x : p->v) x = 0.25f;
        break;
      case Init::kFanInUniform: {
        const double s = 1.0 / std::sqrt(static_cast<double>(
                                   std::max(1, p->fan_in)));
        for (auto& x : p->v)
          x = static_cast<float>(rng.next_uniform(-s, s));
        break;
      }
    }
  }
}

}  // namespace fbaec::nn

#endif  // FBAEC_NN_TENSOR_HPP_
