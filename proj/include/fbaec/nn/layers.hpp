// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_NN_LAYERS_HPP_
#define FBAEC_NN_LAYERS_HPP_

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "fbaec/common.hpp"
#include "fbaec/nn/tensor.hpp"

namespace fbaec::nn {

// Streaming layer contract: step() consumes exactly one time step and returns
// one time step; whole-utterance forward() is the same step() in a loop, so
// batch and streaming evaluation are bit-identical by construction. Time
// kernels only ever read the current and past frames (causal padding).
class Layer {
 public:
  virtual ~Layer() = default;
  virtual Frame step(const Frame& in) = 0;
  virtual void reset() {}
  virtual void collect_params(ParamMap& out, const std::string& prefix) {}

  Tensor forward(const Tensor& in) {
    Tensor out;
    for (int t = 0; t < in.frames; ++t) {
      Frame o = step(in.frame(t));
      if (t == 0) out = Tensor(o.ch, in.frames, o.bins);
      out.set_frame(t, o);
    }
    return out;
  }
};

inline float sigmoidf(float x) { return 1.0f / (1.0f + std::exp(-x)); }

// Dot product with four independent accumulators combined in a fixed order:
// deterministic across runs and platforms, pipelined enough to keep the FPU
// busy. Every matvec in the runtime funnels through this.
inline float dot4(const float* a, const float* b, int n) {
  float s0 = 0.0f, s1 = 0.0f, s2 = 0.0f, s3 = 0.0f;
  int i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// ---------------------------------------------------------------------------
// Conv2d: kernel (kt, kf), stride (1, sf), causal in time (kt-1 past frames),
// zero padding pad_f on both frequency edges.
// ---------------------------------------------------------------------------

struct Conv2dSpec {
  int in_ch = 1;
  int out_ch = 1;
  int kt = 2;
  int kf = 3;
  int sf = 2;
  int pad_f = 1;
};

class Conv2d : public Layer {
 public:
  explicit Conv2d(const Conv2dSpec& spec)
      : spec_(spec),
        w_({spec.out_ch, spec.in_ch, spec.kt, spec.kf}, Init::kFanInUniform,
           spec.in_ch * spec.kt * spec.kf),
        b_({spec.out_ch}, Init::kZero) {
    if (spec.in_ch < 1 || spec.out_ch < 1 || spec.kt < 1 || spec.kf < 1 ||
        spec.sf < 1 || spec.pad_f < 0)
      throw ConfigError("conv2d: invalid spec");
  }

  static int out_bins(int in_bins, const Conv2dSpec& s) {
    return (in_bins + 2 * s.pad_f - s.kf) / s.sf + 1;
  }

  const Conv2dSpec& spec() const { return spec_; }

  Frame step(const Frame& in) override {
    if (in.ch != spec_.in_ch)
      throw ContractError("conv2d: expected " + std::to_string(spec_.in_ch) +
                          " input channels, got " + std::to_string(in.ch));
    if (hist_.empty()) {
      bins_ = in.bins;
      hist_.assign(static_cast<size_t>(spec_.kt - 1),
                   Frame(spec_.in_ch, bins_));
    } else if (in.bins != bins_) {
      throw ContractError("conv2d: input bins changed mid-stream");
    }
    const int ob = out_bins(bins_, spec_);
    if (ob < 1) throw ConfigError("conv2d: frequency dim too small");

    Frame out(spec_.out_ch, ob);
    for (int oc = 0; oc < spec_.out_ch; ++oc) {
      float* orow = out.row(oc);
      const float bias = b_.v[static_cast<size_t>(oc)];
      for (int fo = 0; fo < ob; ++fo) orow[fo] = bias;
    }
    const bool split_phases =
        (spec_.kf == 3 && spec_.pad_f == 1 && spec_.sf == 2);
    for (int dt = 0; dt < spec_.kt; ++dt) {
      const Frame& fr =
          (dt < spec_.kt - 1) ? hist_[static_cast<size_t>(dt)] : in;
      for (int ic = 0; ic < spec_.in_ch; ++ic) {
        const float* irow = fr.row(ic);
        if (split_phases) {
          even_.resize(static_cast<size_t>((bins_ + 1) / 2));
          odd_.resize(static_cast<size_t>(bins_ / 2));
          for (int j = 0; j < (bins_ + 1) / 2; ++j)
            even_[static_cast<size_t>(j)] = irow[2 * j];
          for (int j = 0; j < bins_ / 2; ++j)
            odd_[static_cast<size_t>(j)] = irow[2 * j + 1];
        }
        for (int oc = 0; oc < spec_.out_ch; ++oc) {
          const float* wrow =
              &w_.v[((static_cast<size_t>(oc) * spec_.in_ch + ic) * spec_.kt +
                     dt) *
                    spec_.kf];
          float* orow = out.row(oc);
          if (spec_.kf == 3 && spec_.pad_f == 1 && spec_.sf == 2) {
            // Stride-2 kernel-3: reading through the deinterleaved phases
            // makes every stream contiguous, which the vectorizer likes.
            //   out[fo] += w0*odd[fo-1] + w1*even[fo] + w2*odd[fo]
            const float w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
            const float* ev = even_.data();
            const float* od = odd_.data();
            const int n_odd = bins_ / 2;
            int fo = 0;
            if (ob > 0) {
              float acc = w1 * ev[0];
              if (bins_ > 1) acc += w2 * od[0];
              orow[0] += acc;
              fo = 1;
            }
            (void)n_odd;
            const int fo_hi = std::min(ob, (bins_ - 2) / 2 + 1);
            for (; fo < fo_hi; ++fo)
              orow[fo] += w0 * od[fo - 1] + w1 * ev[fo] + w2 * od[fo];
            for (; fo < ob; ++fo) {
              const int fi0 = 2 * fo - 1;
              float acc = 0.0f;
              if (fi0 < bins_) acc += w0 * irow[fi0];
              if (fi0 + 1 < bins_) acc += w1 * irow[fi0 + 1];
              if (fi0 + 2 < bins_) acc += w2 * irow[fi0 + 2];
              orow[fo] += acc;
            }
          } else if (spec_.kf == 3 && spec_.pad_f == 1 && spec_.sf == 1) {
            const float w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
            int fo = 0;
            if (ob > 0) {
              float acc = w1 * irow[0];
              if (bins_ > 1) acc += w2 * irow[1];
              orow[0] += acc;
              fo = 1;
            }
            const int fo_hi = std::min(ob, bins_ - 1);
            for (; fo < fo_hi; ++fo)
              orow[fo] += w0 * irow[fo - 1] + w1 * irow[fo] + w2 * irow[fo + 1];
            for (; fo < ob; ++fo) {
              float acc = w0 * irow[fo - 1];
              if (fo < bins_) acc += w1 * irow[fo];
              orow[fo] += acc;
            }
          } else if (spec_.kf == 1 && spec_.pad_f == 0) {
            const float w0 = wrow[0];
            if (spec_.sf == 1) {
              for (int fo = 0; fo < ob; ++fo) orow[fo] += w0 * irow[fo];
            } else {
              for (int fo = 0; fo < ob; ++fo)
                orow[fo] += w0 * irow[fo * spec_.sf];
            }
          } else {
            for (int fo = 0; fo < ob; ++fo) {
              const int fi0 = fo * spec_.sf - spec_.pad_f;
              float acc = 0.0f;
              for (int df = 0; df < spec_.kf; ++df) {
                const int fi = fi0 + df;
                if (fi >= 0 && fi < bins_) acc += wrow[df] * irow[fi];
              }
              orow[fo] += acc;
            }
          }
        }
      }
    }
    if (spec_.kt > 1) {
      hist_.erase(hist_.begin());
      hist_.push_back(in);
    }
    return out;
  }

  void reset() override { hist_.clear(); }

  void collect_params(ParamMap& out, const std::string& prefix) override {
    out.emplace_back(prefix + ".weight", &w_);
    out.emplace_back(prefix + ".bias", &b_);
  }

 private:
  Conv2dSpec spec_;
  ParamTensor w_, b_;
  std::vector<Frame> hist_;
  std::vector<float> even_, odd_;  // deinterleave scratch
  int bins_ = 0;
};

// ---------------------------------------------------------------------------
// TrConv2d: transpose convolution along frequency (stride sf upsampling, full
// scatter then crop [pad_f, pad_f + target_bins)), causal FIR along time.
// ---------------------------------------------------------------------------

struct TrConv2dSpec {
  int in_ch = 1;
  int out_ch = 1;
  int kt = 2;
  int kf = 3;
  int sf = 2;
  int pad_f = 1;
  int target_bins = 0;  // output width after cropping
};

class TrConv2d : public Layer {
 public:
  explicit TrConv2d(const TrConv2dSpec& spec)
      : spec_(spec),
        w_({spec.out_ch, spec.in_ch, spec.kt, spec.kf}, Init::kFanInUniform,
           spec.in_ch * spec.kt * spec.kf),
        b_({spec.out_ch}, Init::kZero) {
    if (spec.target_bins < 1)
      throw ConfigError("tconv2d: target_bins must be set");
  }

  static int full_bins(int in_bins, const TrConv2dSpec& s) {
    return (in_bins - 1) * s.sf + s.kf;
  }

  Frame step(const Frame& in) override {
    if (in.ch != spec_.in_ch)
      throw ContractError("tconv2d: expected " + std::to_string(spec_.in_ch) +
                          " input channels, got " + std::to_string(in.ch));
    if (hist_.empty()) {
      bins_ = in.bins;
      hist_.assign(static_cast<size_t>(spec_.kt - 1),
                   Frame(spec_.in_ch, bins_));
      const int full = full_bins(bins_, spec_);
      if (spec_.pad_f + spec_.target_bins > full)
        throw ConfigError("tconv2d: target_bins exceeds transform output");
    } else if (in.bins != bins_) {
      throw ContractError("tconv2d: input bins changed mid-stream");
    }

    // dt = 0 taps the current frame, dt > 0 taps dt frames into the past;
    // the true adjoint of the causal Conv2d is this output delayed kt-1.
    Frame out(spec_.out_ch, spec_.target_bins);
    if (spec_.kf == 3 && spec_.sf == 2) {
      // Phase-separated accumulation keeps every stream contiguous:
      //   even slot 2j   <- w0*x[j] + w2*x[j-1]
      //   odd slot 2j+1  <- w1*x[j]
      const int ne = bins_ + 1;
      tr_even_.assign(static_cast<size_t>(spec_.out_ch) * ne, 0.0f);
      tr_odd_.assign(static_cast<size_t>(spec_.out_ch) * bins_, 0.0f);
      for (int dt = 0; dt < spec_.kt; ++dt) {
        const Frame& fr =
            (dt == 0) ? in : hist_[static_cast<size_t>(spec_.kt - 1 - dt)];
        for (int ic = 0; ic < spec_.in_ch; ++ic) {
          const float* irow = fr.row(ic);
          for (int oc = 0; oc < spec_.out_ch; ++oc) {
            const float* wrow =
                &w_.v[((static_cast<size_t>(oc) * spec_.in_ch + ic) *
                           spec_.kt +
                       dt) *
                      spec_.kf];
            const float w0 = wrow[0], w1 = wrow[1], w2 = wrow[2];
            float* ev = &tr_even_[static_cast<size_t>(oc) * ne];
            float* od = &tr_odd_[static_cast<size_t>(oc) * bins_];
            ev[0] += w0 * irow[0];
            for (int j = 1; j < bins_; ++j)
              ev[j] += w0 * irow[j] + w2 * irow[j - 1];
            ev[bins_] += w2 * irow[bins_ - 1];
            for (int j = 0; j < bins_; ++j) od[j] += w1 * irow[j];
          }
        }
      }
      for (int oc = 0; oc < spec_.out_ch; ++oc) {
        const float bias = b_.v[static_cast<size_t>(oc)];
        const float* ev = &tr_even_[static_cast<size_t>(oc) * ne];
        const float* od = &tr_odd_[static_cast<size_t>(oc) * bins_];
        float* orow = out.row(oc);
        for (int fo = 0; fo < spec_.target_bins; ++fo) {
          const int fu = fo + spec_.pad_f;
          orow[fo] = ((fu & 1) ? od[fu / 2] : ev[fu / 2]) + bias;
        }
      }
    } else {
      const int full = full_bins(bins_, spec_);
      full_buf_.assign(static_cast<size_t>(spec_.out_ch) * full, 0.0f);
      for (int dt = 0; dt < spec_.kt; ++dt) {
        const Frame& fr =
            (dt == 0) ? in : hist_[static_cast<size_t>(spec_.kt - 1 - dt)];
        for (int ic = 0; ic < spec_.in_ch; ++ic) {
          const float* irow = fr.row(ic);
          for (int oc = 0; oc < spec_.out_ch; ++oc) {
            const float* wrow =
                &w_.v[((static_cast<size_t>(oc) * spec_.in_ch + ic) *
                           spec_.kt +
                       dt) *
                      spec_.kf];
            float* frow = &full_buf_[static_cast<size_t>(oc) * full];
            for (int fi = 0; fi < bins_; ++fi) {
              const float x = irow[fi];
              const int fu0 = fi * spec_.sf;
              for (int df = 0; df < spec_.kf; ++df)
                frow[fu0 + df] += wrow[df] * x;
            }
          }
        }
      }
      for (int oc = 0; oc < spec_.out_ch; ++oc) {
        const float bias = b_.v[static_cast<size_t>(oc)];
        const float* frow = &full_buf_[static_cast<size_t>(oc) * full];
        float* orow = out.row(oc);
        for (int fo = 0; fo < spec_.target_bins; ++fo)
          orow[fo] = frow[fo + spec_.pad_f] + bias;
      }
    }
    if (spec_.kt > 1) {
      hist_.erase(hist_.begin());
      hist_.push_back(in);
    }
    return out;
  }

  void reset() override { hist_.clear(); }

  void collect_params(ParamMap& out, const std::string& prefix) override {
    out.emplace_back(prefix + ".weight", &w_);
    out.emplace_back(prefix + ".bias", &b_);
  }

 private:
  TrConv2dSpec spec_;
  ParamTensor w_, b_;
  std::vector<Frame> hist_;
  std::vector<float> full_buf_;
  std::vector<float> tr_even_, tr_odd_;  // phase accumulators
  int bins_ = 0;
};

// ---------------------------------------------------------------------------
// Gated convolutions: the projection produces 2C channels, the first half is
// the value path, the second half gates it through a sigmoid.
// ---------------------------------------------------------------------------

inline Frame apply_gate(const Frame& both) {
  if (both.ch % 2 != 0) throw ContractError("gconv: odd channel count");
  const int half = both.ch / 2;
  Frame out(half, both.bins);
  for (int c = 0; c < half; ++c) {
    const float* vrow = both.row(c);
    const float* grow = both.row(half + c);
    float* orow = out.row(c);
    for (int f = 0; f < both.bins; ++f)
      orow[f] = vrow[f] * sigmoidf(grow[f]);
  }
  return out;
}

class GatedConv2d : public Layer {
 public:
  GatedConv2d(Conv2dSpec spec) : conv_(widen(spec)) {}

  Frame step(const Frame& in) override { return apply_gate(conv_.step(in)); }
  void reset() override { conv_.reset(); }
  void collect_params(ParamMap& out, const std::string& prefix) override {
    conv_.collect_params(out, prefix);
  }

 private:
  static Conv2dSpec widen(Conv2dSpec s) {
    s.out_ch *= 2;
    return s;
  }
  Conv2d conv_;
};

class GatedTrConv2d : public Layer {
 public:
  GatedTrConv2d(TrConv2dSpec spec) : conv_(widen(spec)) {}

  Frame step(const Frame& in) override { return apply_gate(conv_.step(in)); }
  void reset() override { conv_.reset(); }
  void collect_params(ParamMap& out, const std::string& prefix) override {
    conv_.collect_params(out, prefix);
  }

 private:
  static TrConv2dSpec widen(TrConv2dSpec s) {
    s.out_ch *= 2;
    return s;
  }
  TrConv2d conv_;
};

// ---------------------------------------------------------------------------
// Pointwise / elementwise layers.
// ---------------------------------------------------------------------------

class BatchNorm : public Layer {
 public:
  explicit BatchNorm(int ch)
      : ch_(ch),
        gamma_({ch}, Init::kOne),
        beta_({ch}, Init::kZero),
        mean_({ch}, Init::kZero),
        var_({ch}, Init::kOne) {}

  Frame step(const Frame& in) override {
    if (in.ch != ch_) throw ContractError("batchnorm: channel mismatch");
    Frame out(in.ch, in.bins);
    for (int c = 0; c < ch_; ++c) {
      const float scale =
          gamma_.v[static_cast<size_t>(c)] /
          std::sqrt(var_.v[static_cast<size_t>(c)] + 1e-5f);
      const float shift = beta_.v[static_cast<size_t>(c)] -
                          mean_.v[static_cast<size_t>(c)] * scale;
      const float* irow = in.row(c);
      float* orow = out.row(c);
      for (int f = 0; f < in.bins; ++f) orow[f] = irow[f] * scale + shift;
    }
    return out;
  }

  void collect_params(ParamMap& out, const std::string& prefix) override {
    out.emplace_back(prefix + ".gamma", &gamma_);
    out.emplace_back(prefix + ".beta", &beta_);
    out.emplace_back(prefix + ".running_mean", &mean_);
    out.emplace_back(prefix + ".running_var", &var_);
  }

 private:
  int ch_;
  ParamTensor gamma_, beta_, mean_, var_;
};

class PReLU : public Layer {
 public:
  explicit PReLU(int ch) : ch_(ch), slope_({ch}, Init::kConst25) {}

  Frame step(const Frame& in) override {
    if (in.ch != ch_) throw ContractError("prelu: channel mismatch");
    Frame out(in.ch, in.bins);
    for (int c = 0; c < ch_; ++c) {
      const float a = slope_.v[static_cast<size_t>(c)];
      const float* irow = in.row(c);
      float* orow = out.row(c);
      for (int f = 0; f < in.bins; ++f)
        orow[f] = irow[f] >= 0.0f ? irow[f] : a * irow[f];
    }
    return out;
  }

  void collect_params(ParamMap& out, const std::string& prefix) override {
    out.emplace_back(prefix + ".slope", &slope_);
  }

 private:
  int ch_;
  ParamTensor slope_;
};

class Elu : public Layer {
 public:
  Frame step(const Frame& in) override {
    Frame out(in.ch, in.bins);
    for (size_t i = 0; i < in.v.size(); ++i)
      out.v[i] = in.v[i] >= 0.0f ? in.v[i] : std::expm1(in.v[i]);
    return out;
  }
};

// Identity at inference; Bernoulli mask-and-scale with a seeded generator in
// training mode (keep probability 1 - rate).
class Dropout : public Layer {
 public:
  explicit Dropout(double rate, uint64_t seed = 0)
      : rate_(rate), seed_(seed), rng_(seed) {}

  void set_training(bool on) { training_ = on; }

  Frame step(const Frame& in) override {
    if (!training_) return in;
    Frame out(in.ch, in.bins);
    const double keep = 1.0 - rate_;
    const float inv = static_cast<float>(1.0 / keep);
    for (size_t i = 0; i < in.v.size(); ++i)
      out.v[i] = (rng_.next_double() < keep) ? in.v[i] * inv : 0.0f;
    return out;
  }

  void reset() override { rng_ = SplitMix64(seed_); }

 private:
  double rate_;
  uint64_t seed_;
  SplitMix64 rng_;
  bool training_ = false;
};

// Per-frame affine map on a flattened feature vector; this is the pointwise
// (kernel 1) convolution of the graph definitions.
class Linear : public Layer {
 public:
  Linear(int in, int out)
      : in_(in), out_(out),
        w_({out, in}, Init::kFanInUniform, in),
        b_({out}, Init::kZero) {}

  Frame step(const Frame& in) override {
    if (in.ch * in.bins != in_)
      throw ContractError("linear: expected " + std::to_string(in_) +
                          " features, got " +
                          std::to_string(in.ch * in.bins));
    Frame out(out_, 1);
    for (int o = 0; o < out_; ++o) {
      const float* wrow = &w_.v[static_cast<size_t>(o) * in_];
      out.v[static_cast<size_t>(o)] =
          b_.v[static_cast<size_t>(o)] + dot4(wrow, in.v.data(), in_);
    }
    return out;
  }

  void collect_params(ParamMap& out, const std::string& prefix) override {
    out.emplace_back(prefix + ".weight", &w_);
    out.emplace_back(prefix + ".bias", &b_);
  }

 private:
  int in_, out_;
  ParamTensor w_, b_;
};

// ---------------------------------------------------------------------------
// Recurrent cells. Gate layouts follow the usual stacked convention:
// GRU rows (r, z, n), LSTM rows (i, f, g, o).
// ---------------------------------------------------------------------------

class Gru : public Layer {
 public:
  Gru(int in, int hidden)
      : in_(in), h_(hidden),
        w_ih_({3 * hidden, in}, Init::kFanInUniform, in),
        w_hh_({3 * hidden, hidden}, Init::kFanInUniform, hidden),
        b_ih_({3 * hidden}, Init::kZero),
        b_hh_({3 * hidden}, Init::kZero),
        state_(static_cast<size_t>(hidden), 0.0f) {}

  int hidden() const { return h_; }

  Frame step(const Frame& in) override {
    if (in.ch * in.bins != in_)
      throw ContractError("gru: expected " + std::to_string(in_) +
                          " features, got " + std::to_string(in.ch * in.bins));
    const float* x = in.v.data();
    gates_.assign(static_cast<size_t>(3 * h_), 0.0f);
    for (int g = 0; g < 3 * h_; ++g) {
      const float* wrow = &w_ih_.v[static_cast<size_t>(g) * in_];
      gates_[static_cast<size_t>(g)] =
          b_ih_.v[static_cast<size_t>(g)] + dot4(wrow, x, in_);
    }
    hgates_.assign(static_cast<size_t>(3 * h_), 0.0f);
    for (int g = 0; g < 3 * h_; ++g) {
      const float* wrow = &w_hh_.v[static_cast<size_t>(g) * h_];
      hgates_[static_cast<size_t>(g)] =
          b_hh_.v[static_cast<size_t>(g)] + dot4(wrow, state_.data(), h_);
    }
    Frame out(h_, 1);
    for (int i = 0; i < h_; ++i) {
      const float r = sigmoidf(gates_[static_cast<size_t>(i)] +
                               hgates_[static_cast<size_t>(i)]);
      const float z = sigmoidf(gates_[static_cast<size_t>(h_ + i)] +
                               hgates_[static_cast<size_t>(h_ + i)]);
      const float n = std::tanh(gates_[static_cast<size_t>(2 * h_ + i)] +
                                r * hgates_[static_cast<size_t>(2 * h_ + i)]);
      const float h = (1.0f - z) * n + z * state_[static_cast<size_t>(i)];
      state_[static_cast<size_t>(i)] = h;
      out.v[static_cast<size_t>(i)] = h;
    }
    return out;
  }

  void reset() override { std::fill(state_.begin(), state_.end(), 0.0f); }

  void collect_params(ParamMap& out, const std::string& prefix) override {
    out.emplace_back(prefix + ".w_ih", &w_ih_);
    out.emplace_back(prefix + ".w_hh", &w_hh_);
    out.emplace_back(prefix + ".b_ih", &b_ih_);
    out.emplace_back(prefix + ".b_hh", &b_hh_);
  }

 private:
  int in_, h_;
  ParamTensor w_ih_, w_hh_, b_ih_, b_hh_;
  std::vector<float> state_;
  std::vector<float> gates_, hgates_;
};

// Plain LSTM cell used by the FTLSTM scans. Not a Layer: state is handed in
// by the caller so one weight set can serve many scan positions.
class LstmCell {
 public:
  LstmCell(int in, int hidden)
      : in_(in), h_(hidden),
        w_ih_({4 * hidden, in}, Init::kFanInUniform, in),
        w_hh_({4 * hidden, hidden}, Init::kFanInUniform, hidden),
        b_ih_({4 * hidden}, Init::kZero),
        b_hh_({4 * hidden}, Init::kZero) {}

  int hidden() const { return h_; }
  int input() const { return in_; }

  void apply(const float* x, float* h, float* c) const {
    thread_local std::vector<float> gates;
    gates.assign(static_cast<size_t>(4 * h_), 0.0f);
    for (int g = 0; g < 4 * h_; ++g) {
      const float* wx = &w_ih_.v[static_cast<size_t>(g) * in_];
      const float* wh = &w_hh_.v[static_cast<size_t>(g) * h_];
      gates[static_cast<size_t>(g)] = b_ih_.v[static_cast<size_t>(g)] +
                                      b_hh_.v[static_cast<size_t>(g)] +
                                      dot4(wx, x, in_) + dot4(wh, h, h_);
    }
    for (int i = 0; i < h_; ++i) {
      const float ig = sigmoidf(gates[static_cast<size_t>(i)]);
      const float fg = sigmoidf(gates[static_cast<size_t>(h_ + i)]);
      const float gg = std::tanh(gates[static_cast<size_t>(2 * h_ + i)]);
      const float og = sigmoidf(gates[static_cast<size_t>(3 * h_ + i)]);
      const float cn = fg * c[i] + ig * gg;
      c[i] = cn;
      h[i] = og * std::tanh(cn);
    }
  }

  void collect_params(ParamMap& out, const std::string& prefix) {
    out.emplace_back(prefix + ".w_ih", &w_ih_);
    out.emplace_back(prefix + ".w_hh", &w_hh_);
    out.emplace_back(prefix + ".b_ih", &b_ih_);
    out.emplace_back(prefix + ".b_hh", &b_hh_);
  }

 private:
  int in_, h_;
  ParamTensor w_ih_, w_hh_, b_ih_, b_hh_;
};

// ---------------------------------------------------------------------------
// FTLSTM bottleneck: a bidirectional LSTM scans the frequency axis within
// each frame (no latency cost), then a unidirectional LSTM scans time per
// frequency with shared weights. Each scan is projected back to the channel
// count and added residually.
// ---------------------------------------------------------------------------

class FtLstm : public Layer {
 public:
  FtLstm(int ch, int bins, int f_hidden = 128, int t_hidden = 128)
      : ch_(ch), bins_(bins), fh_(f_hidden), th_(t_hidden),
        f_fwd_(ch, f_hidden), f_bwd_(ch, f_hidden),
        f_proj_(2 * f_hidden, ch),
        t_cell_(ch, t_hidden),
        t_proj_(t_hidden, ch) {
    reset();
  }

  Frame step(const Frame& in) override {
    if (in.ch != ch_ || in.bins != bins_)
      throw ContractError("ftlstm: shape mismatch");

    // Frequency scan, fresh state per frame.
    std::vector<float> hf(static_cast<size_t>(fh_), 0.0f), cf(hf), x(static_cast<size_t>(ch_));
    std::vector<float> fwd(static_cast<size_t>(bins_) * fh_);
    for (int f = 0; f < bins_; ++f) {
      for (int c = 0; c < ch_; ++c) x[static_cast<size_t>(c)] = in.at(c, f);
      f_fwd_.apply(x.data(), hf.data(), cf.data());
      std::copy(hf.begin(), hf.end(),
                fwd.begin() + static_cast<long>(f) * fh_);
    }
    std::fill(hf.begin(), hf.end(), 0.0f);
    std::fill(cf.begin(), cf.end(), 0.0f);
    std::vector<float> bwd(static_cast<size_t>(bins_) * fh_);
    for (int f = bins_ - 1; f >= 0; --f) {
      for (int c = 0; c < ch_; ++c) x[static_cast<size_t>(c)] = in.at(c, f);
      f_bwd_.apply(x.data(), hf.data(), cf.data());
      std::copy(hf.begin(), hf.end(),
                bwd.begin() + static_cast<long>(f) * fh_);
    }

    Frame mid(ch_, bins_);
    Frame cat(2 * fh_, 1);
    for (int f = 0; f < bins_; ++f) {
      std::copy(fwd.begin() + static_cast<long>(f) * fh_,
                fwd.begin() + static_cast<long>(f + 1) * fh_, cat.v.begin());
      std::copy(bwd.begin() + static_cast<long>(f) * fh_,
                bwd.begin() + static_cast<long>(f + 1) * fh_,
                cat.v.begin() + fh_);
      Frame proj = f_proj_.step(cat);
      for (int c = 0; c < ch_; ++c) mid.at(c, f) = in.at(c, f) + proj.v[static_cast<size_t>(c)];
    }

    // Time scan per frequency, persistent state, shared weights.
    Frame out(ch_, bins_);
    Frame tp(th_, 1);
    for (int f = 0; f < bins_; ++f) {
      for (int c = 0; c < ch_; ++c) x[static_cast<size_t>(c)] = mid.at(c, f);
      float* h = &t_h_[static_cast<size_t>(f) * th_];
      float* c2 = &t_c_[static_cast<size_t>(f) * th_];
      t_cell_.apply(x.data(), h, c2);
      std::copy(h, h + th_, tp.v.begin());
      Frame proj = t_proj_.step(tp);
      for (int c = 0; c < ch_; ++c) out.at(c, f) = mid.at(c, f) + proj.v[static_cast<size_t>(c)];
    }
    return out;
  }

  void reset() override {
    t_h_.assign(static_cast<size_t>(bins_) * th_, 0.0f);
    t_c_.assign(static_cast<size_t>(bins_) * th_, 0.0f);
  }

  void collect_params(ParamMap& out, const std::string& prefix) override {
    f_fwd_.collect_params(out, prefix + ".f_fwd");
    f_bwd_.collect_params(out, prefix + ".f_bwd");
    f_proj_.collect_params(out, prefix + ".f_proj");
    t_cell_.collect_params(out, prefix + ".t_cell");
    t_proj_.collect_params(out, prefix + ".t_proj");
  }

 private:
  int ch_, bins_, fh_, th_;
  LstmCell f_fwd_, f_bwd_;
  Linear f_proj_;
  LstmCell t_cell_;
  Linear t_proj_;
  std::vector<float> t_h_, t_c_;
};

// ---------------------------------------------------------------------------
// UNet block: a nested encoder-decoder added residually to its input, the
// residual U-block of the U^2 encoder layers. Gated convs downsample the
// frequency axis, gated transpose convs climb back up, and each level
// contributes a 1x1-conv skip. All-zero weights make the block an identity.
// ---------------------------------------------------------------------------

class UNetBlock : public Layer {
 public:
  UNetBlock(int ch, int in_bins, int depth) : ch_(ch), depth_(depth) {
    if (depth < 1) throw ConfigError("unet_block: depth must be >= 1");
    std::vector<int> dims;
    dims.push_back(in_bins);
    for (int d = 0; d < depth; ++d) {
      const int next = Conv2d::out_bins(dims.back(), down_spec(ch));
      if (next < 3)
        throw ConfigError(
            "unet_block: frequency dim too small for depth " +
            std::to_string(depth));
      dims.push_back(next);
    }
    for (int d = 0; d < depth; ++d) {
      downs_.push_back(std::make_unique<GatedConv2d>(down_spec(ch)));
      down_bn_.push_back(std::make_unique<BatchNorm>(ch));
      down_act_.push_back(std::make_unique<PReLU>(ch));
      Conv2dSpec skip;
      skip.in_ch = ch;
      skip.out_ch = ch;
      skip.kt = 1;
      skip.kf = 1;
      skip.sf = 1;
      skip.pad_f = 0;
      skips_.push_back(std::make_unique<Conv2d>(skip));
    }
    Conv2dSpec bottom;
    bottom.in_ch = ch;
    bottom.out_ch = ch;
    bottom.sf = 1;
    bottom.pad_f = 1;
    bottom_ = std::make_unique<GatedConv2d>(bottom);
    bottom_bn_ = std::make_unique<BatchNorm>(ch);
    bottom_act_ = std::make_unique<PReLU>(ch);
    for (int d = depth - 1; d >= 0; --d) {
      TrConv2dSpec up;
      up.in_ch = ch;
      up.out_ch = ch;
      up.target_bins = dims[static_cast<size_t>(d)];
      ups_.push_back(std::make_unique<GatedTrConv2d>(up));
      up_bn_.push_back(std::make_unique<BatchNorm>(ch));
      up_act_.push_back(std::make_unique<PReLU>(ch));
    }
  }

  Frame step(const Frame& in) override {
    if (in.ch != ch_) throw ContractError("unet_block: channel mismatch");
    std::vector<Frame> pre;
    Frame h = in;
    for (int d = 0; d < depth_; ++d) {
      pre.push_back(h);
      h = down_act_[static_cast<size_t>(d)]->step(
          down_bn_[static_cast<size_t>(d)]->step(
              downs_[static_cast<size_t>(d)]->step(h)));
    }
    h = bottom_act_->step(bottom_bn_->step(bottom_->step(h)));
    for (int i = 0; i < depth_; ++i) {
      const int level = depth_ - 1 - i;
      Frame up = up_act_[static_cast<size_t>(i)]->step(
          up_bn_[static_cast<size_t>(i)]->step(
              ups_[static_cast<size_t>(i)]->step(h)));
      Frame skip = skips_[static_cast<size_t>(level)]->step(
          pre[static_cast<size_t>(level)]);
      h = Frame(ch_, up.bins);
      for (size_t j = 0; j < h.v.size(); ++j)
        h.v[j] = up.v[j] + skip.v[j];
    }
    Frame out(ch_, in.bins);
    for (size_t j = 0; j < out.v.size(); ++j) out.v[j] = in.v[j] + h.v[j];
    return out;
  }

  void reset() override {
    for (auto& l : downs_) l->reset();
    for (auto& l : skips_) l->reset();
    bottom_->reset();
    for (auto& l : ups_) l->reset();
  }

  void collect_params(ParamMap& out, const std::string& prefix) override {
    for (int d = 0; d < depth_; ++d) {
      const std::string lv = prefix + ".down" + std::to_string(d);
      downs_[static_cast<size_t>(d)]->collect_params(out, lv);
      down_bn_[static_cast<size_t>(d)]->collect_params(out, lv + ".bn");
      down_act_[static_cast<size_t>(d)]->collect_params(out, lv + ".prelu");
      skips_[static_cast<size_t>(d)]->collect_params(
          out, prefix + ".skip" + std::to_string(d));
    }
    bottom_->collect_params(out, prefix + ".bottom");
    bottom_bn_->collect_params(out, prefix + ".bottom.bn");
    bottom_act_->collect_params(out, prefix + ".bottom.prelu");
    for (int i = 0; i < depth_; ++i) {
      const std::string lv = prefix + ".up" + std::to_string(i);
      ups_[static_cast<size_t>(i)]->collect_params(out, lv);
      up_bn_[static_cast<size_t>(i)]->collect_params(out, lv + ".bn");
      up_act_[static_cast<size_t>(i)]->collect_params(out, lv + ".prelu");
    }
  }

 private:
  static Conv2dSpec down_spec(int ch) {
    Conv2dSpec s;
    s.in_ch = ch;
    s.out_ch = ch;
    return s;
  }

  int ch_, depth_;
  std::vector<std::unique_ptr<GatedConv2d>> downs_;
  std::vector<std::unique_ptr<BatchNorm>> down_bn_;
  std::vector<std::unique_ptr<PReLU>> down_act_;
  std::vector<std::unique_ptr<Conv2d>> skips_;
  std::unique_ptr<GatedConv2d> bottom_;
  std::unique_ptr<BatchNorm> bottom_bn_;
  std::unique_ptr<PReLU> bottom_act_;
  std::vector<std::unique_ptr<GatedTrConv2d>> ups_;
  std::vector<std::unique_ptr<BatchNorm>> up_bn_;
  std::vector<std::unique_ptr<PReLU>> up_act_;
};

}  // namespace fbaec::nn

#endif  // FBAEC_NN_LAYERS_HPP_
