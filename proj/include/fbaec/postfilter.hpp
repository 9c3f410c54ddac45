// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef FBAEC_POSTFILTER_HPP_
#define FBAEC_POSTFILTER_HPP_

#include <complex>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "fbaec/common.hpp"
#include "fbaec/nn/layers.hpp"
#include "fbaec/nn/manifest.hpp"
#include "fbaec/stft.hpp"

namespace fbaec {

// Two-step band-split post-filter: a wide-band spectral-mapping network
// (gated conv encoder with nested U-blocks, FTLSTM bottleneck, gated
// transpose-conv decoder, VAD head) followed by a high-band complex-mask
// network conditioned on the wide-band output.
struct TbnnConfig {
  int channels = 80;               // encoder/decoder conv channels
  int input_channels = 6;          // re/im of d, e, y
  int wb_bins = 321;
  int hb_bins = 160;
  int encoder_layers = 5;
  int unet_depth = 2;
  int ftlstm_f_hidden = 128;
  int ftlstm_t_hidden = 128;
  int vad_gru_hidden = 64;
  int hbpf_conv_modules = 3;
  int hbpf_conv_channels = 128;
  int hbpf_pointwise_channels = 48;
  int hbpf_gru_hidden = 256;
  double hbpf_dropout = 0.25;
  double compression = 0.5;
  double mask_clip = 2.0;
  bool mask_on_error_branch = true;  // multiply M_HB onto e (else d)
  bool vad_gates_output = false;
  bool debug_validate = false;

  static TbnnConfig preset(const std::string& name) {
    TbnnConfig cfg;
    if (name == "small") {
      cfg.channels = 80;
    } else if (name == "large") {
      cfg.channels = 128;
    } else {
      throw ConfigError("tbnn: unknown preset '" + name + "'");
    }
    return cfg;
  }

  void validate() const {
    if (channels < 1 || input_channels < 1 || wb_bins < 2 || hb_bins < 1 ||
        encoder_layers < 1 || unet_depth < 1 || hbpf_conv_modules < 1)
      throw ConfigError("tbnn: counts must be positive");
    if (mask_clip <= 0.0) throw ConfigError("tbnn: mask_clip must be > 0");
    if (compression <= 0.0 || compression > 1.0)
      throw ConfigError("tbnn: compression must be in (0, 1]");
  }

  nlohmann::json to_json() const {
    return nlohmann::json{{"channels", channels},
                          {"input_channels", input_channels},
                          {"wb_bins", wb_bins},
                          {"hb_bins", hb_bins},
                          {"encoder_layers", encoder_layers},
                          {"unet_depth", unet_depth},
                          {"ftlstm_f_hidden", ftlstm_f_hidden},
                          {"ftlstm_t_hidden", ftlstm_t_hidden},
                          {"vad_gru_hidden", vad_gru_hidden},
                          {"hbpf_conv_modules", hbpf_conv_modules},
                          {"hbpf_conv_channels", hbpf_conv_channels},
                          {"hbpf_pointwise_channels", hbpf_pointwise_channels},
                          {"hbpf_gru_hidden", hbpf_gru_hidden},
                          {"hbpf_dropout", hbpf_dropout},
                          {"compression", compression},
                          {"mask_clip", mask_clip},
                          {"mask_on_error_branch", mask_on_error_branch},
                          {"vad_gates_output", vad_gates_output}};
  }

  std::string hash() const { return hex64(fnv1a64(to_json().dump())); }
};

namespace pf_detail {

inline nn::Frame frame_add(const nn::Frame& a, const nn::Frame& b) {
  if (a.ch != b.ch || a.bins != b.bins)
    throw ContractError("postfilter: frame add shape mismatch");
  nn::Frame out(a.ch, a.bins);
  for (size_t i = 0; i < a.v.size(); ++i) out.v[i] = a.v[i] + b.v[i];
  return out;
}

inline void check_finite(const nn::Frame& f, const char* stage, bool on) {
  if (on && !nn::frame_finite(f))
    throw NumericError(std::string("postfilter: non-finite values after ") +
                       stage);
}

}  // namespace pf_detail

// Wide-band post-filter: spectral mapping from the 6-channel compressed
// re/im stack of (d, e, y) to the 2-channel re/im of S_WB, plus a per-frame
// voice-activity probability read off the bottleneck.
class Wbpf {
 public:
  explicit Wbpf(const TbnnConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    int bins = cfg.wb_bins;
    enc_bins_.push_back(bins);
    for (int l = 0; l < cfg.encoder_layers; ++l) {
      nn::Conv2dSpec cs;
      cs.in_ch = (l == 0) ? cfg.input_channels : cfg.channels;
      cs.out_ch = cfg.channels;
      enc_conv_.push_back(std::make_unique<nn::GatedConv2d>(cs));
      enc_bn_.push_back(std::make_unique<nn::BatchNorm>(cfg.channels));
      enc_act_.push_back(std::make_unique<nn::PReLU>(cfg.channels));
      bins = nn::Conv2d::out_bins(bins, cs);
      if (bins < 3)
        throw ConfigError("wbpf: too many encoder layers for wb_bins");
      enc_unet_.push_back(std::make_unique<nn::UNetBlock>(
          cfg.channels, bins, cfg.unet_depth));
      enc_bins_.push_back(bins);
    }

    bottleneck_ = std::make_unique<nn::FtLstm>(
        cfg.channels, bins, cfg.ftlstm_f_hidden, cfg.ftlstm_t_hidden);

    vad_gru_ = std::make_unique<nn::Gru>(cfg.channels * bins,
                                         cfg.vad_gru_hidden);
    vad_proj_ = std::make_unique<nn::Linear>(cfg.vad_gru_hidden, 1);

    // Decoder mirrors the encoder: skip 1x1 on each encoder output is added
    // to the decoder input, then a gated transpose conv climbs one level.
    // The final level is a plain linear transpose conv to 2 channels.
    for (int l = 0; l < cfg.encoder_layers; ++l) {
      const bool last = (l == cfg.encoder_layers - 1);
      nn::Conv2dSpec skip;
      skip.in_ch = cfg.channels;
      skip.out_ch = cfg.channels;
      skip.kt = 1;
      skip.kf = 1;
      skip.sf = 1;
      skip.pad_f = 0;
      dec_skip_.push_back(std::make_unique<nn::Conv2d>(skip));

      nn::TrConv2dSpec ts;
      ts.in_ch = cfg.channels;
      ts.out_ch = last ? 2 : cfg.channels;
      ts.target_bins =
          enc_bins_[static_cast<size_t>(cfg.encoder_layers - 1 - l)];
      if (last) {
        dec_out_ = std::make_unique<nn::TrConv2d>(ts);
      } else {
        dec_tconv_.push_back(std::make_unique<nn::GatedTrConv2d>(ts));
        dec_bn_.push_back(std::make_unique<nn::BatchNorm>(cfg.channels));
        dec_act_.push_back(std::make_unique<nn::PReLU>(cfg.channels));
      }
    }
  }

  // One frame: wb_in [input_channels x wb_bins] -> ([2 x wb_bins], vad).
  std::pair<nn::Frame, float> step(const nn::Frame& wb_in) {
    using pf_detail::check_finite;
    const bool dv = cfg_.debug_validate;
    nn::Frame h = wb_in;
    std::vector<nn::Frame> enc_outs;
    for (size_t l = 0; l < enc_conv_.size(); ++l) {
      h = enc_conv_[l]->step(h);
      h = enc_bn_[l]->step(h);
      h = enc_act_[l]->step(h);
      h = enc_unet_[l]->step(h);
      check_finite(h, "encoder", dv);
      enc_outs.push_back(h);
    }
    h = bottleneck_->step(h);
    check_finite(h, "ftlstm", dv);

    nn::Frame flat = h.flattened();
    nn::Frame vg = vad_gru_->step(flat);
    const float vad = nn::sigmoidf(vad_proj_->step(vg).v[0]);

    const size_t L = enc_conv_.size();
    for (size_t l = 0; l + 1 < L; ++l) {
      nn::Frame skip = dec_skip_[l]->step(enc_outs[L - 1 - l]);
      h = pf_detail::frame_add(h, skip);
      h = dec_tconv_[l]->step(h);
      h = dec_bn_[l]->step(h);
      h = dec_act_[l]->step(h);
      check_finite(h, "decoder", dv);
    }
    nn::Frame skip = dec_skip_[L - 1]->step(enc_outs[0]);
    h = pf_detail::frame_add(h, skip);
    nn::Frame out = dec_out_->step(h);
    check_finite(out, "decoder output", dv);
    return {std::move(out), vad};
  }

  // Whole-utterance convenience: returns the compressed wide-band estimate
  // and the per-frame VAD track.
  std::pair<Spectrogram, std::vector<double>> forward(const BandStack& wb_in) {
    if (wb_in.channels != cfg_.input_channels || wb_in.bins != cfg_.wb_bins)
      throw ContractError("wbpf: input stack shape mismatch");
    Spectrogram out(wb_in.frames, cfg_.wb_bins, cfg_.compression);
    std::vector<double> vad(static_cast<size_t>(wb_in.frames));
    for (int t = 0; t < wb_in.frames; ++t) {
      nn::Frame in(cfg_.input_channels, cfg_.wb_bins);
      for (int c = 0; c < cfg_.input_channels; ++c)
        for (int f = 0; f < cfg_.wb_bins; ++f) in.at(c, f) = wb_in.at(c, t, f);
      auto [o, v] = step(in);
      for (int f = 0; f < cfg_.wb_bins; ++f)
        out.at(t, f) = std::complex<double>(o.at(0, f), o.at(1, f));
      vad[static_cast<size_t>(t)] = v;
    }
    return {std::move(out), std::move(vad)};
  }

  void reset() {
    for (auto& l : enc_conv_) l->reset();
    for (auto& l : enc_unet_) l->reset();
    bottleneck_->reset();
    vad_gru_->reset();
    for (auto& l : dec_skip_) l->reset();
    for (auto& l : dec_tconv_) l->reset();
    dec_out_->reset();
  }

  void collect_params(nn::ParamMap& out, const std::string& prefix) {
    for (size_t l = 0; l < enc_conv_.size(); ++l) {
      const std::string lv = prefix + ".enc" + std::to_string(l + 1);
      enc_conv_[l]->collect_params(out, lv + ".gconv");
      enc_bn_[l]->collect_params(out, lv + ".bn");
      enc_act_[l]->collect_params(out, lv + ".prelu");
      enc_unet_[l]->collect_params(out, lv + ".unet");
    }
    bottleneck_->collect_params(out, prefix + ".ftlstm");
    vad_gru_->collect_params(out, prefix + ".vad.gru");
    vad_proj_->collect_params(out, prefix + ".vad.proj");
    const size_t L = enc_conv_.size();
    for (size_t l = 0; l < L; ++l) {
      const std::string lv = prefix + ".dec" + std::to_string(l + 1);
      dec_skip_[l]->collect_params(out, lv + ".skip");
      if (l + 1 < L) {
        dec_tconv_[l]->collect_params(out, lv + ".gtconv");
        dec_bn_[l]->collect_params(out, lv + ".bn");
        dec_act_[l]->collect_params(out, lv + ".prelu");
      } else {
        dec_out_->collect_params(out, lv + ".tconv");
      }
    }
  }

  const std::vector<int>& encoder_bins() const { return enc_bins_; }

 private:
  TbnnConfig cfg_;
  std::vector<int> enc_bins_;
  std::vector<std::unique_ptr<nn::GatedConv2d>> enc_conv_;
  std::vector<std::unique_ptr<nn::BatchNorm>> enc_bn_;
  std::vector<std::unique_ptr<nn::PReLU>> enc_act_;
  std::vector<std::unique_ptr<nn::UNetBlock>> enc_unet_;
  std::unique_ptr<nn::FtLstm> bottleneck_;
  std::unique_ptr<nn::Gru> vad_gru_;
  std::unique_ptr<nn::Linear> vad_proj_;
  std::vector<std::unique_ptr<nn::Conv2d>> dec_skip_;
  std::vector<std::unique_ptr<nn::GatedTrConv2d>> dec_tconv_;
  std::vector<std::unique_ptr<nn::BatchNorm>> dec_bn_;
  std::vector<std::unique_ptr<nn::PReLU>> dec_act_;
  std::unique_ptr<nn::TrConv2d> dec_out_;
};

// High-band post-filter: three 2D-Conv modules extract high-band features,
// the wide-band output is flattened and aligned through a pointwise conv,
// both are concatenated into a GRU whose head predicts the bounded complex
// mask applied to the chosen high-band input branch.
class Hbpf {
 public:
  explicit Hbpf(const TbnnConfig& cfg) : cfg_(cfg) {
    int bins = cfg.hb_bins;
    for (int m = 0; m < cfg.hbpf_conv_modules; ++m) {
      nn::Conv2dSpec cs;
      cs.in_ch = (m == 0) ? cfg.input_channels : cfg.hbpf_conv_channels;
      cs.out_ch = cfg.hbpf_conv_channels;
      conv_.push_back(std::make_unique<nn::Conv2d>(cs));
      bn_.push_back(std::make_unique<nn::BatchNorm>(cfg.hbpf_conv_channels));
      drop_.push_back(std::make_unique<nn::Dropout>(
          cfg.hbpf_dropout, 0x9b9d + static_cast<uint64_t>(m)));
      bins = nn::Conv2d::out_bins(bins, cs);
      if (bins < 2)
        throw ConfigError("hbpf: too many conv modules for hb_bins");
    }
    feat_bins_ = bins;
    wb_proj_ = std::make_unique<nn::Linear>(2 * cfg.wb_bins,
                                            cfg.hbpf_pointwise_channels);
    const int gru_in =
        cfg.hbpf_conv_channels * bins + cfg.hbpf_pointwise_channels;
    gru_ = std::make_unique<nn::Gru>(gru_in, cfg.hbpf_gru_hidden);
    mask_head_ = std::make_unique<nn::Linear>(cfg.hbpf_gru_hidden,
                                              2 * cfg.hb_bins);
  }

  // Test hook: override the predicted mask with a constant.
  void force_mask(std::optional<std::complex<float>> m) { forced_mask_ = m; }

  // One frame: hb_in [6 x hb_bins], wb_out [2 x wb_bins] (same frame) ->
  // (mask [2 x hb_bins], hb_out [2 x hb_bins]).
  std::pair<nn::Frame, nn::Frame> step(const nn::Frame& hb_in,
                                       const nn::Frame& wb_out) {
    if (hb_in.ch != cfg_.input_channels || hb_in.bins != cfg_.hb_bins)
      throw ContractError("hbpf: input stack shape mismatch");
    if (wb_out.ch != 2 || wb_out.bins != cfg_.wb_bins)
      throw ContractError("hbpf: wide-band prior shape mismatch");

    nn::Frame mask(2, cfg_.hb_bins);
    if (forced_mask_) {
      for (int f = 0; f < cfg_.hb_bins; ++f) {
        mask.at(0, f) = forced_mask_->real();
        mask.at(1, f) = forced_mask_->imag();
      }
    } else {
      nn::Frame h = hb_in;
      for (size_t m = 0; m < conv_.size(); ++m) {
        h = conv_[m]->step(h);
        h = elu_.step(h);
        h = bn_[m]->step(h);
        h = drop_[m]->step(h);
        pf_detail::check_finite(h, "hbpf conv", cfg_.debug_validate);
      }
      nn::Frame cat(h.ch * h.bins + cfg_.hbpf_pointwise_channels, 1);
      std::copy(h.v.begin(), h.v.end(), cat.v.begin());
      nn::Frame wb_feat = wb_proj_->step(wb_out.flattened());
      std::copy(wb_feat.v.begin(), wb_feat.v.end(),
                cat.v.begin() + static_cast<long>(h.v.size()));
      nn::Frame g = gru_->step(cat);
      nn::Frame raw = mask_head_->step(g);
      // Per-component tanh, jointly scaled so |mask| never exceeds
      // mask_clip.
      const float s =
          static_cast<float>(cfg_.mask_clip / std::sqrt(2.0));
      for (int f = 0; f < cfg_.hb_bins; ++f) {
        mask.at(0, f) = s * std::tanh(raw.v[static_cast<size_t>(f)]);
        mask.at(1, f) =
            s * std::tanh(raw.v[static_cast<size_t>(cfg_.hb_bins + f)]);
      }
    }

    // Complex multiply onto the selected input branch (e by default).
    const int re_ch = cfg_.mask_on_error_branch ? 2 : 0;
    nn::Frame out(2, cfg_.hb_bins);
    for (int f = 0; f < cfg_.hb_bins; ++f) {
      const float ar = hb_in.at(re_ch, f);
      const float ai = hb_in.at(re_ch + 1, f);
      const float mr = mask.at(0, f);
      const float mi = mask.at(1, f);
      out.at(0, f) = ar * mr - ai * mi;
      out.at(1, f) = ar * mi + ai * mr;
    }
    return {std::move(mask), std::move(out)};
  }

  // Whole-utterance convenience mirroring the streaming path.
  std::pair<std::vector<std::complex<float>>, Spectrogram> forward(
      const BandStack& hb_in, const Spectrogram& wb_out) {
    if (hb_in.frames != wb_out.frames)
      throw ContractError("hbpf: frame count mismatch with wide-band prior");
    Spectrogram out(hb_in.frames, cfg_.hb_bins, cfg_.compression);
    std::vector<std::complex<float>> masks(
        static_cast<size_t>(hb_in.frames) * cfg_.hb_bins);
    for (int t = 0; t < hb_in.frames; ++t) {
      nn::Frame in(cfg_.input_channels, cfg_.hb_bins);
      for (int c = 0; c < cfg_.input_channels; ++c)
        for (int f = 0; f < cfg_.hb_bins; ++f) in.at(c, f) = hb_in.at(c, t, f);
      nn::Frame wb(2, cfg_.wb_bins);
      for (int f = 0; f < cfg_.wb_bins; ++f) {
        wb.at(0, f) = static_cast<float>(wb_out.at(t, f).real());
        wb.at(1, f) = static_cast<float>(wb_out.at(t, f).imag());
      }
      auto [mask, o] = step(in, wb);
      for (int f = 0; f < cfg_.hb_bins; ++f) {
        masks[static_cast<size_t>(t) * cfg_.hb_bins + f] =
            std::complex<float>(mask.at(0, f), mask.at(1, f));
        out.at(t, f) = std::complex<double>(o.at(0, f), o.at(1, f));
      }
    }
    return {std::move(masks), std::move(out)};
  }

  void set_training(bool on) {
    for (auto& d : drop_) d->set_training(on);
  }

  void reset() {
    for (auto& l : conv_) l->reset();
    for (auto& d : drop_) d->reset();
    gru_->reset();
  }

  void collect_params(nn::ParamMap& out, const std::string& prefix) {
    for (size_t m = 0; m < conv_.size(); ++m) {
      const std::string lv = prefix + ".conv" + std::to_string(m + 1);
      conv_[m]->collect_params(out, lv);
      bn_[m]->collect_params(out, lv + ".bn");
    }
    wb_proj_->collect_params(out, prefix + ".wb_proj");
    gru_->collect_params(out, prefix + ".gru");
    mask_head_->collect_params(out, prefix + ".mask_head");
  }

  int feature_bins() const { return feat_bins_; }

 private:
  TbnnConfig cfg_;
  int feat_bins_ = 0;
  std::vector<std::unique_ptr<nn::Conv2d>> conv_;
  std::vector<std::unique_ptr<nn::BatchNorm>> bn_;
  std::vector<std::unique_ptr<nn::Dropout>> drop_;
  nn::Elu elu_;
  std::unique_ptr<nn::Linear> wb_proj_;
  std::unique_ptr<nn::Gru> gru_;
  std::unique_ptr<nn::Linear> mask_head_;
  std::optional<std::complex<float>> forced_mask_;
};

// The assembled two-step post-filter operating on compressed full-band
// spectra of (d, e, y) one frame at a time.
class Tbnn {
 public:
  struct FrameResult {
    std::vector<std::complex<double>> s_hat;  // compressed, full band
    double vad = 0.0;
  };

  explicit Tbnn(const TbnnConfig& cfg)
      : cfg_(cfg), wbpf_(cfg), hbpf_(cfg),
        total_bins_(cfg.wb_bins + cfg.hb_bins) {}

  const TbnnConfig& config() const { return cfg_; }
  Wbpf& wbpf() { return wbpf_; }
  Hbpf& hbpf() { return hbpf_; }
  int total_bins() const { return total_bins_; }

  FrameResult step(const std::complex<double>* d,
                   const std::complex<double>* e,
                   const std::complex<double>* y) {
    nn::Frame wb_in(cfg_.input_channels, cfg_.wb_bins);
    nn::Frame hb_in(cfg_.input_channels, cfg_.hb_bins);
    fill_band(wb_in, 0, d, e, y);
    fill_band(hb_in, cfg_.wb_bins, d, e, y);

    auto [wb_out, vad] = wbpf_.step(wb_in);
    auto [mask, hb_out] = hbpf_.step(hb_in, wb_out);

    FrameResult res;
    res.vad = vad;
    res.s_hat.resize(static_cast<size_t>(total_bins_));
    const double gate =
        cfg_.vad_gates_output ? std::max(0.05, static_cast<double>(vad)) : 1.0;
    for (int f = 0; f < cfg_.wb_bins; ++f)
      res.s_hat[static_cast<size_t>(f)] =
          gate * std::complex<double>(wb_out.at(0, f), wb_out.at(1, f));
    for (int f = 0; f < cfg_.hb_bins; ++f)
      res.s_hat[static_cast<size_t>(cfg_.wb_bins + f)] =
          gate * std::complex<double>(hb_out.at(0, f), hb_out.at(1, f));
    return res;
  }

  void reset() {
    wbpf_.reset();
    hbpf_.reset();
  }

  nn::ParamMap params() {
    nn::ParamMap pm;
    wbpf_.collect_params(pm, "wbpf");
    hbpf_.collect_params(pm, "hbpf");
    return pm;
  }

  void seed(uint64_t seed_value) { nn::seed_init(params(), seed_value); }

  void load(const nn::WeightManifest& m) { nn::bind_manifest(params(), m); }

  void save(const std::string& path, const std::string& model_name) {
    nn::save_manifest(path, params(), model_name, cfg_.hash());
  }

  // Parameter accounting, grouped by the first two name components.
  nlohmann::json describe() {
    nn::ParamMap pm = params();
    nlohmann::json groups = nlohmann::json::object();
    size_t total = 0;
    for (const auto& [name, p] : pm) {
      const size_t dot = name.find('.', name.find('.') + 1);
      const std::string group = name.substr(0, dot);
      groups[group] = groups.value(group, 0ULL) + p->size();
      total += p->size();
    }
    nlohmann::json out;
    out["model"] = cfg_.channels == 128 ? "tbnn-large" : "tbnn-small";
    out["config_hash"] = cfg_.hash();
    out["total_params"] = total;
    out["tensors"] = pm.size();
    out["groups"] = groups;
    return out;
  }

  // Graph definition for third-party trainers: layer list with kinds and
  // hyperparameters plus the full named-tensor table.
  nlohmann::json graph_json() {
    nlohmann::json g;
    g["format"] = "fbaec-graph-v1";
    g["config"] = cfg_.to_json();
    g["config_hash"] = cfg_.hash();

    nlohmann::json layers = nlohmann::json::array();
    auto add = [&layers](const std::string& name, const std::string& kind,
                         nlohmann::json hp) {
      layers.push_back(nlohmann::json{
          {"name", name}, {"kind", kind}, {"hyperparameters", std::move(hp)}});
    };
    const auto& eb = wbpf_.encoder_bins();
    for (int l = 0; l < cfg_.encoder_layers; ++l) {
      const std::string lv = "wbpf.enc" + std::to_string(l + 1);
      add(lv + ".gconv", "GConv",
          {{"in_ch", l == 0 ? cfg_.input_channels : cfg_.channels},
           {"out_ch", cfg_.channels},
           {"kernel", {2, 3}},
           {"stride", {1, 2}},
           {"pad_f", 1},
           {"in_bins", eb[static_cast<size_t>(l)]},
           {"out_bins", eb[static_cast<size_t>(l + 1)]}});
      add(lv + ".bn", "BatchNorm", {{"channels", cfg_.channels}});
      add(lv + ".prelu", "PReLU", {{"channels", cfg_.channels}});
      add(lv + ".unet", "UNetBlock",
          {{"channels", cfg_.channels},
           {"depth", cfg_.unet_depth},
           {"bins", eb[static_cast<size_t>(l + 1)]},
           {"inner", "GConv+BN+PReLU down / GTrConv+BN+PReLU up, "
                     "SkipConv1x1 per level, residual overall"}});
    }
    add("wbpf.ftlstm", "FTLSTM",
        {{"channels", cfg_.channels},
         {"bins", eb.back()},
         {"f_hidden", cfg_.ftlstm_f_hidden},
         {"f_bidirectional", true},
         {"t_hidden", cfg_.ftlstm_t_hidden},
         {"residual", true}});
    add("wbpf.vad.gru", "GRU",
        {{"in", cfg_.channels * eb.back()}, {"hidden", cfg_.vad_gru_hidden}});
    add("wbpf.vad.proj", "PointwiseConv1d",
        {{"in", cfg_.vad_gru_hidden}, {"out", 1}, {"activation", "Sigmoid"}});
    for (int l = 0; l < cfg_.encoder_layers; ++l) {
      const std::string lv = "wbpf.dec" + std::to_string(l + 1);
      const bool last = l == cfg_.encoder_layers - 1;
      add(lv + ".skip", "SkipConv1x1",
          {{"channels", cfg_.channels},
           {"combine", "added to decoder input"}});
      add(lv + (last ? ".tconv" : ".gtconv"), "TrConv2d",
          {{"in_ch", cfg_.channels},
           {"out_ch", last ? 2 : cfg_.channels},
           {"gated", !last},
           {"kernel", {2, 3}},
           {"stride", {1, 2}},
           {"target_bins",
            eb[static_cast<size_t>(cfg_.encoder_layers - 1 - l)]},
           {"activation", last ? "linear" : "BN+PReLU"}});
    }
    for (int m = 0; m < cfg_.hbpf_conv_modules; ++m) {
      add("hbpf.conv" + std::to_string(m + 1), "Conv2d",
          {{"in_ch", m == 0 ? cfg_.input_channels : cfg_.hbpf_conv_channels},
           {"out_ch", cfg_.hbpf_conv_channels},
           {"kernel", {2, 3}},
           {"stride", {1, 2}},
           {"order", "Conv2d+ELU+BN+Dropout"},
           {"dropout", cfg_.hbpf_dropout}});
    }
    add("hbpf.wb_proj", "PointwiseConv1d",
        {{"in", 2 * cfg_.wb_bins}, {"out", cfg_.hbpf_pointwise_channels}});
    add("hbpf.gru", "GRU",
        {{"in", cfg_.hbpf_conv_channels * hbpf_.feature_bins() +
                    cfg_.hbpf_pointwise_channels},
         {"hidden", cfg_.hbpf_gru_hidden}});
    add("hbpf.mask_head", "PointwiseConv1d",
        {{"in", cfg_.hbpf_gru_hidden},
         {"out", 2 * cfg_.hb_bins},
         {"activation", "tanh scaled to |mask| <= mask_clip"}});
    g["layers"] = layers;

    nlohmann::json tensors = nlohmann::json::array();
    for (const auto& [name, p] : params())
      tensors.push_back(nlohmann::json{{"name", name}, {"shape", p->shape}});
    g["tensors"] = tensors;
    return g;
  }

 private:
  void fill_band(nn::Frame& dst, int bin0, const std::complex<double>* d,
                 const std::complex<double>* e,
                 const std::complex<double>* y) {
    const std::complex<double>* src[3] = {d, e, y};
    for (int s = 0; s < 3; ++s) {
      for (int f = 0; f < dst.bins; ++f) {
        dst.at(2 * s, f) = static_cast<float>(src[s][bin0 + f].real());
        dst.at(2 * s + 1, f) = static_cast<float>(src[s][bin0 + f].imag());
      }
    }
  }

  TbnnConfig cfg_;
  Wbpf wbpf_;
  Hbpf hbpf_;
  int total_bins_;
};

}  // namespace fbaec

#endif  // FBAEC_POSTFILTER_HPP_
