// Copyright 2026 The fbaec Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// fbaec command line: batch echo cancellation, scene simulation, metric
// evaluation, delay probing, benchmarking, and weight-manifest tooling.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "fbaec/datasim.hpp"
#include "fbaec/losses.hpp"
#include "fbaec/pipeline.hpp"
#include "fbaec/wav.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace fbaec;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

struct EngineOptions {
  std::string preset = "small";
  std::string weights;
  uint64_t seed = 1;
  bool linear_only = false;
  bool vad_gate = false;
  std::string mask_target = "e";
  int taps = 8;
  double mu = 0.5;
  double delta = 1e-6;
  int max_delay = 24000;
  int tde_block = 100;
  double tde_smoothing = 0.9;
  int tde_subbands = 32;
};

void add_engine_options(CLI::App* cmd, EngineOptions& opt) {
  cmd->add_option("--preset", opt.preset, "Model preset: small or large")
      ->check(CLI::IsMember({"small", "large"}));
  cmd->add_option("--weights", opt.weights, "Weight manifest path");
  cmd->add_option("--seed", opt.seed, "Seed for weight init when no manifest");
  cmd->add_option("--taps", opt.taps, "NLMS partitions (8 covers 80 ms)");
  cmd->add_option("--mu", opt.mu, "NLMS step size (0, 2]");
  cmd->add_option("--delta", opt.delta, "NLMS regularization");
  cmd->add_option("--max-delay", opt.max_delay, "TDE search range, samples");
  cmd->add_option("--tde-block", opt.tde_block, "TDE frames per update");
  cmd->add_option("--tde-smoothing", opt.tde_smoothing,
                  "TDE delay track smoothing [0,1)");
  cmd->add_option("--tde-subbands", opt.tde_subbands, "TDE sub-band count");
  cmd->add_option("--mask-target", opt.mask_target,
                  "High-band mask multiplies this branch")
      ->check(CLI::IsMember({"e", "d"}));
  cmd->add_flag("--vad-gate", opt.vad_gate,
                "Scale output by the VAD probability");
}

EngineConfig make_engine_config(const EngineOptions& opt) {
  EngineConfig cfg;
  cfg.tbnn = TbnnConfig::preset(opt.preset);
  cfg.tbnn.mask_on_error_branch = (opt.mask_target == "e");
  cfg.tbnn.vad_gates_output = opt.vad_gate;
  cfg.nlms.taps = opt.taps;
  cfg.nlms.mu = opt.mu;
  cfg.nlms.delta = opt.delta;
  cfg.tde.max_delay = opt.max_delay;
  cfg.tde.block = opt.tde_block;
  cfg.tde.smoothing = opt.tde_smoothing;
  cfg.tde.num_subbands = opt.tde_subbands;
  cfg.linear_only = opt.linear_only;
  cfg.weight_seed = opt.seed;
  return cfg;
}

json engine_config_json(const EngineConfig& cfg) {
  json j;
  j["stft"] = {{"sample_rate", cfg.stft.sample_rate},
               {"win_len", cfg.stft.win_len},
               {"hop", cfg.stft.hop},
               {"fft_size", cfg.stft.fft_size},
               {"window", cfg.stft.window}};
  j["tde"] = {{"max_delay", cfg.tde.max_delay},
              {"num_subbands", cfg.tde.num_subbands},
              {"block", cfg.tde.block},
              {"smoothing", cfg.tde.smoothing}};
  j["nlms"] = {{"taps", cfg.nlms.taps},
               {"mu", cfg.nlms.mu},
               {"delta", cfg.nlms.delta},
               {"bins", cfg.nlms.bins}};
  j["tbnn"] = cfg.tbnn.to_json();
  j["linear_only"] = cfg.linear_only;
  j["delay_backoff"] = cfg.delay_backoff;
  j["weight_seed"] = cfg.weight_seed;
  return j;
}

std::string config_hash(const EngineConfig& cfg) {
  return hex64(fnv1a64(engine_config_json(cfg).dump()));
}

void write_json(const std::string& path, const json& j) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path);
  f << j.dump(2) << "\n";
}

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) acc += x;
  return acc / static_cast<double>(v.size());
}

// ---------------------------------------------------------------------------
// process
// ---------------------------------------------------------------------------

int cmd_process(const std::string& mic_path, const std::string& ref_path,
                const std::string& out_path, const std::string& y_out,
                const std::string& report_path, size_t chunk,
                const EngineOptions& opt) {
  AudioBuffer mic = wav_read(mic_path, 48000);
  AudioBuffer ref = wav_read(ref_path, 48000);
  if (mic.size() != ref.size())
    throw DataError("process: mic has " + std::to_string(mic.size()) +
                    " samples but ref has " + std::to_string(ref.size()));

  EngineConfig cfg = make_engine_config(opt);
  cfg.emit_y = !y_out.empty();

  std::unique_ptr<nn::WeightManifest> manifest;
  if (!opt.weights.empty())
    manifest =
        std::make_unique<nn::WeightManifest>(nn::load_manifest(opt.weights));

  AecEngine eng = manifest ? AecEngine(cfg, *manifest) : AecEngine(cfg);

  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> out;
  std::vector<double> y;
  const size_t step = chunk == 0 ? mic.size() : chunk;
  for (size_t pos = 0; pos < mic.size(); pos += step) {
    const size_t n = std::min(step, mic.size() - pos);
    eng.push(mic.samples.data() + pos, ref.samples.data() + pos, n);
    auto part = eng.pull();
    out.insert(out.end(), part.begin(), part.end());
    auto ypart = eng.pull_y();
    y.insert(y.end(), ypart.begin(), ypart.end());
  }
  auto tail = eng.finish();
  out.insert(out.end(), tail.begin(), tail.end());
  auto ytail = eng.pull_y();
  y.insert(y.end(), ytail.begin(), ytail.end());
  const auto t1 = std::chrono::steady_clock::now();
  out.resize(mic.size(), 0.0);

  wav_write(out_path, AudioBuffer(std::move(out), 48000));
  if (!y_out.empty()) {
    y.resize(mic.size(), 0.0);
    wav_write(y_out, AudioBuffer(std::move(y), 48000));
  }

  const double wall = std::chrono::duration<double>(t1 - t0).count();
  const double audio_s = mic.duration();
  const auto& diag = eng.diagnostics();
  json report;
  report["input"] = {{"mic", mic_path},
                     {"ref", ref_path},
                     {"samples", mic.size()},
                     {"seconds", audio_s}};
  report["output"] = out_path;
  report["delay"] = {{"samples", diag.delay.delay},
                     {"ms", diag.delay.delay / 48.0},
                     {"confidence", diag.delay.confidence}};
  report["vad_mean"] = mean_of(diag.vad);
  if (!diag.erle_trace.empty())
    report["erle_final_db"] = diag.erle_trace.back();
  report["rtf"] = {{"total", wall / audio_s},
                   {"linear", eng.stats().linear_seconds / audio_s},
                   {"postfilter", eng.stats().postfilter_seconds / audio_s}};
  report["chunk"] = chunk;
  report["config_hash"] = config_hash(cfg);
  report["config"] = engine_config_json(cfg);
  if (!report_path.empty()) write_json(report_path, report);
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

struct SimRanges {
  double snr_min = 0.0, snr_max = 25.0;
  double ser_min = -15.0, ser_max = 15.0;
  double rt60_min = 0.2, rt60_max = 1.2;
  int delay_max = 24000;
};

int cmd_simulate(const std::string& out_dir, int n, uint64_t seed,
                 const std::string& scenario, double duration,
                 SimRanges ranges, const std::string& corpus_manifest,
                 int threads) {
  // The corpus recipe bounds are hard limits; requests outside are clamped.
  auto clamp_warn = [](double& lo, double& hi, double blo, double bhi,
                       const char* name) {
    if (lo < blo || hi > bhi)
      std::cerr << "warning: " << name << " range clamped to [" << blo << ", "
                << bhi << "]\n";
    lo = std::max(lo, blo);
    hi = std::min(hi, bhi);
  };
  clamp_warn(ranges.snr_min, ranges.snr_max, 0.0, 25.0, "snr");
  clamp_warn(ranges.ser_min, ranges.ser_max, -15.0, 15.0, "ser");
  clamp_warn(ranges.rt60_min, ranges.rt60_max, 0.2, 1.2, "rt60");
  if (ranges.delay_max > 24000 || ranges.delay_max < 0) {
    std::cerr << "warning: delay_max clamped to 24000\n";
    ranges.delay_max = std::clamp(ranges.delay_max, 0, 24000);
  }

  std::unique_ptr<Corpus> corpus;
  if (corpus_manifest.empty())
    corpus = std::make_unique<SyntheticCorpus>();
  else
    corpus = std::make_unique<DirectoryCorpus>(corpus_manifest);

  fs::create_directories(out_dir);
  json manifest;
  manifest["format"] = "fbaec-scenes-v1";
  manifest["seed"] = seed;
  manifest["count"] = n;
  manifest["scenes"] = json::array();

  std::vector<SceneSpec> specs;
  for (int i = 0; i < n; ++i) {
    SplitMix64 rng(seed + static_cast<uint64_t>(i) * 1000003ULL);
    Scenario sc = Scenario::kDt;
    if (scenario == "mix") {
      const double u = rng.next_double();
      sc = u < 0.6 ? Scenario::kDt
                   : (u < 0.8 ? Scenario::kStFe : Scenario::kStNe);
    } else {
      sc = scenario_from_name(scenario == "dt"      ? "DT"
                              : scenario == "st-fe" ? "ST-FE"
                                                    : "ST-NE");
    }
    SceneSpec sp = SceneSpec::random_from(seed + static_cast<uint64_t>(i), sc);
    sp.snr_db =
        ranges.snr_min + (ranges.snr_max - ranges.snr_min) * rng.next_double();
    sp.ser_db =
        ranges.ser_min + (ranges.ser_max - ranges.ser_min) * rng.next_double();
    sp.rt60 = ranges.rt60_min +
              (ranges.rt60_max - ranges.rt60_min) * rng.next_double();
    sp.delay = rng.next_int(0, ranges.delay_max);
    sp.duration = duration;
    specs.push_back(sp);
  }

  std::vector<json> records(static_cast<size_t>(n));
  std::atomic<int> next{0};
  std::atomic<bool> failed{false};
  std::string fail_msg;
  std::mutex fail_mutex;
  auto worker = [&]() {
    while (true) {
      const int i = next.fetch_add(1);
      if (i >= n || failed.load()) return;
      try {
        char name[32];
        std::snprintf(name, sizeof(name), "scene_%04d", i);
        const fs::path dir = fs::path(out_dir) / name;
        fs::create_directories(dir);
        Scene scene = mix_scene(specs[static_cast<size_t>(i)], *corpus);
        json rec;
        rec["id"] = name;
        rec["spec"] = scene.spec.to_json();
        json files;
        const std::pair<const char*, const AudioBuffer*> parts[] = {
            {"d", &scene.d}, {"x", &scene.x}, {"s", &scene.s},
            {"r", &scene.r}, {"v", &scene.v}, {"z", &scene.z}};
        for (const auto& [key, buf] : parts) {
          const std::string rel = std::string(name) + "/" + key + ".wav";
          wav_write((fs::path(out_dir) / rel).string(), *buf);
          files[key] = rel;
        }
        rec["files"] = files;
        rec["vad"] = scene.vad_labels;
        records[static_cast<size_t>(i)] = std::move(rec);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(fail_mutex);
        failed = true;
        fail_msg = e.what();
      }
    }
  };
  std::vector<std::thread> pool;
  const int nt = std::max(1, threads);
  for (int i = 0; i < nt; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failed) throw DataError("simulate: " + fail_msg);

  for (auto& rec : records) manifest["scenes"].push_back(std::move(rec));
  write_json((fs::path(out_dir) / "manifest.json").string(), manifest);
  std::cout << "wrote " << n << " scenes to " << out_dir << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

int cmd_evaluate(const std::string& manifest_path,
                 const std::string& enhanced_dir, bool check,
                 const std::string& out_path, const std::string& csv_path) {
  std::ifstream f(manifest_path);
  if (!f) throw DataError("evaluate: cannot open " + manifest_path);
  json manifest;
  try {
    f >> manifest;
  } catch (const std::exception& e) {
    throw DataError(std::string("evaluate: manifest parse error: ") +
                    e.what());
  }
  if (manifest.value("format", "") != "fbaec-scenes-v1")
    throw DataError("evaluate: unknown manifest format");
  const fs::path base = fs::path(manifest_path).parent_path();

  StftConfig stft_cfg;
  json results = json::array();
  std::vector<double> erles, sisdrs;
  for (const auto& rec : manifest.at("scenes")) {
    const std::string id = rec.at("id").get<std::string>();
    SceneSpec spec = SceneSpec::from_json(rec.at("spec"));
    Scene scene;
    scene.spec = spec;
    auto load = [&](const char* key) {
      return wav_read(
          (base / rec.at("files").at(key).get<std::string>()).string(),
          48000);
    };
    scene.d = load("d");
    scene.x = load("x");
    scene.s = load("s");
    scene.r = load("r");
    scene.v = load("v");
    scene.z = load("z");

    json row;
    row["id"] = id;
    row["scenario"] = scenario_name(spec.scenario);
    if (check) {
      const SceneCheck chk = check_scene(scene, /*float_file_semantics=*/true);
      row["identity_exact"] = chk.identity_exact;
      if (chk.has_snr) {
        row["snr_measured_db"] = chk.snr_db;
        row["snr_error_db"] = std::abs(chk.snr_db - spec.snr_db);
      }
      if (chk.has_ser) {
        row["ser_measured_db"] = chk.ser_db;
        row["ser_error_db"] = std::abs(chk.ser_db - spec.ser_db);
      }
    }
    if (!enhanced_dir.empty()) {
      const fs::path enh_path = fs::path(enhanced_dir) / (id + ".wav");
      AudioBuffer enh = wav_read(enh_path.string(), 48000);
      if (spec.scenario == Scenario::kStFe) {
        const double e = erle_db(scene.d, enh);
        row["erle_db"] = std::min(e, 120.0);
        erles.push_back(row["erle_db"].get<double>());
      } else {
        const SiSdrResult s = si_sdr_db(enh, scene.s);
        row["si_sdr_db"] = s.value_db;
        row["si_sdr_capped"] = s.capped;
        sisdrs.push_back(s.value_db);
      }
      // Loss components against the clean near-end target.
      Spectrogram est = stft(enh, stft_cfg);
      Spectrogram tgt = stft(scene.s, stft_cfg);
      Spectrogram zw = stft(scene.z, stft_cfg);
      row["loss_plcpa"] = loss_plcpa(est, tgt).value;
      row["loss_echo_weighted"] = loss_echo_weighted(est, tgt, zw).value;
    }
    results.push_back(std::move(row));
  }

  json report;
  report["manifest"] = manifest_path;
  report["scenes"] = results;
  json agg;
  if (!erles.empty()) agg["mean_erle_db"] = mean_of(erles);
  if (!sisdrs.empty()) agg["mean_si_sdr_db"] = mean_of(sisdrs);
  report["aggregate"] = agg;

  if (!out_path.empty()) write_json(out_path, report);
  if (!csv_path.empty()) {
    std::ofstream csv(csv_path);
    if (!csv) throw DataError("cannot write " + csv_path);
    csv << "id,scenario,erle_db,si_sdr_db,loss_plcpa,loss_echo_weighted\n";
    for (const auto& row : results) {
      csv << row.value("id", "") << "," << row.value("scenario", "") << ",";
      if (row.contains("erle_db")) csv << row["erle_db"].get<double>();
      csv << ",";
      if (row.contains("si_sdr_db")) csv << row["si_sdr_db"].get<double>();
      csv << ",";
      if (row.contains("loss_plcpa")) csv << row["loss_plcpa"].get<double>();
      csv << ",";
      if (row.contains("loss_echo_weighted"))
        csv << row["loss_echo_weighted"].get<double>();
      csv << "\n";
    }
  }
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------
// delay / bench / validate-weights / describe
// ---------------------------------------------------------------------------

int cmd_delay(const std::string& mic_path, const std::string& ref_path,
              int max_delay) {
  const AudioBuffer mic = wav_read(mic_path, 48000);
  const AudioBuffer ref = wav_read(ref_path, 48000);
  TdeConfig cfg;
  cfg.max_delay = max_delay;
  const DelayEstimate est = estimate_delay(mic, ref, cfg);
  json out = {{"delay_samples", est.delay},
              {"delay_ms", est.delay / 48.0},
              {"confidence", est.confidence}};
  std::cout << out.dump(2) << "\n";
  std::cout << "delay: " << est.delay << " samples (" << est.delay / 48.0
            << " ms), confidence " << est.confidence << "\n";
  return kExitOk;
}

int cmd_bench(double duration, const std::string& preset, int threads,
              uint64_t seed) {
  if (threads != 1)
    throw ConfigError("bench: single-thread measurement only (--threads 1)");
  SyntheticCorpus corpus;
  const size_t len = static_cast<size_t>(duration * 48000);
  AudioBuffer ref = corpus.speech(seed, len);
  SplitMix64 rng(seed + 3);
  std::vector<double> fir(256, 0.0);
  fir[0] = 1.0;
  for (size_t i = 1; i < fir.size(); ++i)
    fir[i] = 0.3 * rng.next_gaussian() *
             std::exp(-6.0 * static_cast<double>(i) / 256.0);
  AudioBuffer mic = make_echo(ref, fir, 4800);

  EngineOptions opt;
  opt.preset = preset;
  EngineConfig cfg = make_engine_config(opt);
  AecEngine eng(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  eng.push(mic.samples, ref.samples);
  eng.finish();
  const auto t1 = std::chrono::steady_clock::now();

  const double wall = std::chrono::duration<double>(t1 - t0).count();
  const double audio_s = mic.duration();
  const double rtf_total = wall / audio_s;
  const double rtf_linear = eng.stats().linear_seconds / audio_s;
  const double rtf_post = eng.stats().postfilter_seconds / audio_s;

  json report;
  report["preset"] = preset;
  report["audio_seconds"] = audio_s;
  report["threads"] = 1;
  report["rtf"] = {{"total", rtf_total},
                   {"tde_linear", rtf_linear},
                   {"postfilter", rtf_post},
                   {"split_sum", rtf_linear + rtf_post}};
  report["split_sum_matches_total"] =
      std::abs((rtf_linear + rtf_post) - rtf_total) <= 0.05 * rtf_total;
  report["reference_rtf"] = {
      {"total", 0.35},
      {"postfilter", 0.28},
      {"tde_linear", 0.07},
      {"note", "published full-band hybrid AEC reference, Intel Xeon "
               "E5-2678 v3 @2.50GHz, single thread; context only"}};
  report["config_hash"] = config_hash(cfg);
  std::cout << report.dump(2) << "\n";
  return kExitOk;
}

int cmd_validate_weights(const std::string& weights_path,
                         const std::string& preset) {
  nn::WeightManifest m = nn::load_manifest(weights_path);
  const std::string use_preset =
      !preset.empty() ? preset : (m.model == "tbnn-large" ? "large" : "small");
  Tbnn net(TbnnConfig::preset(use_preset));
  net.load(m);  // throws DataError listing problems
  const auto desc = net.describe();
  json out;
  out["weights"] = weights_path;
  out["model"] = m.model;
  out["manifest_params"] = m.total_params();
  out["graph_params"] = desc["total_params"];
  out["bound"] = true;
  out["config_hash_manifest"] = m.config_hash;
  out["config_hash_graph"] = net.config().hash();
  out["config_hash_match"] = (m.config_hash == net.config().hash());
  std::cout << out.dump(2) << "\n";
  if (!out["config_hash_match"].get<bool>())
    std::cerr << "warning: manifest was written for a different "
                 "configuration\n";
  return kExitOk;
}

int cmd_describe(const std::string& preset, const std::string& graph_out,
                 const std::string& manifest_out, uint64_t seed) {
  Tbnn net(TbnnConfig::preset(preset));
  const auto desc = net.describe();
  std::cout << desc.dump(2) << "\n";
  if (!graph_out.empty()) {
    write_json(graph_out, net.graph_json());
    std::cout << "graph definition written to " << graph_out << "\n";
  }
  if (!manifest_out.empty()) {
    net.seed(seed);
    net.save(manifest_out, desc["model"].get<std::string>());
    write_json(manifest_out + ".graph.json", net.graph_json());
    std::cout << "seeded manifest written to " << manifest_out
              << " (+ .graph.json)\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"fbaec: full-band hybrid acoustic echo cancellation"};
  app.require_subcommand(1);

  auto* p = app.add_subcommand("process", "Cancel echo from a WAV pair");
  std::string mic_path, ref_path, out_path = "out.wav", y_out, report_path;
  size_t chunk = 0;
  EngineOptions popt;
  p->add_option("mic", mic_path, "Microphone WAV (48 kHz mono)")->required();
  p->add_option("ref", ref_path, "Far-end reference WAV")->required();
  p->add_option("--out", out_path, "Output WAV path");
  p->add_option("--y-out", y_out, "Also write the linear echo estimate");
  p->add_option("--report", report_path, "Write the JSON run report here");
  p->add_option("--chunk", chunk, "Streaming chunk size (0 = whole file)");
  p->add_flag("--linear-only", popt.linear_only,
              "Emit the NLMS error signal without the post-filter");
  add_engine_options(p, popt);

  auto* s = app.add_subcommand("simulate", "Generate synthetic scenes");
  std::string out_dir = "scenes";
  int sim_n = 10;
  uint64_t sim_seed = 1;
  std::string scenario = "mix";
  double duration = 8.0;
  SimRanges ranges;
  std::string corpus_manifest;
  int sim_threads = 1;
  s->add_option("--out-dir", out_dir, "Output directory");
  s->add_option("--n", sim_n, "Number of scenes");
  s->add_option("--seed", sim_seed, "Base seed");
  s->add_option("--scenario", scenario, "mix, dt, st-fe or st-ne")
      ->check(CLI::IsMember({"mix", "dt", "st-fe", "st-ne"}));
  s->add_option("--duration", duration, "Scene length, seconds");
  s->add_option("--snr-min", ranges.snr_min);
  s->add_option("--snr-max", ranges.snr_max);
  s->add_option("--ser-min", ranges.ser_min);
  s->add_option("--ser-max", ranges.ser_max);
  s->add_option("--rt60-min", ranges.rt60_min);
  s->add_option("--rt60-max", ranges.rt60_max);
  s->add_option("--delay-max", ranges.delay_max);
  s->add_option("--corpus", corpus_manifest,
                "Corpus manifest JSON (default: built-in synthetic)");
  s->add_option("--threads", sim_threads, "Scene-level parallelism");

  auto* e = app.add_subcommand("evaluate", "Score enhanced scenes");
  std::string eval_manifest, enhanced_dir, eval_out, eval_csv;
  bool eval_check = false;
  e->add_option("--manifest", eval_manifest, "Scene manifest JSON")
      ->required();
  e->add_option("--enhanced-dir", enhanced_dir,
                "Directory of <scene_id>.wav outputs");
  e->add_flag("--check", eval_check,
              "Re-validate the scene model (identity, SNR/SER)");
  e->add_option("--out", eval_out, "Write the JSON report here");
  e->add_option("--csv", eval_csv, "Write a CSV metric table here");

  auto* d = app.add_subcommand("delay", "Estimate mic/ref delay");
  std::string d_mic, d_ref;
  int d_max = 24000;
  d->add_option("mic", d_mic)->required();
  d->add_option("ref", d_ref)->required();
  d->add_option("--max-delay", d_max, "Search range, samples");

  auto* b = app.add_subcommand("bench", "Measure the real-time factor");
  double bench_duration = 10.0;
  std::string bench_preset = "small";
  int bench_threads = 1;
  uint64_t bench_seed = 7;
  b->add_option("--duration", bench_duration, "Synthetic input, seconds");
  b->add_option("--preset", bench_preset)
      ->check(CLI::IsMember({"small", "large"}));
  b->add_option("--threads", bench_threads, "Must be 1");
  b->add_option("--seed", bench_seed);

  auto* vw = app.add_subcommand("validate-weights",
                                "Check a manifest against the graph");
  std::string vw_path, vw_preset;
  vw->add_option("--weights", vw_path)->required();
  vw->add_option("--preset", vw_preset, "Override the graph preset");

  auto* ds = app.add_subcommand("describe", "Print the parameter accounting");
  std::string ds_preset = "small", ds_graph, ds_manifest;
  uint64_t ds_seed = 1;
  ds->add_option("--preset", ds_preset)
      ->check(CLI::IsMember({"small", "large"}));
  ds->add_option("--graph-out", ds_graph, "Write the graph definition JSON");
  ds->add_option("--manifest-out", ds_manifest,
                 "Write a seeded weight manifest (+ graph sidecar)");
  ds->add_option("--seed", ds_seed, "Seed for --manifest-out");

  CLI11_PARSE(app, argc, argv);

  try {
    if (p->parsed())
      return cmd_process(mic_path, ref_path, out_path, y_out, report_path,
                         chunk, popt);
    if (s->parsed())
      return cmd_simulate(out_dir, sim_n, sim_seed, scenario, duration,
                          ranges, corpus_manifest, sim_threads);
    if (e->parsed())
      return cmd_evaluate(eval_manifest, enhanced_dir, eval_check, eval_out,
                          eval_csv);
    if (d->parsed()) return cmd_delay(d_mic, d_ref, d_max);
    if (b->parsed())
      return cmd_bench(bench_duration, bench_preset, bench_threads,
                       bench_seed);
    if (vw->parsed()) return cmd_validate_weights(vw_path, vw_preset);
    if (ds->parsed())
      return cmd_describe(ds_preset, ds_graph, ds_manifest, ds_seed);
  } catch (const ConfigError& ex) {
    std::cerr << "config error: " << ex.what() << "\n";
    return kExitConfig;
  } catch (const NumericError& ex) {
    std::cerr << "numeric error: " << ex.what() << "\n";
    return kExitNumeric;
  } catch (const Error& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitData;
  } catch (const std::exception& ex) {
    std::cerr << "error: " << ex.what() << "\n";
    return kExitData;
  }
  return kExitOk;
}
