// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/simulator.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "told/metrics.h"

namespace told {

namespace {

int first_center_at_or_after(double t, double period) {
  double x = t / period - 0.5;
  int i = static_cast<int>(std::ceil(x - 1e-9));
  return std::max(i, 0);
}

struct Turn {
  int speaker;
  double start;
  double end;
};

// Turn-taking schedule: the first |voices| turns cover every speaker once;
// afterwards speakers are drawn at random (never twice in a row). With
// probability overlap_prob the next turn starts before the current one ends.
std::vector<Turn> build_turns(int n_speakers, const SimConfig& cfg, Rng& rng) {
  std::vector<int> first_order(n_speakers);
  std::iota(first_order.begin(), first_order.end(), 0);
  rng.shuffle(first_order);

  auto draw_duration = [&](double mean) {
    return std::clamp(rng.exponential(mean), 0.2, 10.0);
  };

  std::vector<Turn> turns;
  double t = 0.0;
  int turn_index = 0;
  int prev_speaker = -1;
  while (t < cfg.duration) {
    int speaker;
    if (turn_index < n_speakers) {
      speaker = first_order[turn_index];
    } else if (n_speakers == 1) {
      speaker = 0;
    } else {
      speaker = static_cast<int>(rng.uniform_int(n_speakers - 1));
      if (speaker >= prev_speaker) ++speaker;
    }
    double dur = draw_duration(cfg.utterance_mean);
    double end = std::min(t + dur, cfg.duration);
    turns.push_back({speaker, t, end});
    prev_speaker = speaker;
    ++turn_index;

    if (rng.uniform() < cfg.overlap_prob) {
      double overlap = std::min(draw_duration(cfg.pause_mean), 0.8 * dur);
      t = t + dur - overlap;
    } else {
      t = t + dur + draw_duration(cfg.pause_mean);
    }
  }
  return turns;
}

std::string mixture_id(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mix_%05d", index);
  return buf;
}

}  // namespace

SpeakerVoice sample_voice(uint64_t seed, int feature_dim,
                          double variation_scale) {
  require(feature_dim >= 1, "sample_voice: feature_dim must be >= 1");
  require(variation_scale > 0.0, "sample_voice: variation_scale must be > 0");
  Rng rng(seed ^ 0x5eedf00dULL);
  SpeakerVoice voice;
  voice.seed = seed;
  voice.variation_scale = variation_scale;
  voice.spectral_template = Vec::Constant(feature_dim, 0.5);
  // a few smooth spectral bumps, distinct per seed
  int n_bumps = 3;
  for (int b = 0; b < n_bumps; ++b) {
    double center = rng.uniform(0.0, feature_dim - 1.0);
    double width = rng.uniform(feature_dim / 10.0, feature_dim / 4.0);
    double amp = rng.uniform(0.8, 1.6);
    for (int f = 0; f < feature_dim; ++f) {
      double d = (f - center) / width;
      voice.spectral_template[f] += amp * std::exp(-0.5 * d * d);
    }
  }
  return voice;
}

Mixture simulate_mixture(const std::vector<SpeakerVoice>& voices,
                         const SimConfig& cfg) {
  cfg.validate();
  int n_speakers = static_cast<int>(voices.size());
  require(n_speakers >= cfg.n_speakers_min &&
              n_speakers <= cfg.n_speakers_max,
          "simulate_mixture: voice count outside configured range");
  for (const auto& v : voices)
    require(v.spectral_template.size() == cfg.feature_dim,
            "simulate_mixture: voice template dim mismatch");

  Rng rng(cfg.seed);
  std::vector<Turn> turns = build_turns(n_speakers, cfg, rng);

  Mixture mix;
  mix.meta = cfg;
  for (const auto& v : voices) {
    mix.speaker_ids.push_back(v.id);
    mix.voice_seeds.push_back(v.seed);
  }

  int t_len;
  if (cfg.waveform) {
    // sinusoid bank per speaker; frequencies derived from the voice seed
    int sr = cfg.sample_rate;
    size_t n_samples = static_cast<size_t>(std::llround(cfg.duration * sr));
    mix.audio.samples.assign(n_samples, 0.0);
    mix.audio.sample_rate = sr;
    for (const auto& turn : turns) {
      Rng vrng(voices[turn.speaker].seed ^ 0xba5eba11ULL);
      double freqs[4], phases[4];
      for (int i = 0; i < 4; ++i) {
        freqs[i] = vrng.uniform(200.0, std::min(3400.0, sr / 2.0 - 200.0));
        phases[i] = vrng.uniform(0.0, 2.0 * M_PI);
      }
      auto lo = static_cast<size_t>(std::llround(turn.start * sr));
      auto hi =
          std::min(n_samples, static_cast<size_t>(std::llround(turn.end * sr)));
      for (size_t n = lo; n < hi; ++n) {
        double time = static_cast<double>(n) / sr;
        double s = 0.0;
        for (int i = 0; i < 4; ++i)
          s += 0.07 * std::sin(2.0 * M_PI * freqs[i] * time + phases[i]);
        mix.audio.samples[n] += s;
      }
    }
    for (double& s : mix.audio.samples) s = std::clamp(s, -1.0, 1.0);

    FeatureConfig fcfg;
    fcfg.n_mels = cfg.feature_dim;
    fcfg.stack_context = 0;
    fcfg.subsample =
        std::max(1, static_cast<int>(std::lround(cfg.frame_period / 0.01)));
    mix.features = compute_logmel(mix.audio, fcfg);
    t_len = mix.features.num_frames();
  } else {
    t_len = static_cast<int>(std::lround(cfg.duration / cfg.frame_period));
  }

  mix.labels = ActivityMatrix(t_len, n_speakers);
  mix.labels.frame_period = cfg.frame_period;
  mix.labels.speaker_ids = mix.speaker_ids;
  for (const auto& turn : turns) {
    int lo = first_center_at_or_after(turn.start, cfg.frame_period);
    int hi = first_center_at_or_after(turn.end, cfg.frame_period);
    hi = std::min(hi, t_len);
    for (int t = lo; t < hi; ++t) mix.labels.set(t, turn.speaker, 1);
  }

  if (!cfg.waveform) {
    // feature-space rendering: sum of active templates plus noise
    mix.features.frames = Mat::Zero(t_len, cfg.feature_dim);
    mix.features.frame_period = cfg.frame_period;
    for (int t = 0; t < t_len; ++t) {
      for (int f = 0; f < cfg.feature_dim; ++f)
        mix.features.frames(t, f) = cfg.noise_std * rng.normal();
      for (int s = 0; s < n_speakers; ++s) {
        if (!mix.labels.at(t, s)) continue;
        const SpeakerVoice& v = voices[s];
        for (int f = 0; f < cfg.feature_dim; ++f)
          mix.features.frames(t, f) +=
              v.spectral_template[f] + v.variation_scale * rng.normal();
      }
    }
  }
  mix.features.origin_id = "sim";
  return mix;
}

double overlap_ratio(const ActivityMatrix& labels) {
  int64_t speech = 0, overlapped = 0;
  for (int t = 0; t < labels.frames; ++t) {
    int n = labels.popcount_row(t);
    if (n >= 1) ++speech;
    if (n >= 2) ++overlapped;
  }
  return speech == 0 ? 0.0
                     : static_cast<double>(overlapped) /
                           static_cast<double>(speech);
}

std::vector<ManifestRow> build_dataset(const SimConfig& cfg, int n_mixtures,
                                       const std::string& out_dir,
                                       int voice_pool) {
  cfg.validate();
  require(n_mixtures >= 1, "build_dataset: n_mixtures must be >= 1");
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  std::vector<ManifestRow> rows;
  for (int i = 0; i < n_mixtures; ++i) {
    uint64_t mix_seed = derive_seed(cfg.seed, static_cast<uint64_t>(i));
    Rng rng(mix_seed);
    int span = cfg.n_speakers_max - cfg.n_speakers_min + 1;
    int n_spk = cfg.n_speakers_min +
                static_cast<int>(rng.uniform_int(static_cast<uint64_t>(span)));

    std::vector<SpeakerVoice> voices;
    if (voice_pool > 0) {
      require(voice_pool >= n_spk, "build_dataset: voice pool too small");
      std::vector<int> pool(voice_pool);
      std::iota(pool.begin(), pool.end(), 0);
      rng.shuffle(pool);
      for (int k = 0; k < n_spk; ++k) {
        uint64_t vseed =
            derive_seed(cfg.seed ^ 0x701c3ULL, static_cast<uint64_t>(pool[k]));
        SpeakerVoice v =
            sample_voice(vseed, cfg.feature_dim, cfg.variation_scale);
        char buf[16];
        std::snprintf(buf, sizeof(buf), "spk%03d", pool[k]);
        v.id = buf;
        voices.push_back(std::move(v));
      }
    } else {
      for (int k = 0; k < n_spk; ++k) {
        uint64_t vseed = derive_seed(mix_seed, 1000 + k);
        SpeakerVoice v =
            sample_voice(vseed, cfg.feature_dim, cfg.variation_scale);
        v.id = mixture_id(i) + "_s" + std::to_string(k);
        voices.push_back(std::move(v));
      }
    }

    SimConfig mix_cfg = cfg;
    mix_cfg.seed = derive_seed(mix_seed, 7);
    Mixture mix = simulate_mixture(voices, mix_cfg);

    ManifestRow row;
    row.id = mixture_id(i);
    row.n_speakers = n_spk;
    row.duration = cfg.duration;
    row.seed = mix_cfg.seed;
    row.features_path = row.id + ".feat";
    row.labels_path = row.id + ".lab";
    row.rttm_path = row.id + ".rttm";
    write_features((fs::path(out_dir) / row.features_path).string(),
                   mix.features);
    write_labels((fs::path(out_dir) / row.labels_path).string(), mix.labels);
    SegmentList segs =
        activity_to_segments(mix.labels, mix.labels.frame_period,
                             mix.speaker_ids, 0.0, 0.0, row.id);
    write_rttm((fs::path(out_dir) / row.rttm_path).string(), segs);
    if (cfg.waveform) {
      row.wav_path = row.id + ".wav";
      write_wav((fs::path(out_dir) / row.wav_path).string(), mix.audio);
    }
    rows.push_back(std::move(row));
  }
  write_manifest((fs::path(out_dir) / "manifest.jsonl").string(), rows);
  return rows;
}

void write_manifest(const std::string& path,
                    const std::vector<ManifestRow>& rows) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path);
  for (const auto& row : rows) {
    nlohmann::json j{{"id", row.id},
                     {"features", row.features_path},
                     {"labels", row.labels_path},
                     {"rttm", row.rttm_path},
                     {"n_speakers", row.n_speakers},
                     {"duration", row.duration},
                     {"seed", row.seed}};
    if (!row.wav_path.empty()) j["wav"] = row.wav_path;
    os << j.dump() << "\n";
  }
  if (!os) throw IoError("write failed: " + path);
}

std::vector<ManifestRow> read_manifest(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open for reading: " + path);
  std::vector<ManifestRow> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("manifest line " + std::to_string(line_no) + ": " +
                       e.what());
    }
    ManifestRow row;
    row.id = j.at("id").get<std::string>();
    row.features_path = j.at("features").get<std::string>();
    row.labels_path = j.at("labels").get<std::string>();
    row.rttm_path = j.at("rttm").get<std::string>();
    row.n_speakers = j.at("n_speakers").get<int>();
    row.duration = j.at("duration").get<double>();
    row.seed = j.at("seed").get<uint64_t>();
    if (j.contains("wav")) row.wav_path = j["wav"].get<std::string>();
    rows.push_back(std::move(row));
  }
  return rows;
}

LoadedMixture load_mixture(const std::string& manifest_dir,
                           const ManifestRow& row) {
  namespace fs = std::filesystem;
  LoadedMixture out;
  out.id = row.id;
  out.features =
      read_features((fs::path(manifest_dir) / row.features_path).string());
  out.labels = read_labels((fs::path(manifest_dir) / row.labels_path).string());
  return out;
}

}  // namespace told
