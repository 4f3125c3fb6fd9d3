// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Deterministic synthetic multi-speaker conversations for training and
// tests: turn-taking with exponential utterance/pause durations and
// probabilistic overlap, rendered either directly in feature space or as a
// sinusoid-bank waveform.

#ifndef TOLD_SIMULATOR_H_
#define TOLD_SIMULATOR_H_

#include <string>
#include <vector>

#include "told/features.h"
#include "told/types.h"

namespace told {

struct SpeakerVoice {
  std::string id;
  Vec spectral_template;  // length-F mean vector
  double variation_scale = 0.0;
  uint64_t seed = 0;
};

struct SimConfig {
  int n_speakers_min = 2;
  int n_speakers_max = 3;
  double utterance_mean = 2.0;  // seconds
  double pause_mean = 0.5;
  double overlap_prob = 0.3;
  double duration = 30.0;
  double noise_std = 0.1;
  double variation_scale = 0.15;
  int feature_dim = 23;
  double frame_period = 0.1;
  uint64_t seed = 1;
  int s_max = 8;
  bool waveform = false;  // emit sinusoid-bank audio + WAV-path features
  int sample_rate = 8000;

  void validate() const {
    if (n_speakers_min < 1 || n_speakers_min > n_speakers_max ||
        n_speakers_max > s_max)
      throw ConfigError("sim: need 1 <= min <= max <= s_max");
    if (!(utterance_mean > 0.0) || !(pause_mean > 0.0))
      throw ConfigError("sim: durations must be positive");
    if (overlap_prob < 0.0 || overlap_prob > 1.0)
      throw ConfigError("sim: overlap_prob must be in [0, 1]");
    if (!(duration > 0.0) || !(frame_period > 0.0))
      throw ConfigError("sim: duration and frame_period must be positive");
    if (feature_dim < 1) throw ConfigError("sim: feature_dim must be >= 1");
    if (noise_std < 0.0) throw ConfigError("sim: noise_std must be >= 0");
  }
};

struct Mixture {
  FeatureSequence features;
  ActivityMatrix labels;
  std::vector<std::string> speaker_ids;
  std::vector<uint64_t> voice_seeds;
  SimConfig meta;
  AudioSignal audio;  // populated in waveform mode only
};

// Template drawn from a fixed random process; distinct seeds give distinct
// spectral shapes.
SpeakerVoice sample_voice(uint64_t seed, int feature_dim,
                          double variation_scale);

// Fully determined by cfg.seed and the voices.
Mixture simulate_mixture(const std::vector<SpeakerVoice>& voices,
                         const SimConfig& cfg);

// Fraction of speech frames with more than one active speaker.
double overlap_ratio(const ActivityMatrix& labels);

struct ManifestRow {
  std::string id;
  std::string features_path;
  std::string labels_path;
  std::string rttm_path;
  std::string wav_path;  // waveform mode only
  int n_speakers = 0;
  double duration = 0.0;
  uint64_t seed = 0;
};

// Persists features, labels (binary sidecar + RTTM), and a JSONL manifest;
// reproducible from (cfg, cfg.seed). Paths in the manifest are relative to
// out_dir. Per-mixture voice seeds are derived from the master seed; voices
// with which the feature config is rendered come from a shared pool so the
// same speakers can recur across mixtures.
std::vector<ManifestRow> build_dataset(const SimConfig& cfg, int n_mixtures,
                                       const std::string& out_dir,
                                       int voice_pool = 0);

void write_manifest(const std::string& path,
                    const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> read_manifest(const std::string& path);

// Loads the features + labels referenced by a manifest row (paths resolved
// against the manifest's directory).
struct LoadedMixture {
  FeatureSequence features;
  ActivityMatrix labels;
  std::string id;
};
LoadedMixture load_mixture(const std::string& manifest_dir,
                           const ManifestRow& row);

}  // namespace told

#endif  // TOLD_SIMULATOR_H_
