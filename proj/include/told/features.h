// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Log-mel feature extraction with optional frame stacking and subsampling.

#ifndef TOLD_FEATURES_H_
#define TOLD_FEATURES_H_

#include <string>
#include <vector>

#include "told/common.h"

namespace told {

// Floor applied to mel energies before the log; bounds features for silence.
constexpr double kMelLogFloor = 1e-10;

struct AudioSignal {
  std::vector<double> samples;  // amplitudes in [-1, 1]
  int sample_rate = 0;
  std::string id;
};

struct FeatureSequence {
  Mat frames;  // T x F
  double frame_period = 0.0;
  std::string origin_id;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int dim() const { return static_cast<int>(frames.cols()); }
};

struct FeatureConfig {
  double window_len = 0.025;  // seconds
  double hop_len = 0.010;     // seconds
  int n_mels = 23;
  int stack_context = 7;  // frames each side
  int subsample = 10;

  void validate() const {
    if (!(hop_len > 0.0) || window_len < hop_len)
      throw ConfigError("features: need window_len >= hop_len > 0");
    if (n_mels < 1) throw ConfigError("features: n_mels must be >= 1");
    if (stack_context < 0 || subsample < 1)
      throw ConfigError("features: bad stacking/subsampling");
  }
};

// Full pipeline: framing, Hamming window, power spectrum, mel filterbank,
// log with floor, then stacking/subsampling per cfg.
FeatureSequence compute_logmel(const AudioSignal& signal,
                               const FeatureConfig& cfg);

// Output frame t concatenates input frames [t*factor - context,
// t*factor + context] with edge replication; T' = ceil(T / factor).
FeatureSequence stack_and_subsample(const FeatureSequence& features,
                                    int context, int factor);

// Mono 16-bit PCM WAV at 8 or 16 kHz.
AudioSignal read_wav(const std::string& path);
void write_wav(const std::string& path, const AudioSignal& signal);

// Binary container: header (T, F, frame_period) + row-major float32 payload.
void write_features(const std::string& path, const FeatureSequence& fs);
FeatureSequence read_features(const std::string& path);

// Portable text form for fixtures.
std::string features_to_text(const FeatureSequence& fs);
FeatureSequence features_from_text(const std::string& text);

}  // namespace told

#endif  // TOLD_FEATURES_H_
