// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Stage-2 model: speaker profile extractor (conv + global statistic pooling
// + embedding, trained with additive angular margin), windowed-statistics
// speech encoder, context-independent and context-dependent scorers, PSE
// head, and the stage-2 loss.

#ifndef TOLD_SOAP_H_
#define TOLD_SOAP_H_

#include <string>
#include <vector>

#include "told/features.h"
#include "told/nn/checkpoint.h"
#include "told/nn/layers.h"
#include "told/pse_codec.h"
#include "told/types.h"

namespace told {

struct SpeakerProfile {
  Vec vector;  // unit L2 norm when valid; zeros otherwise
  std::string speaker_id;
  bool valid = false;
};

struct ProfileSet {
  std::vector<SpeakerProfile> slots;

  explicit ProfileSet(int s_max = 0) : slots(s_max) {}
  int s_max() const { return static_cast<int>(slots.size()); }
  int count() const {
    int n = 0;
    for (const auto& p : slots) n += p.valid ? 1 : 0;
    return n;
  }
};

// Text serialization: one "speaker_id v1 ... vD" row per valid slot.
std::string profiles_to_text(const ProfileSet& profiles);
ProfileSet profiles_from_text(const std::string& text, int s_max);

struct SoapConfig {
  std::vector<int> encoder_channels{32, 64, 128};
  int conv_kernel = 3;
  int sp_window = 100;  // frames
  int cd_layers = 2;
  int cd_heads = 4;
  int cd_ff = 0;  // 0 -> twice the scorer width
  int lstm_hidden = 256;
  int ci_hidden = 256;
  int emb_dim = 256;    // speaker profile dimension
  int model_dim = 256;  // encoded frame dimension
  int s_max = 8;
  int k_max = 3;
  int feature_dim = 23;
  double lambda = 0.1;
  double arc_margin = 0.25;
  double arc_scale = 8.0;
  double dropout = 0.1;
  int min_profile_frames = 25;

  int num_classes() const;
  int cd_width() const { return model_dim + emb_dim; }
  void validate() const;
};

// Conv frontend, global mean+std pooling over the selected frames, embedding
// layer, L2 normalization.
class ProfileExtractor {
 public:
  ProfileExtractor(const SoapConfig& cfg, uint64_t seed);

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }
  const SoapConfig& config() const { return cfg_; }

  // Differentiable path used during training; frames indexes rows of
  // features, in order.
  nn::Tensor embed(const Mat& features, const std::vector<int>& frames) const;

  // Inference helper; mask marks selected frames. Returns an invalid profile
  // when fewer than min_frames frames are selected.
  SpeakerProfile extract_profile(const FeatureSequence& features,
                                 const std::vector<uint8_t>& mask,
                                 int min_frames,
                                 const std::string& speaker_id) const;

 private:
  SoapConfig cfg_;
  nn::ParamStore params_;
  std::vector<nn::Conv1d> convs_;
  nn::Linear emb_;
};

// Additive angular-margin cross entropy. Embeddings and class weight rows
// are L2-normalized internally; margin is applied to the target angle and
// logits are scaled by `scale`.
nn::Tensor arcface_loss(const nn::Tensor& embeddings,
                        const nn::Tensor& class_weights,
                        const std::vector<int>& labels, double margin,
                        double scale);

struct Stage2Losses {
  double l_ce = 0.0;
  double l_guide = 0.0;
  // total = l_ce + lambda * l_guide, in that association
  double total = 0.0;
};

class Soap {
 public:
  Soap(const SoapConfig& cfg, uint64_t seed);

  const SoapConfig& config() const { return cfg_; }
  const PSECodebook& codebook() const { return codebook_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // Copies the profile extractor's conv frontend values into this encoder.
  void init_encoder_from(const ProfileExtractor& extractor);
  // Names of the parameters covered by init_encoder_from (freeze set).
  std::vector<std::string> encoder_frontend_names() const;

  // Conv frontend over the full sequence, per-frame mean+std over the
  // window [t - l/2, t + l/2] clipped to bounds, then the embedding layer.
  nn::Tensor encode_windowed(const Mat& features, bool training = false,
                             Rng* drop_rng = nullptr) const;

  // T x s_max probabilities; context-independent per-frame feed-forward.
  nn::Tensor ci_score(const nn::Tensor& encoded,
                      const ProfileSet& profiles) const;

  // T x s_max probabilities from residual self-attention blocks per slot.
  nn::Tensor cd_score(const nn::Tensor& encoded,
                      const ProfileSet& profiles) const;

  // T x N probabilities from the LSTM over concatenated CI/CD scores.
  nn::Tensor pse_head(const nn::Tensor& ci, const nn::Tensor& cd) const;

  struct Stage2LossGraph {
    nn::Tensor total;
    Stage2Losses values;
  };

  // Labels are aligned to profile slot order; bits of invalid slots are
  // masked out of the guide loss and cleared from the PSE labels.
  Stage2LossGraph stage2_loss(const nn::Tensor& pse_posteriors,
                              const nn::Tensor& ci, const nn::Tensor& cd,
                              const ActivityMatrix& labels,
                              const ProfileSet& profiles,
                              double lambda) const;

  Stage2LossGraph training_loss(const Mat& features,
                                const ActivityMatrix& labels,
                                const ProfileSet& profiles, double lambda,
                                bool use_dropout, Rng* drop_rng);

  // Argmax class per frame, decoded; bits of invalid slots forced to zero.
  // Throws InvalidInput when no profile is valid.
  ActivityMatrix infer(const Mat& features, const ProfileSet& profiles) const;

 private:
  Mat profile_matrix(const ProfileSet& profiles) const;  // s_max x emb_dim

  SoapConfig cfg_;
  PSECodebook codebook_;
  nn::ParamStore params_;
  std::vector<nn::Conv1d> convs_;
  nn::Linear emb_;
  std::vector<nn::Linear> ci_fcs_;
  nn::Linear ci_out_;
  std::vector<nn::MultiHeadAttention> cd_attn_;
  std::vector<nn::Linear> cd_ff1_, cd_ff2_;
  nn::Linear cd_out_;
  nn::Lstm pse_lstm_;
  nn::Linear pse_out_;
};

}  // namespace told

#endif  // TOLD_SOAP_H_
