// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Stage-1 model: transformer speech encoder (no positional encoding),
// LSTM encoder-decoder attractor generation, PSE classification head, and
// the stage-1 loss stack (PSE + diarization PIT + attractor existence).

#ifndef TOLD_EEND_OLA_H_
#define TOLD_EEND_OLA_H_

#include <string>
#include <vector>

#include "told/nn/checkpoint.h"
#include "told/nn/layers.h"
#include "told/pse_codec.h"
#include "told/types.h"

namespace told {

struct EendOlaConfig {
  int n_blocks = 4;
  int model_dim = 256;
  int n_heads = 4;
  int s_max = 8;
  int k_max = 3;
  int lstm_hidden = 256;
  int feature_dim = 345;
  double dropout = 0.1;
  double attractor_threshold = 0.5;

  int num_classes() const;
  void validate() const;
};

struct Stage1Losses {
  double l_pse = 0.0;
  double l_d = 0.0;
  double l_a = 0.0;
  // total = (l_pse + l_d) + alpha * l_a, in that association
  double total = 0.0;
};

class EendOla {
 public:
  EendOla(const EendOlaConfig& cfg, uint64_t seed);

  const EendOlaConfig& config() const { return cfg_; }
  const PSECodebook& codebook() const { return codebook_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  // T x D speech embeddings; dropout only when training.
  nn::Tensor encode_speech(const Mat& features, bool training = false,
                           Rng* drop_rng = nullptr) const;

  struct EdaResult {
    std::vector<nn::Tensor> attractors;  // 1 x D each, decode order
    nn::Tensor existence;                // n x 1 probabilities
    int accepted = 0;                    // usable attractor count
    std::vector<Mat> hidden_states;      // decoder h_s snapshots
    std::vector<Mat> cell_states;        // decoder c_s snapshots
  };

  // Embeddings are shuffled along time by shuffle_seed before the LSTM
  // encoder; the decoder consumes zero vectors. Train mode emits s_known + 1
  // attractors (the last is the stop attractor); infer mode emits while the
  // existence probability stays at or above the threshold, capped at s_max.
  EdaResult eda_generate(const nn::Tensor& emb, bool train_mode, int s_known,
                         uint64_t shuffle_seed) const;

  // T x s_max inner products; slots beyond `count` are zero-padded.
  nn::Tensor similarity_seq(const nn::Tensor& emb,
                            const std::vector<nn::Tensor>& attractors,
                            int count) const;

  // T x N PSE label probabilities (unidirectional LSTM + softmax).
  nn::Tensor pse_head(const nn::Tensor& similarities) const;

  struct Stage1LossGraph {
    nn::Tensor total;
    Stage1Losses values;
    std::vector<int> perm;
    bool ties_broken = false;
  };

  // pse_posteriors: T x N, attractor_probs: (S+1) x 1, raw_posteriors:
  // T x S sigmoid similarities over the first S slots. Labels are reordered
  // by PIT before PSE label computation; overlap beyond k_max is clamped.
  Stage1LossGraph stage1_loss(const nn::Tensor& pse_posteriors,
                              const nn::Tensor& attractor_probs,
                              const nn::Tensor& raw_posteriors,
                              const ActivityMatrix& labels,
                              double alpha) const;

  // Full training forward for one sequence.
  Stage1LossGraph training_loss(const Mat& features,
                                const ActivityMatrix& labels, double alpha,
                                uint64_t shuffle_seed, bool use_dropout,
                                Rng* drop_rng);

  struct Inference {
    ActivityMatrix activity;   // T x s_max, slots >= s_hat cleared
    std::vector<int> classes;  // argmax PSE class per frame
    int s_hat = 0;
    ActivityMatrix pre_pse;    // thresholded sigmoid similarities
    Mat pse_posteriors;        // T x N
  };

  Inference infer(const Mat& features, uint64_t shuffle_seed = 0) const;

 private:
  EendOlaConfig cfg_;
  PSECodebook codebook_;
  nn::ParamStore params_;
  nn::Linear input_proj_;
  std::vector<nn::TransformerBlock> blocks_;
  nn::LayerNormParams final_ln_;
  nn::Lstm eda_encoder_, eda_decoder_;
  nn::Linear exist_head_;
  nn::Lstm pse_lstm_;
  nn::Linear pse_out_;
};

// Mean BCE between existence probabilities and (1, ..., 1, 0) targets.
nn::Tensor attractor_existence_loss(const nn::Tensor& probs, int s_known);

}  // namespace told

#endif  // TOLD_EEND_OLA_H_
