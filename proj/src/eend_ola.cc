// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/eend_ola.h"

#include <numeric>

#include "told/alignment.h"

namespace told {

using nn::Tensor;

int EendOlaConfig::num_classes() const {
  return build_codebook(s_max, k_max).num_classes();
}

void EendOlaConfig::validate() const {
  if (model_dim < 1 || model_dim % n_heads != 0)
    throw ConfigError("eend_ola: model_dim must be divisible by n_heads");
  if (n_blocks < 1) throw ConfigError("eend_ola: n_blocks must be >= 1");
  if (s_max < 1 || k_max < 0 || k_max > s_max)
    throw ConfigError("eend_ola: bad (s_max, k_max)");
  if (lstm_hidden < 1) throw ConfigError("eend_ola: lstm_hidden must be >= 1");
  if (feature_dim < 1) throw ConfigError("eend_ola: feature_dim must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("eend_ola: dropout must be in [0, 1)");
}

EendOla::EendOla(const EendOlaConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  codebook_ = build_codebook(cfg_.s_max, cfg_.k_max);
  Rng rng(seed);
  input_proj_ = nn::Linear(params_, "encoder.input_proj", cfg_.feature_dim,
                           cfg_.model_dim, rng);
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    blocks_.emplace_back(params_, "encoder.block" + std::to_string(b),
                         cfg_.model_dim, cfg_.n_heads, 4 * cfg_.model_dim,
                         cfg_.dropout, rng);
  }
  final_ln_ = nn::LayerNormParams(params_, "encoder.final_ln", cfg_.model_dim);
  eda_encoder_ =
      nn::Lstm(params_, "eda.encoder", cfg_.model_dim, cfg_.model_dim, rng);
  eda_decoder_ =
      nn::Lstm(params_, "eda.decoder", cfg_.model_dim, cfg_.model_dim, rng);
  exist_head_ = nn::Linear(params_, "eda.exist", cfg_.model_dim, 1, rng);
  pse_lstm_ = nn::Lstm(params_, "pse.lstm", cfg_.s_max, cfg_.lstm_hidden, rng);
  pse_out_ = nn::Linear(params_, "pse.out", cfg_.lstm_hidden,
                        codebook_.num_classes(), rng);
}

Tensor EendOla::encode_speech(const Mat& features, bool training,
                              Rng* drop_rng) const {
  require(static_cast<int>(features.cols()) == cfg_.feature_dim,
          "encode_speech: feature dim does not match config");
  require(all_finite(features), "encode_speech: non-finite features");
  Tensor x = input_proj_.forward(Tensor::leaf(features));
  for (const auto& block : blocks_)
    x = block.forward(x, drop_rng, training);
  return final_ln_.forward(x);
}

EendOla::EdaResult EendOla::eda_generate(const Tensor& emb, bool train_mode,
                                         int s_known,
                                         uint64_t shuffle_seed) const {
  int t_len = emb.rows();
  require(t_len >= 1, "eda_generate: need at least one frame");
  if (train_mode)
    require(s_known >= 0 && s_known <= cfg_.s_max,
            "eda_generate: s_known out of range");

  // shuffle a copy of the embeddings along time
  std::vector<int> order(t_len);
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(shuffle_seed);
  shuffle_rng.shuffle(order);
  Tensor shuffled = nn::select_rows(emb, order);

  nn::Lstm::State enc_state;
  eda_encoder_.run(shuffled, &enc_state);

  EdaResult out;
  Tensor zero_in = Tensor::zeros(1, cfg_.model_dim);
  nn::Lstm::State state = enc_state;
  std::vector<Tensor> prob_rows;
  int max_steps = train_mode ? s_known + 1 : cfg_.s_max + 1;
  for (int s = 0; s < max_steps; ++s) {
    state = eda_decoder_.step(zero_in, state);
    Tensor attractor = state.h;
    Tensor p = nn::sigmoid(exist_head_.forward(attractor));
    out.attractors.push_back(attractor);
    prob_rows.push_back(p);
    out.hidden_states.push_back(state.h.value());
    out.cell_states.push_back(state.c.value());
    if (!train_mode) {
      if (p.scalar() < cfg_.attractor_threshold) break;
      out.accepted = s + 1;
      if (out.accepted == cfg_.s_max) break;
    }
  }
  if (train_mode) out.accepted = s_known;
  out.existence = nn::concat_rows(prob_rows);
  return out;
}

Tensor EendOla::similarity_seq(const Tensor& emb,
                               const std::vector<Tensor>& attractors,
                               int count) const {
  require(count <= cfg_.s_max, "similarity_seq: more attractors than s_max");
  require(static_cast<int>(attractors.size()) >= count,
          "similarity_seq: not enough attractors");
  std::vector<Tensor> rows;
  for (int s = 0; s < count; ++s) rows.push_back(attractors[s]);
  if (count < cfg_.s_max)
    rows.push_back(Tensor::zeros(cfg_.s_max - count, cfg_.model_dim));
  Tensor padded = nn::concat_rows(rows);
  return nn::matmul(emb, nn::transpose(padded));
}

Tensor EendOla::pse_head(const Tensor& similarities) const {
  require(similarities.cols() == cfg_.s_max,
          "pse_head: expected s_max similarity columns");
  Tensor h = pse_lstm_.run(similarities);
  return nn::softmax_rows(pse_out_.forward(h));
}

Tensor attractor_existence_loss(const Tensor& probs, int s_known) {
  require(probs.cols() == 1, "attractor_existence_loss: probs must be n x 1");
  require(probs.rows() == s_known + 1,
          "attractor_existence_loss: need s_known + 1 probabilities");
  Mat target = Mat::Ones(s_known + 1, 1);
  target(s_known, 0) = 0.0;
  return nn::scale(nn::bce_sum(probs, target), 1.0 / (s_known + 1));
}

EendOla::Stage1LossGraph EendOla::stage1_loss(const Tensor& pse_posteriors,
                                              const Tensor& attractor_probs,
                                              const Tensor& raw_posteriors,
                                              const ActivityMatrix& labels,
                                              double alpha) const {
  int t_len = raw_posteriors.rows();
  int n_spk = raw_posteriors.cols();
  require(labels.frames == t_len, "stage1_loss: label frame mismatch");
  require(labels.speakers == n_spk, "stage1_loss: label speaker mismatch");
  require(attractor_probs.rows() == n_spk + 1,
          "stage1_loss: need S + 1 existence probabilities");
  require(pse_posteriors.rows() == t_len,
          "stage1_loss: PSE posterior frame mismatch");

  Stage1LossGraph out;

  // PIT: order labels to match the attractor slots.
  Mat label_mat = labels.to_mat();
  PermutationResult pit = pit_align(raw_posteriors.value(), label_mat);
  out.perm = pit.perm;
  out.ties_broken = pit.ties_broken;

  Mat permuted(t_len, n_spk);
  for (int s = 0; s < n_spk; ++s)
    permuted.col(s) = label_mat.col(pit.perm.empty() ? s : pit.perm[s]);

  Tensor l_d = nn::scale(nn::bce_sum(raw_posteriors, permuted),
                         1.0 / static_cast<double>(t_len));

  // PSE labels from the order-determined binary labels.
  std::vector<int> classes(t_len);
  for (int t = 0; t < t_len; ++t) {
    ActivityVector v(cfg_.s_max, 0);
    for (int s = 0; s < n_spk; ++s)
      v[s] = permuted(t, s) > 0.5 ? 1 : 0;
    v = clamp_activity(v, cfg_.k_max);
    classes[t] = encode_class(v, codebook_);
  }
  Tensor l_pse = nn::ce_mean(pse_posteriors, classes);
  Tensor l_a = attractor_existence_loss(attractor_probs, n_spk);

  out.total = nn::add(nn::add(l_pse, l_d), nn::scale(l_a, alpha));
  out.values.l_pse = l_pse.scalar();
  out.values.l_d = l_d.scalar();
  out.values.l_a = l_a.scalar();
  out.values.total = out.total.scalar();
  return out;
}

EendOla::Stage1LossGraph EendOla::training_loss(const Mat& features,
                                                const ActivityMatrix& labels,
                                                double alpha,
                                                uint64_t shuffle_seed,
                                                bool use_dropout,
                                                Rng* drop_rng) {
  int n_spk = labels.speakers;
  require(n_spk >= 1 && n_spk <= cfg_.s_max,
          "training_loss: speaker count out of range");
  Tensor emb = encode_speech(features, use_dropout, drop_rng);
  EdaResult eda = eda_generate(emb, /*train_mode=*/true, n_spk, shuffle_seed);
  Tensor sims = similarity_seq(emb, eda.attractors, n_spk);
  Tensor raw_post = nn::sigmoid(nn::slice_cols(sims, 0, n_spk));
  Tensor pse_post = pse_head(sims);
  return stage1_loss(pse_post, eda.existence, raw_post, labels, alpha);
}

EendOla::Inference EendOla::infer(const Mat& features,
                                  uint64_t shuffle_seed) const {
  Inference out;
  Tensor emb = encode_speech(features, /*training=*/false, nullptr);
  EdaResult eda =
      eda_generate(emb, /*train_mode=*/false, /*s_known=*/-1, shuffle_seed);
  int s_hat = eda.accepted;
  out.s_hat = s_hat;
  int t_len = emb.rows();

  Tensor sims = similarity_seq(emb, eda.attractors, s_hat);
  Tensor pse_post = pse_head(sims);
  out.pse_posteriors = pse_post.value();

  out.activity = ActivityMatrix(t_len, cfg_.s_max);
  out.pre_pse = ActivityMatrix(t_len, cfg_.s_max);
  out.classes.resize(t_len, 0);
  const Mat& sims_v = sims.value();
  for (int t = 0; t < t_len; ++t) {
    int best = 0;
    double best_p = out.pse_posteriors(t, 0);
    for (int c = 1; c < out.pse_posteriors.cols(); ++c) {
      if (out.pse_posteriors(t, c) > best_p) {
        best_p = out.pse_posteriors(t, c);
        best = c;
      }
    }
    out.classes[t] = best;
    ActivityVector v = decode_class(best, codebook_);
    for (int s = 0; s < cfg_.s_max; ++s)
      out.activity.set(t, s, (s < s_hat) ? v[s] : 0);
    for (int s = 0; s < s_hat; ++s) {
      double p = 1.0 / (1.0 + std::exp(-sims_v(t, s)));
      out.pre_pse.set(t, s, p >= 0.5 ? 1 : 0);
    }
  }
  return out;
}

}  // namespace told
