// Copyright (c) 2026 TOLD Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "told/soap.h"

#include <sstream>

namespace told {

using nn::Tensor;

std::string profiles_to_text(const ProfileSet& profiles) {
  std::ostringstream os;
  os.precision(9);
  for (const auto& p : profiles.slots) {
    if (!p.valid) continue;
    os << p.speaker_id;
    for (int i = 0; i < p.vector.size(); ++i) os << " " << p.vector[i];
    os << "\n";
  }
  return os.str();
}

ProfileSet profiles_from_text(const std::string& text, int s_max) {
  ProfileSet set(s_max);
  std::istringstream is(text);
  std::string line;
  int slot = 0;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    if (slot >= s_max) throw ParseError("profiles: more rows than s_max");
    std::istringstream ls(line);
    SpeakerProfile p;
    if (!(ls >> p.speaker_id))
      throw ParseError("profiles line " + std::to_string(line_no));
    std::vector<double> vals;
    double v;
    while (ls >> v) vals.push_back(v);
    if (vals.empty())
      throw ParseError("profiles line " + std::to_string(line_no) +
                       ": no values");
    p.vector = Eigen::Map<Vec>(vals.data(), static_cast<int>(vals.size()));
    p.valid = true;
    set.slots[slot++] = std::move(p);
  }
  return set;
}

int SoapConfig::num_classes() const {
  return build_codebook(s_max, k_max).num_classes();
}

void SoapConfig::validate() const {
  if (encoder_channels.empty())
    throw ConfigError("soap: encoder_channels must not be empty");
  for (int c : encoder_channels)
    if (c < 1) throw ConfigError("soap: bad conv channel width");
  if (conv_kernel < 1 || conv_kernel % 2 == 0)
    throw ConfigError("soap: conv_kernel must be odd and >= 1");
  if (sp_window < 1) throw ConfigError("soap: sp_window must be >= 1");
  if (cd_layers < 0) throw ConfigError("soap: cd_layers must be >= 0");
  if (cd_layers > 0 && cd_width() % cd_heads != 0)
    throw ConfigError("soap: scorer width must be divisible by cd_heads");
  if (lstm_hidden < 1 || ci_hidden < 1 || emb_dim < 1 || model_dim < 1)
    throw ConfigError("soap: bad layer widths");
  if (s_max < 1 || k_max < 0 || k_max > s_max)
    throw ConfigError("soap: bad (s_max, k_max)");
  if (lambda < 0.0) throw ConfigError("soap: lambda must be >= 0");
  if (dropout < 0.0 || dropout >= 1.0)
    throw ConfigError("soap: dropout must be in [0, 1)");
  if (min_profile_frames < 1)
    throw ConfigError("soap: min_profile_frames must be >= 1");
}

namespace {

std::vector<nn::Conv1d> build_conv_stack(nn::ParamStore& params,
                                         const std::string& prefix,
                                         const SoapConfig& cfg, Rng& rng) {
  std::vector<nn::Conv1d> convs;
  int in = cfg.feature_dim;
  for (size_t i = 0; i < cfg.encoder_channels.size(); ++i) {
    convs.emplace_back(params, prefix + ".conv" + std::to_string(i), in,
                       cfg.encoder_channels[i], cfg.conv_kernel, rng);
    in = cfg.encoder_channels[i];
  }
  return convs;
}

Tensor run_conv_stack(const std::vector<nn::Conv1d>& convs, Tensor x) {
  for (const auto& conv : convs) x = nn::relu(conv.forward(x));
  return x;
}

}  // namespace

ProfileExtractor::ProfileExtractor(const SoapConfig& cfg, uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  Rng rng(seed);
  convs_ = build_conv_stack(params_, "profiler", cfg_, rng);
  int stats_dim = 2 * cfg_.encoder_channels.back();
  emb_ = nn::Linear(params_, "profiler.emb", stats_dim, cfg_.emb_dim, rng);
}

Tensor ProfileExtractor::embed(const Mat& features,
                               const std::vector<int>& frames) const {
  require(!frames.empty(), "profile embed: no frames selected");
  Tensor x = nn::select_rows(Tensor::leaf(features), frames);
  x = run_conv_stack(convs_, x);
  Tensor pooled = nn::stat_pool_all(x);
  return nn::normalize_rows(emb_.forward(pooled));
}

SpeakerProfile ProfileExtractor::extract_profile(
    const FeatureSequence& features, const std::vector<uint8_t>& mask,
    int min_frames, const std::string& speaker_id) const {
  require(static_cast<int>(mask.size()) == features.num_frames(),
          "extract_profile: mask length mismatch");
  std::vector<int> frames;
  for (int t = 0; t < features.num_frames(); ++t)
    if (mask[t]) frames.push_back(t);
  SpeakerProfile p;
  p.speaker_id = speaker_id;
  p.vector = Vec::Zero(cfg_.emb_dim);
  if (static_cast<int>(frames.size()) < min_frames) {
    p.valid = false;
    return p;
  }
  Tensor e = embed(features.frames, frames);
  p.vector = e.value().row(0).transpose();
  p.valid = true;
  return p;
}

Tensor arcface_loss(const Tensor& embeddings, const Tensor& class_weights,
                    const std::vector<int>& labels, double margin,
                    double scale_factor) {
  int batch = embeddings.rows();
  int n_classes = class_weights.rows();
  require(static_cast<int>(labels.size()) == batch,
          "arcface: one label per embedding");
  require(embeddings.cols() == class_weights.cols(),
          "arcface: dimension mismatch");

  Mat onehot = Mat::Zero(batch, n_classes);
  for (int i = 0; i < batch; ++i) {
    require(labels[i] >= 0 && labels[i] < n_classes,
            "arcface: label out of range");
    onehot(i, labels[i]) = 1.0;
  }
  Tensor y = Tensor::leaf(onehot);

  Tensor e_norm = nn::normalize_rows(embeddings);
  Tensor w_norm = nn::normalize_rows(class_weights);
  Tensor cos = nn::clip(nn::matmul(e_norm, nn::transpose(w_norm)),
                        -1.0 + 1e-7, 1.0 - 1e-7);
  Tensor cos_target = nn::sum_cols(nn::cmul(cos, y));  // batch x 1
  Tensor sin_target =
      nn::sqrt_op(nn::rsub_scalar(1.0, nn::square(cos_target)));
  Tensor cos_margined = nn::sub(nn::scale(cos_target, std::cos(margin)),
                                nn::scale(sin_target, std::sin(margin)));
  Tensor delta = nn::sub(cos_margined, cos_target);
  Tensor adjusted = nn::add(cos, nn::cmul(y, nn::repeat_col(delta, n_classes)));
  Tensor logits = nn::scale(adjusted, scale_factor);
  Tensor log_probs = nn::log_softmax_rows(logits);
  return nn::scale(nn::sum_all(nn::cmul(y, log_probs)), -1.0 / batch);
}

Soap::Soap(const SoapConfig& cfg, uint64_t seed) : cfg_(cfg) {
  cfg_.validate();
  codebook_ = build_codebook(cfg_.s_max, cfg_.k_max);
  Rng rng(seed);
  convs_ = build_conv_stack(params_, "encoder", cfg_, rng);
  int stats_dim = 2 * cfg_.encoder_channels.back();
  emb_ = nn::Linear(params_, "encoder.emb", stats_dim, cfg_.model_dim, rng);

  int ci_in = cfg_.emb_dim + cfg_.model_dim;
  int in = ci_in;
  for (int i = 0; i < 3; ++i) {
    ci_fcs_.emplace_back(params_, "ci.fc" + std::to_string(i), in,
                         cfg_.ci_hidden, rng);
    in = cfg_.ci_hidden;
  }
  ci_out_ = nn::Linear(params_, "ci.out", cfg_.ci_hidden, 1, rng);

  int cd_dim = cfg_.cd_width();
  int ff_dim = cfg_.cd_ff > 0 ? cfg_.cd_ff : 2 * cd_dim;
  for (int l = 0; l < cfg_.cd_layers; ++l) {
    cd_attn_.emplace_back(params_, "cd.block" + std::to_string(l) + ".attn",
                          cd_dim, cfg_.cd_heads, rng);
    cd_ff1_.emplace_back(params_, "cd.block" + std::to_string(l) + ".ff1",
                         cd_dim, ff_dim, rng);
    cd_ff2_.emplace_back(params_, "cd.block" + std::to_string(l) + ".ff2",
                         ff_dim, cd_dim, rng);
  }
  cd_out_ = nn::Linear(params_, "cd.out", cd_dim, 1, rng);

  pse_lstm_ =
      nn::Lstm(params_, "pse.lstm", 2 * cfg_.s_max, cfg_.lstm_hidden, rng);
  pse_out_ = nn::Linear(params_, "pse.out", cfg_.lstm_hidden,
                        codebook_.num_classes(), rng);
}

std::vector<std::string> Soap::encoder_frontend_names() const {
  std::vector<std::string> names;
  for (size_t i = 0; i < convs_.size(); ++i) {
    names.push_back("encoder.conv" + std::to_string(i) + ".weight");
    names.push_back("encoder.conv" + std::to_string(i) + ".bias");
  }
  return names;
}

void Soap::init_encoder_from(const ProfileExtractor& extractor) {
  require(extractor.config().encoder_channels == cfg_.encoder_channels &&
              extractor.config().conv_kernel == cfg_.conv_kernel &&
              extractor.config().feature_dim == cfg_.feature_dim,
          "init_encoder_from: conv frontend shapes do not match");
  for (size_t i = 0; i < convs_.size(); ++i) {
    std::string src = "profiler.conv" + std::to_string(i);
    std::string dst = "encoder.conv" + std::to_string(i);
    params_.get(dst + ".weight").mutable_value() =
        extractor.params().get(src + ".weight").value();
    params_.get(dst + ".bias").mutable_value() =
        extractor.params().get(src + ".bias").value();
  }
}

Tensor Soap::encode_windowed(const Mat& features, bool training,
                             Rng* drop_rng) const {
  require(static_cast<int>(features.cols()) == cfg_.feature_dim,
          "encode_windowed: feature dim mismatch");
  Tensor x = run_conv_stack(convs_, Tensor::leaf(features));
  Tensor stats = nn::windowed_stat_pool(x, cfg_.sp_window);
  Tensor h = emb_.forward(stats);
  if (training && drop_rng)
    h = nn::dropout(h, cfg_.dropout, *drop_rng, true);
  return h;
}

Mat Soap::profile_matrix(const ProfileSet& profiles) const {
  require(profiles.s_max() == cfg_.s_max,
          "profiles: slot count must equal s_max");
  Mat m = Mat::Zero(cfg_.s_max, cfg_.emb_dim);
  for (int s = 0; s < cfg_.s_max; ++s) {
    if (!profiles.slots[s].valid) continue;
    require(profiles.slots[s].vector.size() == cfg_.emb_dim,
            "profiles: embedding dimension mismatch");
    m.row(s) = profiles.slots[s].vector.transpose();
  }
  return m;
}

Tensor Soap::ci_score(const Tensor& encoded,
                      const ProfileSet& profiles) const {
  int t_len = encoded.rows();
  Mat pm = profile_matrix(profiles);
  std::vector<Tensor> cols;
  cols.reserve(cfg_.s_max);
  for (int s = 0; s < cfg_.s_max; ++s) {
    Mat rep = pm.row(s).replicate(t_len, 1);
    Tensor x = nn::concat_cols({Tensor::leaf(rep), encoded});
    for (const auto& fc : ci_fcs_) x = nn::tanh_op(fc.forward(x));
    cols.push_back(nn::sigmoid(ci_out_.forward(x)));
  }
  return nn::concat_cols(cols);
}

Tensor Soap::cd_score(const Tensor& encoded,
                      const ProfileSet& profiles) const {
  int t_len = encoded.rows();
  Mat pm = profile_matrix(profiles);
  std::vector<Tensor> cols;
  cols.reserve(cfg_.s_max);
  for (int s = 0; s < cfg_.s_max; ++s) {
    Mat rep = pm.row(s).replicate(t_len, 1);
    Tensor z = nn::concat_cols({encoded, Tensor::leaf(rep)});
    for (int l = 0; l < cfg_.cd_layers; ++l) {
      Tensor zbar = nn::add(z, cd_attn_[l].forward(z));
      Tensor ff = cd_ff2_[l].forward(nn::relu(cd_ff1_[l].forward(zbar)));
      z = nn::add(zbar, ff);
    }
    cols.push_back(nn::sigmoid(cd_out_.forward(z)));
  }
  return nn::concat_cols(cols);
}

Tensor Soap::pse_head(const Tensor& ci, const Tensor& cd) const {
  require(ci.cols() == cfg_.s_max && cd.cols() == cfg_.s_max,
          "pse_head: scorer outputs must have s_max columns");
  Tensor x = nn::concat_cols({ci, cd});
  Tensor h = pse_lstm_.run(x);
  return nn::softmax_rows(pse_out_.forward(h));
}

Soap::Stage2LossGraph Soap::stage2_loss(const Tensor& pse_posteriors,
                                        const Tensor& ci, const Tensor& cd,
                                        const ActivityMatrix& labels,
                                        const ProfileSet& profiles,
                                        double lambda) const {
  int t_len = ci.rows();
  require(labels.frames == t_len, "stage2_loss: label frame mismatch");
  require(labels.speakers <= cfg_.s_max,
          "stage2_loss: more label speakers than slots");

  // Slot-aligned targets; bits of invalid slots are cleared everywhere.
  Mat targets = Mat::Zero(t_len, cfg_.s_max);
  Mat valid_mask = Mat::Zero(t_len, cfg_.s_max);
  for (int s = 0; s < cfg_.s_max; ++s) {
    if (!profiles.slots[s].valid) continue;
    valid_mask.col(s).setOnes();
    if (s < labels.speakers)
      for (int t = 0; t < t_len; ++t) targets(t, s) = labels.at(t, s);
  }

  Tensor mask = Tensor::leaf(valid_mask);
  Tensor guide_ci = nn::cmul(nn::bce_matrix(ci, targets), mask);
  Tensor guide_cd = nn::cmul(nn::bce_matrix(cd, targets), mask);
  Tensor l_guide = nn::scale(nn::sum_all(nn::add(guide_ci, guide_cd)),
                             1.0 / static_cast<double>(t_len));

  std::vector<int> classes(t_len);
  for (int t = 0; t < t_len; ++t) {
    ActivityVector v(cfg_.s_max, 0);
    for (int s = 0; s < cfg_.s_max; ++s)
      v[s] = targets(t, s) > 0.5 ? 1 : 0;
    v = clamp_activity(v, cfg_.k_max);
    classes[t] = encode_class(v, codebook_);
  }
  Tensor l_ce = nn::ce_mean(pse_posteriors, classes);

  Stage2LossGraph out;
  out.total = nn::add(l_ce, nn::scale(l_guide, lambda));
  out.values.l_ce = l_ce.scalar();
  out.values.l_guide = l_guide.scalar();
  out.values.total = out.total.scalar();
  return out;
}

Soap::Stage2LossGraph Soap::training_loss(const Mat& features,
                                          const ActivityMatrix& labels,
                                          const ProfileSet& profiles,
                                          double lambda, bool use_dropout,
                                          Rng* drop_rng) {
  Tensor h = encode_windowed(features, use_dropout, drop_rng);
  Tensor ci = ci_score(h, profiles);
  Tensor cd = cd_score(h, profiles);
  Tensor pse = pse_head(ci, cd);
  return stage2_loss(pse, ci, cd, labels, profiles, lambda);
}

ActivityMatrix Soap::infer(const Mat& features,
                           const ProfileSet& profiles) const {
  if (profiles.count() == 0)
    throw InvalidInput("soap infer: no valid profiles");
  Tensor h = encode_windowed(features, false, nullptr);
  Tensor ci = ci_score(h, profiles);
  Tensor cd = cd_score(h, profiles);
  Tensor pse = pse_head(ci, cd);
  const Mat& post = pse.value();
  int t_len = static_cast<int>(post.rows());
  ActivityMatrix out(t_len, cfg_.s_max);
  for (int t = 0; t < t_len; ++t) {
    int best = 0;
    double best_p = post(t, 0);
    for (int c = 1; c < post.cols(); ++c) {
      if (post(t, c) > best_p) {
        best_p = post(t, c);
        best = c;
      }
    }
    ActivityVector v = decode_class(best, codebook_);
    for (int s = 0; s < cfg_.s_max; ++s)
      out.set(t, s, profiles.slots[s].valid ? v[s] : 0);
  }
  return out;
}

}  // namespace told
