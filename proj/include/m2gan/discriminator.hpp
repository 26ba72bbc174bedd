#pragma once

#include <string>
#include <vector>

#include "m2gan/features.hpp"
#include "m2gan/layers.hpp"

namespace m2gan {

// ---------------------------------------------------------------------------
// Multi-modal fusion discriminator: a Transformer encoder-decoder whose
// encoder consumes the conditioning modalities (text tokens, speaker vector)
// and whose decoder scores the candidate features per position through
// diagonal-biased cross-attention. Instantiated twice: acoustic (stride-2
// conv front-end, per-frame scores) and prosodic (per-channel conv
// projections, per-token scores).
// ---------------------------------------------------------------------------

struct DiscriminatorConfig {
  enum class Variant { kAcoustic, kProsodic };

  Variant variant = Variant::kAcoustic;
  int vocab = 32;
  int feature_dim = 20;   // mel bands (acoustic) / prosody embedding dim (prosodic)
  int speaker_dim = 64;
  int conv_layers = 2;
  int kernel = 11;
  int stride = 2;         // 2 acoustic, 1 prosodic
  int enc_layers = 2;
  int dec_layers = 6;     // 0 selects the encoder-only trunk (ablation)
  int hidden = 512;
  int feedforward = 1024;
  int heads = 4;
  double dropout = 0.1;
  double diagonal_bias = 10.0;
  bool condition_text = true;
  bool condition_speaker = true;
  double conv_lrelu_slope = 0.2;

  static DiscriminatorConfig acoustic_defaults(int mel_dim = 20, int vocab = 32,
                                               int speaker_dim = 64) {
    DiscriminatorConfig c;
    c.variant = Variant::kAcoustic;
    c.vocab = vocab;
    c.feature_dim = mel_dim;
    c.speaker_dim = speaker_dim;
    c.stride = 2;
    c.hidden = 512;
    c.feedforward = 1024;
    return c;
  }

  static DiscriminatorConfig prosodic_defaults(int prosody_dim = 16, int vocab = 32,
                                               int speaker_dim = 64) {
    DiscriminatorConfig c;
    c.variant = Variant::kProsodic;
    c.vocab = vocab;
    c.feature_dim = prosody_dim;
    c.speaker_dim = speaker_dim;
    c.stride = 1;
    c.hidden = 256;
    c.feedforward = 512;
    return c;
  }

  bool encoder_only() const { return dec_layers == 0; }

  // number of score positions produced for a feature sequence of length t
  int output_length(int t) const {
    if (variant == Variant::kProsodic) return t;
    int out = t;
    for (int i = 0; i < conv_layers; ++i) out = conv1d_out_len(out, stride);
    return out;
  }
};

template <typename T>
class FusionDiscriminatorT {
 public:
  FusionDiscriminatorT() = default;

  FusionDiscriminatorT(const DiscriminatorConfig& cfg, Rng& rng) : cfg_(cfg) {
    cond_embedding_ = EmbeddingT<T>(cfg.vocab, cfg.hidden, rng);
    speaker_proj_ = LinearT<T>(cfg.speaker_dim, cfg.hidden, rng);
    null_condition_ = TensorT<T>::randn({1, cfg.hidden}, rng, T(0.02)).mark_param();

    TransformerSpec enc{cfg.enc_layers, cfg.hidden, cfg.feedforward, cfg.heads, cfg.dropout};
    encoder_ = TransformerEncoderT<T>(enc, rng);
    if (!cfg.encoder_only()) {
      TransformerSpec dec{cfg.dec_layers, cfg.hidden, cfg.feedforward, cfg.heads, cfg.dropout};
      decoder_ = TransformerDecoderT<T>(dec, rng);
    }

    if (cfg.variant == DiscriminatorConfig::Variant::kAcoustic) {
      int in = cfg.feature_dim;
      for (int i = 0; i < cfg.conv_layers; ++i) {
        feature_convs_.emplace_back(Conv1dSpec{in, cfg.hidden, cfg.kernel, cfg.stride, true},
                                    rng);
        in = cfg.hidden;
      }
    } else {
      // one projection conv per prosodic channel, stride 1
      pitch_conv_ = Conv1dT<T>(Conv1dSpec{1, cfg.hidden, cfg.kernel, cfg.stride, true}, rng);
      energy_conv_ = Conv1dT<T>(Conv1dSpec{1, cfg.hidden, cfg.kernel, cfg.stride, true}, rng);
      duration_conv_ = Conv1dT<T>(Conv1dSpec{1, cfg.hidden, cfg.kernel, cfg.stride, true}, rng);
      embedding_conv_ = Conv1dT<T>(
          Conv1dSpec{cfg.feature_dim, cfg.hidden, cfg.kernel, cfg.stride, true}, rng);
    }
    head_ = LinearT<T>(cfg.hidden, 1, rng);
  }

  const DiscriminatorConfig& config() const { return cfg_; }

  // Conditional memory. With the speaker enabled its projection is prepended
  // as one extra position; with both modalities disabled the memory collapses
  // to a single learned null vector.
  TensorT<T> encode_condition(const TokenSequence& tokens, const TensorT<T>* spk, Rng& rng,
                              bool training) const {
    auto seq = condition_sequence(tokens, spk);
    if (!seq.defined()) return null_condition_;
    return encoder_.forward(seq, rng, training);
  }

  FrameScoresT<T> score_acoustic(const AcousticFeaturesT<T>& features, const TensorT<T>& memory,
                                 Rng& rng, bool training) const {
    require_variant(DiscriminatorConfig::Variant::kAcoustic, "score_acoustic");
    auto x = acoustic_frontend(features);
    AttentionBiasSpec bias{cfg_.diagonal_bias};
    auto d = decoder_.forward(x, memory, &bias, rng, training);
    return reshape(head_.forward(d), {d.extent(0)});
  }

  FrameScoresT<T> score_prosodic(const ProsodicFeaturesT<T>& features, const TensorT<T>& memory,
                                 Rng& rng, bool training) const {
    require_variant(DiscriminatorConfig::Variant::kProsodic, "score_prosodic");
    auto x = prosodic_frontend(features);
    AttentionBiasSpec bias{cfg_.diagonal_bias};
    auto d = decoder_.forward(x, memory, &bias, rng, training);
    return reshape(head_.forward(d), {d.extent(0)});
  }

  // Encoder-only trunk (ablation): conditions and features are concatenated
  // along the sequence axis, and scores are read from the feature positions.
  FrameScoresT<T> score_encoder_only(const TensorT<T>& feature_seq, const TokenSequence& tokens,
                                     const TensorT<T>* spk, Rng& rng, bool training) const {
    auto cond = condition_sequence(tokens, spk);
    int n_cond = 0;
    TensorT<T> seq = feature_seq;
    if (cond.defined()) {
      n_cond = cond.extent(0);
      seq = concat<T>({cond, feature_seq}, 0);
    }
    auto enc = encoder_.forward(seq, rng, training);
    auto feat_part = n_cond > 0 ? slice(enc, 0, n_cond, enc.extent(0)) : enc;
    return reshape(head_.forward(feat_part), {feat_part.extent(0)});
  }

  // Variant-dispatching convenience used by the trainer.
  FrameScoresT<T> score_acoustic_full(const AcousticFeaturesT<T>& features,
                                      const TokenSequence& tokens, const TensorT<T>* spk,
                                      Rng& rng, bool training) const {
    if (cfg_.encoder_only())
      return score_encoder_only(acoustic_frontend(features), tokens, spk, rng, training);
    return score_acoustic(features, encode_condition(tokens, spk, rng, training), rng, training);
  }

  FrameScoresT<T> score_prosodic_full(const ProsodicFeaturesT<T>& features,
                                      const TokenSequence& tokens, const TensorT<T>* spk,
                                      Rng& rng, bool training) const {
    if (cfg_.encoder_only())
      return score_encoder_only(prosodic_frontend(features), tokens, spk, rng, training);
    return score_prosodic(features, encode_condition(tokens, spk, rng, training), rng, training);
  }

  void collect_params(const std::string& prefix, ParamMapT<T>& out) const {
    cond_embedding_.collect(prefix + ".cond_embedding", out);
    speaker_proj_.collect(prefix + ".speaker_proj", out);
    out.add(prefix + ".null_condition", null_condition_);
    encoder_.collect(prefix + ".encoder", out);
    if (!cfg_.encoder_only()) decoder_.collect(prefix + ".decoder", out);
    if (cfg_.variant == DiscriminatorConfig::Variant::kAcoustic) {
      for (std::size_t i = 0; i < feature_convs_.size(); ++i)
        feature_convs_[i].collect(prefix + ".conv" + std::to_string(i), out);
    } else {
      pitch_conv_.collect(prefix + ".pitch_conv", out);
      energy_conv_.collect(prefix + ".energy_conv", out);
      duration_conv_.collect(prefix + ".duration_conv", out);
      embedding_conv_.collect(prefix + ".embedding_conv", out);
    }
    head_.collect(prefix + ".head", out);
  }

 private:
  void require_variant(DiscriminatorConfig::Variant v, const char* who) const {
    if (cfg_.variant != v) throw std::invalid_argument(std::string(who) + ": wrong variant");
    if (cfg_.encoder_only())
      throw std::invalid_argument(std::string(who) + ": encoder-only config has no decoder");
  }

  // nothing enabled -> undefined tensor (caller substitutes the null vector)
  TensorT<T> condition_sequence(const TokenSequence& tokens, const TensorT<T>* spk) const {
    bool use_spk = cfg_.condition_speaker && spk != nullptr;
    if (!cfg_.condition_text && !use_spk) return {};
    std::vector<TensorT<T>> parts;
    if (use_spk) parts.push_back(speaker_proj_.forward(*spk));
    if (cfg_.condition_text) {
      tokens.validate(cfg_.vocab);
      parts.push_back(add(cond_embedding_.forward(tokens.ids),
                          positional_encoding<T>(tokens.length(), cfg_.hidden)));
    }
    return parts.size() == 1 ? parts[0] : concat(parts, 0);
  }

  TensorT<T> acoustic_frontend(const AcousticFeaturesT<T>& features) const {
    if (features.rank() != 2 || features.extent(1) != cfg_.feature_dim) {
      throw std::invalid_argument("discriminator: expected [T x " +
                                  std::to_string(cfg_.feature_dim) + "] features, got " +
                                  shape_str(features.shape()));
    }
    TensorT<T> x = features;
    for (std::size_t i = 0; i < feature_convs_.size(); ++i) {
      if (i > 0) x = leaky_relu(x, static_cast<T>(cfg_.conv_lrelu_slope));
      x = feature_convs_[i].forward(x);
    }
    return add(x, positional_encoding<T>(x.extent(0), cfg_.hidden));
  }

  TensorT<T> prosodic_frontend(const ProsodicFeaturesT<T>& features) const {
    features.validate();
    int n = features.length();
    auto x = pitch_conv_.forward(reshape(features.pitch, {n, 1}));
    x = add(x, energy_conv_.forward(reshape(features.energy, {n, 1})));
    x = add(x, duration_conv_.forward(reshape(features.duration, {n, 1})));
    x = add(x, embedding_conv_.forward(features.embedding));
    return add(x, positional_encoding<T>(n, cfg_.hidden));
  }

  DiscriminatorConfig cfg_;
  EmbeddingT<T> cond_embedding_;
  LinearT<T> speaker_proj_;
  TensorT<T> null_condition_;
  TransformerEncoderT<T> encoder_;
  TransformerDecoderT<T> decoder_;
  std::vector<Conv1dT<T>> feature_convs_;
  Conv1dT<T> pitch_conv_, energy_conv_, duration_conv_, embedding_conv_;
  LinearT<T> head_;
};

using FusionDiscriminator = FusionDiscriminatorT<float>;

}  // namespace m2gan
