#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "m2gan/features.hpp"
#include "m2gan/layers.hpp"

namespace m2gan {

// ---------------------------------------------------------------------------
// FastSpeech2-lite acoustic model: text encoder -> variance adaptor
// (pitch / energy / duration / prosody-embedding predictors) -> length
// regulator -> self-attention decoder -> mel head, conditioned on a frozen
// speaker embedding. Desk-scale dims, CPU-trainable in minutes.
// ---------------------------------------------------------------------------

struct GeneratorConfig {
  int vocab = 32;
  int hidden = 128;        // D_h
  int mel_dim = 20;        // D_mel
  int prosody_dim = 16;    // D_pros
  int speaker_dim = 64;    // D_spk
  int encoder_layers = 2;
  int decoder_layers = 2;
  int heads = 4;
  int feedforward = 256;
  double dropout = 0.1;
  int predictor_hidden = 128;
  int predictor_kernel = 3;
  int prosody_encoder_hidden = 32;
  int prosody_encoder_kernel = 3;
  bool prosody_encoder_bias = true;
  double lrelu_slope = 0.2;
  int max_inference_duration = 64;  // clamp for runaway duration predictions
};

// Frozen deterministic speaker representation: a seeded-hash unit vector per
// speaker id. Returns [1 x dim]; it is not a parameter and never updates.
template <typename T>
TensorT<T> speaker_embed(int speaker_id, int dim = 64) {
  if (speaker_id < 0) throw std::invalid_argument("speaker_embed: id must be >= 0");
  Rng rng = Rng::substream(0x5eedu, "speaker_embed", {static_cast<uint64_t>(speaker_id)});
  std::vector<T> v(static_cast<std::size_t>(dim));
  double norm2 = 0;
  for (auto& x : v) {
    double s = rng.normal();
    x = static_cast<T>(s);
    norm2 += s * s;
  }
  T inv = static_cast<T>(1.0 / std::sqrt(norm2));
  for (auto& x : v) x *= inv;
  return TensorT<T>::from_data({1, dim}, std::move(v));
}

// Two conv blocks (conv -> leaky-relu -> layernorm -> dropout) and a linear
// output head; the work-horse of the variance adaptor.
template <typename T>
class VariancePredictorT {
 public:
  VariancePredictorT() = default;
  VariancePredictorT(const GeneratorConfig& cfg, int out_dim, Rng& rng)
      : slope_(static_cast<T>(cfg.lrelu_slope)), dropout_(cfg.dropout) {
    Conv1dSpec c1{cfg.hidden, cfg.predictor_hidden, cfg.predictor_kernel, 1, true};
    Conv1dSpec c2{cfg.predictor_hidden, cfg.predictor_hidden, cfg.predictor_kernel, 1, true};
    conv1_ = Conv1dT<T>(c1, rng);
    conv2_ = Conv1dT<T>(c2, rng);
    norm1_ = LayerNormT<T>(cfg.predictor_hidden);
    norm2_ = LayerNormT<T>(cfg.predictor_hidden);
    out_ = LinearT<T>(cfg.predictor_hidden, out_dim, rng);
  }

  TensorT<T> forward(const TensorT<T>& h, Rng& rng, bool training) const {
    auto x = dropout(norm1_.forward(leaky_relu(conv1_.forward(h), slope_)), dropout_, rng,
                     training);
    x = dropout(norm2_.forward(leaky_relu(conv2_.forward(x), slope_)), dropout_, rng, training);
    return out_.forward(x);
  }

  void collect(const std::string& prefix, ParamMapT<T>& out) const {
    conv1_.collect(prefix + ".conv1", out);
    norm1_.collect(prefix + ".norm1", out);
    conv2_.collect(prefix + ".conv2", out);
    norm2_.collect(prefix + ".norm2", out);
    out_.collect(prefix + ".out", out);
  }

 private:
  T slope_ = T(0.2);
  double dropout_ = 0.1;
  Conv1dT<T> conv1_, conv2_;
  LayerNormT<T> norm1_, norm2_;
  LinearT<T> out_;
};

enum class SynthesisMode { kTeacherForced, kInference };

// Ground-truth signals consumed by the teacher-forced path.
template <typename T>
struct TeacherSignalsT {
  std::vector<int> durations;   // oracle frames per token
  TensorT<T> pitch;             // [N]
  TensorT<T> energy;            // [N]
  TensorT<T> reference_frames;  // [T x D_mel], feeds the prosody encoder
};

template <typename T>
struct GeneratorOutputT {
  AcousticFeaturesT<T> frames;          // y_hat_a
  ProsodicFeaturesT<T> predicted;       // y_hat_p (training: raw log-durations)
  TensorT<T> reference_prosody;         // encoded gt embedding [N x D_pros] (teacher mode)
  std::vector<int> frame_durations;     // per-token expansion actually used
};

template <typename T>
class GeneratorT {
 public:
  GeneratorT() = default;

  GeneratorT(const GeneratorConfig& cfg, Rng& rng) : cfg_(cfg) {
    token_embedding_ = EmbeddingT<T>(cfg.vocab, cfg.hidden, rng);
    TransformerSpec enc{cfg.encoder_layers, cfg.hidden, cfg.feedforward, cfg.heads, cfg.dropout};
    TransformerSpec dec{cfg.decoder_layers, cfg.hidden, cfg.feedforward, cfg.heads, cfg.dropout};
    text_encoder_ = TransformerEncoderT<T>(enc, rng);
    acoustic_decoder_ = TransformerEncoderT<T>(dec, rng);
    speaker_proj_enc_ = LinearT<T>(cfg.speaker_dim, cfg.hidden, rng);
    speaker_proj_dec_ = LinearT<T>(cfg.speaker_dim, cfg.hidden, rng);
    pitch_proj_ = LinearT<T>(1, cfg.hidden, rng);
    energy_proj_ = LinearT<T>(1, cfg.hidden, rng);
    prosody_proj_ = LinearT<T>(cfg.prosody_dim, cfg.hidden, rng);
    pitch_head_ = VariancePredictorT<T>(cfg, 1, rng);
    energy_head_ = VariancePredictorT<T>(cfg, 1, rng);
    duration_head_ = VariancePredictorT<T>(cfg, 1, rng);
    prosody_head_ = VariancePredictorT<T>(cfg, cfg.prosody_dim, rng);
    // replicate padding keeps constant references constant through the stack
    Conv1dSpec p1{cfg.mel_dim, cfg.prosody_encoder_hidden, cfg.prosody_encoder_kernel, 1,
                  cfg.prosody_encoder_bias, Conv1dSpec::Pad::kReplicate};
    Conv1dSpec p2{cfg.prosody_encoder_hidden, cfg.prosody_dim, cfg.prosody_encoder_kernel, 1,
                  cfg.prosody_encoder_bias, Conv1dSpec::Pad::kReplicate};
    prosody_conv1_ = Conv1dT<T>(p1, rng);
    prosody_conv2_ = Conv1dT<T>(p2, rng);
    mel_head_ = LinearT<T>(cfg.hidden, cfg.mel_dim, rng);
  }

  const GeneratorConfig& config() const { return cfg_; }

  // Token embedding + positional encoding through the text encoder; the
  // projected speaker embedding is added onto every position of the output.
  TensorT<T> encode_text(const TokenSequence& tokens, const TensorT<T>& spk, Rng& rng,
                         bool training) const {
    tokens.validate(cfg_.vocab);
    auto x = add(token_embedding_.forward(tokens.ids),
                 positional_encoding<T>(tokens.length(), cfg_.hidden));
    auto h = text_encoder_.forward(x, rng, training);
    return add(h, speaker_proj_enc_.forward(spk));
  }

  // Conv stack over reference frames, mean-pooled per token span.
  TensorT<T> encode_prosody(const TensorT<T>& reference_frames,
                            const std::vector<int>& durations) const {
    long total = 0;
    for (int d : durations) total += d;
    if (total != reference_frames.extent(0)) {
      throw std::invalid_argument("encode_prosody: durations sum to " + std::to_string(total) +
                                  " but reference has " +
                                  std::to_string(reference_frames.extent(0)) + " frames");
    }
    auto x = leaky_relu(prosody_conv1_.forward(reference_frames),
                        static_cast<T>(cfg_.lrelu_slope));
    return segment_mean(prosody_conv2_.forward(x), durations);
  }

  // Four heads over the encoded text. Training form: duration channel holds
  // raw log-durations so gradients flow; exponentiation/rounding happens only
  // on the inference path.
  ProsodicFeaturesT<T> predict_variances(const TensorT<T>& h, Rng& rng, bool training) const {
    int n = h.extent(0);
    ProsodicFeaturesT<T> out;
    out.pitch = reshape(pitch_head_.forward(h, rng, training), {n});
    out.energy = reshape(energy_head_.forward(h, rng, training), {n});
    out.duration = reshape(duration_head_.forward(h, rng, training), {n});
    out.embedding = prosody_head_.forward(h, rng, training);
    return out;
  }

  // Converts predicted log-durations to clamped integer frame counts.
  std::vector<int> inference_durations(const TensorT<T>& log_durations) const {
    std::vector<int> out;
    out.reserve(log_durations.size());
    for (T v : log_durations.values()) {
      double frames = std::round(std::exp(static_cast<double>(v)));
      frames = std::max(1.0, std::min(frames, static_cast<double>(cfg_.max_inference_duration)));
      out.push_back(static_cast<int>(frames));
    }
    return out;
  }

  TensorT<T> length_regulate(const TensorT<T>& h, const std::vector<int>& durations) const {
    return repeat_rows(h, durations);
  }

  // Frame-level decode: adds projected pitch/energy/prosody/speaker
  // conditioning, runs the self-attention decoder, projects to mel bands.
  TensorT<T> decode_acoustic(const TensorT<T>& expanded, const TensorT<T>& frame_pitch,
                             const TensorT<T>& frame_energy, const TensorT<T>& frame_prosody,
                             const TensorT<T>& spk, Rng& rng, bool training) const {
    int t = expanded.extent(0);
    if (frame_pitch.extent(0) != t || frame_energy.extent(0) != t ||
        frame_prosody.extent(0) != t) {
      throw std::invalid_argument("decode_acoustic: conditioning length mismatch at T=" +
                                  std::to_string(t));
    }
    auto x = add(expanded, pitch_proj_.forward(frame_pitch));
    x = add(x, energy_proj_.forward(frame_energy));
    x = add(x, prosody_proj_.forward(frame_prosody));
    x = add(x, speaker_proj_dec_.forward(spk));
    x = add(x, positional_encoding<T>(t, cfg_.hidden));
    auto d = acoustic_decoder_.forward(x, rng, training);
    return mel_head_.forward(d);
  }

  // End-to-end synthesis. Teacher-forced mode expands with ground-truth
  // durations and conditions the decoder on ground-truth prosody (predicted
  // variances are still produced, for the prosodic losses); inference mode
  // runs on predictions only and needs no teacher.
  GeneratorOutputT<T> synthesize(const TokenSequence& tokens, const TensorT<T>& spk,
                                 SynthesisMode mode, const TeacherSignalsT<T>* teacher, Rng& rng,
                                 bool training) const {
    auto h = encode_text(tokens, spk, rng, training);
    GeneratorOutputT<T> out;
    out.predicted = predict_variances(h, rng, training);

    int n = tokens.length();
    if (mode == SynthesisMode::kTeacherForced) {
      if (!teacher) throw std::invalid_argument("synthesize: teacher mode without signals");
      out.frame_durations = teacher->durations;
      out.reference_prosody = encode_prosody(teacher->reference_frames, teacher->durations);
      auto expanded = length_regulate(h, out.frame_durations);
      auto fp = repeat_rows(reshape(teacher->pitch, {n, 1}), out.frame_durations);
      auto fe = repeat_rows(reshape(teacher->energy, {n, 1}), out.frame_durations);
      auto fpros = repeat_rows(out.reference_prosody, out.frame_durations);
      out.frames = decode_acoustic(expanded, fp, fe, fpros, spk, rng, training);
    } else {
      out.frame_durations = inference_durations(out.predicted.duration);
      auto expanded = length_regulate(h, out.frame_durations);
      auto fp = repeat_rows(reshape(out.predicted.pitch, {n, 1}), out.frame_durations);
      auto fe = repeat_rows(reshape(out.predicted.energy, {n, 1}), out.frame_durations);
      auto fpros = repeat_rows(out.predicted.embedding, out.frame_durations);
      out.frames = decode_acoustic(expanded, fp, fe, fpros, spk, rng, training);
      // inference form: duration channel carries the realized frame counts
      std::vector<T> dur_vals(out.frame_durations.begin(), out.frame_durations.end());
      out.predicted.duration = TensorT<T>::from_data({n}, std::move(dur_vals));
    }
    return out;
  }

  void collect_params(const std::string& prefix, ParamMapT<T>& out) const {
    token_embedding_.collect(prefix + ".token_embedding", out);
    text_encoder_.collect(prefix + ".text_encoder", out);
    speaker_proj_enc_.collect(prefix + ".speaker_proj_enc", out);
    pitch_head_.collect(prefix + ".pitch_head", out);
    energy_head_.collect(prefix + ".energy_head", out);
    duration_head_.collect(prefix + ".duration_head", out);
    prosody_head_.collect(prefix + ".prosody_head", out);
    prosody_conv1_.collect(prefix + ".prosody_encoder.conv1", out);
    prosody_conv2_.collect(prefix + ".prosody_encoder.conv2", out);
    pitch_proj_.collect(prefix + ".pitch_proj", out);
    energy_proj_.collect(prefix + ".energy_proj", out);
    prosody_proj_.collect(prefix + ".prosody_proj", out);
    speaker_proj_dec_.collect(prefix + ".speaker_proj_dec", out);
    acoustic_decoder_.collect(prefix + ".acoustic_decoder", out);
    mel_head_.collect(prefix + ".mel_head", out);
  }

  const EmbeddingT<T>& token_embedding() const { return token_embedding_; }

 private:
  GeneratorConfig cfg_;
  EmbeddingT<T> token_embedding_;
  TransformerEncoderT<T> text_encoder_;
  TransformerEncoderT<T> acoustic_decoder_;
  LinearT<T> speaker_proj_enc_, speaker_proj_dec_;
  LinearT<T> pitch_proj_, energy_proj_, prosody_proj_;
  VariancePredictorT<T> pitch_head_, energy_head_, duration_head_, prosody_head_;
  Conv1dT<T> prosody_conv1_, prosody_conv2_;
  LinearT<T> mel_head_;
};

using Generator = GeneratorT<float>;

}  // namespace m2gan
