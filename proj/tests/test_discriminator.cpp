#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "m2gan/discriminator.hpp"
#include "m2gan/generator.hpp"
#include "m2gan/losses.hpp"
#include "oracles.hpp"

using namespace m2gan;
using m2gan::testing::max_grad_error;
using m2gan::testing::random_tensor;

namespace {

DiscriminatorConfig tiny_acoustic() {
  auto cfg = DiscriminatorConfig::acoustic_defaults(6, 8, 8);
  cfg.hidden = 16;
  cfg.feedforward = 24;
  cfg.enc_layers = 1;
  cfg.dec_layers = 2;
  cfg.heads = 2;
  cfg.kernel = 3;
  cfg.dropout = 0.0;
  return cfg;
}

DiscriminatorConfig tiny_prosodic() {
  auto cfg = DiscriminatorConfig::prosodic_defaults(4, 8, 8);
  cfg.hidden = 16;
  cfg.feedforward = 24;
  cfg.enc_layers = 1;
  cfg.dec_layers = 2;
  cfg.heads = 2;
  cfg.kernel = 3;
  cfg.dropout = 0.0;
  return cfg;
}

ProsodicFeaturesT<float> random_prosody(int n, int d_pros, Rng& rng) {
  ProsodicFeaturesT<float> p;
  p.pitch = random_tensor<float>({n}, rng);
  p.energy = random_tensor<float>({n}, rng);
  p.duration = random_tensor<float>({n}, rng);
  p.embedding = random_tensor<float>({n, d_pros}, rng);
  return p;
}

}  // namespace

TEST_CASE("Table-1 default configurations") {
  auto a = DiscriminatorConfig::acoustic_defaults();
  CHECK(a.conv_layers == 2);
  CHECK(a.kernel == 11);
  CHECK(a.stride == 2);
  CHECK(a.enc_layers == 2);
  CHECK(a.dec_layers == 6);
  CHECK(a.hidden == 512);
  CHECK(a.feedforward == 1024);
  CHECK(a.heads == 4);
  CHECK(a.dropout == doctest::Approx(0.1));
  CHECK(a.diagonal_bias == doctest::Approx(10.0));

  auto p = DiscriminatorConfig::prosodic_defaults();
  CHECK(p.stride == 1);
  CHECK(p.hidden == 256);
  CHECK(p.feedforward == 512);
}

TEST_CASE("acoustic downsample law T_out = ceil(ceil(T/2)/2)") {
  auto cfg = DiscriminatorConfig::acoustic_defaults();
  CHECK(cfg.output_length(100) == 25);
  CHECK(cfg.output_length(9) == 3);
  for (int t = 4; t <= 512; ++t) {
    int expect = ((t + 1) / 2 + 1) / 2;
    CHECK(cfg.output_length(t) == expect);
  }

  Rng rng(1);
  auto tiny = tiny_acoustic();
  FusionDiscriminatorT<float> disc(tiny, rng);
  TokenSequence tokens{{0, 1, 2}};
  auto spk = speaker_embed<float>(0, tiny.speaker_dim);
  Rng fwd(2);
  for (int t : {4, 9, 100}) {
    auto frames = random_tensor<float>({t, tiny.feature_dim}, rng);
    auto scores = disc.score_acoustic_full(frames, tokens, &spk, fwd, false);
    CHECK(scores.shape() == Shape{tiny.output_length(t)});
    for (float s : scores.values()) CHECK(std::isfinite(s));  // raw scores, no activation bound
  }
}

TEST_CASE("prosodic scores are per-token, stride 1") {
  Rng rng(3);
  auto cfg = tiny_prosodic();
  FusionDiscriminatorT<float> disc(cfg, rng);
  TokenSequence tokens{{0, 1, 2, 3}};
  auto spk = speaker_embed<float>(1, cfg.speaker_dim);
  Rng fwd(4);
  auto p = random_prosody(12, cfg.feature_dim, rng);
  auto scores = disc.score_prosodic_full(p, tokens, &spk, fwd, false);
  CHECK(scores.shape() == Shape{12});

  // channel length mismatch is rejected
  auto bad = random_prosody(12, cfg.feature_dim, rng);
  bad.energy = random_tensor<float>({11}, rng);
  CHECK_THROWS_AS(disc.score_prosodic_full(bad, tokens, &spk, fwd, false),
                  std::invalid_argument);
}

TEST_CASE("zeroing one prosodic channel changes the fused input") {
  Rng rng(5);
  auto cfg = tiny_prosodic();
  FusionDiscriminatorT<float> disc(cfg, rng);
  TokenSequence tokens{{0, 1}};
  auto spk = speaker_embed<float>(0, cfg.speaker_dim);
  auto p = random_prosody(6, cfg.feature_dim, rng);
  Rng f1(6), f2(6);
  auto base = disc.score_prosodic_full(p, tokens, &spk, f1, false);
  auto zeroed = p;
  zeroed.duration = Tensor::zeros({6});
  auto other = disc.score_prosodic_full(zeroed, tokens, &spk, f2, false);
  double diff = 0;
  for (std::size_t i = 0; i < base.size(); ++i)
    diff = std::max(diff, std::abs(static_cast<double>(base.values()[i]) - other.values()[i]));
  CHECK(diff > 1e-6);
}

TEST_CASE("per-channel projections have independent parameters") {
  Rng rng(7);
  auto cfg = tiny_prosodic();
  FusionDiscriminatorT<float> disc(cfg, rng);
  ParamMapT<float> params;
  disc.collect_params("disc_prosodic", params);
  int projections = 0;
  for (const auto& [name, p] : params.items) {
    if (name.find("pitch_conv.weight") != std::string::npos ||
        name.find("energy_conv.weight") != std::string::npos ||
        name.find("duration_conv.weight") != std::string::npos ||
        name.find("embedding_conv.weight") != std::string::npos) {
      ++projections;
    }
  }
  CHECK(projections == 4);
  // distinct tensors, not views of one buffer
  const auto* a = params.find("disc_prosodic.pitch_conv.weight");
  const auto* b = params.find("disc_prosodic.energy_conv.weight");
  REQUIRE(a);
  REQUIRE(b);
  CHECK(a->node() != b->node());
}

TEST_CASE("encode_condition: speaker prepends one position; both off gives the null vector") {
  Rng rng(8);
  auto cfg = tiny_acoustic();
  FusionDiscriminatorT<float> disc(cfg, rng);
  TokenSequence tokens;
  for (int i = 0; i < 10; ++i) tokens.ids.push_back(i % cfg.vocab);
  auto spk = speaker_embed<float>(0, cfg.speaker_dim);
  Rng fwd(9);

  auto mem = disc.encode_condition(tokens, &spk, fwd, false);
  CHECK(mem.shape() == Shape{11, cfg.hidden});  // prepend contract

  auto cfg_nospk = cfg;
  cfg_nospk.condition_speaker = false;
  FusionDiscriminatorT<float> disc_nospk(cfg_nospk, rng);
  CHECK(disc_nospk.encode_condition(tokens, &spk, fwd, false).shape() ==
        Shape{10, cfg.hidden});

  auto cfg_none = cfg;
  cfg_none.condition_text = false;
  cfg_none.condition_speaker = false;
  FusionDiscriminatorT<float> disc_none(cfg_none, rng);
  auto null_mem = disc_none.encode_condition(tokens, &spk, fwd, false);
  CHECK(null_mem.shape() == Shape{1, cfg.hidden});
  CHECK(null_mem.requires_grad());  // learned null vector
}

TEST_CASE("conditional sensitivity: changing the speaker changes scores") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(seed * 3 + 11);
    auto cfg = tiny_acoustic();
    FusionDiscriminatorT<float> disc(cfg, rng);
    TokenSequence tokens{{0, 1, 2, 3}};
    auto frames = random_tensor<float>({12, cfg.feature_dim}, rng);
    auto spk_a = speaker_embed<float>(0, cfg.speaker_dim);
    auto spk_b = speaker_embed<float>(1, cfg.speaker_dim);
    Rng f1(7), f2(7);
    auto sa = disc.score_acoustic_full(frames, tokens, &spk_a, f1, false);
    auto sb = disc.score_acoustic_full(frames, tokens, &spk_b, f2, false);
    double diff = 0;
    for (std::size_t i = 0; i < sa.size(); ++i)
      diff = std::max(diff, std::abs(static_cast<double>(sa.values()[i]) - sb.values()[i]));
    CHECK(diff > 1e-6);
  }
}

TEST_CASE("diagonal bias changes cross-attention argmax positions") {
  Rng rng(13);
  TransformerSpec spec;
  spec.hidden = 16;
  spec.heads = 2;
  spec.feedforward = 16;
  MultiHeadAttentionT<float> attn(spec.hidden, spec.heads, 0.0, rng);
  auto q = random_tensor<float>({9, spec.hidden}, rng);
  auto k = random_tensor<float>({5, spec.hidden}, rng);
  AttentionBiasSpec bias{10.0};
  auto w_no = attn.attention_weights(q, k, nullptr);
  auto w_bias = attn.attention_weights(q, k, &bias);
  int moved = 0;
  for (int i = 0; i < 9; ++i) {
    auto argmax = [&](const Tensor& w) {
      int best = 0;
      for (int j = 1; j < 5; ++j)
        if (w.values()[static_cast<std::size_t>(i) * 5 + j] >
            w.values()[static_cast<std::size_t>(i) * 5 + best])
          best = j;
      return best;
    };
    if (argmax(w_no) != argmax(w_bias)) ++moved;
    CHECK(argmax(w_bias) == diagonal_key_index(i, 9, 5));
  }
  CHECK(moved > 0);
}

TEST_CASE("encoder-only trunk: concatenated sequence, scores from feature positions") {
  Rng rng(14);
  auto cfg = tiny_acoustic();
  cfg.enc_layers = 3;
  cfg.dec_layers = 0;  // enc-only
  FusionDiscriminatorT<float> disc(cfg, rng);
  CHECK(cfg.encoder_only());

  TokenSequence tokens{{0, 1, 2}};
  auto spk = speaker_embed<float>(0, cfg.speaker_dim);
  Rng fwd(15);
  auto frames = random_tensor<float>({10, cfg.feature_dim}, rng);
  auto scores = disc.score_acoustic_full(frames, tokens, &spk, fwd, false);
  CHECK(scores.shape() == Shape{cfg.output_length(10)});

  // no decoder (hence no cross-attention) parameters exist
  ParamMapT<float> params;
  disc.collect_params("disc_acoustic", params);
  for (const auto& [name, p] : params.items) {
    CHECK(name.find("cross_attn") == std::string::npos);
    CHECK(name.find(".decoder.") == std::string::npos);
  }

  // the decoder entry points refuse to run
  CHECK_THROWS_AS(disc.score_acoustic(frames, Tensor::zeros({1, cfg.hidden}), fwd, false),
                  std::invalid_argument);
}

TEST_CASE("update separation: generator grads do not reach a frozen discriminator and vice versa") {
  Rng rng(16);
  auto dcfg = tiny_acoustic();
  FusionDiscriminatorT<float> disc(dcfg, rng);
  ParamMapT<float> disc_params;
  disc.collect_params("disc_acoustic", disc_params);

  GeneratorConfig gcfg;
  gcfg.vocab = 8;
  gcfg.hidden = 16;
  gcfg.mel_dim = dcfg.feature_dim;
  gcfg.prosody_dim = 4;
  gcfg.speaker_dim = 8;
  gcfg.feedforward = 24;
  gcfg.predictor_hidden = 8;
  gcfg.prosody_encoder_hidden = 8;
  gcfg.dropout = 0.0;
  GeneratorT<float> gen(gcfg, rng);
  ParamMapT<float> gen_params;
  gen.collect_params("generator", gen_params);

  TokenSequence tokens{{0, 1, 2}};
  auto spk = speaker_embed<float>(0, gcfg.speaker_dim);
  TeacherSignalsT<float> teacher;
  teacher.durations = {2, 2, 2};
  Rng trng(17);
  teacher.pitch = random_tensor<float>({3}, trng);
  teacher.energy = random_tensor<float>({3}, trng);
  teacher.reference_frames = random_tensor<float>({6, gcfg.mel_dim}, trng);

  Rng fwd(18);
  auto out = gen.synthesize(tokens, spk, SynthesisMode::kTeacherForced, &teacher, fwd, true);

  // discriminator step on detached fakes: generator receives zero gradient
  {
    auto s_real = disc.score_acoustic_full(teacher.reference_frames, tokens, &spk, fwd, true);
    auto s_fake = disc.score_acoustic_full(out.frames.detach(), tokens, &spk, fwd, true);
    hinge_discriminator_loss(s_real, s_fake).backward();
    for (const auto& [name, p] : gen_params.items) CHECK_FALSE(p.has_grad());
    bool disc_touched = false;
    for (const auto& [name, p] : disc_params.items) disc_touched = disc_touched || p.has_grad();
    CHECK(disc_touched);
    for (auto& [name, p] : disc_params.items) p.clear_grad();
  }

  // generator step through the frozen discriminator: disc gradient is zero
  {
    ParamFreezeT<float> freeze(disc_params);
    auto s_fake = disc.score_acoustic_full(out.frames, tokens, &spk, fwd, true);
    adv_generator_loss(s_fake).backward();
    for (const auto& [name, p] : disc_params.items) CHECK_FALSE(p.has_grad());
    bool gen_touched = false;
    for (const auto& [name, p] : gen_params.items) gen_touched = gen_touched || p.has_grad();
    CHECK(gen_touched);
  }
}

TEST_CASE("discriminator gradients pass finite differences (double, tiny dims)") {
  DiscriminatorConfig cfg;
  cfg.variant = DiscriminatorConfig::Variant::kAcoustic;
  cfg.vocab = 4;
  cfg.feature_dim = 3;
  cfg.speaker_dim = 4;
  cfg.kernel = 3;
  cfg.stride = 2;
  cfg.enc_layers = 1;
  cfg.dec_layers = 1;
  cfg.hidden = 8;
  cfg.feedforward = 10;
  cfg.heads = 2;
  cfg.dropout = 0.0;
  Rng rng(19);
  FusionDiscriminatorT<double> disc(cfg, rng);
  ParamMapT<double> params;
  disc.collect_params("d", params);

  TokenSequence tokens{{0, 1}};
  auto spk = speaker_embed<double>(0, cfg.speaker_dim);
  auto frames = random_tensor<double>({6, cfg.feature_dim}, rng);

  auto f = [&]() {
    Rng fwd(0);
    return mean(square(disc.score_acoustic_full(frames, tokens, &spk, fwd, false)));
  };
  std::vector<TensorT<double>> inputs{frames};
  for (const auto& [name, p] : params.items) {
    if (name == "d.conv0.weight" || name == "d.cond_embedding.table" ||
        name == "d.decoder.layer0.cross_attn.wk.weight" || name == "d.head.weight" ||
        name == "d.speaker_proj.weight") {
      inputs.push_back(p);
    }
  }
  REQUIRE(inputs.size() == 6);
  CHECK(max_grad_error<double>(f, inputs, 1e-4) < 1e-4);

  // prosodic variant
  DiscriminatorConfig pcfg = cfg;
  pcfg.variant = DiscriminatorConfig::Variant::kProsodic;
  pcfg.feature_dim = 2;
  pcfg.stride = 1;
  FusionDiscriminatorT<double> pdisc(pcfg, rng);
  ParamMapT<double> pparams;
  pdisc.collect_params("p", pparams);
  ProsodicFeaturesT<double> pros;
  pros.pitch = random_tensor<double>({4}, rng);
  pros.energy = random_tensor<double>({4}, rng);
  pros.duration = random_tensor<double>({4}, rng);
  pros.embedding = random_tensor<double>({4, 2}, rng);
  auto g = [&]() {
    Rng fwd(0);
    return mean(square(pdisc.score_prosodic_full(pros, tokens, &spk, fwd, false)));
  };
  std::vector<TensorT<double>> pinputs{pros.pitch, pros.duration, pros.embedding};
  for (const auto& [name, p] : pparams.items) {
    if (name == "p.pitch_conv.weight" || name == "p.embedding_conv.weight") pinputs.push_back(p);
  }
  REQUIRE(pinputs.size() == 5);
  CHECK(max_grad_error<double>(g, pinputs, 1e-4) < 1e-4);
}
