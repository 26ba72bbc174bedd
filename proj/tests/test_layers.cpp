#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "m2gan/layers.hpp"
#include "oracles.hpp"

using namespace m2gan;
using m2gan::testing::max_grad_error;
using m2gan::testing::random_tensor;

using DTensor = TensorT<double>;

namespace {

TransformerSpec small_spec(int layers = 1, double dropout = 0.0) {
  TransformerSpec s;
  s.layers = layers;
  s.hidden = 8;
  s.feedforward = 12;
  s.heads = 2;
  s.dropout = dropout;
  return s;
}

}  // namespace

TEST_CASE("conv1d length law T' = ceil(T/stride)") {
  CHECK(conv1d_out_len(100, 2) == 50);
  CHECK(conv1d_out_len(7, 2) == 4);
  for (int t = 1; t <= 512; ++t) {
    CHECK(conv1d_out_len(t, 1) == t);
    CHECK(conv1d_out_len(t, 2) == (t + 1) / 2);
  }
  Rng rng(3);
  Conv1dT<float> conv({3, 5, 11, 2, true}, rng);
  for (int t : {1, 2, 7, 100, 511}) {
    auto y = conv.forward(Tensor::zeros({t, 3}));
    CHECK(y.extent(0) == (t + 1) / 2);
    CHECK(y.extent(1) == 5);
  }
}

TEST_CASE("conv1d identity kernel passes input through") {
  Rng rng(4);
  Conv1dT<float> conv({2, 2, 3, 1, true}, rng);
  // center tap = identity, everything else 0
  auto& w = conv.weight().values();
  std::fill(w.begin(), w.end(), 0.0f);
  // weight layout [k*C_in x C_out]; center tap is k/2
  int c_in = 2, c_out = 2, center = 1;
  for (int c = 0; c < c_in; ++c) w[static_cast<std::size_t>(center * c_in + c) * c_out + c] = 1.0f;
  std::fill(conv.bias().values().begin(), conv.bias().values().end(), 0.0f);

  auto x = Tensor::from_data({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8});
  auto y = conv.forward(x);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(y.values()[i] == doctest::Approx(x.values()[i]));
}

TEST_CASE("conv1d spec validation") {
  Rng rng(1);
  CHECK_THROWS_AS(Conv1dT<float>({3, 5, 10, 1, true}, rng), std::invalid_argument);  // even k
  CHECK_THROWS_AS(Conv1dT<float>({3, 5, 11, 3, true}, rng), std::invalid_argument);  // stride 3
  Conv1dT<float> ok({3, 5, 11, 2, true}, rng);
  CHECK_THROWS_AS(ok.forward(Tensor::zeros({4, 7})), std::invalid_argument);  // channel mismatch
}

TEST_CASE("positional encoding values") {
  auto pe = positional_encoding<float>(3, 4);
  // position 0 -> [0,1,0,1,...]
  CHECK(pe.values()[0] == doctest::Approx(0));
  CHECK(pe.values()[1] == doctest::Approx(1));
  CHECK(pe.values()[2] == doctest::Approx(0));
  CHECK(pe.values()[3] == doctest::Approx(1));
  // row 1 col 0 = sin(1)
  CHECK(pe.values()[4] == doctest::Approx(std::sin(1.0)));
  for (float v : pe.values()) {
    CHECK(v <= 1.0f);
    CHECK(v >= -1.0f);
  }
  CHECK_THROWS_AS(positional_encoding<float>(3, 5), std::invalid_argument);  // odd dim
}

TEST_CASE("diagonal bias key mapping") {
  // Tq=4, Tk=2 -> biased key per query row [0,0,1,1]
  CHECK(diagonal_key_index(0, 4, 2) == 0);
  CHECK(diagonal_key_index(1, 4, 2) == 0);
  CHECK(diagonal_key_index(2, 4, 2) == 1);
  CHECK(diagonal_key_index(3, 4, 2) == 1);
  // asymmetric both ways
  for (int i = 0; i < 5; ++i) CHECK(diagonal_key_index(i, 5, 13) == i * 13 / 5);
  for (int i = 0; i < 13; ++i) CHECK(diagonal_key_index(i, 13, 5) == i * 5 / 13);
}

TEST_CASE("attention weights are row-stochastic") {
  Rng rng(11);
  MultiHeadAttentionT<float> attn(8, 2, 0.0, rng);
  for (auto [tq, tk] : {std::pair{4, 4}, {1, 7}, {9, 3}}) {
    auto q = random_tensor<float>({tq, 8}, rng);
    auto k = random_tensor<float>({tk, 8}, rng);
    auto w = attn.attention_weights(q, k, nullptr);
    for (int i = 0; i < tq; ++i) {
      double row = 0;
      for (int j = 0; j < tk; ++j) row += w.values()[static_cast<std::size_t>(i) * tk + j];
      CHECK(row == doctest::Approx(1.0).epsilon(1e-5));
    }
  }
}

TEST_CASE("diagonal bias 10.0 dominates bounded energies") {
  // with |energies| <= 3, the biased key must win the row
  Rng rng(12);
  for (uint64_t seed = 0; seed < 50; ++seed) {
    int tq = rng.uniform_int(2, 12), tk = rng.uniform_int(2, 12);
    auto energies = random_tensor<float>({tq, tk}, rng, 3.0f);
    auto biased = add(energies, diagonal_bias_matrix<float>(tq, tk, 10.0f));
    auto w = softmax(biased, 1);
    for (int i = 0; i < tq; ++i) {
      int expect = diagonal_key_index(i, tq, tk);
      int argmax = 0;
      for (int j = 1; j < tk; ++j)
        if (w.values()[static_cast<std::size_t>(i) * tk + j] >
            w.values()[static_cast<std::size_t>(i) * tk + argmax])
          argmax = j;
      CHECK(argmax == expect);
    }
  }
}

TEST_CASE("uniform q,k with no bias gives uniform attention") {
  Rng rng(13);
  MultiHeadAttentionT<float> attn(8, 2, 0.0, rng);
  auto q = Tensor::filled({3, 8}, 0.5f);
  auto k = Tensor::filled({5, 8}, 0.5f);
  auto w = attn.attention_weights(q, k, nullptr);
  for (float v : w.values()) CHECK(v == doctest::Approx(0.2).epsilon(1e-5));
}

TEST_CASE("single-head identity-ish attention returns v row") {
  Rng rng(14);
  MultiHeadAttentionT<float> attn(4, 1, 0.0, rng);
  auto q = random_tensor<float>({1, 4}, rng);
  auto k = q;
  auto v = random_tensor<float>({1, 4}, rng);
  // one key: attention weight is 1 regardless of energies, so out = Wo(Wv v)
  auto w = attn.attention_weights(q, k, nullptr);
  CHECK(w.values()[0] == doctest::Approx(1.0));
}

TEST_CASE("encoder/decoder shape preservation and eval==train at dropout 0") {
  Rng rng(15);
  auto spec = small_spec(2, 0.0);
  TransformerEncoderT<float> enc(spec, rng);
  TransformerDecoderT<float> dec(spec, rng);
  for (int t : {1, 5, 64}) {
    auto x = random_tensor<float>({t, 8}, rng);
    Rng r1(1), r2(1);
    auto tr = enc.forward(x, r1, true);
    auto ev = enc.forward(x, r2, false);
    CHECK(tr.shape() == Shape{t, 8});
    for (std::size_t i = 0; i < tr.size(); ++i)
      CHECK(tr.values()[i] == doctest::Approx(ev.values()[i]));

    auto mem = random_tensor<float>({7, 8}, rng);
    AttentionBiasSpec bias;
    auto d = dec.forward(x, mem, &bias, r1, false);
    CHECK(d.shape() == Shape{t, 8});
  }
}

TEST_CASE("residual identity: zeroed feedforward and attention output") {
  Rng rng(16);
  auto spec = small_spec(1, 0.0);
  TransformerEncoderLayerT<float> layer(spec, rng);
  ParamMapT<float> params;
  layer.collect("layer", params);
  // zero every projection weight/bias: both residual branches vanish
  for (auto& [name, p] : params.items) {
    if (name.find(".wq") != std::string::npos || name.find(".wk") != std::string::npos ||
        name.find(".wv") != std::string::npos || name.find(".wo") != std::string::npos ||
        name.find(".ff") != std::string::npos) {
      std::fill(p.values().begin(), p.values().end(), 0.0f);
    }
  }
  auto x = random_tensor<float>({5, 8}, rng);
  Rng r(1);
  auto y = layer.forward(x, r, false);
  for (std::size_t i = 0; i < x.size(); ++i)
    CHECK(y.values()[i] == doctest::Approx(x.values()[i]).epsilon(1e-5));
}

TEST_CASE("layer parameter gradients pass finite differences") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed * 7 + 2);

    // linear
    {
      LinearT<double> lin(3, 4, rng);
      auto x = random_tensor<double>({5, 3}, rng);
      ParamMapT<double> params;
      lin.collect("lin", params);
      std::vector<DTensor> inputs{x};
      for (auto& [n, p] : params.items) inputs.push_back(p);
      CHECK(max_grad_error<double>([&]() { return mean(square(lin.forward(x))); }, inputs) <
            1e-4);
    }

    // layer norm
    {
      LayerNormT<double> ln(6);
      auto x = random_tensor<double>({4, 6}, rng);
      ParamMapT<double> params;
      ln.collect("ln", params);
      std::vector<DTensor> inputs{x};
      for (auto& [n, p] : params.items) inputs.push_back(p);
      CHECK(max_grad_error<double>([&]() { return mean(square(ln.forward(x))); }, inputs) < 1e-4);
    }

    // conv1d, both strides
    for (int stride : {1, 2}) {
      Conv1dT<double> conv({3, 4, 3, stride, true}, rng);
      auto x = random_tensor<double>({7, 3}, rng);
      ParamMapT<double> params;
      conv.collect("conv", params);
      std::vector<DTensor> inputs{x};
      for (auto& [n, p] : params.items) inputs.push_back(p);
      CHECK(max_grad_error<double>([&]() { return mean(square(conv.forward(x))); }, inputs) <
            1e-4);
    }

    // attention with and without the diagonal bias
    {
      MultiHeadAttentionT<double> attn(6, 2, 0.0, rng);
      auto q = random_tensor<double>({4, 6}, rng);
      auto k = random_tensor<double>({3, 6}, rng);
      auto v = random_tensor<double>({3, 6}, rng);
      ParamMapT<double> params;
      attn.collect("attn", params);
      std::vector<DTensor> inputs{q, k, v};
      for (auto& [n, p] : params.items) inputs.push_back(p);
      Rng unused(0);
      CHECK(max_grad_error<double>(
                [&]() { return mean(square(attn.forward(q, k, v, nullptr, unused, false))); },
                inputs) < 1e-4);
      AttentionBiasSpec bias;
      CHECK(max_grad_error<double>(
                [&]() { return mean(square(attn.forward(q, k, v, &bias, unused, false))); },
                inputs) < 1e-4);
    }
  }

  // full encoder and decoder blocks (heavier; fewer seeds)
  for (uint64_t seed = 0; seed < 3; ++seed) {
    Rng rng(seed + 50);
    TransformerSpec spec;
    spec.layers = 1;
    spec.hidden = 6;
    spec.feedforward = 8;
    spec.heads = 2;
    spec.dropout = 0.0;
    TransformerEncoderT<double> enc(spec, rng);
    TransformerDecoderT<double> dec(spec, rng);
    auto x = random_tensor<double>({3, 6}, rng);
    auto mem = random_tensor<double>({4, 6}, rng);
    ParamMapT<double> eparams, dparams;
    enc.collect("enc", eparams);
    dec.collect("dec", dparams);
    Rng unused(0);

    std::vector<DTensor> einputs{x};
    for (auto& [n, p] : eparams.items) einputs.push_back(p);
    CHECK(max_grad_error<double>(
              [&]() { return mean(square(enc.forward(x, unused, false))); }, einputs) < 1e-4);

    AttentionBiasSpec bias;
    std::vector<DTensor> dinputs{x, mem};
    for (auto& [n, p] : dparams.items) dinputs.push_back(p);
    CHECK(max_grad_error<double>(
              [&]() { return mean(square(dec.forward(x, mem, &bias, unused, false))); },
              dinputs) < 1e-4);
  }

  // embedding table
  for (uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 80);
    EmbeddingT<double> emb(5, 4, rng);
    ParamMapT<double> params;
    emb.collect("emb", params);
    std::vector<int> ids{0, 2, 2, 4};
    CHECK(max_grad_error<double>([&]() { return mean(square(emb.forward(ids))); },
                                 {params.items[0].second}) < 1e-4);
  }
}

TEST_CASE("ParamFreeze blocks gradients while frozen") {
  Rng rng(21);
  LinearT<float> lin(3, 2, rng);
  ParamMapT<float> params;
  lin.collect("lin", params);
  auto x = random_tensor<float>({4, 3}, rng);
  x.set_requires_grad(true);
  {
    ParamFreezeT<float> freeze(params);
    mean(square(lin.forward(x))).backward();
  }
  for (auto& [n, p] : params.items) CHECK_FALSE(p.has_grad());
  CHECK(x.has_grad());  // input still gets a gradient through the frozen layer
  for (auto& [n, p] : params.items) CHECK(p.requires_grad());  // restored
}
