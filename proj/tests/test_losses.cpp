#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "m2gan/losses.hpp"
#include "oracles.hpp"

using namespace m2gan;
using m2gan::testing::random_tensor;

namespace {

ProsodicFeaturesT<float> prosody(std::vector<float> pitch, std::vector<float> energy,
                                 std::vector<float> dur, std::vector<float> emb, int d_pros) {
  ProsodicFeaturesT<float> p;
  int n = static_cast<int>(pitch.size());
  p.pitch = Tensor::from_data({n}, std::move(pitch));
  p.energy = Tensor::from_data({n}, std::move(energy));
  p.duration = Tensor::from_data({n}, std::move(dur));
  p.embedding = Tensor::from_data({n, d_pros}, std::move(emb));
  return p;
}

}  // namespace

TEST_CASE("acoustic generative loss (MAE)") {
  auto a = Tensor::from_data({1, 2}, {0, 2});
  auto b = Tensor::from_data({1, 2}, {1, 1});
  CHECK(gen_acoustic_loss(a, a).item() == doctest::Approx(0));
  CHECK(gen_acoustic_loss(a, b).item() == doctest::Approx(1.0));

  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    auto x = random_tensor<float>({3, 4}, rng);
    auto y = random_tensor<float>({3, 4}, rng);
    CHECK(gen_acoustic_loss(x, y).item() >= 0);
  }
  CHECK_THROWS_AS(gen_acoustic_loss(a, Tensor::zeros({2, 2})), std::invalid_argument);
}

TEST_CASE("prosodic generative loss (per-channel MSE, equal 4-way weight)") {
  auto same = prosody({1, 2}, {3, 4}, {5, 6}, {1, 2, 3, 4}, 2);
  CHECK(gen_prosodic_loss(same, same).item() == doctest::Approx(0));

  // pitch pred [0] vs truth [2], others equal: channel MSE 4, total 1.0
  auto pred = prosody({0}, {1}, {1}, {1, 1}, 2);
  auto truth = prosody({2}, {1}, {1}, {1, 1}, 2);
  CHECK(gen_prosodic_loss(pred, truth).item() == doctest::Approx(1.0));
  // symmetric in (pred, truth)
  CHECK(gen_prosodic_loss(truth, pred).item() == doctest::Approx(1.0));

  auto short_p = prosody({0}, {1}, {1}, {1, 1}, 2);
  auto long_p = prosody({0, 0}, {1, 1}, {1, 1}, {1, 1, 1, 1}, 2);
  CHECK_THROWS_AS(gen_prosodic_loss(short_p, long_p), std::invalid_argument);
}

TEST_CASE("adversarial generator loss: negative mean score") {
  CHECK(adv_generator_loss(Tensor::from_data({2}, {1, 1})).item() == doctest::Approx(-1.0));
  CHECK(adv_generator_loss(Tensor::from_data({1}, {0})).item() == doctest::Approx(0));
  CHECK(adv_generator_loss(Tensor::from_data({2}, {2, -2})).item() == doctest::Approx(0));
}

TEST_CASE("hinge discriminator loss examples") {
  auto h = [](std::vector<float> real, std::vector<float> fake) {
    int nr = static_cast<int>(real.size());
    int nf = static_cast<int>(fake.size());
    return hinge_discriminator_loss(Tensor::from_data({nr}, std::move(real)),
                                    Tensor::from_data({nf}, std::move(fake)))
        .item();
  };
  CHECK(h({2}, {-2}) == doctest::Approx(0));          // both hinges inactive
  CHECK(h({0}, {0}) == doctest::Approx(2.0));         // 1 + 1
  CHECK(h({2, 0.5f}, {-2, 0}) == doctest::Approx(0.75));  // 0.25 + 0.5
}

TEST_CASE("hinge floor: zero iff every real >= 1 and every fake <= -1") {
  Rng rng(2);
  for (int i = 0; i < 200; ++i) {
    int n = rng.uniform_int(1, 6), m = rng.uniform_int(1, 6);
    auto real = random_tensor<float>({n}, rng, 2.0f);
    auto fake = random_tensor<float>({m}, rng, 2.0f);
    float v = hinge_discriminator_loss(real, fake).item();
    CHECK(v >= 0);
    bool satisfied = true;
    for (float r : real.values()) satisfied = satisfied && r >= 1.0f;
    for (float f : fake.values()) satisfied = satisfied && f <= -1.0f;
    if (satisfied) CHECK(v == doctest::Approx(0));
    if (!satisfied) CHECK(v > 0);
  }
}

TEST_CASE("gradient directions of the GAN losses") {
  Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    int n = rng.uniform_int(1, 8);
    auto real = random_tensor<float>({n}, rng, 2.0f);
    auto fake = random_tensor<float>({n}, rng, 2.0f);
    real.set_requires_grad(true);
    fake.set_requires_grad(true);
    hinge_discriminator_loss(real, fake).backward();
    for (float g : real.grad()) CHECK(g <= 0);  // pushes real scores up
    for (float g : fake.grad()) CHECK(g >= 0);  // pushes fake scores down

    auto fake2 = random_tensor<float>({n}, rng, 2.0f);
    fake2.set_requires_grad(true);
    adv_generator_loss(fake2).backward();
    for (float g : fake2.grad()) CHECK(g < 0);  // generator pushes fake scores up
  }
}

TEST_CASE("total losses reproduce the weighted sums") {
  auto s = [](double v) { return Tensor::scalar(static_cast<float>(v)); };
  // l_ga=1.0 l_gp=0.5 l_aa=2.0 l_ap=1.0 lambda=0.1 -> 1.8
  CHECK(total_generator_loss(s(1.0), s(0.5), s(2.0), s(1.0), 0.1f).item() ==
        doctest::Approx(1.8).epsilon(1e-6));
  // lambda 0 -> reconstruction only
  CHECK(total_generator_loss(s(1.0), s(0.5), s(2.0), s(1.0), 0.0f).item() ==
        doctest::Approx(1.5));
  // Eq. 8
  CHECK(total_discriminator_loss(s(0.75), s(2.0)).item() == doctest::Approx(2.75));

  auto nan = Tensor::scalar(std::numeric_limits<float>::quiet_NaN());
  CHECK_THROWS_AS(total_generator_loss(nan, s(0), s(0), s(0), 0.1f), DivergenceError);
  CHECK_THROWS_AS(total_discriminator_loss(nan, s(0)), DivergenceError);
}

TEST_CASE("batch aggregation: per-utterance mean equals concatenated mean at equal lengths") {
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    int b = rng.uniform_int(2, 5), t = rng.uniform_int(2, 6);
    std::vector<Tensor> reals, fakes;
    double per_utt = 0;
    std::vector<float> cat_real, cat_fake;
    for (int i = 0; i < b; ++i) {
      auto r = random_tensor<float>({t}, rng, 2.0f);
      auto f = random_tensor<float>({t}, rng, 2.0f);
      per_utt += hinge_discriminator_loss(r, f).item();
      cat_real.insert(cat_real.end(), r.values().begin(), r.values().end());
      cat_fake.insert(cat_fake.end(), f.values().begin(), f.values().end());
    }
    per_utt /= b;
    double cat = hinge_discriminator_loss(
                     Tensor::from_data({b * t}, std::move(cat_real)),
                     Tensor::from_data({b * t}, std::move(cat_fake)))
                     .item();
    CHECK(per_utt == doctest::Approx(cat).epsilon(1e-5));
  }
}

TEST_CASE("loss gradients pass finite differences") {
  using m2gan::testing::max_grad_error;
  for (uint64_t seed = 0; seed < 30; ++seed) {
    Rng rng(seed + 9);
    int t = rng.uniform_int(2, 6);
    auto pred = m2gan::testing::random_tensor<double>({t, 3}, rng);
    auto truth = m2gan::testing::random_tensor<double>({t, 3}, rng);
    // keep |pred - truth| off the |x| kink where FD straddles the subgradient
    for (std::size_t i = 0; i < pred.size(); ++i)
      if (std::abs(pred.values()[i] - truth.values()[i]) < 5e-3) pred.values()[i] += 0.02;
    CHECK(max_grad_error<double>([&]() { return gen_acoustic_loss(pred, truth); },
                                 {pred, truth}) < 1e-4);

    auto real = m2gan::testing::random_tensor<double>({t}, rng, 2.0);
    auto fake = m2gan::testing::random_tensor<double>({t}, rng, 2.0);
    // nudge scores off the hinge kinks at ±1 where the subgradient convention
    // and FD disagree
    for (auto& v : real.values())
      if (std::abs(v - 1.0) < 5e-3) v += 0.02;
    for (auto& v : fake.values())
      if (std::abs(v + 1.0) < 5e-3) v += 0.02;
    CHECK(max_grad_error<double>(
              [&]() { return hinge_discriminator_loss(real, fake); }, {real, fake}) < 1e-4);
    CHECK(max_grad_error<double>([&]() { return adv_generator_loss(fake); }, {fake}) < 1e-4);

    ProsodicFeaturesT<double> p, q;
    p.pitch = m2gan::testing::random_tensor<double>({t}, rng);
    p.energy = m2gan::testing::random_tensor<double>({t}, rng);
    p.duration = m2gan::testing::random_tensor<double>({t}, rng);
    p.embedding = m2gan::testing::random_tensor<double>({t, 2}, rng);
    q.pitch = m2gan::testing::random_tensor<double>({t}, rng);
    q.energy = m2gan::testing::random_tensor<double>({t}, rng);
    q.duration = m2gan::testing::random_tensor<double>({t}, rng);
    q.embedding = m2gan::testing::random_tensor<double>({t, 2}, rng);
    CHECK(max_grad_error<double>(
              [&]() { return gen_prosodic_loss(p, q); },
              {p.pitch, p.energy, p.duration, p.embedding, q.pitch}) < 1e-4);
  }
}

TEST_CASE("empty scores are rejected") {
  // positive extents are a tensor invariant, so zero-length scores cannot be
  // constructed; the guard is the shape contract itself
  CHECK_THROWS_AS(Tensor::zeros({0}), std::invalid_argument);
}
