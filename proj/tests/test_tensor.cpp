#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sstream>

#include "m2gan/tensor.hpp"
#include "oracles.hpp"

using namespace m2gan;
using m2gan::testing::max_grad_error;
using m2gan::testing::random_tensor;
using m2gan::testing::random_positive_tensor;

using DTensor = TensorT<double>;

TEST_CASE("elementwise examples") {
  auto mc = min_const(Tensor::from_data({2}, {0.5f, -2.0f}), 0.0f);
  CHECK(mc.values()[0] == doctest::Approx(0.0));
  CHECK(mc.values()[1] == doctest::Approx(-2.0));

  auto s = add(Tensor::from_data({2}, {1, 2}), Tensor::from_data({2}, {3, 4}));
  CHECK(s.values()[0] == doctest::Approx(4));
  CHECK(s.values()[1] == doctest::Approx(6));

  auto a = abs(Tensor::from_data({2}, {-1.5f, 2.0f}));
  CHECK(a.values()[0] == doctest::Approx(1.5));
  CHECK(a.values()[1] == doctest::Approx(2.0));
}

TEST_CASE("shape errors name both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({4, 5});
  CHECK_THROWS_WITH_AS(add(a, b), doctest::Contains("[2x3]"), std::invalid_argument);
  CHECK_THROWS_WITH_AS(matmul(a, b), doctest::Contains("[4x5]"), std::invalid_argument);
}

TEST_CASE("matmul examples") {
  auto eye = Tensor::from_data({2, 2}, {1, 0, 0, 1});
  auto m = Tensor::from_data({2, 2}, {1, 2, 3, 4});
  auto prod = matmul(eye, m);
  for (int i = 0; i < 4; ++i) CHECK(prod.values()[i] == doctest::Approx(m.values()[i]));

  auto row = Tensor::from_data({1, 2}, {1, 0});
  auto col = Tensor::from_data({2, 1}, {2, 3});
  CHECK(matmul(row, col).item() == doctest::Approx(2));

  // gradient of sum(a.b) wrt a at a=[[1,1]], b=[[2],[5]] is [[2,5]]
  auto a = Tensor::from_data({1, 2}, {1, 1}, true);
  auto b = Tensor::from_data({2, 1}, {2, 5});
  sum(matmul(a, b)).backward();
  CHECK(a.grad()[0] == doctest::Approx(2));
  CHECK(a.grad()[1] == doctest::Approx(5));
}

TEST_CASE("reductions") {
  CHECK(mean(Tensor::from_data({3}, {1, 2, 3})).item() == doctest::Approx(2));
  CHECK(stddev(Tensor::from_data({3}, {2, 2, 2})).item() == doctest::Approx(0));
  CHECK(stddev(Tensor::from_data({2}, {0, 2})).item() == doctest::Approx(1));  // population
  CHECK(stddev(Tensor::from_data({2}, {0, 2}), /*population=*/false).item() ==
        doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("softmax examples") {
  auto u = softmax(Tensor::from_data({2}, {0, 0}), 0);
  CHECK(u.values()[0] == doctest::Approx(0.5));
  CHECK(u.values()[1] == doctest::Approx(0.5));

  // max-subtraction keeps huge inputs finite
  auto big = softmax(Tensor::from_data({2}, {1000, 1000}), 0);
  CHECK(big.values()[0] == doctest::Approx(0.5));

  auto p = softmax(Tensor::from_data({2}, {0.0f, std::log(3.0f)}), 0);
  CHECK(p.values()[0] == doctest::Approx(0.25));
  CHECK(p.values()[1] == doctest::Approx(0.75));
}

TEST_CASE("backward basics") {
  auto x = Tensor::from_data({2}, {1, 2}, true);
  sum(square(x)).backward();
  CHECK(x.grad()[0] == doctest::Approx(2));
  CHECK(x.grad()[1] == doctest::Approx(4));

  // mae(x, x): subgradient of |0| defined as 0
  auto y = Tensor::from_data({3}, {1, -2, 3}, true);
  mean(abs(sub(y, y))).backward();
  for (float g : y.grad()) CHECK(g == doctest::Approx(0));

  CHECK_THROWS_AS(square(x).backward(), std::invalid_argument);  // non-scalar loss
}

TEST_CASE("repeated backward accumulates into leaves") {
  auto x = Tensor::from_data({2}, {3, 4}, true);
  auto loss = sum(square(x));
  loss.backward();
  loss.backward();
  CHECK(x.grad()[0] == doctest::Approx(12));  // 2 * (2*3)
  CHECK(x.grad()[1] == doctest::Approx(16));
}

TEST_CASE("broadcasting gradient reduces over broadcast axes") {
  Rng rng(7);
  auto a = DTensor::zeros({4, 3});
  auto b = DTensor::zeros({3});
  for (auto& v : a.values()) v = rng.uniform(-1, 1);
  for (auto& v : b.values()) v = rng.uniform(-1, 1);
  a.set_requires_grad(true);
  b.set_requires_grad(true);
  sum(mul(a, b)).backward();
  // gradient of b equals the column sums of a
  for (int j = 0; j < 3; ++j) {
    double col = 0;
    for (int i = 0; i < 4; ++i) col += a.values()[static_cast<std::size_t>(i) * 3 + j];
    CHECK(b.grad()[static_cast<std::size_t>(j)] == doctest::Approx(col));
  }
}

TEST_CASE("finite-difference check over randomized composite graphs") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed * 31 + 5);
    int r = rng.uniform_int(1, 8), c = rng.uniform_int(1, 8);
    auto x = random_tensor<double>({r, c}, rng);
    auto y = random_tensor<double>({c}, rng);  // broadcast operand
    auto f = [&]() {
      auto z = mul(add(x, y), sub(x, mul_const(y, 0.5)));
      return mean(square(add(relu(z), min_const(z, 0.25))));
    };
    CHECK(max_grad_error<double>(f, {x, y}) < 1e-4);
  }
}

TEST_CASE("finite-difference check per elementwise op") {
  struct Case {
    const char* name;
    std::function<DTensor(const DTensor&)> op;
    bool positive_only;
  };
  std::vector<Case> cases = {
      {"neg", [](const DTensor& t) { return neg(t); }, false},
      {"relu", [](const DTensor& t) { return relu(t); }, false},
      {"leaky_relu", [](const DTensor& t) { return leaky_relu(t, 0.2); }, false},
      {"min_const", [](const DTensor& t) { return min_const(t, 0.1); }, false},
      {"abs", [](const DTensor& t) { return abs(t); }, false},
      {"square", [](const DTensor& t) { return square(t); }, false},
      {"sqrt", [](const DTensor& t) { return sqrt(t); }, true},
      {"exp", [](const DTensor& t) { return exp(t); }, false},
      {"log", [](const DTensor& t) { return log(t); }, true},
      {"add_const", [](const DTensor& t) { return add_const(t, 0.7); }, false},
      {"mul_const", [](const DTensor& t) { return mul_const(t, -1.3); }, false},
  };
  for (const auto& c : cases) {
    for (uint64_t seed = 0; seed < 100; ++seed) {
      Rng rng(seed * 97 + 13);
      int n = rng.uniform_int(1, 8);
      auto x = c.positive_only ? random_positive_tensor<double>({n}, rng)
                               : random_tensor<double>({n}, rng);
      // keep away from the relu/abs/min kinks where the subgradient is
      // conventionally 0 but FD straddles them
      for (auto& v : x.values()) {
        if (std::abs(v) < 2e-3) v = 0.1;
        if (std::abs(v - 0.1) < 2e-3) v += 0.01;
      }
      auto f = [&]() { return sum(c.op(x)); };
      double err = max_grad_error<double>(f, {x});
      INFO(c.name, " seed ", seed);
      CHECK(err < 1e-4);
    }
  }
}

TEST_CASE("finite-difference check for binary, matmul, softmax, reductions, structural") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed * 131 + 1);
    int m = rng.uniform_int(1, 6), k = rng.uniform_int(1, 6), n = rng.uniform_int(1, 6);
    auto a = random_tensor<double>({m, k}, rng);
    auto b = random_tensor<double>({k, n}, rng);
    auto c = random_positive_tensor<double>({m, k}, rng);

    CHECK(max_grad_error<double>([&]() { return mean(square(matmul(a, b))); }, {a, b}) < 1e-4);
    CHECK(max_grad_error<double>([&]() { return mean(div(a, c)); }, {a, c}) < 1e-4);
    CHECK(max_grad_error<double>([&]() { return sum(square(softmax(a, 1))); }, {a}) < 1e-4);
    CHECK(max_grad_error<double>([&]() { return mean(square(log_softmax(a, 0))); }, {a}) < 1e-4);
    CHECK(max_grad_error<double>([&]() { return sum(square(mean_axis(a, 1))); }, {a}) < 1e-4);
    CHECK(max_grad_error<double>([&]() { return sum(square(transpose(a))); }, {a}) < 1e-4);
    CHECK(max_grad_error<double>(
              [&]() { return mean(square(concat<double>({a, a}, 0))); }, {a}) < 1e-4);
    if (k >= 2) {
      CHECK(max_grad_error<double>([&]() { return sum(square(slice(a, 1, 0, k - 1))); }, {a}) <
            1e-4);
      CHECK(max_grad_error<double>([&]() { return stddev(a); }, {a}) < 1e-4);
    }
  }
}

TEST_CASE("finite-difference check for gather/repeat/segment/select") {
  for (uint64_t seed = 0; seed < 100; ++seed) {
    Rng rng(seed * 17 + 3);
    int v = rng.uniform_int(3, 8), d = rng.uniform_int(1, 6);
    auto table = random_tensor<double>({v, d}, rng);
    std::vector<int> ids;
    int n = rng.uniform_int(1, 6);
    for (int i = 0; i < n; ++i) ids.push_back(rng.uniform_int(0, v - 1));
    CHECK(max_grad_error<double>([&]() { return mean(square(gather_rows(table, ids))); },
                                 {table}) < 1e-4);

    std::vector<int> counts;
    int total = 0;
    for (int i = 0; i < n; ++i) {
      counts.push_back(rng.uniform_int(0, 3));
      total += counts.back();
    }
    if (total > 0) {
      auto x = random_tensor<double>({n, d}, rng);
      CHECK(max_grad_error<double>([&]() { return mean(square(repeat_rows(x, counts))); }, {x}) <
            1e-4);
    }

    std::vector<int> spans;
    int rows = 0;
    for (int i = 0; i < n; ++i) {
      spans.push_back(rng.uniform_int(1, 3));
      rows += spans.back();
    }
    auto y = random_tensor<double>({rows, d}, rng);
    CHECK(max_grad_error<double>([&]() { return mean(square(segment_mean(y, spans))); }, {y}) <
          1e-4);

    auto logits = random_tensor<double>({n, v}, rng);
    std::vector<int> targets;
    for (int i = 0; i < n; ++i) targets.push_back(rng.uniform_int(0, v - 1));
    CHECK(max_grad_error<double>(
              [&]() { return neg(mean(select_index(log_softmax(logits, 1), targets))); },
              {logits}) < 1e-4);
  }
}

TEST_CASE("dropout gradient matches its fixed mask") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng outer(seed + 100);
    auto x = random_tensor<double>({4, 4}, outer);
    auto f = [&]() {
      Rng rng(42);  // same mask every call, so FD sees a fixed function
      return mean(square(dropout(x, 0.4, rng, true)));
    };
    CHECK(max_grad_error<double>(f, {x}) < 1e-4);
  }
}

TEST_CASE("detach cuts the graph and NoGrad skips recording") {
  auto x = Tensor::from_data({2}, {1, 2}, true);
  auto d = mul_const(x, 2.0f).detach();
  CHECK_FALSE(d.requires_grad());
  sum(square(d)).backward();  // no-op: nothing requires grad
  CHECK_FALSE(x.has_grad());

  {
    NoGradGuard guard;
    auto y = square(x);
    CHECK_FALSE(y.requires_grad());
  }
  auto z = square(x);
  CHECK(z.requires_grad());
}

TEST_CASE("determinism: identical seeds give bit-identical forwards") {
  auto run = []() {
    Rng rng(99);
    auto a = Tensor::randn({8, 8}, rng);
    auto b = Tensor::randn({8, 8}, rng);
    return matmul(softmax(a, 1), relu(b)).values();
  };
  auto v1 = run();
  auto v2 = run();
  CHECK(std::memcmp(v1.data(), v2.data(), v1.size() * sizeof(float)) == 0);
}

TEST_CASE("serialization round-trip, M2T1 header") {
  Rng rng(5);
  auto t = Tensor::randn({3, 4, 2}, rng);
  std::stringstream ss;
  save_tensor(ss, t);
  std::string raw = ss.str();
  CHECK(raw.substr(0, 4) == "M2T1");
  auto back = load_tensor<float>(ss);
  CHECK(back.shape() == t.shape());
  CHECK(std::memcmp(back.values().data(), t.values().data(), t.size() * sizeof(float)) == 0);

  // truncated payload
  std::stringstream cut(raw.substr(0, raw.size() - 5));
  CHECK_THROWS_AS(load_tensor<float>(cut), DataError);
}

TEST_CASE("grad store reroutes parameter leaves") {
  auto w = Tensor::from_data({2}, {1, 2});
  w.mark_param();
  auto x = Tensor::from_data({2}, {3, 4}, true);
  GradStoreT<float> store;
  sum(mul(w, x)).backward(1.0f, &store);
  CHECK_FALSE(w.has_grad());               // routed to the store
  REQUIRE(store.find(w.node()) != nullptr);
  CHECK((*store.find(w.node()))[0] == doctest::Approx(3));
  CHECK(x.grad()[0] == doctest::Approx(1));  // non-params still populate .grad
}
