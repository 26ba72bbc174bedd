#pragma once

// Test-only oracles, independent of the autodiff implementation paths they
// check: central finite differences for gradients, and plain accumulation
// helpers for Monte-Carlo statistics.

#include <functional>
#include <vector>

#include "m2gan/tensor.hpp"

namespace m2gan::testing {

// Central finite differences against reverse-mode gradients.
//
// `f` must rebuild its graph from the *current* values of `inputs` on every
// call (values are perturbed in place). Returns the worst relative error
// |ad - fd| / max(1, |fd|) over all elements of all inputs.
template <typename T>
double max_grad_error(const std::function<TensorT<T>()>& f, std::vector<TensorT<T>> inputs,
                      T h = T(1e-4)) {
  for (auto& in : inputs) {
    in.set_requires_grad(true);
    in.zero_grad();
  }
  auto loss = f();
  loss.backward();
  std::vector<std::vector<T>> autodiff;
  for (auto& in : inputs) {
    autodiff.push_back(in.grad().empty() ? std::vector<T>(in.size(), T(0)) : in.grad());
  }

  double worst = 0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    auto& vals = inputs[k].values();
    for (std::size_t i = 0; i < vals.size(); ++i) {
      T orig = vals[i];
      vals[i] = orig + h;
      double fp = static_cast<double>(f().item());
      vals[i] = orig - h;
      double fm = static_cast<double>(f().item());
      vals[i] = orig;
      double fd = (fp - fm) / (2.0 * static_cast<double>(h));
      double ad = static_cast<double>(autodiff[k][i]);
      double err = std::abs(ad - fd) / std::max(1.0, std::abs(fd));
      worst = std::max(worst, err);
    }
  }
  return worst;
}

template <typename T>
TensorT<T> random_tensor(Shape shape, Rng& rng, T scale = T(1)) {
  auto t = TensorT<T>::zeros(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(-double(scale), double(scale)));
  return t;
}

// values bounded away from 0 (for div/log/sqrt)
template <typename T>
TensorT<T> random_positive_tensor(Shape shape, Rng& rng, double lo = 0.5, double hi = 2.0) {
  auto t = TensorT<T>::zeros(shape);
  for (auto& v : t.values()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

struct RunningStats {
  double sum = 0, sum_sq = 0;
  long n = 0;
  void add(double x) {
    sum += x;
    sum_sq += x * x;
    ++n;
  }
  double mean() const { return sum / static_cast<double>(n); }
  double variance() const {
    double m = mean();
    return sum_sq / static_cast<double>(n) - m * m;
  }
  double stddev() const { return std::sqrt(std::max(0.0, variance())); }
};

}  // namespace m2gan::testing
