#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "m2gan/layers.hpp"
#include "m2gan/tensor.hpp"

namespace m2gan {

// Noam-style schedule normalized so lr_peak is attained exactly at
// step == warmup_steps:
//   lr(step) = lr_peak * sqrt(warmup) * min(step^-1/2, step * warmup^-3/2)
// The step counter restarts at 1 at the beginning of every epoch.
inline double lr_at(long step_in_epoch, double lr_peak, long warmup_steps) {
  if (step_in_epoch < 1) {
    throw std::invalid_argument("lr_at: step_in_epoch must be >= 1, got " +
                                std::to_string(step_in_epoch));
  }
  double s = static_cast<double>(step_in_epoch);
  double w = static_cast<double>(warmup_steps);
  return lr_peak * std::sqrt(w) * std::min(1.0 / std::sqrt(s), s * std::pow(w, -1.5));
}

// AdamW with decoupled weight decay: the decay shrink is applied separately
// from the moment-based update, and bias correction follows the usual
// 1/(1-beta^t) form. Moments are kept per parameter in registration order.
template <typename T>
class AdamWT {
 public:
  AdamWT() = default;

  AdamWT(const ParamMapT<T>& params, double beta1 = 0.5, double beta2 = 0.9,
         double weight_decay = 0.01, double eps = 1e-8)
      : params_(params), beta1_(beta1), beta2_(beta2), weight_decay_(weight_decay), eps_(eps) {
    for (const auto& [name, p] : params_.items) {
      m_.push_back(TensorT<T>::zeros(p.shape()));
      v_.push_back(TensorT<T>::zeros(p.shape()));
    }
  }

  long step_count() const { return step_; }
  const ParamMapT<T>& params() const { return params_; }

  void zero_grad() {
    for (auto& [name, p] : params_.items) p.zero_grad();
  }

  // One update over all registered parameters. Missing gradients are treated
  // as zero (decay still applies). Non-finite gradients abort the step.
  void step(double lr) {
    for (const auto& [name, p] : params_.items) {
      for (T g : p.grad()) {
        if (!std::isfinite(static_cast<double>(g))) {
          throw DivergenceError("adamw: non-finite gradient in parameter '" + name + "'");
        }
      }
    }
    ++step_;
    double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
    double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
    for (std::size_t i = 0; i < params_.items.size(); ++i) {
      auto& p = params_.items[i].second;
      auto& theta = p.values();
      auto& m = m_[i].values();
      auto& v = v_[i].values();
      const auto& grad = p.grad();
      bool has_grad = !grad.empty();
      for (std::size_t j = 0; j < theta.size(); ++j) {
        double t = static_cast<double>(theta[j]);
        if (weight_decay_ != 0.0) t -= lr * weight_decay_ * t;
        double g = has_grad ? static_cast<double>(grad[j]) : 0.0;
        double mj = beta1_ * static_cast<double>(m[j]) + (1.0 - beta1_) * g;
        double vj = beta2_ * static_cast<double>(v[j]) + (1.0 - beta2_) * g * g;
        m[j] = static_cast<T>(mj);
        v[j] = static_cast<T>(vj);
        t -= lr * (mj / bc1) / (std::sqrt(vj / bc2) + eps_);
        theta[j] = static_cast<T>(t);
      }
    }
  }

  // Moment buffers and step counter under `prefix`, for checkpoint resume.
  void collect_state(const std::string& prefix, ParamMapT<T>& out) const {
    for (std::size_t i = 0; i < params_.items.size(); ++i) {
      out.add(prefix + ".m." + params_.items[i].first, m_[i]);
      out.add(prefix + ".v." + params_.items[i].first, v_[i]);
    }
    out.add(prefix + ".step",
            TensorT<T>::from_data({1}, {static_cast<T>(step_)}));
  }

  void load_state(const std::string& prefix, const ParamMapT<T>& table) {
    for (std::size_t i = 0; i < params_.items.size(); ++i) {
      const auto* m = table.find(prefix + ".m." + params_.items[i].first);
      const auto* v = table.find(prefix + ".v." + params_.items[i].first);
      if (!m || !v) {
        throw DataError("adamw: checkpoint is missing optimizer state for '" +
                        params_.items[i].first + "'");
      }
      m_[i].values() = m->values();
      v_[i].values() = v->values();
    }
    const auto* s = table.find(prefix + ".step");
    if (!s) throw DataError("adamw: checkpoint is missing the optimizer step counter");
    step_ = static_cast<long>(s->values()[0]);
  }

 private:
  ParamMapT<T> params_;
  std::vector<TensorT<T>> m_, v_;
  double beta1_ = 0.5, beta2_ = 0.9, weight_decay_ = 0.01, eps_ = 1e-8;
  long step_ = 0;
};

using AdamW = AdamWT<float>;

}  // namespace m2gan
