#pragma once

#include <cmath>
#include <string>

#include "m2gan/features.hpp"
#include "m2gan/tensor.hpp"

namespace m2gan {

// ---------------------------------------------------------------------------
// Generative, adversarial, and hinge losses. Per-frame discriminator scores
// are aggregated by mean (not sum) so loss magnitudes are length-invariant.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void check_same_shape(const TensorT<T>& a, const TensorT<T>& b, const char* who) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument(std::string(who) + ": shape mismatch " + shape_str(a.shape()) +
                                " vs " + shape_str(b.shape()));
  }
}

template <typename T>
void check_finite_scalar(const TensorT<T>& t, const char* who) {
  if (!std::isfinite(static_cast<double>(t.item()))) {
    throw DivergenceError(std::string(who) + ": non-finite loss term");
  }
}

}  // namespace detail

// mean absolute error over acoustic frames
template <typename T>
TensorT<T> gen_acoustic_loss(const AcousticFeaturesT<T>& pred, const AcousticFeaturesT<T>& truth) {
  detail::check_same_shape(pred, truth, "gen_acoustic_loss");
  return mean(abs(sub(pred, truth)));
}

// per-channel MSE averaged with equal weight across the four channels
template <typename T>
TensorT<T> gen_prosodic_loss(const ProsodicFeaturesT<T>& pred, const ProsodicFeaturesT<T>& truth) {
  detail::check_same_shape(pred.pitch, truth.pitch, "gen_prosodic_loss(pitch)");
  detail::check_same_shape(pred.energy, truth.energy, "gen_prosodic_loss(energy)");
  detail::check_same_shape(pred.duration, truth.duration, "gen_prosodic_loss(duration)");
  detail::check_same_shape(pred.embedding, truth.embedding, "gen_prosodic_loss(embedding)");
  auto total = add(add(mean(square(sub(pred.pitch, truth.pitch))),
                       mean(square(sub(pred.energy, truth.energy)))),
                   add(mean(square(sub(pred.duration, truth.duration))),
                       mean(square(sub(pred.embedding, truth.embedding)))));
  return mul_const(total, T(0.25));
}

// generator adversarial term: -mean of the per-frame scores on fakes
template <typename T>
TensorT<T> adv_generator_loss(const FrameScoresT<T>& scores_fake) {
  if (scores_fake.size() == 0) throw std::invalid_argument("adv_generator_loss: empty scores");
  return neg(mean(scores_fake));
}

// per-frame conditional hinge:
//   mean(-min(0, s_real - 1)) + mean(-min(0, -s_fake - 1))
template <typename T>
TensorT<T> hinge_discriminator_loss(const FrameScoresT<T>& scores_real,
                                    const FrameScoresT<T>& scores_fake) {
  if (scores_real.size() == 0 || scores_fake.size() == 0) {
    throw std::invalid_argument("hinge_discriminator_loss: empty scores");
  }
  auto real_term = neg(mean(min_const(add_const(scores_real, T(-1)), T(0))));
  auto fake_term = neg(mean(min_const(add_const(neg(scores_fake), T(-1)), T(0))));
  return add(real_term, fake_term);
}

// L_GA = L_Ga + L_Gp + lambda_A * (L_Aa + L_Ap), composed in exactly that
// order. Stage gating passes scalar zeros for disabled adversarial terms.
template <typename T>
TensorT<T> total_generator_loss(const TensorT<T>& l_ga, const TensorT<T>& l_gp,
                                const TensorT<T>& l_aa, const TensorT<T>& l_ap, T lambda_a) {
  detail::check_finite_scalar(l_ga, "total_generator_loss(l_ga)");
  detail::check_finite_scalar(l_gp, "total_generator_loss(l_gp)");
  detail::check_finite_scalar(l_aa, "total_generator_loss(l_aa)");
  detail::check_finite_scalar(l_ap, "total_generator_loss(l_ap)");
  return add(add(l_ga, l_gp), mul_const(add(l_aa, l_ap), lambda_a));
}

template <typename T>
TensorT<T> total_discriminator_loss(const TensorT<T>& l_da, const TensorT<T>& l_dp) {
  detail::check_finite_scalar(l_da, "total_discriminator_loss(l_da)");
  detail::check_finite_scalar(l_dp, "total_discriminator_loss(l_dp)");
  return add(l_da, l_dp);
}

// Scalar snapshot of one optimizer step, logged as CSV. Accumulation happens
// in double even though training tensors are float.
struct LossBundle {
  long step = 0;
  int stage = 1;
  double l_ga = 0, l_gp = 0, l_aa = 0, l_ap = 0, l_da = 0, l_dp = 0;
  double lambda_a = 0.1;
  double lr = 0;

  double generator_total() const { return l_ga + l_gp + lambda_a * (l_aa + l_ap); }
  double discriminator_total() const { return l_da + l_dp; }

  static const char* csv_header() { return "step,stage,l_ga,l_gp,l_aa,l_ap,l_da,l_dp,lr"; }
};

}  // namespace m2gan
