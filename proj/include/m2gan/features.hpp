#pragma once

#include <vector>

#include "m2gan/tensor.hpp"

namespace m2gan {

// Phoneme-like token ids, the generator's text input.
struct TokenSequence {
  std::vector<int> ids;

  int length() const { return static_cast<int>(ids.size()); }

  void validate(int vocab) const {
    if (ids.empty()) throw std::invalid_argument("token sequence: empty");
    for (int id : ids) {
      if (id < 0 || id >= vocab)
        throw std::invalid_argument("token sequence: id " + std::to_string(id) +
                                    " outside vocab [0," + std::to_string(vocab) + ")");
    }
  }
};

// Token-level prosodic channels. pitch/energy/duration are [N]; the encoded
// prosodic embedding is [N x D_pros]. On the training path `duration` holds
// raw log-durations (differentiable); on the inference path it holds the
// clamped integer frame counts as values.
template <typename T>
struct ProsodicFeaturesT {
  TensorT<T> pitch;
  TensorT<T> energy;
  TensorT<T> duration;
  TensorT<T> embedding;

  int length() const { return pitch.extent(0); }

  void validate() const {
    int n = pitch.extent(0);
    if (energy.extent(0) != n || duration.extent(0) != n || embedding.extent(0) != n) {
      throw std::invalid_argument(
          "prosodic features: channel lengths differ: pitch=" + shape_str(pitch.shape()) +
          " energy=" + shape_str(energy.shape()) + " duration=" + shape_str(duration.shape()) +
          " embedding=" + shape_str(embedding.shape()));
    }
  }
};

using ProsodicFeatures = ProsodicFeaturesT<float>;

// Frame-level mel-like matrix [T_frames x D_mel].
template <typename T>
using AcousticFeaturesT = TensorT<T>;

// Per-position raw discriminator outputs (no sigmoid; the hinge losses work
// on unbounded scores).
template <typename T>
using FrameScoresT = TensorT<T>;

}  // namespace m2gan
