#pragma once

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "m2gan/tensor.hpp"

namespace m2gan {

// Ordered name -> parameter table. Order is registration order, which fixes
// optimizer traversal, checkpoint layout, and gradient-merge order.
template <typename T>
struct ParamMapT {
  std::vector<std::pair<std::string, TensorT<T>>> items;

  void add(const std::string& name, const TensorT<T>& t) { items.emplace_back(name, t); }

  const TensorT<T>* find(const std::string& name) const {
    for (const auto& [n, t] : items)
      if (n == name) return &t;
    return nullptr;
  }

  std::size_t total_size() const {
    std::size_t n = 0;
    for (const auto& [name, t] : items) n += t.size();
    return n;
  }
};

using ParamMap = ParamMapT<float>;

// Temporarily drops requires_grad on a parameter set. Ops that consume a
// frozen parameter still run, but no gradient is deposited on it — this is
// how the generator step backpropagates *through* the discriminators without
// touching their weights.
template <typename T>
class ParamFreezeT {
 public:
  explicit ParamFreezeT(const ParamMapT<T>& params) {
    for (const auto& [name, t] : params.items) {
      nodes_.push_back(t.node());
      t.node()->requires_grad = false;
    }
  }
  ~ParamFreezeT() {
    for (auto* n : nodes_) n->requires_grad = true;
  }
  ParamFreezeT(const ParamFreezeT&) = delete;
  ParamFreezeT& operator=(const ParamFreezeT&) = delete;

 private:
  std::vector<TensorNodeT<T>*> nodes_;
};

// ---------------------------------------------------------------------------
// basic layers
// ---------------------------------------------------------------------------

template <typename T>
class LinearT {
 public:
  LinearT() = default;
  LinearT(int in_dim, int out_dim, Rng& rng, bool bias = true) {
    weight_ = TensorT<T>::xavier_uniform(in_dim, out_dim, rng).mark_param();
    if (bias) bias_ = TensorT<T>::zeros({out_dim}).mark_param();
  }

  TensorT<T> forward(const TensorT<T>& x) const {
    auto y = matmul(x, weight_);
    if (bias_.defined()) y = add(y, bias_);
    return y;
  }

  void collect(const std::string& prefix, ParamMapT<T>& out) const {
    out.add(prefix + ".weight", weight_);
    if (bias_.defined()) out.add(prefix + ".bias", bias_);
  }

  const TensorT<T>& weight() const { return weight_; }

 private:
  TensorT<T> weight_, bias_;
};

template <typename T>
class EmbeddingT {
 public:
  EmbeddingT() = default;
  EmbeddingT(int vocab, int dim, Rng& rng) {
    table_ = TensorT<T>::randn({vocab, dim}, rng, T(0.02)).mark_param();
  }

  TensorT<T> forward(const std::vector<int>& ids) const { return gather_rows(table_, ids); }

  void collect(const std::string& prefix, ParamMapT<T>& out) const {
    out.add(prefix + ".table", table_);
  }

  const TensorT<T>& table() const { return table_; }

 private:
  TensorT<T> table_;
};

template <typename T>
class LayerNormT {
 public:
  LayerNormT() = default;
  explicit LayerNormT(int dim, T eps = T(1e-5)) : eps_(eps) {
    gamma_ = TensorT<T>::filled({dim}, T(1)).mark_param();
    beta_ = TensorT<T>::zeros({dim}).mark_param();
  }

  // normalizes the last axis of a rank-2 input
  TensorT<T> forward(const TensorT<T>& x) const {
    auto mu = mean_axis(x, 1);
    auto centered = sub(x, mu);
    auto var = mean_axis(square(centered), 1);
    auto norm = div(centered, sqrt(add_const(var, eps_)));
    return add(mul(norm, gamma_), beta_);
  }

  void collect(const std::string& prefix, ParamMapT<T>& out) const {
    out.add(prefix + ".gamma", gamma_);
    out.add(prefix + ".beta", beta_);
  }

 private:
  TensorT<T> gamma_, beta_;
  T eps_ = T(1e-5);
};

// ---------------------------------------------------------------------------
// conv1d, kernel centered with same-style padding: T_out = ceil(T / stride)
// ---------------------------------------------------------------------------

struct Conv1dSpec {
  enum class Pad { kZero, kReplicate };

  int in_channels = 0;
  int out_channels = 0;
  int kernel_size = 11;
  int stride = 1;
  bool bias = true;
  Pad pad_mode = Pad::kZero;

  void validate() const {
    if (kernel_size % 2 == 0) throw std::invalid_argument("conv1d: kernel_size must be odd");
    if (stride != 1 && stride != 2) throw std::invalid_argument("conv1d: stride must be 1 or 2");
    if (in_channels <= 0 || out_channels <= 0)
      throw std::invalid_argument("conv1d: channel counts must be positive");
  }
};

inline int conv1d_out_len(int t, int stride) { return (t + stride - 1) / stride; }

template <typename T>
class Conv1dT {
 public:
  Conv1dT() = default;
  Conv1dT(Conv1dSpec spec, Rng& rng) : spec_(spec) {
    spec_.validate();
    weight_ =
        TensorT<T>::xavier_uniform(spec_.kernel_size * spec_.in_channels, spec_.out_channels, rng)
            .mark_param();
    if (spec_.bias) bias_ = TensorT<T>::zeros({spec_.out_channels}).mark_param();
  }

  // x: [T x C_in] with time on rows
  TensorT<T> forward(const TensorT<T>& x) const {
    if (x.rank() != 2 || x.extent(1) != spec_.in_channels) {
      throw std::invalid_argument("conv1d: expected [T x " + std::to_string(spec_.in_channels) +
                                  "], got " + shape_str(x.shape()));
    }
    auto col = im2col(x);
    auto y = matmul(col, weight_);
    if (bias_.defined()) y = add(y, bias_);
    return y;
  }

  void collect(const std::string& prefix, ParamMapT<T>& out) const {
    out.add(prefix + ".weight", weight_);
    if (bias_.defined()) out.add(prefix + ".bias", bias_);
  }

  const Conv1dSpec& spec() const { return spec_; }
  TensorT<T>& weight() { return weight_; }
  TensorT<T>& bias() { return bias_; }

 private:
  // Unfolds x into [T_out x k*C_in]; gradient folds overlaps back. Replicate
  // padding clamps out-of-range rows to the edges (used where a constant
  // input must stay constant through the conv stack).
  TensorT<T> im2col(const TensorT<T>& x) const {
    int t_in = x.extent(0);
    int c = spec_.in_channels;
    int k = spec_.kernel_size;
    int pad = k / 2;
    int stride = spec_.stride;
    bool replicate = spec_.pad_mode == Conv1dSpec::Pad::kReplicate;
    int t_out = conv1d_out_len(t_in, stride);
    auto node = detail::alloc_node<T>(Shape{t_out, k * c});
    const auto& xv = x.values();
    for (int to = 0; to < t_out; ++to) {
      int base = to * stride - pad;
      for (int j = 0; j < k; ++j) {
        int ti = base + j;
        T* dst = node->data.data() + (static_cast<std::size_t>(to) * k + j) * c;
        if (replicate) ti = std::clamp(ti, 0, t_in - 1);
        if (ti >= 0 && ti < t_in) {
          const T* src = xv.data() + static_cast<std::size_t>(ti) * c;
          std::copy(src, src + c, dst);
        } else {
          std::fill(dst, dst + c, T(0));
        }
      }
    }
    int t_in_cap = t_in;
    return detail::finish_op<T>(
        std::move(node), {&x},
        [t_in_cap, c, k, pad, stride, t_out, replicate](const TensorNodeT<T>& self,
                                                        const std::vector<T>& gout,
                                                        detail::PendingGrads<T>& sink) {
          if (!detail::wants_grad(self, 0)) return;
          std::vector<T> g(static_cast<std::size_t>(t_in_cap) * c, T(0));
          for (int to = 0; to < t_out; ++to) {
            int base = to * stride - pad;
            for (int j = 0; j < k; ++j) {
              int ti = base + j;
              if (replicate) ti = std::clamp(ti, 0, t_in_cap - 1);
              if (ti < 0 || ti >= t_in_cap) continue;
              const T* src = gout.data() + (static_cast<std::size_t>(to) * k + j) * c;
              T* dst = g.data() + static_cast<std::size_t>(ti) * c;
              for (int cc = 0; cc < c; ++cc) dst[cc] += src[cc];
            }
          }
          sink.add(self.parents[0].get(), std::move(g));
        });
  }

  Conv1dSpec spec_;
  TensorT<T> weight_, bias_;
};

// ---------------------------------------------------------------------------
// positional encoding (sinusoidal, sin on even indices / cos on odd)
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> positional_encoding(int length, int dim) {
  if (dim % 2 != 0) throw std::invalid_argument("positional_encoding: dim must be even");
  if (length < 1) throw std::invalid_argument("positional_encoding: length must be positive");
  auto pe = TensorT<T>::zeros({length, dim});
  auto& v = pe.values();
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < dim / 2; ++i) {
      double angle = pos * std::pow(10000.0, -2.0 * i / dim);
      v[static_cast<std::size_t>(pos) * dim + 2 * i] = static_cast<T>(std::sin(angle));
      v[static_cast<std::size_t>(pos) * dim + 2 * i + 1] = static_cast<T>(std::cos(angle));
    }
  }
  return pe;
}

// ---------------------------------------------------------------------------
// attention
// ---------------------------------------------------------------------------

// Fixed additive bias on cross-attention energies. Query i favours key
// j = floor(i * Tk / Tq), a proportional-index diagonal for unequal lengths.
struct AttentionBiasSpec {
  double bias = 10.0;
};

inline int diagonal_key_index(int query_index, int query_len, int key_len) {
  return static_cast<int>((static_cast<long>(query_index) * key_len) / query_len);
}

template <typename T>
TensorT<T> diagonal_bias_matrix(int query_len, int key_len, T bias) {
  auto m = TensorT<T>::zeros({query_len, key_len});
  for (int i = 0; i < query_len; ++i)
    m.values()[static_cast<std::size_t>(i) * key_len + diagonal_key_index(i, query_len, key_len)] =
        bias;
  return m;
}

template <typename T>
class MultiHeadAttentionT {
 public:
  MultiHeadAttentionT() = default;
  MultiHeadAttentionT(int dim, int heads, double dropout, Rng& rng)
      : dim_(dim), heads_(heads), dropout_(dropout) {
    if (dim % heads != 0)
      throw std::invalid_argument("attention: dim " + std::to_string(dim) +
                                  " not divisible by heads " + std::to_string(heads));
    wq_ = LinearT<T>(dim, dim, rng);
    wk_ = LinearT<T>(dim, dim, rng);
    wv_ = LinearT<T>(dim, dim, rng);
    wo_ = LinearT<T>(dim, dim, rng);
  }

  // No causal masking anywhere. `bias`, when set, is added to the energies
  // of every head before softmax.
  TensorT<T> forward(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v,
                     const AttentionBiasSpec* bias, Rng& rng, bool training) const {
    if (q.rank() != 2 || q.extent(1) != dim_ || k.extent(1) != dim_ || v.extent(1) != dim_) {
      throw std::invalid_argument("attention: dim mismatch, q=" + shape_str(q.shape()) +
                                  " k=" + shape_str(k.shape()) + " v=" + shape_str(v.shape()) +
                                  " expected dim " + std::to_string(dim_));
    }
    if (k.extent(0) != v.extent(0)) {
      throw std::invalid_argument("attention: key/value length mismatch " + shape_str(k.shape()) +
                                  " vs " + shape_str(v.shape()));
    }
    int tq = q.extent(0), tk = k.extent(0);
    int dk = dim_ / heads_;
    auto qp = wq_.forward(q);
    auto kp = wk_.forward(k);
    auto vp = wv_.forward(v);
    TensorT<T> bias_mat;
    if (bias) bias_mat = diagonal_bias_matrix<T>(tq, tk, static_cast<T>(bias->bias));

    std::vector<TensorT<T>> head_outs;
    head_outs.reserve(heads_);
    T scale = T(1) / std::sqrt(static_cast<T>(dk));
    for (int h = 0; h < heads_; ++h) {
      auto qh = slice(qp, 1, h * dk, (h + 1) * dk);
      auto kh = slice(kp, 1, h * dk, (h + 1) * dk);
      auto vh = slice(vp, 1, h * dk, (h + 1) * dk);
      auto energy = mul_const(matmul(qh, transpose(kh)), scale);
      if (bias) energy = add(energy, bias_mat);
      auto weights = softmax(energy, 1);
      weights = dropout(weights, dropout_, rng, training);
      head_outs.push_back(matmul(weights, vh));
    }
    auto merged = heads_ == 1 ? head_outs[0] : concat(head_outs, 1);
    return wo_.forward(merged);
  }

  // Post-softmax attention weights of head 0, for alignment diagnostics.
  TensorT<T> attention_weights(const TensorT<T>& q, const TensorT<T>& k,
                               const AttentionBiasSpec* bias) const {
    int tq = q.extent(0), tk = k.extent(0);
    int dk = dim_ / heads_;
    auto qh = slice(wq_.forward(q), 1, 0, dk);
    auto kh = slice(wk_.forward(k), 1, 0, dk);
    auto energy = mul_const(matmul(qh, transpose(kh)), T(1) / std::sqrt(static_cast<T>(dk)));
    if (bias) energy = add(energy, diagonal_bias_matrix<T>(tq, tk, static_cast<T>(bias->bias)));
    return softmax(energy, 1);
  }

  void collect(const std::string& prefix, ParamMapT<T>& out) const {
    wq_.collect(prefix + ".wq", out);
    wk_.collect(prefix + ".wk", out);
    wv_.collect(prefix + ".wv", out);
    wo_.collect(prefix + ".wo", out);
  }

 private:
  int dim_ = 0, heads_ = 1;
  double dropout_ = 0.0;
  LinearT<T> wq_, wk_, wv_, wo_;
};

// ---------------------------------------------------------------------------
// transformer blocks (pre-norm residual)
// ---------------------------------------------------------------------------

struct TransformerSpec {
  int layers = 2;
  int hidden = 128;
  int feedforward = 256;
  int heads = 4;
  double dropout = 0.1;

  void validate() const {
    if (hidden % heads != 0)
      throw std::invalid_argument("transformer: hidden " + std::to_string(hidden) +
                                  " not divisible by heads " + std::to_string(heads));
    if (layers < 0) throw std::invalid_argument("transformer: negative layer count");
  }
};

template <typename T>
class FeedForwardT {
 public:
  FeedForwardT() = default;
  FeedForwardT(int dim, int hidden, double dropout, Rng& rng)
      : dropout_(dropout), lin1_(dim, hidden, rng), lin2_(hidden, dim, rng) {}

  TensorT<T> forward(const TensorT<T>& x, Rng& rng, bool training) const {
    auto h = dropout(relu(lin1_.forward(x)), dropout_, rng, training);
    return lin2_.forward(h);
  }

  void collect(const std::string& prefix, ParamMapT<T>& out) const {
    lin1_.collect(prefix + ".lin1", out);
    lin2_.collect(prefix + ".lin2", out);
  }

 private:
  double dropout_ = 0.0;
  LinearT<T> lin1_, lin2_;
};

template <typename T>
class TransformerEncoderLayerT {
 public:
  TransformerEncoderLayerT() = default;
  TransformerEncoderLayerT(const TransformerSpec& spec, Rng& rng)
      : dropout_(spec.dropout),
        norm1_(spec.hidden),
        norm2_(spec.hidden),
        attn_(spec.hidden, spec.heads, spec.dropout, rng),
        ff_(spec.hidden, spec.feedforward, spec.dropout, rng) {}

  TensorT<T> forward(const TensorT<T>& x, Rng& rng, bool training) const {
    auto n1 = norm1_.forward(x);
    auto h = add(x, dropout(attn_.forward(n1, n1, n1, nullptr, rng, training), dropout_, rng,
                            training));
    auto n2 = norm2_.forward(h);
    return add(h, dropout(ff_.forward(n2, rng, training), dropout_, rng, training));
  }

  void collect(const std::string& prefix, ParamMapT<T>& out) const {
    norm1_.collect(prefix + ".norm1", out);
    attn_.collect(prefix + ".self_attn", out);
    norm2_.collect(prefix + ".norm2", out);
    ff_.collect(prefix + ".ff", out);
  }

 private:
  double dropout_ = 0.0;
  LayerNormT<T> norm1_, norm2_;
  MultiHeadAttentionT<T> attn_;
  FeedForwardT<T> ff_;
};

// Decoder block: unmasked self-attention, then cross-attention over the
// conditional memory (optionally diagonal-biased), then feedforward.
template <typename T>
class TransformerDecoderLayerT {
 public:
  TransformerDecoderLayerT() = default;
  TransformerDecoderLayerT(const TransformerSpec& spec, Rng& rng)
      : dropout_(spec.dropout),
        norm1_(spec.hidden),
        norm2_(spec.hidden),
        norm3_(spec.hidden),
        self_attn_(spec.hidden, spec.heads, spec.dropout, rng),
        cross_attn_(spec.hidden, spec.heads, spec.dropout, rng),
        ff_(spec.hidden, spec.feedforward, spec.dropout, rng) {}

  TensorT<T> forward(const TensorT<T>& x, const TensorT<T>& memory,
                     const AttentionBiasSpec* bias, Rng& rng, bool training) const {
    auto n1 = norm1_.forward(x);
    auto h = add(x, dropout(self_attn_.forward(n1, n1, n1, nullptr, rng, training), dropout_, rng,
                            training));
    auto n2 = norm2_.forward(h);
    h = add(h, dropout(cross_attn_.forward(n2, memory, memory, bias, rng, training), dropout_,
                       rng, training));
    auto n3 = norm3_.forward(h);
    return add(h, dropout(ff_.forward(n3, rng, training), dropout_, rng, training));
  }

  const MultiHeadAttentionT<T>& cross_attention() const { return cross_attn_; }

  void collect(const std::string& prefix, ParamMapT<T>& out) const {
    norm1_.collect(prefix + ".norm1", out);
    self_attn_.collect(prefix + ".self_attn", out);
    norm2_.collect(prefix + ".norm2", out);
    cross_attn_.collect(prefix + ".cross_attn", out);
    norm3_.collect(prefix + ".norm3", out);
    ff_.collect(prefix + ".ff", out);
  }

 private:
  double dropout_ = 0.0;
  LayerNormT<T> norm1_, norm2_, norm3_;
  MultiHeadAttentionT<T> self_attn_, cross_attn_;
  FeedForwardT<T> ff_;
};

template <typename T>
class TransformerEncoderT {
 public:
  TransformerEncoderT() = default;
  TransformerEncoderT(const TransformerSpec& spec, Rng& rng) : norm_(spec.hidden) {
    spec.validate();
    for (int i = 0; i < spec.layers; ++i) layers_.emplace_back(spec, rng);
  }

  TensorT<T> forward(TensorT<T> x, Rng& rng, bool training) const {
    for (const auto& layer : layers_) x = layer.forward(x, rng, training);
    return norm_.forward(x);
  }

  void collect(const std::string& prefix, ParamMapT<T>& out) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i].collect(prefix + ".layer" + std::to_string(i), out);
    norm_.collect(prefix + ".norm", out);
  }

 private:
  std::vector<TransformerEncoderLayerT<T>> layers_;
  LayerNormT<T> norm_;
};

template <typename T>
class TransformerDecoderT {
 public:
  TransformerDecoderT() = default;
  TransformerDecoderT(const TransformerSpec& spec, Rng& rng) : norm_(spec.hidden) {
    spec.validate();
    for (int i = 0; i < spec.layers; ++i) layers_.emplace_back(spec, rng);
  }

  TensorT<T> forward(TensorT<T> x, const TensorT<T>& memory, const AttentionBiasSpec* bias,
                     Rng& rng, bool training) const {
    for (const auto& layer : layers_) x = layer.forward(x, memory, bias, rng, training);
    return norm_.forward(x);
  }

  void collect(const std::string& prefix, ParamMapT<T>& out) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i].collect(prefix + ".layer" + std::to_string(i), out);
    norm_.collect(prefix + ".norm", out);
  }

  const std::vector<TransformerDecoderLayerT<T>>& layers() const { return layers_; }

 private:
  std::vector<TransformerDecoderLayerT<T>> layers_;
  LayerNormT<T> norm_;
};

}  // namespace m2gan
