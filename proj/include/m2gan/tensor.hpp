#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <istream>
#include <memory>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "m2gan/common.hpp"
#include "m2gan/rng.hpp"

namespace m2gan {

// ---------------------------------------------------------------------------
// Reverse-mode autodiff over dense row-major tensors.
//
// A TensorT is a shared handle on a graph node. Ops record parent links and a
// backward closure; TensorT::backward() materializes the tape by topological
// sort and walks it in reverse. Gradients of leaf tensors accumulate across
// calls; per-pass contributions to interior nodes are kept in a side table so
// repeated backward() calls stay correct.
//
// Training tensors are float; the finite-difference test suites instantiate
// the same templates with double.
// ---------------------------------------------------------------------------

template <typename T>
struct TensorNodeT;

// Side sink for parameter gradients. Worker threads that share parameters
// route leaf gradients here and the trainer merges the stores in a fixed
// order, which keeps multi-threaded runs bit-reproducible.
template <typename T>
class GradStoreT {
 public:
  void add(const TensorNodeT<T>* node, std::vector<T>&& g) {
    auto it = slots_.find(node);
    if (it == slots_.end()) {
      slots_.emplace(node, std::move(g));
    } else {
      auto& dst = it->second;
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    }
  }

  const std::vector<T>* find(const TensorNodeT<T>* node) const {
    auto it = slots_.find(node);
    return it == slots_.end() ? nullptr : &it->second;
  }

  bool empty() const { return slots_.empty(); }
  void clear() { slots_.clear(); }

 private:
  std::unordered_map<const TensorNodeT<T>*, std::vector<T>> slots_;
};

namespace detail {

// Per-pass pending gradients, keyed by node.
template <typename T>
struct PendingGrads {
  std::unordered_map<const TensorNodeT<T>*, std::vector<T>> map;

  void add(const TensorNodeT<T>* node, std::vector<T>&& g) {
    auto it = map.find(node);
    if (it == map.end()) {
      map.emplace(node, std::move(g));
    } else {
      auto& dst = it->second;
      for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i];
    }
  }

  std::vector<T> take(const TensorNodeT<T>* node) {
    auto it = map.find(node);
    std::vector<T> g = std::move(it->second);
    map.erase(it);
    return g;
  }
};

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

// Disables graph recording in the current thread (inference / detached eval).
struct NoGradGuard {
  bool prev;
  NoGradGuard() : prev(detail::grad_mode_flag()) { detail::grad_mode_flag() = false; }
  ~NoGradGuard() { detail::grad_mode_flag() = prev; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

inline bool grad_enabled() { return detail::grad_mode_flag(); }

template <typename T>
struct TensorNodeT {
  using BackwardFn =
      std::function<void(const TensorNodeT<T>&, const std::vector<T>&, detail::PendingGrads<T>&)>;

  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until backward reaches this node
  bool requires_grad = false;
  bool is_param = false;
  std::vector<std::shared_ptr<TensorNodeT<T>>> parents;
  BackwardFn backward;

  std::size_t numel() const { return data.size(); }
};

template <typename T>
class TensorT {
 public:
  using Node = TensorNodeT<T>;
  using value_type = T;

  TensorT() = default;
  explicit TensorT(std::shared_ptr<Node> n) : node_(std::move(n)) {}

  static TensorT zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static TensorT filled(Shape shape, T value, bool requires_grad = false) {
    check_shape_valid(shape, "tensor");
    auto n = std::make_shared<Node>();
    n->data.assign(shape_numel(shape), value);
    n->shape = std::move(shape);
    n->requires_grad = requires_grad && grad_enabled();
    return TensorT(std::move(n));
  }

  static TensorT scalar(T value) { return filled(Shape{}, value); }

  static TensorT from_data(Shape shape, std::vector<T> values, bool requires_grad = false) {
    check_shape_valid(shape, "tensor");
    if (values.size() != shape_numel(shape)) {
      throw std::invalid_argument("tensor: data length " + std::to_string(values.size()) +
                                  " does not match shape " + shape_str(shape));
    }
    auto n = std::make_shared<Node>();
    n->shape = std::move(shape);
    n->data = std::move(values);
    n->requires_grad = requires_grad && grad_enabled();
    return TensorT(std::move(n));
  }

  static TensorT randn(Shape shape, Rng& rng, T stddev = T(1), bool requires_grad = false) {
    auto t = zeros(std::move(shape), requires_grad);
    for (auto& v : t.node_->data) v = static_cast<T>(rng.normal()) * stddev;
    return t;
  }

  // Uniform Xavier/Glorot for a [fan_in x fan_out] projection matrix.
  static TensorT xavier_uniform(int fan_in, int fan_out, Rng& rng) {
    T limit = std::sqrt(T(6) / static_cast<T>(fan_in + fan_out));
    auto t = zeros(Shape{fan_in, fan_out}, true);
    for (auto& v : t.node_->data) v = static_cast<T>(rng.uniform(-double(limit), double(limit)));
    return t;
  }

  bool defined() const { return node_ != nullptr; }
  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  std::size_t size() const { return node_->data.size(); }
  int extent(int axis) const { return node_->shape[static_cast<std::size_t>(axis)]; }

  std::vector<T>& values() { return node_->data; }
  const std::vector<T>& values() const { return node_->data; }

  T item() const {
    if (size() != 1) {
      throw std::invalid_argument("item(): tensor " + shape_str(shape()) + " is not a scalar");
    }
    return node_->data[0];
  }

  bool requires_grad() const { return node_->requires_grad; }
  TensorT& set_requires_grad(bool v) {
    node_->requires_grad = v;
    return *this;
  }

  // Marks this tensor as a trainable leaf (optimizer + GradStore routing).
  TensorT& mark_param() {
    node_->requires_grad = true;
    node_->is_param = true;
    return *this;
  }

  const std::vector<T>& grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }

  void zero_grad() {
    if (!node_->grad.empty()) std::fill(node_->grad.begin(), node_->grad.end(), T(0));
  }

  // drops the grad buffer entirely (has_grad() becomes false)
  void clear_grad() { node_->grad.clear(); }

  // Value copy with no graph history.
  TensorT detach() const {
    auto n = std::make_shared<Node>();
    n->shape = node_->shape;
    n->data = node_->data;
    return TensorT(std::move(n));
  }

  // Reverse pass from a scalar. `seed` scales the whole gradient (used for
  // batch averaging); `store` reroutes parameter-leaf gradients.
  void backward(T seed = T(1), GradStoreT<T>* store = nullptr) const {
    if (size() != 1) {
      throw std::invalid_argument("backward(): loss must be scalar, got " + shape_str(shape()));
    }
    if (!node_->requires_grad) return;

    // Topological order over the requires_grad subgraph.
    std::vector<Node*> order;
    std::unordered_set<Node*> visited;
    std::vector<std::pair<Node*, std::size_t>> stack;
    stack.emplace_back(node_.get(), 0);
    visited.insert(node_.get());
    while (!stack.empty()) {
      auto& [n, idx] = stack.back();
      if (idx < n->parents.size()) {
        Node* p = n->parents[idx].get();
        ++idx;
        if (p->requires_grad && !visited.count(p)) {
          visited.insert(p);
          stack.emplace_back(p, 0);
        }
      } else {
        order.push_back(n);
        stack.pop_back();
      }
    }

    detail::PendingGrads<T> pending;
    pending.add(node_.get(), std::vector<T>{seed});

    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* n = *it;
      auto found = pending.map.find(n);
      if (found == pending.map.end()) continue;  // unreachable via grad path
      std::vector<T> gout = pending.take(n);
      if (n->backward) n->backward(*n, gout, pending);
      if (store && n->is_param) {
        store->add(n, std::move(gout));
      } else {
        if (n->grad.empty()) {
          n->grad = std::move(gout);
        } else {
          for (std::size_t i = 0; i < n->grad.size(); ++i) n->grad[i] += gout[i];
        }
      }
    }
  }

 private:
  std::shared_ptr<Node> node_;
};

using Tensor = TensorT<float>;

// ---------------------------------------------------------------------------
// op plumbing
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
std::shared_ptr<TensorNodeT<T>> alloc_node(Shape shape) {
  auto n = std::make_shared<TensorNodeT<T>>();
  n->data.resize(shape_numel(shape));
  n->shape = std::move(shape);
  return n;
}

// Attaches graph edges if grad mode is on and any parent needs gradients.
template <typename T>
TensorT<T> finish_op(std::shared_ptr<TensorNodeT<T>> node,
                     std::initializer_list<const TensorT<T>*> parents,
                     typename TensorNodeT<T>::BackwardFn fn) {
  bool needs = false;
  if (grad_mode_flag()) {
    for (const auto* p : parents) {
      if (p->requires_grad()) {
        needs = true;
        break;
      }
    }
  }
  if (needs) {
    node->requires_grad = true;
    node->parents.reserve(parents.size());
    for (const auto* p : parents) node->parents.push_back(p->node_ptr());
    node->backward = std::move(fn);
  }
  return TensorT<T>(std::move(node));
}

template <typename T>
bool wants_grad(const TensorNodeT<T>& self, std::size_t parent_idx) {
  return self.parents[parent_idx]->requires_grad;
}

// Trailing-dimension broadcast shape; throws naming both operands.
inline Shape broadcast_shape(const Shape& a, const Shape& b, const char* who) {
  std::size_t ra = a.size(), rb = b.size();
  std::size_t r = std::max(ra, rb);
  Shape out(r);
  for (std::size_t i = 0; i < r; ++i) {
    int da = i < r - ra ? 1 : a[i - (r - ra)];
    int db = i < r - rb ? 1 : b[i - (r - rb)];
    if (da != db && da != 1 && db != 1) {
      throw std::invalid_argument(std::string(who) + ": shapes not broadcast-compatible: " +
                                  shape_str(a) + " vs " + shape_str(b));
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Row-major strides, with 0 on axes the operand broadcasts along.
inline std::vector<std::size_t> broadcast_strides(const Shape& operand, const Shape& out) {
  std::size_t r = out.size(), ro = operand.size();
  std::vector<std::size_t> full(ro);
  std::size_t acc = 1;
  for (std::size_t i = ro; i > 0; --i) {
    full[i - 1] = acc;
    acc *= static_cast<std::size_t>(operand[i - 1]);
  }
  std::vector<std::size_t> strides(r, 0);
  for (std::size_t i = 0; i < ro; ++i) {
    std::size_t oi = i + (r - ro);
    strides[oi] = operand[i] == 1 && out[oi] != 1 ? 0 : full[i];
  }
  return strides;
}

// Sums `g` (shaped like `out`) down to `target` (a broadcast operand shape).
template <typename T>
std::vector<T> reduce_to_shape(const std::vector<T>& g, const Shape& out, const Shape& target) {
  std::vector<T> r(shape_numel(target), T(0));
  auto strides = broadcast_strides(target, out);
  std::size_t rank = out.size();
  std::vector<std::size_t> coord(rank, 0);
  std::size_t toff = 0;
  for (std::size_t lin = 0; lin < g.size(); ++lin) {
    r[toff] += g[lin];
    for (std::size_t ax = rank; ax > 0; --ax) {
      std::size_t a = ax - 1;
      toff += strides[a];
      if (++coord[a] < static_cast<std::size_t>(out[a])) break;
      toff -= strides[a] * coord[a];
      coord[a] = 0;
    }
  }
  return r;
}

template <typename T>
using ConstMat =
    Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;
template <typename T>
using MutMat = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

}  // namespace detail

// ---------------------------------------------------------------------------
// elementwise binary ops (trailing-dimension broadcasting)
// ---------------------------------------------------------------------------

namespace detail {

// fwd: T(a_val, b_val); da/db: local partials as functions of (a_val, b_val).
template <typename T, class F, class DA, class DB>
TensorT<T> broadcast_binary(const char* name, const TensorT<T>& a, const TensorT<T>& b, F fwd,
                            DA da, DB db) {
  Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  auto node = alloc_node<T>(out_shape);
  const auto& av = a.values();
  const auto& bv = b.values();
  auto& ov = node->data;

  if (a.shape() == b.shape()) {  // fast path
    for (std::size_t i = 0; i < ov.size(); ++i) ov[i] = fwd(av[i], bv[i]);
  } else {
    auto sa = broadcast_strides(a.shape(), out_shape);
    auto sb = broadcast_strides(b.shape(), out_shape);
    std::size_t rank = out_shape.size();
    std::vector<std::size_t> coord(rank, 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t lin = 0; lin < ov.size(); ++lin) {
      ov[lin] = fwd(av[ia], bv[ib]);
      for (std::size_t ax = rank; ax > 0; --ax) {
        std::size_t x = ax - 1;
        ia += sa[x];
        ib += sb[x];
        if (++coord[x] < static_cast<std::size_t>(out_shape[x])) break;
        ia -= sa[x] * coord[x];
        ib -= sb[x] * coord[x];
        coord[x] = 0;
      }
    }
  }

  Shape ashape = a.shape(), bshape = b.shape();
  return finish_op<T>(
      std::move(node), {&a, &b},
      [da, db, ashape, bshape, out_shape](const TensorNodeT<T>& self, const std::vector<T>& gout,
                                          detail::PendingGrads<T>& sink) {
        const auto& an = *self.parents[0];
        const auto& bn = *self.parents[1];
        auto sa = broadcast_strides(ashape, out_shape);
        auto sb = broadcast_strides(bshape, out_shape);
        std::size_t rank = out_shape.size();
        bool same = ashape == bshape;
        std::vector<T> ga, gb;
        if (wants_grad(self, 0)) ga.assign(gout.size(), T(0));
        if (wants_grad(self, 1)) gb.assign(gout.size(), T(0));
        std::vector<std::size_t> coord(rank, 0);
        std::size_t ia = 0, ib = 0;
        for (std::size_t lin = 0; lin < gout.size(); ++lin) {
          std::size_t ja = same ? lin : ia;
          std::size_t jb = same ? lin : ib;
          if (!ga.empty()) ga[lin] = da(an.data[ja], bn.data[jb]) * gout[lin];
          if (!gb.empty()) gb[lin] = db(an.data[ja], bn.data[jb]) * gout[lin];
          if (!same) {
            for (std::size_t ax = rank; ax > 0; --ax) {
              std::size_t x = ax - 1;
              ia += sa[x];
              ib += sb[x];
              if (++coord[x] < static_cast<std::size_t>(out_shape[x])) break;
              ia -= sa[x] * coord[x];
              ib -= sb[x] * coord[x];
              coord[x] = 0;
            }
          }
        }
        if (!ga.empty())
          sink.add(self.parents[0].get(), reduce_to_shape(ga, out_shape, ashape));
        if (!gb.empty())
          sink.add(self.parents[1].get(), reduce_to_shape(gb, out_shape, bshape));
      });
}

}  // namespace detail

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::broadcast_binary<T>(
      "add", a, b, [](T x, T y) { return x + y; }, [](T, T) { return T(1); },
      [](T, T) { return T(1); });
}

template <typename T>
TensorT<T> sub(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::broadcast_binary<T>(
      "sub", a, b, [](T x, T y) { return x - y; }, [](T, T) { return T(1); },
      [](T, T) { return T(-1); });
}

template <typename T>
TensorT<T> mul(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::broadcast_binary<T>(
      "mul", a, b, [](T x, T y) { return x * y; }, [](T, T y) { return y; },
      [](T x, T) { return x; });
}

template <typename T>
TensorT<T> div(const TensorT<T>& a, const TensorT<T>& b) {
  return detail::broadcast_binary<T>(
      "div", a, b, [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
      [](T x, T y) { return -x / (y * y); });
}

// ---------------------------------------------------------------------------
// elementwise unary ops
// ---------------------------------------------------------------------------

namespace detail {

template <typename T, class F, class D>
TensorT<T> unary_op(const TensorT<T>& a, F fwd, D dfdx) {
  auto node = alloc_node<T>(a.shape());
  const auto& av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) node->data[i] = fwd(av[i]);
  return finish_op<T>(std::move(node), {&a},
                      [dfdx](const TensorNodeT<T>& self, const std::vector<T>& gout,
                             detail::PendingGrads<T>& sink) {
                        if (!wants_grad(self, 0)) return;
                        const auto& x = self.parents[0]->data;
                        std::vector<T> g(gout.size());
                        for (std::size_t i = 0; i < g.size(); ++i)
                          g[i] = dfdx(x[i], self.data[i]) * gout[i];
                        sink.add(self.parents[0].get(), std::move(g));
                      });
}

}  // namespace detail

template <typename T>
TensorT<T> neg(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return -x; }, [](T, T) { return T(-1); });
}

template <typename T>
TensorT<T> relu(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
TensorT<T> leaky_relu(const TensorT<T>& a, T slope) {
  return detail::unary_op(
      a, [slope](T x) { return x > T(0) ? x : slope * x; },
      [slope](T x, T) { return x > T(0) ? T(1) : slope; });
}

// min(x, c); subgradient at x == c is 0 (matches the |x| convention below).
template <typename T>
TensorT<T> min_const(const TensorT<T>& a, T c) {
  return detail::unary_op(
      a, [c](T x) { return x < c ? x : c; }, [c](T x, T) { return x < c ? T(1) : T(0); });
}

// |x| with subgradient 0 at x == 0.
template <typename T>
TensorT<T> abs(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
TensorT<T> square(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return x * x; }, [](T x, T) { return T(2) * x; });
}

template <typename T>
TensorT<T> sqrt(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return std::sqrt(x); }, [](T, T y) { return T(0.5) / y; });
}

template <typename T>
TensorT<T> exp(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
TensorT<T> log(const TensorT<T>& a) {
  return detail::unary_op(
      a, [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
TensorT<T> add_const(const TensorT<T>& a, T c) {
  return detail::unary_op(
      a, [c](T x) { return x + c; }, [](T, T) { return T(1); });
}

template <typename T>
TensorT<T> mul_const(const TensorT<T>& a, T c) {
  return detail::unary_op(
      a, [c](T x) { return x * c; }, [c](T, T) { return c; });
}

// ---------------------------------------------------------------------------
// matmul / transpose / reshape
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.rank() != 2 || b.rank() != 2) {
    throw std::invalid_argument("matmul: expected rank-2 operands, got " + shape_str(a.shape()) +
                                " and " + shape_str(b.shape()));
  }
  int m = a.extent(0), k = a.extent(1), k2 = b.extent(0), n = b.extent(1);
  if (k != k2) {
    throw std::invalid_argument("matmul: inner extents differ: " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  auto node = detail::alloc_node<T>(Shape{m, n});
  {
    detail::ConstMat<T> A(a.values().data(), m, k);
    detail::ConstMat<T> B(b.values().data(), k, n);
    detail::MutMat<T> C(node->data.data(), m, n);
    C.noalias() = A * B;
  }
  return detail::finish_op<T>(
      std::move(node), {&a, &b},
      [m, k, n](const TensorNodeT<T>& self, const std::vector<T>& gout,
                detail::PendingGrads<T>& sink) {
        detail::ConstMat<T> G(gout.data(), m, n);
        if (detail::wants_grad(self, 0)) {
          std::vector<T> ga(static_cast<std::size_t>(m) * k);
          detail::ConstMat<T> B(self.parents[1]->data.data(), k, n);
          detail::MutMat<T> GA(ga.data(), m, k);
          GA.noalias() = G * B.transpose();
          sink.add(self.parents[0].get(), std::move(ga));
        }
        if (detail::wants_grad(self, 1)) {
          std::vector<T> gb(static_cast<std::size_t>(k) * n);
          detail::ConstMat<T> A(self.parents[0]->data.data(), m, k);
          detail::MutMat<T> GB(gb.data(), k, n);
          GB.noalias() = A.transpose() * G;
          sink.add(self.parents[1].get(), std::move(gb));
        }
      });
}

template <typename T>
TensorT<T> transpose(const TensorT<T>& a) {
  if (a.rank() != 2) {
    throw std::invalid_argument("transpose: expected rank-2, got " + shape_str(a.shape()));
  }
  int r = a.extent(0), c = a.extent(1);
  auto node = detail::alloc_node<T>(Shape{c, r});
  const auto& av = a.values();
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) node->data[static_cast<std::size_t>(j) * r + i] = av[static_cast<std::size_t>(i) * c + j];
  return detail::finish_op<T>(std::move(node), {&a},
                              [r, c](const TensorNodeT<T>& self, const std::vector<T>& gout,
                                     detail::PendingGrads<T>& sink) {
                                if (!detail::wants_grad(self, 0)) return;
                                std::vector<T> g(gout.size());
                                for (int j = 0; j < c; ++j)
                                  for (int i = 0; i < r; ++i)
                                    g[static_cast<std::size_t>(i) * c + j] =
                                        gout[static_cast<std::size_t>(j) * r + i];
                                sink.add(self.parents[0].get(), std::move(g));
                              });
}

template <typename T>
TensorT<T> reshape(const TensorT<T>& a, Shape shape) {
  check_shape_valid(shape, "reshape");
  if (shape_numel(shape) != a.size()) {
    throw std::invalid_argument("reshape: cannot view " + shape_str(a.shape()) + " as " +
                                shape_str(shape));
  }
  auto node = detail::alloc_node<T>(shape);
  node->data = a.values();
  return detail::finish_op<T>(std::move(node), {&a},
                              [](const TensorNodeT<T>& self, const std::vector<T>& gout,
                                 detail::PendingGrads<T>& sink) {
                                if (!detail::wants_grad(self, 0)) return;
                                sink.add(self.parents[0].get(), std::vector<T>(gout));
                              });
}

// ---------------------------------------------------------------------------
// reductions
// ---------------------------------------------------------------------------

namespace detail {

// outer/len/inner decomposition of `shape` around `axis`
struct AxisSplit {
  std::size_t outer = 1, len = 1, inner = 1;
};

inline AxisSplit split_axis(const Shape& shape, int axis, const char* who) {
  if (axis < 0 || axis >= static_cast<int>(shape.size())) {
    throw std::invalid_argument(std::string(who) + ": axis " + std::to_string(axis) +
                                " out of range for " + shape_str(shape));
  }
  AxisSplit s;
  for (int i = 0; i < static_cast<int>(shape.size()); ++i) {
    if (i < axis) s.outer *= static_cast<std::size_t>(shape[i]);
    else if (i == axis) s.len = static_cast<std::size_t>(shape[i]);
    else s.inner *= static_cast<std::size_t>(shape[i]);
  }
  return s;
}

}  // namespace detail

// Sum of all elements -> scalar. Accumulates in double regardless of T.
template <typename T>
TensorT<T> sum(const TensorT<T>& a) {
  if (a.size() == 0) throw std::invalid_argument("sum: empty tensor");
  auto node = detail::alloc_node<T>(Shape{});
  double acc = 0;
  for (T v : a.values()) acc += static_cast<double>(v);
  node->data[0] = static_cast<T>(acc);
  return detail::finish_op<T>(std::move(node), {&a},
                              [](const TensorNodeT<T>& self, const std::vector<T>& gout,
                                 detail::PendingGrads<T>& sink) {
                                if (!detail::wants_grad(self, 0)) return;
                                sink.add(self.parents[0].get(),
                                         std::vector<T>(self.parents[0]->data.size(), gout[0]));
                              });
}

template <typename T>
TensorT<T> mean(const TensorT<T>& a) {
  if (a.size() == 0) throw std::invalid_argument("mean: empty tensor");
  T inv = T(1) / static_cast<T>(a.size());
  return mul_const(sum(a), inv);
}

// Per-axis sum; result keeps the axis with extent 1.
template <typename T>
TensorT<T> sum_axis(const TensorT<T>& a, int axis) {
  auto sp = detail::split_axis(a.shape(), axis, "sum_axis");
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(axis)] = 1;
  auto node = detail::alloc_node<T>(out_shape);
  const auto& av = a.values();
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t in = 0; in < sp.inner; ++in) {
      double acc = 0;
      for (std::size_t l = 0; l < sp.len; ++l)
        acc += static_cast<double>(av[(o * sp.len + l) * sp.inner + in]);
      node->data[o * sp.inner + in] = static_cast<T>(acc);
    }
  return detail::finish_op<T>(std::move(node), {&a},
                              [sp](const TensorNodeT<T>& self, const std::vector<T>& gout,
                                   detail::PendingGrads<T>& sink) {
                                if (!detail::wants_grad(self, 0)) return;
                                std::vector<T> g(self.parents[0]->data.size());
                                for (std::size_t o = 0; o < sp.outer; ++o)
                                  for (std::size_t l = 0; l < sp.len; ++l)
                                    for (std::size_t in = 0; in < sp.inner; ++in)
                                      g[(o * sp.len + l) * sp.inner + in] =
                                          gout[o * sp.inner + in];
                                sink.add(self.parents[0].get(), std::move(g));
                              });
}

template <typename T>
TensorT<T> mean_axis(const TensorT<T>& a, int axis) {
  auto sp = detail::split_axis(a.shape(), axis, "mean_axis");
  return mul_const(sum_axis(a, axis), T(1) / static_cast<T>(sp.len));
}

// Population standard deviation (divide by N); pass population=false for the
// N-1 sample form. Composed from primitives so it is differentiable.
template <typename T>
TensorT<T> stddev(const TensorT<T>& a, bool population = true) {
  std::size_t n = a.size();
  if (n < 1) throw std::invalid_argument("stddev: empty tensor");
  auto centered = sub(a, mean(a));
  auto var = mean(square(centered));
  if (!population) {
    if (n < 2) throw std::invalid_argument("stddev: sample form needs >= 2 values");
    var = mul_const(var, static_cast<T>(n) / static_cast<T>(n - 1));
  }
  return sqrt(var);
}

template <typename T>
TensorT<T> stddev_axis(const TensorT<T>& a, int axis, bool population = true) {
  auto sp = detail::split_axis(a.shape(), axis, "stddev_axis");
  auto centered = sub(a, mean_axis(a, axis));
  auto var = mean_axis(square(centered), axis);
  if (!population) {
    if (sp.len < 2) throw std::invalid_argument("stddev_axis: sample form needs >= 2 values");
    var = mul_const(var, static_cast<T>(sp.len) / static_cast<T>(sp.len - 1));
  }
  return sqrt(var);
}

// ---------------------------------------------------------------------------
// softmax family (max-subtracted)
// ---------------------------------------------------------------------------

template <typename T>
TensorT<T> softmax(const TensorT<T>& a, int axis) {
  auto sp = detail::split_axis(a.shape(), axis, "softmax");
  auto node = detail::alloc_node<T>(a.shape());
  const auto& av = a.values();
  auto& ov = node->data;
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t in = 0; in < sp.inner; ++in) {
      T mx = av[(o * sp.len) * sp.inner + in];
      for (std::size_t l = 1; l < sp.len; ++l)
        mx = std::max(mx, av[(o * sp.len + l) * sp.inner + in]);
      double z = 0;
      for (std::size_t l = 0; l < sp.len; ++l) {
        std::size_t idx = (o * sp.len + l) * sp.inner + in;
        ov[idx] = std::exp(av[idx] - mx);
        z += static_cast<double>(ov[idx]);
      }
      T invz = static_cast<T>(1.0 / z);
      for (std::size_t l = 0; l < sp.len; ++l) ov[(o * sp.len + l) * sp.inner + in] *= invz;
    }
  return detail::finish_op<T>(
      std::move(node), {&a},
      [sp](const TensorNodeT<T>& self, const std::vector<T>& gout, detail::PendingGrads<T>& sink) {
        if (!detail::wants_grad(self, 0)) return;
        std::vector<T> g(gout.size());
        const auto& y = self.data;
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t in = 0; in < sp.inner; ++in) {
            double dot = 0;
            for (std::size_t l = 0; l < sp.len; ++l) {
              std::size_t idx = (o * sp.len + l) * sp.inner + in;
              dot += static_cast<double>(gout[idx]) * y[idx];
            }
            for (std::size_t l = 0; l < sp.len; ++l) {
              std::size_t idx = (o * sp.len + l) * sp.inner + in;
              g[idx] = y[idx] * (gout[idx] - static_cast<T>(dot));
            }
          }
        sink.add(self.parents[0].get(), std::move(g));
      });
}

template <typename T>
TensorT<T> log_softmax(const TensorT<T>& a, int axis) {
  auto sp = detail::split_axis(a.shape(), axis, "log_softmax");
  auto node = detail::alloc_node<T>(a.shape());
  const auto& av = a.values();
  auto& ov = node->data;
  for (std::size_t o = 0; o < sp.outer; ++o)
    for (std::size_t in = 0; in < sp.inner; ++in) {
      T mx = av[(o * sp.len) * sp.inner + in];
      for (std::size_t l = 1; l < sp.len; ++l)
        mx = std::max(mx, av[(o * sp.len + l) * sp.inner + in]);
      double z = 0;
      for (std::size_t l = 0; l < sp.len; ++l)
        z += std::exp(static_cast<double>(av[(o * sp.len + l) * sp.inner + in] - mx));
      T lz = static_cast<T>(std::log(z)) + mx;
      for (std::size_t l = 0; l < sp.len; ++l) {
        std::size_t idx = (o * sp.len + l) * sp.inner + in;
        ov[idx] = av[idx] - lz;
      }
    }
  return detail::finish_op<T>(
      std::move(node), {&a},
      [sp](const TensorNodeT<T>& self, const std::vector<T>& gout, detail::PendingGrads<T>& sink) {
        if (!detail::wants_grad(self, 0)) return;
        std::vector<T> g(gout.size());
        const auto& y = self.data;  // log-probs
        for (std::size_t o = 0; o < sp.outer; ++o)
          for (std::size_t in = 0; in < sp.inner; ++in) {
            double gsum = 0;
            for (std::size_t l = 0; l < sp.len; ++l)
              gsum += static_cast<double>(gout[(o * sp.len + l) * sp.inner + in]);
            for (std::size_t l = 0; l < sp.len; ++l) {
              std::size_t idx = (o * sp.len + l) * sp.inner + in;
              g[idx] = gout[idx] - static_cast<T>(std::exp(static_cast<double>(y[idx])) * gsum);
            }
          }
        sink.add(self.parents[0].get(), std::move(g));
      });
}

// ---------------------------------------------------------------------------
// structural ops
// ---------------------------------------------------------------------------

// Concatenate rank-2 tensors along axis 0 (rows) or 1 (cols).
template <typename T>
TensorT<T> concat(const std::vector<TensorT<T>>& parts, int axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no inputs");
  if (axis != 0 && axis != 1) throw std::invalid_argument("concat: axis must be 0 or 1");
  int r0 = parts[0].extent(0), c0 = parts[0].rank() == 2 ? parts[0].extent(1) : 1;
  int total = 0;
  for (const auto& p : parts) {
    if (p.rank() != parts[0].rank()) throw std::invalid_argument("concat: rank mismatch");
    int r = p.extent(0), c = p.rank() == 2 ? p.extent(1) : 1;
    if (axis == 0 && c != c0)
      throw std::invalid_argument("concat: column mismatch " + shape_str(p.shape()) + " vs " +
                                  shape_str(parts[0].shape()));
    if (axis == 1 && r != r0)
      throw std::invalid_argument("concat: row mismatch " + shape_str(p.shape()) + " vs " +
                                  shape_str(parts[0].shape()));
    total += axis == 0 ? r : c;
  }
  Shape out_shape = parts[0].shape();
  out_shape[static_cast<std::size_t>(axis)] = total;
  auto node = detail::alloc_node<T>(out_shape);
  int out_cols = out_shape.size() == 2 ? out_shape[1] : 1;
  int offset = 0;
  std::vector<int> offsets;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    int r = p.extent(0), c = p.rank() == 2 ? p.extent(1) : 1;
    const auto& pv = p.values();
    if (axis == 0) {
      std::copy(pv.begin(), pv.end(),
                node->data.begin() + static_cast<std::size_t>(offset) * out_cols);
      offset += r;
    } else {
      for (int i = 0; i < r; ++i)
        std::copy(pv.begin() + static_cast<std::size_t>(i) * c,
                  pv.begin() + static_cast<std::size_t>(i + 1) * c,
                  node->data.begin() + static_cast<std::size_t>(i) * out_cols + offset);
      offset += c;
    }
  }

  // finish_op takes an initializer_list; build edges by hand for N inputs.
  bool needs = false;
  if (grad_enabled())
    for (const auto& p : parts)
      if (p.requires_grad()) needs = true;
  if (needs) {
    node->requires_grad = true;
    for (const auto& p : parts) node->parents.push_back(p.node_ptr());
    std::vector<Shape> shapes;
    for (const auto& p : parts) shapes.push_back(p.shape());
    node->backward = [axis, shapes, offsets, out_cols](const TensorNodeT<T>& self,
                                                       const std::vector<T>& gout,
                                                       detail::PendingGrads<T>& sink) {
      for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
        if (!self.parents[pi]->requires_grad) continue;
        int r = shapes[pi][0];
        int c = shapes[pi].size() == 2 ? shapes[pi][1] : 1;
        std::vector<T> g(shape_numel(shapes[pi]));
        if (axis == 0) {
          std::copy(gout.begin() + static_cast<std::size_t>(offsets[pi]) * out_cols,
                    gout.begin() + static_cast<std::size_t>(offsets[pi] + r) * out_cols, g.begin());
        } else {
          for (int i = 0; i < r; ++i)
            std::copy(gout.begin() + static_cast<std::size_t>(i) * out_cols + offsets[pi],
                      gout.begin() + static_cast<std::size_t>(i) * out_cols + offsets[pi] + c,
                      g.begin() + static_cast<std::size_t>(i) * c);
        }
        sink.add(self.parents[pi].get(), std::move(g));
      }
    };
  }
  return TensorT<T>(std::move(node));
}

// Contiguous slice along axis 0 or 1 of a rank-1/2 tensor; [begin, end).
template <typename T>
TensorT<T> slice(const TensorT<T>& a, int axis, int begin, int end) {
  if (a.rank() < 1 || a.rank() > 2) throw std::invalid_argument("slice: expects rank 1 or 2");
  if (axis < 0 || axis >= a.rank()) throw std::invalid_argument("slice: bad axis");
  int extent = a.extent(axis);
  if (begin < 0 || end > extent || begin >= end) {
    throw std::invalid_argument("slice: range [" + std::to_string(begin) + "," +
                                std::to_string(end) + ") out of bounds for " +
                                shape_str(a.shape()));
  }
  Shape out_shape = a.shape();
  out_shape[static_cast<std::size_t>(axis)] = end - begin;
  auto node = detail::alloc_node<T>(out_shape);
  int rows = a.extent(0);
  int cols = a.rank() == 2 ? a.extent(1) : 1;
  const auto& av = a.values();
  if (axis == 0) {
    std::copy(av.begin() + static_cast<std::size_t>(begin) * cols,
              av.begin() + static_cast<std::size_t>(end) * cols, node->data.begin());
  } else {
    for (int i = 0; i < rows; ++i)
      std::copy(av.begin() + static_cast<std::size_t>(i) * cols + begin,
                av.begin() + static_cast<std::size_t>(i) * cols + end,
                node->data.begin() + static_cast<std::size_t>(i) * (end - begin));
  }
  return detail::finish_op<T>(
      std::move(node), {&a},
      [axis, begin, end, rows, cols](const TensorNodeT<T>& self, const std::vector<T>& gout,
                                     detail::PendingGrads<T>& sink) {
        if (!detail::wants_grad(self, 0)) return;
        std::vector<T> g(self.parents[0]->data.size(), T(0));
        if (axis == 0) {
          std::copy(gout.begin(), gout.end(), g.begin() + static_cast<std::size_t>(begin) * cols);
        } else {
          int w = end - begin;
          for (int i = 0; i < rows; ++i)
            std::copy(gout.begin() + static_cast<std::size_t>(i) * w,
                      gout.begin() + static_cast<std::size_t>(i + 1) * w,
                      g.begin() + static_cast<std::size_t>(i) * cols + begin);
        }
        sink.add(self.parents[0].get(), std::move(g));
      });
}

// Embedding-style row gather; gradient scatter-adds into the table.
template <typename T>
TensorT<T> gather_rows(const TensorT<T>& table, const std::vector<int>& ids) {
  if (table.rank() != 2) throw std::invalid_argument("gather_rows: table must be rank-2");
  if (ids.empty()) throw std::invalid_argument("gather_rows: empty id list");
  int v = table.extent(0), d = table.extent(1);
  for (int id : ids) {
    if (id < 0 || id >= v)
      throw std::invalid_argument("gather_rows: id " + std::to_string(id) + " out of range [0," +
                                  std::to_string(v) + ")");
  }
  auto node = detail::alloc_node<T>(Shape{static_cast<int>(ids.size()), d});
  const auto& tv = table.values();
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy(tv.begin() + static_cast<std::size_t>(ids[i]) * d,
              tv.begin() + static_cast<std::size_t>(ids[i] + 1) * d,
              node->data.begin() + i * static_cast<std::size_t>(d));
  return detail::finish_op<T>(std::move(node), {&table},
                              [ids, d](const TensorNodeT<T>& self, const std::vector<T>& gout,
                                       detail::PendingGrads<T>& sink) {
                                if (!detail::wants_grad(self, 0)) return;
                                std::vector<T> g(self.parents[0]->data.size(), T(0));
                                for (std::size_t i = 0; i < ids.size(); ++i)
                                  for (int j = 0; j < d; ++j)
                                    g[static_cast<std::size_t>(ids[i]) * d + j] +=
                                        gout[i * static_cast<std::size_t>(d) + j];
                                sink.add(self.parents[0].get(), std::move(g));
                              });
}

// Length-regulator expansion: row i is repeated counts[i] times, in order.
// counts must be non-negative with a positive sum.
template <typename T>
TensorT<T> repeat_rows(const TensorT<T>& a, const std::vector<int>& counts) {
  if (a.rank() != 2) throw std::invalid_argument("repeat_rows: expects rank-2");
  if (static_cast<int>(counts.size()) != a.extent(0))
    throw std::invalid_argument("repeat_rows: counts length " + std::to_string(counts.size()) +
                                " != rows of " + shape_str(a.shape()));
  long total = 0;
  for (int c : counts) {
    if (c < 0) throw std::invalid_argument("repeat_rows: negative count");
    total += c;
  }
  if (total < 1) throw std::invalid_argument("repeat_rows: all counts are zero");
  int d = a.extent(1);
  auto node = detail::alloc_node<T>(Shape{static_cast<int>(total), d});
  const auto& av = a.values();
  std::size_t out = 0;
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (int r = 0; r < counts[i]; ++r) {
      std::copy(av.begin() + i * static_cast<std::size_t>(d),
                av.begin() + (i + 1) * static_cast<std::size_t>(d),
                node->data.begin() + out * static_cast<std::size_t>(d));
      ++out;
    }
  return detail::finish_op<T>(std::move(node), {&a},
                              [counts, d](const TensorNodeT<T>& self, const std::vector<T>& gout,
                                          detail::PendingGrads<T>& sink) {
                                if (!detail::wants_grad(self, 0)) return;
                                std::vector<T> g(self.parents[0]->data.size(), T(0));
                                std::size_t row = 0;
                                for (std::size_t i = 0; i < counts.size(); ++i)
                                  for (int r = 0; r < counts[i]; ++r) {
                                    for (int j = 0; j < d; ++j)
                                      g[i * static_cast<std::size_t>(d) + j] +=
                                          gout[row * static_cast<std::size_t>(d) + j];
                                    ++row;
                                  }
                                sink.add(self.parents[0].get(), std::move(g));
                              });
}

// Mean-pools consecutive row spans: span i covers counts[i] rows (all > 0).
template <typename T>
TensorT<T> segment_mean(const TensorT<T>& a, const std::vector<int>& counts) {
  if (a.rank() != 2) throw std::invalid_argument("segment_mean: expects rank-2");
  long total = 0;
  for (int c : counts) {
    if (c <= 0) throw std::invalid_argument("segment_mean: spans must be positive");
    total += c;
  }
  if (total != a.extent(0))
    throw std::invalid_argument("segment_mean: spans sum to " + std::to_string(total) +
                                " but input has " + std::to_string(a.extent(0)) + " rows");
  int d = a.extent(1);
  auto node = detail::alloc_node<T>(Shape{static_cast<int>(counts.size()), d});
  const auto& av = a.values();
  std::size_t row = 0;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    for (int j = 0; j < d; ++j) {
      double acc = 0;
      for (int r = 0; r < counts[i]; ++r)
        acc += static_cast<double>(av[(row + r) * static_cast<std::size_t>(d) + j]);
      node->data[i * static_cast<std::size_t>(d) + j] = static_cast<T>(acc / counts[i]);
    }
    row += static_cast<std::size_t>(counts[i]);
  }
  return detail::finish_op<T>(std::move(node), {&a},
                              [counts, d](const TensorNodeT<T>& self, const std::vector<T>& gout,
                                          detail::PendingGrads<T>& sink) {
                                if (!detail::wants_grad(self, 0)) return;
                                std::vector<T> g(self.parents[0]->data.size());
                                std::size_t row = 0;
                                for (std::size_t i = 0; i < counts.size(); ++i) {
                                  T inv = T(1) / static_cast<T>(counts[i]);
                                  for (int r = 0; r < counts[i]; ++r)
                                    for (int j = 0; j < d; ++j)
                                      g[(row + r) * static_cast<std::size_t>(d) + j] =
                                          gout[i * static_cast<std::size_t>(d) + j] * inv;
                                  row += static_cast<std::size_t>(counts[i]);
                                }
                                sink.add(self.parents[0].get(), std::move(g));
                              });
}

// out[i] = a[i, ids[i]] for a rank-2 input (cross-entropy target pick).
template <typename T>
TensorT<T> select_index(const TensorT<T>& a, const std::vector<int>& ids) {
  if (a.rank() != 2) throw std::invalid_argument("select_index: expects rank-2");
  if (static_cast<int>(ids.size()) != a.extent(0))
    throw std::invalid_argument("select_index: ids length mismatch");
  int cols = a.extent(1);
  for (int id : ids)
    if (id < 0 || id >= cols) throw std::invalid_argument("select_index: id out of range");
  auto node = detail::alloc_node<T>(Shape{static_cast<int>(ids.size())});
  for (std::size_t i = 0; i < ids.size(); ++i)
    node->data[i] = a.values()[i * static_cast<std::size_t>(cols) + ids[i]];
  return detail::finish_op<T>(std::move(node), {&a},
                              [ids, cols](const TensorNodeT<T>& self, const std::vector<T>& gout,
                                          detail::PendingGrads<T>& sink) {
                                if (!detail::wants_grad(self, 0)) return;
                                std::vector<T> g(self.parents[0]->data.size(), T(0));
                                for (std::size_t i = 0; i < ids.size(); ++i)
                                  g[i * static_cast<std::size_t>(cols) + ids[i]] = gout[i];
                                sink.add(self.parents[0].get(), std::move(g));
                              });
}

// Inverted dropout: kept elements scaled by 1/(1-p) at train time so the
// inference path needs no rescaling. p == 0 or eval mode returns the input.
template <typename T>
TensorT<T> dropout(const TensorT<T>& a, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return a;
  if (p >= 1.0) throw std::invalid_argument("dropout: p must be < 1");
  T keep_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(a.size());
  for (auto& m : mask) m = rng.uniform() < p ? T(0) : keep_scale;
  auto node = detail::alloc_node<T>(a.shape());
  const auto& av = a.values();
  for (std::size_t i = 0; i < av.size(); ++i) node->data[i] = av[i] * mask[i];
  return detail::finish_op<T>(std::move(node), {&a},
                              [mask = std::move(mask)](const TensorNodeT<T>& self,
                                                       const std::vector<T>& gout,
                                                       detail::PendingGrads<T>& sink) {
                                if (!detail::wants_grad(self, 0)) return;
                                std::vector<T> g(gout.size());
                                for (std::size_t i = 0; i < g.size(); ++i)
                                  g[i] = gout[i] * mask[i];
                                sink.add(self.parents[0].get(), std::move(g));
                              });
}

// ---------------------------------------------------------------------------
// serialization: magic "M2T1", rank u32, extents u32..., raw values
// ---------------------------------------------------------------------------

namespace detail {

inline void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

inline uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (!is) throw DataError("tensor read: truncated stream");
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) | (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace detail

template <typename T>
void save_tensor(std::ostream& os, const TensorT<T>& t) {
  os.write("M2T1", 4);
  detail::write_u32(os, static_cast<uint32_t>(t.rank()));
  for (int d : t.shape()) detail::write_u32(os, static_cast<uint32_t>(d));
  // Raw little-endian values; the build targets little-endian hosts.
  os.write(reinterpret_cast<const char*>(t.values().data()),
           static_cast<std::streamsize>(t.size() * sizeof(T)));
}

template <typename T>
TensorT<T> load_tensor(std::istream& is) {
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, "M2T1", 4) != 0) {
    throw DataError("tensor read: bad magic (expected M2T1)");
  }
  uint32_t rank = detail::read_u32(is);
  if (rank > 8) throw DataError("tensor read: implausible rank " + std::to_string(rank));
  Shape shape(rank);
  for (auto& d : shape) d = static_cast<int>(detail::read_u32(is));
  check_shape_valid(shape, "tensor read");
  std::vector<T> data(shape_numel(shape));
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(data.size() * sizeof(T)));
  if (!is) throw DataError("tensor read: truncated payload");
  return TensorT<T>::from_data(std::move(shape), std::move(data));
}

}  // namespace m2gan
