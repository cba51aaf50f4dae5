// Copyright 2026 The dvc Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "dvc/error.hpp"

// Minimal reverse-mode differentiation: a Tape records primitive operations
// in execution order and runs a single backward sweep over them.

namespace dvc::nn {

using Shape = std::vector<std::size_t>;

inline std::size_t num_elements(const Shape& s) {
  return std::accumulate(s.begin(), s.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_string(const Shape& s) {
  std::string out = "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + "]";
}

template <class T>
struct Tensor {
  Shape shape;
  std::vector<T> values;

  Tensor() : values(1, T(0)) {}
  explicit Tensor(Shape s, T fill = T(0)) : shape(std::move(s)), values(num_elements(shape), fill) {}
  Tensor(Shape s, std::vector<T> v) : shape(std::move(s)), values(std::move(v)) {
    if (values.size() != num_elements(shape)) {
      throw ShapeError("tensor: " + std::to_string(values.size()) + " values for shape " + shape_string(shape));
    }
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  std::size_t size() const { return values.size(); }
  std::size_t rank() const { return shape.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }
  T& operator[](std::size_t i) { return values[i]; }
  const T& operator[](std::size_t i) const { return values[i]; }
  T item() const {
    if (values.size() != 1) throw ShapeError("item() on a tensor with " + std::to_string(values.size()) + " values");
    return values[0];
  }
};

// Trainable tensor with a persistent gradient buffer.
template <class T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  std::vector<T> grad;

  Parameter() = default;
  Parameter(std::string n, Shape shape) : name(std::move(n)), value(std::move(shape)), grad(value.size(), T(0)) {}

  void zero_grad() { std::fill(grad.begin(), grad.end(), T(0)); }
  std::size_t size() const { return value.size(); }
};

template <class T>
class Tape;

template <class T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(*this); }
  const Shape& shape() const { return value().shape; }
  std::size_t size() const { return value().size(); }
};

template <class T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Tensor<T> t) { return push(std::move(t), {}, nullptr, false, nullptr); }
  // Leaf whose gradient is retained (see grad()).
  Var<T> input(Tensor<T> t) { return push(std::move(t), {}, nullptr, true, nullptr); }
  Var<T> parameter(Parameter<T>& p) { return push(p.value, {}, nullptr, true, &p); }

  // Records an operation; `fn` runs during backward only if some input
  // needs a gradient.
  Var<T> record(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn fn) {
    bool needs = false;
    for (auto i : inputs) needs = needs || nodes_[i].needs_grad;
    return push(std::move(value), std::move(inputs), needs ? std::move(fn) : nullptr, needs, nullptr);
  }

  const Tensor<T>& value(Var<T> v) const { return node(v).value; }
  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  // Gradient buffer of a node, allocated on first use.
  std::vector<T>& grad_buffer(std::size_t id) {
    auto& n = nodes_[id];
    if (n.grad.empty()) n.grad.assign(n.value.size(), T(0));
    return n.grad;
  }

  // d(loss)/d(v) after backward(); zeros if v did not influence the loss.
  std::vector<T> grad(Var<T> v) const {
    const auto& n = node(v);
    return n.grad.empty() ? std::vector<T>(n.value.size(), T(0)) : n.grad;
  }

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  // Back-propagates from a scalar and accumulates into parameter gradients.
  void backward(Var<T> loss) {
    if (loss.tape != this) throw Error("backward: loss belongs to a different tape");
    if (nodes_.empty()) throw Error("backward: nothing was recorded on the tape");
    if (consumed_) throw Error("backward: tape was already back-propagated; run a new forward pass");
    if (node(loss).value.size() != 1) throw ShapeError("backward: loss must be a scalar");
    consumed_ = true;
    grad_buffer(loss.id)[0] = T(1);
    for (std::size_t id = loss.id + 1; id-- > 0;) {
      auto& n = nodes_[id];
      if (n.grad.empty()) continue;
      if (n.backward) n.backward(*this, id);
      if (n.param) {
        for (std::size_t i = 0; i < n.grad.size(); ++i) n.param->grad[i] += n.grad[i];
      }
    }
  }

  const std::vector<std::size_t>& inputs(std::size_t id) const { return nodes_[id].inputs; }

 private:
  struct Node {
    Tensor<T> value;
    std::vector<T> grad;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool needs_grad = false;
    Parameter<T>* param = nullptr;
  };

  const Node& node(Var<T> v) const {
    if (v.tape != this || v.id >= nodes_.size()) throw Error("tape: variable does not belong to this tape");
    return nodes_[v.id];
  }

  Var<T> push(Tensor<T> value, std::vector<std::size_t> inputs, BackwardFn fn, bool needs, Parameter<T>* param) {
    for (const T& x : value.values) {
      if (!std::isfinite(static_cast<double>(x))) throw NonFiniteError("tape: non-finite value produced");
    }
    nodes_.push_back(Node{std::move(value), {}, std::move(inputs), std::move(fn), needs, param});
    return Var<T>{this, nodes_.size() - 1};
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

namespace detail {

template <class T>
void same_shape(const char* op, Var<T> a, Var<T> b) {
  if (a.tape != b.tape) throw Error(std::string(op) + ": operands on different tapes");
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

template <class T>
void accumulate(Tape<T>& tape, std::size_t id, std::span<const T> g) {
  if (!tape.needs_grad(id)) return;
  auto& dst = tape.grad_buffer(id);
  for (std::size_t i = 0; i < g.size(); ++i) dst[i] += g[i];
}

template <class T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise

template <class T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::same_shape("add", a, b);
  auto& tape = *a.tape;
  Tensor<T> out = a.value();
  const auto& bv = b.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return tape.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape<T>& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    detail::accumulate<T>(t, a, g);
    detail::accumulate<T>(t, b, g);
  });
}

template <class T>
Var<T> sub(Var<T> a, Var<T> b) {
  detail::same_shape("sub", a, b);
  auto& tape = *a.tape;
  Tensor<T> out = a.value();
  const auto& bv = b.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return tape.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    detail::accumulate<T>(t, a, g);
    for (auto& v : g) v = -v;
    detail::accumulate<T>(t, b, g);
  });
}

template <class T>
Var<T> mul(Var<T> a, Var<T> b) {
  detail::same_shape("mul", a, b);
  auto& tape = *a.tape;
  Tensor<T> out = a.value();
  const auto& bv = b.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return tape.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const auto& av = t.value(a).values;
    const auto& bv = t.value(b).values;
    std::vector<T> ga(g.size()), gb(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      ga[i] = g[i] * bv[i];
      gb[i] = g[i] * av[i];
    }
    detail::accumulate<T>(t, a, ga);
    detail::accumulate<T>(t, b, gb);
  });
}

template <class T>
Var<T> scale(Var<T> a, T factor) {
  auto& tape = *a.tape;
  Tensor<T> out = a.value();
  for (auto& v : out.values) v *= factor;
  return tape.record(std::move(out), {a.id}, [a = a.id, factor](Tape<T>& t, std::size_t self) {
    auto g = t.grad_buffer(self);
    for (auto& v : g) v *= factor;
    detail::accumulate<T>(t, a, g);
  });
}

template <class T>
Var<T> add_scalar(Var<T> a, T c) {
  auto& tape = *a.tape;
  Tensor<T> out = a.value();
  for (auto& v : out.values) v += c;
  return tape.record(std::move(out), {a.id}, [a = a.id](Tape<T>& t, std::size_t self) {
    const auto g = t.grad_buffer(self);
    detail::accumulate<T>(t, a, g);
  });
}

template <class T>
Var<T> sigmoid(Var<T> a) {
  auto& tape = *a.tape;
  Tensor<T> out = a.value();
  for (auto& v : out.values) v = detail::sigmoid(v);
  return tape.record(std::move(out), {a.id}, [a = a.id](Tape<T>& t, std::size_t self) {
    const auto& y = t.value(self).values;
    auto g = t.grad_buffer(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= y[i] * (T(1) - y[i]);
    detail::accumulate<T>(t, a, g);
  });
}

template <class T>
Var<T> leaky_relu(Var<T> a, T slope = T(0.2)) {
  auto& tape = *a.tape;
  Tensor<T> out = a.value();
  for (auto& v : out.values) v = v > T(0) ? v : slope * v;
  return tape.record(std::move(out), {a.id}, [a = a.id, slope](Tape<T>& t, std::size_t self) {
    const auto& x = t.value(a).values;
    auto g = t.grad_buffer(self);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] *= x[i] > T(0) ? T(1) : slope;
    detail::accumulate<T>(t, a, g);
  });
}

// a * sigmoid(b)
template <class T>
Var<T> gated_linear_unit(Var<T> a, Var<T> b) {
  detail::same_shape("gated_linear_unit", a, b);
  auto& tape = *a.tape;
  Tensor<T> out = a.value();
  const auto& bv = b.value().values;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= detail::sigmoid(bv[i]);
  return tape.record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const auto& av = t.value(a).values;
    const auto& bv = t.value(b).values;
    std::vector<T> ga(g.size()), gb(g.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
      const T s = detail::sigmoid(bv[i]);
      ga[i] = g[i] * s;
      gb[i] = g[i] * av[i] * s * (T(1) - s);
    }
    detail::accumulate<T>(t, a, ga);
    detail::accumulate<T>(t, b, gb);
  });
}

// ---------------------------------------------------------------------------
// Reductions and losses (all return rank-0 scalars)

template <class T>
Var<T> mean(Var<T> a) {
  auto& tape = *a.tape;
  const auto& v = a.value().values;
  if (v.empty()) throw ShapeError("mean: empty tensor");
  T acc = T(0);
  for (T x : v) acc += x;
  const T n = static_cast<T>(v.size());
  return tape.record(Tensor<T>::scalar(acc / n), {a.id}, [a = a.id, n](Tape<T>& t, std::size_t self) {
    const T g = t.grad_buffer(self)[0] / n;
    std::vector<T> ga(t.value(a).size(), g);
    detail::accumulate<T>(t, a, ga);
  });
}

// mean |a - b|
template <class T>
Var<T> l1(Var<T> a, Var<T> b) {
  detail::same_shape("l1", a, b);
  auto& tape = *a.tape;
  const auto& av = a.value().values;
  const auto& bv = b.value().values;
  if (av.empty()) throw ShapeError("l1: empty tensor");
  T acc = T(0);
  for (std::size_t i = 0; i < av.size(); ++i) acc += std::abs(av[i] - bv[i]);
  const T n = static_cast<T>(av.size());
  return tape.record(Tensor<T>::scalar(acc / n), {a.id, b.id}, [a = a.id, b = b.id, n](Tape<T>& t, std::size_t self) {
    const T g = t.grad_buffer(self)[0] / n;
    const auto& av = t.value(a).values;
    const auto& bv = t.value(b).values;
    std::vector<T> ga(av.size()), gb(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) {
      const T d = av[i] - bv[i];
      const T s = d > T(0) ? T(1) : (d < T(0) ? T(-1) : T(0));
      ga[i] = g * s;
      gb[i] = -g * s;
    }
    detail::accumulate<T>(t, a, ga);
    detail::accumulate<T>(t, b, gb);
  });
}

// mean (a - b)^2
template <class T>
Var<T> l2(Var<T> a, Var<T> b) {
  detail::same_shape("l2", a, b);
  auto& tape = *a.tape;
  const auto& av = a.value().values;
  const auto& bv = b.value().values;
  if (av.empty()) throw ShapeError("l2: empty tensor");
  T acc = T(0);
  for (std::size_t i = 0; i < av.size(); ++i) acc += (av[i] - bv[i]) * (av[i] - bv[i]);
  const T n = static_cast<T>(av.size());
  return tape.record(Tensor<T>::scalar(acc / n), {a.id, b.id}, [a = a.id, b = b.id, n](Tape<T>& t, std::size_t self) {
    const T g = t.grad_buffer(self)[0] * T(2) / n;
    const auto& av = t.value(a).values;
    const auto& bv = t.value(b).values;
    std::vector<T> ga(av.size()), gb(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) {
      ga[i] = g * (av[i] - bv[i]);
      gb[i] = -ga[i];
    }
    detail::accumulate<T>(t, a, ga);
    detail::accumulate<T>(t, b, gb);
  });
}

// mean (a - c)^2 for a constant target c.
template <class T>
Var<T> l2_to(Var<T> a, T c) {
  auto& tape = *a.tape;
  const auto& av = a.value().values;
  if (av.empty()) throw ShapeError("l2_to: empty tensor");
  T acc = T(0);
  for (T x : av) acc += (x - c) * (x - c);
  const T n = static_cast<T>(av.size());
  return tape.record(Tensor<T>::scalar(acc / n), {a.id}, [a = a.id, c, n](Tape<T>& t, std::size_t self) {
    const T g = t.grad_buffer(self)[0] * T(2) / n;
    const auto& av = t.value(a).values;
    std::vector<T> ga(av.size());
    for (std::size_t i = 0; i < av.size(); ++i) ga[i] = g * (av[i] - c);
    detail::accumulate<T>(t, a, ga);
  });
}

// ---------------------------------------------------------------------------
// Linear algebra and convolution

// [M,K] x [K,N] -> [M,N]
template <class T>
Var<T> matmul(Var<T> a, Var<T> b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(as) + " x " + shape_string(bs));
  }
  const std::size_t M = as[0], K = as[1], N = bs[1];
  Tensor<T> out(Shape{M, N});
  const auto& av = a.value().values;
  const auto& bv = b.value().values;
  for (std::size_t i = 0; i < M; ++i) {
    for (std::size_t k = 0; k < K; ++k) {
      const T x = av[i * K + k];
      for (std::size_t j = 0; j < N; ++j) out[i * N + j] += x * bv[k * N + j];
    }
  }
  return a.tape->record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id, M, K, N](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const auto& av = t.value(a).values;
    const auto& bv = t.value(b).values;
    if (t.needs_grad(a)) {
      std::vector<T> ga(M * K, T(0));
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          T acc = T(0);
          for (std::size_t j = 0; j < N; ++j) acc += g[i * N + j] * bv[k * N + j];
          ga[i * K + k] = acc;
        }
      detail::accumulate<T>(t, a, ga);
    }
    if (t.needs_grad(b)) {
      std::vector<T> gb(K * N, T(0));
      for (std::size_t i = 0; i < M; ++i)
        for (std::size_t k = 0; k < K; ++k) {
          const T x = av[i * K + k];
          for (std::size_t j = 0; j < N; ++j) gb[k * N + j] += x * g[i * N + j];
        }
      detail::accumulate<T>(t, b, gb);
    }
  });
}

namespace detail {

// Output positions t with 0 <= t * stride + k - pad < in_len.
inline std::pair<std::size_t, std::size_t> conv_range(std::size_t k, std::size_t pad, std::size_t stride,
                                                      std::size_t in_len, std::size_t out_len) {
  const long long lo_num = static_cast<long long>(pad) - static_cast<long long>(k);
  long long lo = lo_num <= 0 ? 0 : (lo_num + static_cast<long long>(stride) - 1) / static_cast<long long>(stride);
  const long long hi_num = static_cast<long long>(in_len) - 1 + static_cast<long long>(pad) - static_cast<long long>(k);
  if (hi_num < 0) return {0, 0};
  long long hi = hi_num / static_cast<long long>(stride) + 1;
  hi = std::min<long long>(hi, static_cast<long long>(out_len));
  lo = std::min(lo, hi);
  return {static_cast<std::size_t>(lo), static_cast<std::size_t>(hi)};
}

}  // namespace detail

// x: [Cin, T], weight: [Cout, Cin, K], bias: [Cout] -> [Cout, Tout] with
// zero padding `pad` on both sides.
template <class T>
Var<T> conv1d(Var<T> x, Var<T> weight, Var<T> bias, std::size_t stride = 1, std::size_t pad = 0) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  const auto& bs = bias.shape();
  if (xs.size() != 2 || ws.size() != 3 || bs.size() != 1 || ws[1] != xs[0] || bs[0] != ws[0] || stride == 0) {
    throw ShapeError("conv1d: incompatible shapes x" + shape_string(xs) + " w" + shape_string(ws) + " b" +
                     shape_string(bs));
  }
  const std::size_t cin = xs[0], len = xs[1], cout = ws[0], K = ws[2];
  if (len + 2 * pad < K) throw ShapeError("conv1d: input shorter than kernel");
  const std::size_t out_len = (len + 2 * pad - K) / stride + 1;
  Tensor<T> out(Shape{cout, out_len});
  const auto& xv = x.value().values;
  const auto& wv = weight.value().values;
  const auto& bv = bias.value().values;
  for (std::size_t co = 0; co < cout; ++co) {
    T* o = out.values.data() + co * out_len;
    std::fill(o, o + out_len, bv[co]);
    for (std::size_t ci = 0; ci < cin; ++ci) {
      const T* xi = xv.data() + ci * len;
      for (std::size_t k = 0; k < K; ++k) {
        const T w = wv[(co * cin + ci) * K + k];
        const auto [lo, hi] = detail::conv_range(k, pad, stride, len, out_len);
        if (stride == 1) {
          const T* src = xi + k - pad;
          for (std::size_t t = lo; t < hi; ++t) o[t] += w * src[t];
        } else {
          for (std::size_t t = lo; t < hi; ++t) o[t] += w * xi[t * stride + k - pad];
        }
      }
    }
  }
  return x.tape->record(
      std::move(out), {x.id, weight.id, bias.id},
      [x = x.id, w = weight.id, b = bias.id, cin, len, cout, K, stride, pad, out_len](Tape<T>& t, std::size_t self) {
        const auto& g = t.grad_buffer(self);
        const auto& xv = t.value(x).values;
        const auto& wv = t.value(w).values;
        if (t.needs_grad(b)) {
          std::vector<T> gb(cout, T(0));
          for (std::size_t co = 0; co < cout; ++co)
            for (std::size_t s = 0; s < out_len; ++s) gb[co] += g[co * out_len + s];
          detail::accumulate<T>(t, b, gb);
        }
        const bool need_x = t.needs_grad(x), need_w = t.needs_grad(w);
        std::vector<T> gx(need_x ? cin * len : 0, T(0));
        std::vector<T> gw(need_w ? cout * cin * K : 0, T(0));
        for (std::size_t co = 0; co < cout; ++co) {
          const T* go = g.data() + co * out_len;
          for (std::size_t ci = 0; ci < cin; ++ci) {
            const T* xi = xv.data() + ci * len;
            for (std::size_t k = 0; k < K; ++k) {
              const auto [lo, hi] = detail::conv_range(k, pad, stride, len, out_len);
              const std::size_t widx = (co * cin + ci) * K + k;
              if (need_w) {
                T acc = T(0);
                for (std::size_t s = lo; s < hi; ++s) acc += go[s] * xi[s * stride + k - pad];
                gw[widx] += acc;
              }
              if (need_x) {
                const T wk = wv[widx];
                T* gxi = gx.data() + ci * len;
                for (std::size_t s = lo; s < hi; ++s) gxi[s * stride + k - pad] += wk * go[s];
              }
            }
          }
        }
        if (need_x) detail::accumulate<T>(t, x, gx);
        if (need_w) detail::accumulate<T>(t, w, gw);
      });
}

// Per-channel normalization over time for x: [C, T].
template <class T>
Var<T> instance_norm(Var<T> x, T eps = T(1e-5)) {
  const auto& xs = x.shape();
  if (xs.size() != 2 || xs[1] == 0) throw ShapeError("instance_norm: expected [C, T], got " + shape_string(xs));
  const std::size_t C = xs[0], L = xs[1];
  Tensor<T> out(xs);
  std::vector<T> inv_std(C);
  const auto& xv = x.value().values;
  for (std::size_t c = 0; c < C; ++c) {
    const T* row = xv.data() + c * L;
    T mu = T(0);
    for (std::size_t i = 0; i < L; ++i) mu += row[i];
    mu /= static_cast<T>(L);
    T var = T(0);
    for (std::size_t i = 0; i < L; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<T>(L);
    inv_std[c] = T(1) / std::sqrt(var + eps);
    for (std::size_t i = 0; i < L; ++i) out[c * L + i] = (row[i] - mu) * inv_std[c];
  }
  return x.tape->record(std::move(out), {x.id}, [x = x.id, C, L, inv_std](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    const auto& y = t.value(self).values;
    std::vector<T> gx(C * L);
    for (std::size_t c = 0; c < C; ++c) {
      T mg = T(0), mgy = T(0);
      for (std::size_t i = 0; i < L; ++i) {
        mg += g[c * L + i];
        mgy += g[c * L + i] * y[c * L + i];
      }
      mg /= static_cast<T>(L);
      mgy /= static_cast<T>(L);
      for (std::size_t i = 0; i < L; ++i) {
        gx[c * L + i] = inv_std[c] * (g[c * L + i] - mg - y[c * L + i] * mgy);
      }
    }
    detail::accumulate<T>(t, x, gx);
  });
}

// ---------------------------------------------------------------------------
// Shape manipulation

namespace detail {

struct AxisView {
  std::size_t outer = 1, extent = 0, inner = 1;
};

inline AxisView axis_view(const Shape& s, std::size_t axis) {
  AxisView v;
  for (std::size_t i = 0; i < axis; ++i) v.outer *= s[i];
  v.extent = s[axis];
  for (std::size_t i = axis + 1; i < s.size(); ++i) v.inner *= s[i];
  return v;
}

}  // namespace detail

// Elements [begin, end) along `axis`.
template <class T>
Var<T> slice(Var<T> x, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto& xs = x.shape();
  if (axis >= xs.size() || begin > end || end > xs[axis]) {
    throw ShapeError("slice: invalid range [" + std::to_string(begin) + "," + std::to_string(end) + ") on axis " +
                     std::to_string(axis) + " of " + shape_string(xs));
  }
  const auto v = detail::axis_view(xs, axis);
  Shape os = xs;
  os[axis] = end - begin;
  Tensor<T> out(os);
  const auto& xv = x.value().values;
  const std::size_t w = end - begin;
  for (std::size_t o = 0; o < v.outer; ++o) {
    std::copy_n(xv.begin() + static_cast<std::ptrdiff_t>((o * v.extent + begin) * v.inner), w * v.inner,
                out.values.begin() + static_cast<std::ptrdiff_t>(o * w * v.inner));
  }
  return x.tape->record(std::move(out), {x.id}, [x = x.id, v, begin, w](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    std::vector<T> gx(v.outer * v.extent * v.inner, T(0));
    for (std::size_t o = 0; o < v.outer; ++o) {
      std::copy_n(g.begin() + static_cast<std::ptrdiff_t>(o * w * v.inner), w * v.inner,
                  gx.begin() + static_cast<std::ptrdiff_t>((o * v.extent + begin) * v.inner));
    }
    detail::accumulate<T>(t, x, gx);
  });
}

enum class PadMode { zero, edge };

// Pads `before`/`after` elements along `axis`.
template <class T>
Var<T> pad(Var<T> x, std::size_t axis, std::size_t before, std::size_t after, PadMode mode = PadMode::zero) {
  const auto& xs = x.shape();
  if (axis >= xs.size()) throw ShapeError("pad: axis out of range for " + shape_string(xs));
  if (mode == PadMode::edge && xs[axis] == 0 && before + after > 0) throw ShapeError("pad: edge mode on empty axis");
  const auto v = detail::axis_view(xs, axis);
  Shape os = xs;
  os[axis] = xs[axis] + before + after;
  const std::size_t ext = os[axis];
  // Source index along the axis for each output index (npos = zero).
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<std::size_t> src(ext);
  for (std::size_t i = 0; i < ext; ++i) {
    if (i >= before && i < before + v.extent) {
      src[i] = i - before;
    } else if (mode == PadMode::edge) {
      src[i] = i < before ? 0 : v.extent - 1;
    } else {
      src[i] = npos;
    }
  }
  Tensor<T> out(os);
  const auto& xv = x.value().values;
  for (std::size_t o = 0; o < v.outer; ++o)
    for (std::size_t i = 0; i < ext; ++i) {
      if (src[i] == npos) continue;
      for (std::size_t r = 0; r < v.inner; ++r) {
        out[(o * ext + i) * v.inner + r] = xv[(o * v.extent + src[i]) * v.inner + r];
      }
    }
  return x.tape->record(std::move(out), {x.id}, [x = x.id, v, ext, src](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    std::vector<T> gx(v.outer * v.extent * v.inner, T(0));
    for (std::size_t o = 0; o < v.outer; ++o)
      for (std::size_t i = 0; i < ext; ++i) {
        if (src[i] == npos) continue;
        for (std::size_t r = 0; r < v.inner; ++r) {
          gx[(o * v.extent + src[i]) * v.inner + r] += g[(o * ext + i) * v.inner + r];
        }
      }
    detail::accumulate<T>(t, x, gx);
  });
}

// Joins two tensors along `axis`; all other extents must agree.
template <class T>
Var<T> concat(Var<T> a, Var<T> b, std::size_t axis) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  bool ok = as.size() == bs.size() && axis < as.size();
  for (std::size_t i = 0; ok && i < as.size(); ++i) ok = i == axis || as[i] == bs[i];
  if (!ok) throw ShapeError("concat: incompatible shapes " + shape_string(as) + " and " + shape_string(bs));
  const auto va = detail::axis_view(as, axis);
  const auto vb = detail::axis_view(bs, axis);
  Shape os = as;
  os[axis] = as[axis] + bs[axis];
  const std::size_t ext = os[axis];
  Tensor<T> out(os);
  const auto& av = a.value().values;
  const auto& bv = b.value().values;
  for (std::size_t o = 0; o < va.outer; ++o) {
    auto dst = out.values.begin() + static_cast<std::ptrdiff_t>(o * ext * va.inner);
    dst = std::copy_n(av.begin() + static_cast<std::ptrdiff_t>(o * va.extent * va.inner), va.extent * va.inner, dst);
    std::copy_n(bv.begin() + static_cast<std::ptrdiff_t>(o * vb.extent * vb.inner), vb.extent * vb.inner, dst);
  }
  return a.tape->record(std::move(out), {a.id, b.id}, [a = a.id, b = b.id, va, vb, ext](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    std::vector<T> ga(va.outer * va.extent * va.inner), gb(vb.outer * vb.extent * vb.inner);
    for (std::size_t o = 0; o < va.outer; ++o) {
      auto src = g.begin() + static_cast<std::ptrdiff_t>(o * ext * va.inner);
      std::copy_n(src, va.extent * va.inner, ga.begin() + static_cast<std::ptrdiff_t>(o * va.extent * va.inner));
      std::copy_n(src + static_cast<std::ptrdiff_t>(va.extent * va.inner), vb.extent * vb.inner,
                  gb.begin() + static_cast<std::ptrdiff_t>(o * vb.extent * vb.inner));
    }
    detail::accumulate<T>(t, a, ga);
    detail::accumulate<T>(t, b, gb);
  });
}

// Nearest-neighbour upsampling of the last axis of [C, T].
template <class T>
Var<T> upsample(Var<T> x, std::size_t factor) {
  const auto& xs = x.shape();
  if (xs.size() != 2 || factor == 0) throw ShapeError("upsample: expected [C, T], got " + shape_string(xs));
  const std::size_t C = xs[0], L = xs[1];
  Tensor<T> out(Shape{C, L * factor});
  const auto& xv = x.value().values;
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t i = 0; i < L * factor; ++i) out[c * L * factor + i] = xv[c * L + i / factor];
  return x.tape->record(std::move(out), {x.id}, [x = x.id, C, L, factor](Tape<T>& t, std::size_t self) {
    const auto& g = t.grad_buffer(self);
    std::vector<T> gx(C * L, T(0));
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t i = 0; i < L * factor; ++i) gx[c * L + i / factor] += g[c * L * factor + i];
    detail::accumulate<T>(t, x, gx);
  });
}

// Gated linear unit over the channel axis: first half * sigmoid(second half).
template <class T>
Var<T> glu(Var<T> x) {
  const auto& xs = x.shape();
  if (xs.empty() || xs[0] % 2 != 0) throw ShapeError("glu: leading extent must be even, got " + shape_string(xs));
  const std::size_t half = xs[0] / 2;
  return gated_linear_unit(slice(x, 0, 0, half), slice(x, 0, half, 2 * half));
}

}  // namespace dvc::nn
