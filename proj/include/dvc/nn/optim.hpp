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
#include <span>
#include <string>
#include <vector>

#include "dvc/error.hpp"
#include "dvc/nn/tensor.hpp"

namespace dvc::nn {

// Adam with bias correction. One state per optimized parameter group.
template <class T>
struct AdamState {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  std::size_t step = 0;
};

template <class T>
void adam_step(std::span<Parameter<T>* const> params, AdamState<T>& state, double lr) {
  if (state.m.empty()) {
    for (const auto* p : params) {
      state.m.emplace_back(p->size(), 0.0);
      state.v.emplace_back(p->size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw Error("adam_step: parameter list changed between steps");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (state.m[i].size() != params[i]->size() || params[i]->grad.size() != params[i]->size()) {
      throw ShapeError("adam_step: moment shape does not match parameter " + params[i]->name);
    }
    for (T g : params[i]->grad) {
      if (!std::isfinite(static_cast<double>(g))) {
        throw NonFiniteError("adam_step: non-finite gradient in parameter " + params[i]->name + " at step " +
                             std::to_string(state.step + 1));
      }
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double g = static_cast<double>(p.grad[j]);
      m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
      v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
      const double update = lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + state.eps);
      p.value[j] = static_cast<T>(static_cast<double>(p.value[j]) - update);
    }
  }
}

template <class T>
void adam_step(const std::vector<Parameter<T>*>& params, AdamState<T>& state, double lr) {
  adam_step(std::span<Parameter<T>* const>(params.data(), params.size()), state, lr);
}

template <class T>
void zero_grad(const std::vector<Parameter<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

enum class Network { generator, discriminator };

// Constant learning rate until decay_start, then a linear ramp to zero over
// decay_len iterations.
struct LrSchedule {
  double base_lr_g = 2e-4;
  double base_lr_d = 1e-4;
  std::size_t decay_start = 200000;
  std::size_t decay_len = 200000;

  // Iteration counts divided by `scale` (rounded, at least 1 when non-zero).
  LrSchedule scaled(double scale) const {
    if (!(scale > 0.0)) throw Error("schedule scale must be > 0");
    auto div = [scale](std::size_t n) -> std::size_t {
      if (n == 0) return 0;
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) / scale)));
    };
    LrSchedule s = *this;
    s.decay_start = div(decay_start);
    s.decay_len = div(decay_len);
    return s;
  }
};

inline double lr_at(const LrSchedule& s, std::size_t iter, Network which) {
  const double base = which == Network::generator ? s.base_lr_g : s.base_lr_d;
  if (iter < s.decay_start) return base;
  const std::size_t into = iter - s.decay_start;
  if (into >= s.decay_len) return 0.0;
  return base * (1.0 - static_cast<double>(into) / static_cast<double>(s.decay_len));
}

}  // namespace dvc::nn
