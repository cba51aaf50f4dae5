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

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "dvc/error.hpp"
#include "dvc/nn/tensor.hpp"

// Gated-convolution generator and strided-convolution discriminator, sized
// for desk-scale runs. Inputs are [channels, frames] feature maps.
// No normalization over time in either network, so time-invariant spectral
// content reaches every layer.

namespace dvc::nn {

template <class T>
class Conv1d {
 public:
  Conv1d() = default;
  Conv1d(std::string name, std::size_t in, std::size_t out, std::size_t kernel, std::size_t stride = 1)
      : weight(name + ".weight", Shape{out, in, kernel}),
        bias(name + ".bias", Shape{out}),
        stride_(stride),
        pad_(kernel / 2) {}

  void init(std::mt19937_64& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(weight.value.dim(1) * weight.value.dim(2)));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (auto& w : weight.value.values) w = static_cast<T>(u(rng));
    for (auto& b : bias.value.values) b = static_cast<T>(u(rng));
  }

  void zero() {
    std::fill(weight.value.values.begin(), weight.value.values.end(), T(0));
    std::fill(bias.value.values.begin(), bias.value.values.end(), T(0));
  }

  Var<T> operator()(Tape<T>& tape, Var<T> x) {
    return conv1d(x, tape.parameter(weight), tape.parameter(bias), stride_, pad_);
  }

  void collect(std::vector<Parameter<T>*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
  }

  Parameter<T> weight;
  Parameter<T> bias;

 private:
  std::size_t stride_ = 1;
  std::size_t pad_ = 0;
};

struct GeneratorConfig {
  std::size_t features = 80;
  std::size_t hidden = 32;
  std::size_t residual_blocks = 2;
  // Extra input channel carrying the fill-in-the-frame mask.
  bool mask_channel = false;
  // Adds the feature part of the input to the output.
  bool skip = false;

  std::size_t input_channels() const { return features + (mask_channel ? 1 : 0); }
};

// With `skip`, output = x + body(input) where x is the feature part of the
// input, and zeroing the output layer yields the identity map.
template <class T>
class Generator {
 public:
  Generator() = default;
  Generator(std::string name, const GeneratorConfig& cfg) : cfg_(cfg) {
    const std::size_t h = cfg.hidden;
    in_ = Conv1d<T>(name + ".in", cfg.input_channels(), 2 * h, 5);
    down_ = Conv1d<T>(name + ".down", h, 4 * h, 5, 2);
    for (std::size_t i = 0; i < cfg.residual_blocks; ++i) {
      const auto n = name + ".res" + std::to_string(i);
      res_a_.emplace_back(n + ".a", 2 * h, 4 * h, 3);
      res_b_.emplace_back(n + ".b", 2 * h, 2 * h, 3);
    }
    up_ = Conv1d<T>(name + ".up", 2 * h, 2 * h, 5);
    out_ = Conv1d<T>(name + ".out", h, cfg.features, 5);
  }

  const GeneratorConfig& config() const { return cfg_; }

  void init(std::mt19937_64& rng) {
    for (auto* c : layers()) c->init(rng);
  }

  void init_identity(std::mt19937_64& rng) {
    if (!cfg_.skip) throw Error("generator: identity init needs the skip connection");
    init(rng);
    out_.zero();
  }

  // input: [input_channels, frames] -> [features, frames]
  Var<T> operator()(Tape<T>& tape, Var<T> input) {
    const auto& s = input.shape();
    if (s.size() != 2 || s[0] != cfg_.input_channels() || s[1] == 0) {
      throw ShapeError("generator: expected [" + std::to_string(cfg_.input_channels()) + ", T] input, got " +
                       shape_string(s));
    }
    const std::size_t frames = s[1];
    Var<T> x = frames % 2 ? pad(input, 1, 0, 1, PadMode::edge) : input;
    Var<T> h = glu(in_(tape, x));
    h = glu(down_(tape, h));
    for (std::size_t i = 0; i < res_a_.size(); ++i) {
      Var<T> r = glu(res_a_[i](tape, h));
      h = add(h, res_b_[i](tape, r));
    }
    h = glu(up_(tape, upsample(h, std::size_t{2})));
    Var<T> y = out_(tape, h);
    if (cfg_.skip) y = add(cfg_.mask_channel ? slice(x, 0, 0, cfg_.features) : x, y);
    return frames % 2 ? slice(y, 1, 0, frames) : y;
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    for (auto* c : layers()) c->collect(out);
    return out;
  }

 private:
  std::vector<Conv1d<T>*> layers() {
    std::vector<Conv1d<T>*> out{&in_, &down_};
    for (std::size_t i = 0; i < res_a_.size(); ++i) {
      out.push_back(&res_a_[i]);
      out.push_back(&res_b_[i]);
    }
    out.push_back(&up_);
    out.push_back(&out_);
    return out;
  }

  GeneratorConfig cfg_;
  Conv1d<T> in_, down_, up_, out_;
  std::vector<Conv1d<T>> res_a_, res_b_;
};

struct DiscriminatorConfig {
  std::size_t features = 80;
  std::size_t hidden = 32;
};

// Patch classifier: two stride-2 convolutions and a 1-channel projection.
// Output is a [1, ceil(ceil(T/2)/2)] map of scores.
template <class T>
class Discriminator {
 public:
  Discriminator() = default;
  Discriminator(std::string name, const DiscriminatorConfig& cfg) : cfg_(cfg) {
    c1_ = Conv1d<T>(name + ".c1", cfg.features, cfg.hidden, 3, 2);
    c2_ = Conv1d<T>(name + ".c2", cfg.hidden, 2 * cfg.hidden, 3, 2);
    c3_ = Conv1d<T>(name + ".c3", 2 * cfg.hidden, 1, 3);
  }

  void init(std::mt19937_64& rng) {
    c1_.init(rng);
    c2_.init(rng);
    c3_.init(rng);
  }

  Var<T> operator()(Tape<T>& tape, Var<T> x) {
    const auto& s = x.shape();
    if (s.size() != 2 || s[0] != cfg_.features) {
      throw ShapeError("discriminator: expected [" + std::to_string(cfg_.features) + ", T] input, got " +
                       shape_string(s));
    }
    Var<T> h = leaky_relu(c1_(tape, x), T(0.2));
    h = leaky_relu(c2_(tape, h), T(0.2));
    return c3_(tape, h);
  }

  std::vector<Parameter<T>*> parameters() {
    std::vector<Parameter<T>*> out;
    c1_.collect(out);
    c2_.collect(out);
    c3_.collect(out);
    return out;
  }

 private:
  DiscriminatorConfig cfg_;
  Conv1d<T> c1_, c2_, c3_;
};

}  // namespace dvc::nn
