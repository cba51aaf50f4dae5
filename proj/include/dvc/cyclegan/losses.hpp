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

#include <optional>

#include "dvc/cyclegan/config.hpp"
#include "dvc/nn/layers.hpp"
#include "dvc/nn/tensor.hpp"

// Least-squares adversarial objectives and the reconstruction terms of the
// complete CycleGAN loss. Every function takes already-computed network
// outputs so the same code serves training and finite-difference checks.

namespace dvc::cyclegan {

using nn::Var;

enum class Side { generator, discriminator };

// discriminator: mean((D(real) - 1)^2) + mean(D(fake)^2)
// generator:     mean((D(fake) - 1)^2)   (d_real is ignored)
template <class T>
Var<T> adversarial_loss(Var<T> d_real, Var<T> d_fake, Side side) {
  if (side == Side::generator) return nn::l2_to(d_fake, T(1));
  return nn::add(nn::l2_to(d_real, T(1)), nn::l2_to(d_fake, T(0)));
}

template <class T>
Var<T> generator_adversarial_loss(Var<T> d_fake) {
  return nn::l2_to(d_fake, T(1));
}

// Convenience form running the discriminator on both batches.
template <class T>
Var<T> adversarial_loss(nn::Discriminator<T>& d, nn::Tape<T>& tape, Var<T> real, Var<T> fake, Side side) {
  if (side == Side::generator) return generator_adversarial_loss(d(tape, fake));
  return adversarial_loss(d(tape, real), d(tape, fake), side);
}

template <class T>
Var<T> cycle_loss(Var<T> x, Var<T> x_cyc, Var<T> y, Var<T> y_cyc, CycleNorm norm) {
  if (norm == CycleNorm::l1) return nn::add(nn::l1(x, x_cyc), nn::l1(y, y_cyc));
  return nn::add(nn::l2(x, x_cyc), nn::l2(y, y_cyc));
}

// mean |G(y) - y| + mean |F(x) - x|
template <class T>
Var<T> identity_loss(Var<T> x, Var<T> f_x, Var<T> y, Var<T> g_y) {
  return nn::add(nn::l1(g_y, y), nn::l1(f_x, x));
}

// Same arithmetic as adversarial_loss with real = x and fake = F(G(x)),
// scored by the second discriminator.
template <class T>
Var<T> second_adversarial_loss(const GanConfig& cfg, Var<T> d_real, Var<T> d_cycled, Side side) {
  if (!cfg.two_step) throw Error(cfg.name + ": second adversarial loss needs two_step enabled");
  return adversarial_loss(d_real, d_cycled, side);
}

// Generator-side terms of one iteration. The second adversarial terms are
// present exactly when two_step is on.
template <class T>
struct LossTerms {
  Var<T> adv_xy;  // L_GAN(G, D_Y)
  Var<T> adv_yx;  // L_GAN(F, D_X)
  Var<T> cycle;
  std::optional<Var<T>> identity;
  std::optional<Var<T>> adv2_x;
  std::optional<Var<T>> adv2_y;
};

inline bool identity_active(const GanConfig& cfg, std::size_t iter) { return iter < cfg.scaled_id_zero_after(); }

template <class T>
Var<T> total_loss(const LossTerms<T>& c, const GanConfig& cfg, std::size_t iter) {
  Var<T> total = nn::add(c.adv_xy, c.adv_yx);
  total = nn::add(total, nn::scale(c.cycle, static_cast<T>(cfg.lambda_cycle)));
  if (c.identity && identity_active(cfg, iter)) {
    total = nn::add(total, nn::scale(*c.identity, static_cast<T>(cfg.lambda_id)));
  }
  if (cfg.two_step) {
    if (!c.adv2_x || !c.adv2_y) throw Error(cfg.name + ": two_step needs both second adversarial terms");
    total = nn::add(total, nn::add(*c.adv2_x, *c.adv2_y));
  }
  return total;
}

}  // namespace dvc::cyclegan
