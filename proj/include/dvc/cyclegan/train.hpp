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

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "dvc/align.hpp"
#include "dvc/cyclegan/augment.hpp"
#include "dvc/cyclegan/losses.hpp"
#include "dvc/cyclegan/model.hpp"
#include "dvc/nn/optim.hpp"

namespace dvc::cyclegan {

// Normalized [D, T] features of both domains. `pairs` lists parallel
// (source, target) utterances; when empty, every source utterance is one
// pairing-list entry and targets are drawn at random.
struct TrainingSet {
  std::vector<nn::Tensor<float>> source;
  std::vector<nn::Tensor<float>> target;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
};

struct LossRecord {
  std::size_t iteration = 0;
  std::string name;
  double value = 0.0;
};

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint_dir;
  std::function<void(std::size_t iteration, std::size_t total)> progress;
};

struct TrainResult {
  ModelPair<float> models;
  std::vector<LossRecord> curve;
  std::size_t iterations = 0;
};

class TrainingAborted : public Error {
 public:
  TrainingAborted(const std::string& what, std::size_t iter) : Error(what), iteration(iter) {}
  std::size_t iteration;
};

// Loss series named in the curve, in logging order.
inline std::vector<std::string> loss_series(const GanConfig& cfg) {
  std::vector<std::string> s{"generator_total", "adv_xy", "adv_yx", "cycle", "identity"};
  if (cfg.two_step) {
    s.push_back("adv2_x");
    s.push_back("adv2_y");
  }
  s.push_back("discriminator_total");
  return s;
}

inline void write_loss_curve(const std::filesystem::path& path, const std::vector<LossRecord>& curve) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "iteration,loss_name,value\n";
  out.precision(9);
  for (const auto& r : curve) out << r.iteration << ',' << r.name << ',' << r.value << '\n';
}

// Mean of one series over iterations [begin, end).
inline double series_mean(const std::vector<LossRecord>& curve, const std::string& name, std::size_t begin,
                          std::size_t end) {
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto& r : curve) {
    if (r.name == name && r.iteration >= begin && r.iteration < end) {
      acc += r.value;
      ++n;
    }
  }
  if (n == 0) throw Error("series_mean: no '" + name + "' values in range");
  return acc / static_cast<double>(n);
}

namespace detail {

inline align::FeatureSequence to_sequence(const nn::Tensor<float>& x) {
  const std::size_t D = x.dim(0), T = x.dim(1);
  align::FeatureSequence s(T, std::vector<double>(D));
  for (std::size_t d = 0; d < D; ++d)
    for (std::size_t t = 0; t < T; ++t) s[t][d] = x.values[d * T + t];
  return s;
}

inline nn::Tensor<float> from_sequence(const align::FeatureSequence& s) {
  const std::size_t T = s.size(), D = T ? s[0].size() : 0;
  nn::Tensor<float> x(nn::Shape{D, T});
  for (std::size_t t = 0; t < T; ++t)
    for (std::size_t d = 0; d < D; ++d) x.values[d * T + t] = static_cast<float>(s[t][d]);
  return x;
}

inline nn::Tensor<float> mask_tensor(const FrameMask& m) {
  return nn::Tensor<float>(nn::Shape{1, m.size()}, std::vector<float>(m.values.begin(), m.values.end()));
}

}  // namespace detail

// Source features warped onto the paired target's timeline.
inline nn::Tensor<float> warp_to_target(const nn::Tensor<float>& src, const nn::Tensor<float>& tgt) {
  const auto xs = detail::to_sequence(src);
  const auto path = align::dtw(xs, detail::to_sequence(tgt));
  return detail::from_sequence(align::apply_warp(xs, path, align::Axis::source));
}

inline void check_training_set(const GanConfig& cfg, const TrainingSet& set) {
  if (set.source.empty() || set.target.empty()) throw Error(cfg.name + ": empty training corpus");
  const std::size_t D = set.source.front().dim(0);
  for (const auto* side : {&set.source, &set.target}) {
    for (const auto& x : *side) {
      if (x.rank() != 2 || x.dim(0) != D || x.dim(1) == 0) throw Error(cfg.name + ": inconsistent or empty features");
    }
  }
  for (auto [s, t] : set.pairs) {
    if (s >= set.source.size() || t >= set.target.size()) throw Error(cfg.name + ": pair index out of range");
  }
  if (cfg.use_dtw && set.pairs.empty()) throw Error(cfg.name + ": DTW needs parallel pairs");
}

inline TrainResult train(const GanConfig& cfg_in, const TrainingSet& set, const FeatureStats& stats,
                         const TrainOptions& opt = {}) {
  const GanConfig cfg = cfg_in.base();
  cfg.validate();
  check_training_set(cfg, set);
  const std::size_t D = set.source.front().dim(0);

  std::mt19937_64 init_rng(cfg.seed);
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  TrainResult res{ModelPair<float>(cfg, D), {}, 0};
  auto& m = res.models;
  m.init(init_rng);
  const auto gen_params = m.generator_parameters();
  const auto disc_params = m.discriminator_parameters();
  const auto all_params = m.parameters();
  nn::AdamState<float> gen_state, disc_state;

  std::vector<nn::Tensor<float>> warped;
  if (cfg.use_dtw) {
    for (auto [s, t] : set.pairs) warped.push_back(warp_to_target(set.source[s], set.target[t]));
  }
  const std::size_t entries = set.pairs.empty() ? set.source.size() : set.pairs.size();
  std::vector<std::size_t> order(entries);
  std::iota(order.begin(), order.end(), 0);

  const std::size_t total_iters = cfg.total_iterations(entries);
  const auto schedule = cfg.scaled_schedule();
  const std::size_t L = cfg.segment_len;
  const auto ones = all_ones_mask(L);
  const auto ones_t = detail::mask_tensor(ones);

  using V = nn::Var<float>;
  auto gen_input = [&](nn::Tape<float>& t, V v, const FrameMask& mask) {
    return cfg.fif_da ? nn::concat(v, t.constant(detail::mask_tensor(mask)), 0) : v;
  };
  auto log = [&](std::size_t it, const char* name, double v) { res.curve.push_back({it, name, v}); };

  auto save = [&](const std::string& stem, std::size_t it) {
    if (!opt.checkpoint_dir) return;
    std::filesystem::create_directories(*opt.checkpoint_dir);
    save_model(*opt.checkpoint_dir / stem, m, stats, {{"iteration", it}});
  };

  std::vector<std::vector<float>> snapshot(all_params.size());
  for (std::size_t it = 0; it < total_iters; ++it) {
    const std::size_t pos = it % entries;
    if (pos == 0) std::shuffle(order.begin(), order.end(), rng);
    const std::size_t e = order[pos];
    nn::Tensor<float> x_seg, y_seg;
    if (cfg.use_dtw) {
      const auto& y_full = set.target[set.pairs[e].second];
      const std::size_t start = sample_start(y_full.dim(1), L, rng);
      x_seg = crop_frames(warped[e], start, L);
      y_seg = crop_frames(y_full, start, L);
    } else {
      const std::size_t si = set.pairs.empty() ? e : set.pairs[e].first;
      const std::size_t ti = std::uniform_int_distribution<std::size_t>(0, set.target.size() - 1)(rng);
      x_seg = sample_segment(set.source[si], L, rng);
      y_seg = sample_segment(set.target[ti], L, rng);
    }
    const FrameMask mx = cfg.fif_da ? sample_frame_mask(L, rng) : ones;
    const FrameMask my = cfg.fif_da ? sample_frame_mask(L, rng) : ones;

    for (std::size_t i = 0; i < all_params.size(); ++i) snapshot[i] = all_params[i]->value.values;
    const char* stage = "generator";
    try {
      const double lr_g = nn::lr_at(schedule, it, nn::Network::generator);
      const double lr_d = nn::lr_at(schedule, it, nn::Network::discriminator);

      nn::Tensor<float> fake_y_v, fake_x_v, cyc_x_v, cyc_y_v;
      {
        nn::Tape<float> t;
        const V x = t.constant(x_seg), y = t.constant(y_seg);
        const V x_in = gen_input(t, cfg.fif_da ? t.constant(apply_frame_mask(x_seg, mx)) : x, mx);
        const V y_in = gen_input(t, cfg.fif_da ? t.constant(apply_frame_mask(y_seg, my)) : y, my);
        const V fake_y = m.G(t, x_in);
        const V cyc_x = m.F(t, gen_input(t, fake_y, ones));
        const V fake_x = m.F(t, y_in);
        const V cyc_y = m.G(t, gen_input(t, fake_x, ones));
        LossTerms<float> terms{generator_adversarial_loss(m.DY(t, fake_y)),
                               generator_adversarial_loss(m.DX(t, fake_x)),
                               cycle_loss(x, cyc_x, y, cyc_y, cfg.cycle_norm),
                               std::nullopt,
                               std::nullopt,
                               std::nullopt};
        if (identity_active(cfg, it) && cfg.lambda_id > 0.0) {
          const V g_y = m.G(t, gen_input(t, y, ones));
          const V f_x = m.F(t, gen_input(t, x, ones));
          terms.identity = identity_loss(x, f_x, y, g_y);
        }
        if (cfg.two_step) {
          terms.adv2_x = generator_adversarial_loss((*m.DX2)(t, cyc_x));
          terms.adv2_y = generator_adversarial_loss((*m.DY2)(t, cyc_y));
        }
        const V total = total_loss(terms, cfg, it);
        nn::zero_grad(all_params);
        t.backward(total);
        nn::adam_step(gen_params, gen_state, lr_g);

        log(it, "generator_total", total.value().item());
        log(it, "adv_xy", terms.adv_xy.value().item());
        log(it, "adv_yx", terms.adv_yx.value().item());
        log(it, "cycle", terms.cycle.value().item());
        log(it, "identity", terms.identity ? terms.identity->value().item() : 0.0);
        if (cfg.two_step) {
          log(it, "adv2_x", terms.adv2_x->value().item());
          log(it, "adv2_y", terms.adv2_y->value().item());
        }
        fake_y_v = fake_y.value();
        fake_x_v = fake_x.value();
        cyc_x_v = cyc_x.value();
        cyc_y_v = cyc_y.value();
      }
      stage = "discriminator";
      {
        nn::Tape<float> t;
        const V x = t.constant(x_seg), y = t.constant(y_seg);
        V loss = nn::add(adversarial_loss(m.DY(t, y), m.DY(t, t.constant(fake_y_v)), Side::discriminator),
                         adversarial_loss(m.DX(t, x), m.DX(t, t.constant(fake_x_v)), Side::discriminator));
        if (cfg.two_step) {
          loss = nn::add(loss, second_adversarial_loss(cfg, (*m.DX2)(t, x), (*m.DX2)(t, t.constant(cyc_x_v)),
                                                       Side::discriminator));
          loss = nn::add(loss, second_adversarial_loss(cfg, (*m.DY2)(t, y), (*m.DY2)(t, t.constant(cyc_y_v)),
                                                       Side::discriminator));
        }
        nn::zero_grad(disc_params);
        t.backward(loss);
        nn::adam_step(disc_params, disc_state, lr_d);
        log(it, "discriminator_total", loss.value().item());
      }
    } catch (const NonFiniteError& err) {
      for (std::size_t i = 0; i < all_params.size(); ++i) all_params[i]->value.values = snapshot[i];
      save("last_good", it);
      throw TrainingAborted(cfg.name + ": non-finite value in the " + std::string(stage) + " step at iteration " +
                                std::to_string(it) + " (" + err.what() + ")",
                            it);
    }
    res.iterations = it + 1;
    if (cfg.checkpoint_every && (it + 1) % cfg.checkpoint_every == 0 && it + 1 < total_iters) save("latest", it + 1);
    if (opt.progress) opt.progress(it + 1, total_iters);
  }
  save("model", res.iterations);
  return res;
}

}  // namespace dvc::cyclegan
