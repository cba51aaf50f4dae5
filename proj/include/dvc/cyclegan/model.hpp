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
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvc/cyclegan/config.hpp"
#include "dvc/dsp.hpp"
#include "dvc/nn/checkpoint.hpp"
#include "dvc/nn/layers.hpp"

namespace dvc::cyclegan {

// Feature normalization shared by both domains: a mean per band and one
// standard deviation pooled over all bands, so near-constant bands stay small.
struct FeatureStats {
  std::vector<double> mean;
  std::vector<double> std;

  std::size_t size() const { return mean.size(); }
};

inline FeatureStats compute_feature_stats(const std::vector<const MelSpectrogram*>& mels) {
  if (mels.empty()) throw Error("feature stats: no spectrograms");
  const std::size_t D = mels.front()->n_mels();
  FeatureStats s{std::vector<double>(D, 0.0), std::vector<double>(D, 0.0)};
  std::size_t n = 0;
  for (const auto* m : mels) {
    for (const auto& f : m->frames) {
      if (f.size() != D) throw Error("feature stats: inconsistent band count");
      for (std::size_t d = 0; d < D; ++d) s.mean[d] += f[d];
      ++n;
    }
  }
  if (n == 0) throw Error("feature stats: all spectrograms are empty");
  for (double& v : s.mean) v /= static_cast<double>(n);
  for (const auto* m : mels) {
    for (const auto& f : m->frames) {
      for (std::size_t d = 0; d < D; ++d) s.std[d] += (f[d] - s.mean[d]) * (f[d] - s.mean[d]);
    }
  }
  double pooled = 0.0;
  for (double v : s.std) pooled += v;
  pooled = std::max(std::sqrt(pooled / static_cast<double>(n * D)), 1e-3);
  for (double& v : s.std) v = pooled;
  return s;
}

// [D, T] normalized tensor from a T x D spectrogram.
inline nn::Tensor<float> normalize(const MelSpectrogram& m, const FeatureStats& s) {
  const std::size_t D = m.n_mels(), T = m.num_frames();
  if (s.size() != D) throw Error("normalize: statistics have " + std::to_string(s.size()) + " bands, features " + std::to_string(D));
  nn::Tensor<float> out(nn::Shape{D, T});
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t d = 0; d < D; ++d) out.values[d * T + t] = static_cast<float>((m.frames[t][d] - s.mean[d]) / s.std[d]);
  }
  return out;
}

inline MelSpectrogram denormalize(const nn::Tensor<float>& x, const FeatureStats& s, const MelConfig& cfg,
                                  std::size_t length) {
  const std::size_t D = x.dim(0), T = x.dim(1);
  if (s.size() != D) throw Error("denormalize: band count mismatch");
  MelSpectrogram m;
  m.config = cfg;
  m.length = length;
  m.frames.assign(T, std::vector<double>(D));
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t d = 0; d < D; ++d) m.frames[t][d] = static_cast<double>(x.values[d * T + t]) * s.std[d] + s.mean[d];
  }
  return m;
}

inline nlohmann::json to_json(const FeatureStats& s) { return {{"mean", s.mean}, {"std", s.std}}; }

inline FeatureStats feature_stats_from_json(const nlohmann::json& j) {
  return {j.at("mean").get<std::vector<double>>(), j.at("std").get<std::vector<double>>()};
}

// G: X -> Y, F: Y -> X, discriminators per domain, and the second pair of
// discriminators when two_step is on.
template <class T>
struct ModelPair {
  GanConfig cfg;
  std::size_t features = 0;
  nn::Generator<T> G, F;
  nn::Discriminator<T> DX, DY;
  std::optional<nn::Discriminator<T>> DX2, DY2;

  ModelPair(const GanConfig& c, std::size_t feature_dim) : cfg(c), features(feature_dim) {
    const nn::GeneratorConfig gc{feature_dim, c.hidden, c.residual_blocks, c.fif_da};
    const nn::DiscriminatorConfig dc{feature_dim, c.disc_hidden};
    G = nn::Generator<T>("G", gc);
    F = nn::Generator<T>("F", gc);
    DX = nn::Discriminator<T>("DX", dc);
    DY = nn::Discriminator<T>("DY", dc);
    if (c.two_step) {
      DX2.emplace("DX2", dc);
      DY2.emplace("DY2", dc);
    }
  }

  ModelPair(const ModelPair&) = delete;
  ModelPair& operator=(const ModelPair&) = delete;
  ModelPair(ModelPair&&) = default;

  bool has_second() const { return DX2.has_value(); }

  void init(std::mt19937_64& rng) {
    G.init(rng);
    F.init(rng);
    DX.init(rng);
    DY.init(rng);
    if (DX2) DX2->init(rng);
    if (DY2) DY2->init(rng);
  }

  std::vector<nn::Parameter<T>*> generator_parameters() {
    auto out = G.parameters();
    for (auto* p : F.parameters()) out.push_back(p);
    return out;
  }

  std::vector<nn::Parameter<T>*> discriminator_parameters() {
    auto out = DX.parameters();
    for (auto* p : DY.parameters()) out.push_back(p);
    if (DX2)
      for (auto* p : DX2->parameters()) out.push_back(p);
    if (DY2)
      for (auto* p : DY2->parameters()) out.push_back(p);
    return out;
  }

  std::vector<nn::Parameter<T>*> parameters() {
    auto out = generator_parameters();
    for (auto* p : discriminator_parameters()) out.push_back(p);
    return out;
  }
};

struct LoadedModel {
  ModelPair<float> models;
  FeatureStats stats;
  nlohmann::json meta;
};

inline void save_model(const std::filesystem::path& stem, ModelPair<float>& m, const FeatureStats& stats,
                       nlohmann::json meta = nlohmann::json::object()) {
  meta["config"] = to_json(m.cfg);
  meta["config_hash"] = config_hash(m.cfg);
  meta["features"] = m.features;
  meta["feature_stats"] = to_json(stats);
  nn::save_checkpoint(stem, m.parameters(), std::move(meta));
}

inline LoadedModel load_model(const std::filesystem::path& stem) {
  const auto js = nn::with_suffix(stem, ".json");
  std::ifstream in(js);
  if (!in) throw Error("cannot open model " + js.string());
  const auto meta = nlohmann::json::parse(in);
  const auto cfg = from_json(meta.at("config"));
  LoadedModel out{ModelPair<float>(cfg, meta.at("features").get<std::size_t>()),
                  feature_stats_from_json(meta.at("feature_stats")), {}};
  out.meta = nn::load_checkpoint(stem, out.models.parameters());
  return out;
}

}  // namespace dvc::cyclegan
