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
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvc/error.hpp"
#include "dvc/hash.hpp"
#include "dvc/nn/optim.hpp"

namespace dvc::cyclegan {

enum class CycleNorm { l1, l2 };

inline const char* to_string(CycleNorm n) { return n == CycleNorm::l1 ? "l1" : "l2"; }

inline CycleNorm parse_cycle_norm(const std::string& s) {
  if (s == "l1" || s == "L1") return CycleNorm::l1;
  if (s == "l2" || s == "L2") return CycleNorm::l2;
  throw Error("unknown cycle norm '" + s + "' (expected l1 or l2)");
}

struct GanConfig {
  std::string name = "cyclegan-vc";
  CycleNorm cycle_norm = CycleNorm::l1;
  bool two_step = false;
  bool use_dtw = false;
  bool fif_da = false;
  bool ts_input = false;
  double lambda_cycle = 10.0;
  double lambda_id = 5.0;
  std::size_t id_zero_after = 10000;
  std::size_t segment_len = 128;
  std::size_t batch_size = 1;
  std::size_t epochs = 1000;
  nn::LrSchedule schedule;
  std::uint64_t seed = 0;
  // Divides every iteration count (epochs x pairs, schedule, id_zero_after).
  double scale = 1.0;
  // Fixed iteration budget; 0 derives it from epochs.
  std::size_t iterations = 0;
  std::size_t hidden = 16;
  std::size_t residual_blocks = 2;
  std::size_t disc_hidden = 16;
  std::size_t checkpoint_every = 0;

  void validate() const {
    if (segment_len < 1) throw Error(name + ": segment_len must be >= 1");
    if (!(lambda_cycle >= 0.0) || !(lambda_id >= 0.0)) throw Error(name + ": lambdas must be >= 0");
    if (batch_size != 1) throw Error(name + ": only batch_size = 1 is supported");
    if (!(scale > 0.0) || !std::isfinite(scale)) throw Error(name + ": scale must be > 0");
    if (epochs == 0 && iterations == 0) throw Error(name + ": need epochs or iterations");
    if (hidden < 1 || disc_hidden < 1) throw Error(name + ": network widths must be >= 1");
    if (!(schedule.base_lr_g >= 0.0) || !(schedule.base_lr_d >= 0.0)) throw Error(name + ": learning rates must be >= 0");
  }

  std::size_t scaled(std::size_t n) const {
    if (n == 0) return 0;
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) / scale)));
  }

  std::size_t total_iterations(std::size_t pairs) const {
    if (iterations) return iterations;
    return scaled(epochs * std::max<std::size_t>(pairs, 1));
  }
  std::size_t scaled_id_zero_after() const { return scaled(id_zero_after); }
  nn::LrSchedule scaled_schedule() const { return schedule.scaled(scale); }

  // The configuration a +TS cell trains with: identical except for the flag.
  GanConfig base() const {
    GanConfig b = *this;
    b.ts_input = false;
    constexpr std::string_view suffix = "+ts";
    if (b.name.size() > suffix.size() && b.name.ends_with(suffix)) b.name.resize(b.name.size() - suffix.size());
    return b;
  }
};

inline nlohmann::json to_json(const GanConfig& c) {
  return {{"name", c.name},
          {"cycle_norm", to_string(c.cycle_norm)},
          {"two_step", c.two_step},
          {"use_dtw", c.use_dtw},
          {"fif_da", c.fif_da},
          {"ts_input", c.ts_input},
          {"lambda_cycle", c.lambda_cycle},
          {"lambda_id", c.lambda_id},
          {"id_zero_after", c.id_zero_after},
          {"segment_len", c.segment_len},
          {"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"base_lr_g", c.schedule.base_lr_g},
          {"base_lr_d", c.schedule.base_lr_d},
          {"decay_start", c.schedule.decay_start},
          {"decay_len", c.schedule.decay_len},
          {"seed", c.seed},
          {"scale", c.scale},
          {"iterations", c.iterations},
          {"hidden", c.hidden},
          {"residual_blocks", c.residual_blocks},
          {"disc_hidden", c.disc_hidden},
          {"checkpoint_every", c.checkpoint_every}};
}

// Applies the keys present in `j` on top of `c`; unknown keys are an error.
inline GanConfig apply_overrides(GanConfig c, const nlohmann::json& j) {
  for (const auto& [key, v] : j.items()) {
    if (key == "name") c.name = v.get<std::string>();
    else if (key == "cycle_norm") c.cycle_norm = parse_cycle_norm(v.get<std::string>());
    else if (key == "two_step") c.two_step = v.get<bool>();
    else if (key == "use_dtw") c.use_dtw = v.get<bool>();
    else if (key == "fif_da") c.fif_da = v.get<bool>();
    else if (key == "ts_input") c.ts_input = v.get<bool>();
    else if (key == "lambda_cycle") c.lambda_cycle = v.get<double>();
    else if (key == "lambda_id") c.lambda_id = v.get<double>();
    else if (key == "id_zero_after") c.id_zero_after = v.get<std::size_t>();
    else if (key == "segment_len") c.segment_len = v.get<std::size_t>();
    else if (key == "batch_size") c.batch_size = v.get<std::size_t>();
    else if (key == "epochs") c.epochs = v.get<std::size_t>();
    else if (key == "base_lr_g") c.schedule.base_lr_g = v.get<double>();
    else if (key == "base_lr_d") c.schedule.base_lr_d = v.get<double>();
    else if (key == "decay_start") c.schedule.decay_start = v.get<std::size_t>();
    else if (key == "decay_len") c.schedule.decay_len = v.get<std::size_t>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "scale") c.scale = v.get<double>();
    else if (key == "iterations") c.iterations = v.get<std::size_t>();
    else if (key == "hidden") c.hidden = v.get<std::size_t>();
    else if (key == "residual_blocks") c.residual_blocks = v.get<std::size_t>();
    else if (key == "disc_hidden") c.disc_hidden = v.get<std::size_t>();
    else if (key == "checkpoint_every") c.checkpoint_every = v.get<std::size_t>();
    else throw Error("unknown GanConfig key '" + key + "'");
  }
  return c;
}

inline GanConfig from_json(const nlohmann::json& j) { return apply_overrides(GanConfig{}, j); }

inline std::string config_hash(const GanConfig& c) { return hash_string(to_json(c).dump()); }

// ---------------------------------------------------------------------------
// Variant registry

inline GanConfig cyclegan_vc() { return GanConfig{}; }

inline GanConfig discogan() {
  GanConfig c;
  c.name = "discogan";
  c.cycle_norm = CycleNorm::l2;
  c.use_dtw = true;
  return c;
}

inline GanConfig cyclegan_vc_dtw() {
  GanConfig c;
  c.name = "cyclegan-vc+dtw";
  c.use_dtw = true;
  return c;
}

inline GanConfig cyclegan_vc_2step() {
  GanConfig c;
  c.name = "cyclegan-vc+2step";
  c.two_step = true;
  return c;
}

inline GanConfig cyclegan_vc_dtw_2step() {
  GanConfig c;
  c.name = "cyclegan-vc+dtw+2step";
  c.two_step = true;
  c.use_dtw = true;
  return c;
}

inline GanConfig maskcyclegan_vc() {
  GanConfig c;
  c.name = "maskcyclegan-vc";
  c.two_step = true;
  c.fif_da = true;
  c.segment_len = 64;
  c.epochs = 300;
  c.schedule.decay_start = 10000;
  return c;
}

// The six trained models in comparison-table order.
inline std::vector<GanConfig> base_variants() {
  return {cyclegan_vc(), discogan(), cyclegan_vc_dtw(), cyclegan_vc_2step(), cyclegan_vc_dtw_2step(),
          maskcyclegan_vc()};
}

inline GanConfig with_ts(GanConfig c) {
  c.ts_input = true;
  c.name += "+ts";
  return c;
}

// Rows that involve no conversion: the (denoised) dysarthric input itself.
inline const std::vector<std::string>& reference_rows() {
  static const std::vector<std::string> rows{"dysarthric", "dysarthric+ts"};
  return rows;
}

// The 12 ablation cells: six models without time stretching, then the same
// six with time-stretched input.
inline std::vector<GanConfig> ablation_variants() {
  auto out = base_variants();
  for (const auto& c : base_variants()) out.push_back(with_ts(c));
  return out;
}

inline std::vector<std::string> variant_names() {
  std::vector<std::string> names;
  for (const auto& c : ablation_variants()) names.push_back(c.name);
  for (const auto& r : reference_rows()) names.push_back(r);
  return names;
}

inline bool is_reference_row(const std::string& name) {
  const auto& r = reference_rows();
  return std::find(r.begin(), r.end(), name) != r.end();
}

inline GanConfig find_variant(const std::string& name) {
  for (const auto& c : ablation_variants()) {
    if (c.name == name) return c;
  }
  std::string valid;
  for (const auto& c : ablation_variants()) valid += (valid.empty() ? "" : ", ") + c.name;
  throw Error("unknown variant '" + name + "'; valid names: " + valid);
}

}  // namespace dvc::cyclegan
