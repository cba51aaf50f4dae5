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

#include "dvc/align.hpp"
#include "dvc/cyclegan/augment.hpp"
#include "dvc/cyclegan/model.hpp"
#include "dvc/dsp.hpp"

namespace dvc::cyclegan {

enum class Direction { x2y, y2x };

inline Direction parse_direction(const std::string& s) {
  if (s == "x2y") return Direction::x2y;
  if (s == "y2x") return Direction::y2x;
  throw Error("unknown direction '" + s + "' (expected x2y or y2x)");
}

struct ConvertOptions {
  Direction direction = Direction::x2y;
  // Stretch the input to target_duration seconds before analysis.
  bool time_stretch = false;
  double target_duration = 0.0;
  int griffin_lim_iters = 60;
  std::optional<F0Stats> source_f0;
  std::optional<F0Stats> target_f0;
  bool report_f0 = false;
};

struct Conversion {
  Waveform audio;
  MelSpectrogram input_mel;
  MelSpectrogram output_mel;
  double stretch_rate = 1.0;
  std::optional<F0Track> f0;
};

// Runs one generator on normalized [D, T] features.
inline nn::Tensor<float> convert_features(ModelPair<float>& m, const nn::Tensor<float>& x, Direction dir) {
  nn::Tape<float> t;
  auto in = t.constant(x);
  if (m.cfg.fif_da) in = nn::concat(in, t.constant(nn::Tensor<float>(nn::Shape{1, x.dim(1)}, 1.0f)), 0);
  auto& gen = dir == Direction::x2y ? m.G : m.F;
  return gen(t, in).value();
}

inline Conversion convert(ModelPair<float>& m, const FeatureStats& stats, const Waveform& utt, const MelConfig& mel_cfg,
                          const ConvertOptions& opt = {}) {
  Conversion out;
  Waveform input = utt;
  if (opt.time_stretch) {
    if (!(opt.target_duration > 0.0)) throw Error("convert: time stretching needs a target duration");
    out.stretch_rate = align::stretch_rate_for_target(utt.duration(), opt.target_duration);
    input = time_stretch(utt, out.stretch_rate, mel_cfg.stft());
  }
  out.input_mel = mel_spectrogram(input, mel_cfg);
  if (out.input_mel.num_frames() == 0) throw Error("convert: utterance shorter than one analysis frame");
  const auto y = convert_features(m, normalize(out.input_mel, stats), opt.direction);
  out.output_mel = denormalize(y, stats, mel_cfg, input.size());
  out.audio = griffin_lim(mel_to_linear(out.output_mel), opt.griffin_lim_iters);
  if (opt.report_f0) {
    if (!opt.source_f0 || !opt.target_f0 || !(opt.source_f0->sigma > 0.0)) {
      warn("convert: F0 statistics missing or degenerate; skipping F0 conversion");
    } else {
      out.f0 = convert_f0(estimate_f0(input), *opt.source_f0, *opt.target_f0);
    }
  }
  return out;
}

}  // namespace dvc::cyclegan
