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
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvc/dsp.hpp"
#include "dvc/error.hpp"
#include "dvc/eval/per.hpp"
#include "dvc/synth.hpp"
#include "dvc/waveform.hpp"

// Desk-scale stand-in for a phoneme recognizer: every frame takes the label
// of the nearest mel prototype, runs are collapsed and silence is dropped.
// Its error rates are only meaningful relative to each other on the toy
// corpus.

namespace dvc::eval {

inline constexpr const char* kSilence = "sil";

struct PhonemeTemplate {
  std::string symbol;
  std::vector<double> prototype;  // centroid of frame_shape() vectors
};

struct ToneInventory {
  int sample_rate = 16000;
  double amplitude = 0.3;
  std::vector<double> harmonics{1.0};
  std::vector<corpus::Phoneme> phonemes;
  double silence_noise = 0.0;
};

inline ToneInventory inventory_from_json(const nlohmann::json& j) {
  ToneInventory inv;
  inv.sample_rate = j.at("sample_rate").get<int>();
  inv.amplitude = j.at("amplitude").get<double>();
  inv.harmonics = j.at("harmonics").get<std::vector<double>>();
  for (const auto& p : j.at("phonemes")) inv.phonemes.push_back({p.at("symbol").get<std::string>(), p.at("hz").get<double>()});
  inv.silence_noise = j.value("silence_noise", 0.0);
  if (inv.phonemes.empty()) throw Error("tone inventory has no phonemes");
  return inv;
}

inline ToneInventory read_inventory(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open inventory " + path.string());
  return inventory_from_json(nlohmann::json::parse(in));
}

struct RecognizerConfig {
  MelConfig mel;
  std::size_t min_run = 3;   // shorter label runs are discarded
  double silence_db = 35.0;  // frames this far below the loudest frame are silence
  double range_db = 30.0;    // each frame is clipped this far below its own peak
};

// Log-mel frame clipped to `range_db` below its peak, then mean-removed.
inline std::vector<double> frame_shape(const std::vector<double>& frame, double range_db) {
  const double peak = *std::max_element(frame.begin(), frame.end());
  const double lo = peak - range_db * std::log(10.0) / 10.0;
  std::vector<double> out(frame.size());
  double mean = 0.0;
  for (std::size_t i = 0; i < frame.size(); ++i) {
    out[i] = std::max(frame[i], lo);
    mean += out[i];
  }
  mean /= static_cast<double>(frame.size());
  for (double& v : out) v -= mean;
  return out;
}

// Centroid of the frame shapes, skipping `edge` frames at each end.
inline std::vector<double> mel_prototype(const MelSpectrogram& m, double range_db, std::size_t edge = 2) {
  if (m.num_frames() <= 2 * edge) throw Error("mel_prototype: signal too short");
  std::vector<double> c(m.n_mels(), 0.0);
  const std::size_t n = m.num_frames() - 2 * edge;
  for (std::size_t t = edge; t < m.num_frames() - edge; ++t) {
    const auto f = frame_shape(m.frames[t], range_db);
    for (std::size_t d = 0; d < c.size(); ++d) c[d] += f[d] / static_cast<double>(n);
  }
  return c;
}

// One prototype per inventory tone plus a silence prototype from the
// inventory's background noise level (digital silence when it is zero).
inline std::vector<PhonemeTemplate> build_templates(const ToneInventory& inv, const RecognizerConfig& cfg = {}) {
  const auto& mel = cfg.mel;
  if (inv.sample_rate != mel.sample_rate) throw Error("build_templates: inventory and mel sample rates differ");
  const auto n = static_cast<std::size_t>(inv.sample_rate / 2);
  std::vector<PhonemeTemplate> out;
  for (const auto& p : inv.phonemes) {
    const Waveform w(corpus::phoneme_tone(p.hz, n, inv.amplitude, inv.sample_rate, inv.harmonics), inv.sample_rate);
    out.push_back({p.symbol, mel_prototype(mel_spectrogram(w, mel), cfg.range_db)});
  }
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g(0.0, inv.silence_noise);
  std::vector<double> s(n, 0.0);
  if (inv.silence_noise > 0.0) {
    for (double& v : s) v = g(rng);
  }
  out.push_back({kSilence, mel_prototype(mel_spectrogram(Waveform(std::move(s), inv.sample_rate), mel), cfg.range_db)});
  return out;
}

inline std::vector<std::string> label_frames(const MelSpectrogram& m, const std::vector<PhonemeTemplate>& templates,
                                             const RecognizerConfig& cfg) {
  if (templates.empty()) throw Error("toy_recognizer: empty template inventory");
  std::vector<double> energy(m.num_frames());
  double loudest = -std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < m.num_frames(); ++t) {
    double e = 0.0;
    for (double v : m.frames[t]) e += std::exp(v);
    energy[t] = std::log(e);
    loudest = std::max(loudest, energy[t]);
  }
  const double gate = loudest - cfg.silence_db * std::log(10.0) / 10.0;
  std::vector<std::string> labels(m.num_frames());
  for (std::size_t t = 0; t < m.num_frames(); ++t) {
    if (energy[t] < gate) {
      labels[t] = kSilence;
      continue;
    }
    const auto f = frame_shape(m.frames[t], cfg.range_db);
    double best = std::numeric_limits<double>::infinity();
    for (const auto& tp : templates) {
      if (tp.prototype.size() != f.size()) throw Error("toy_recognizer: template " + tp.symbol + " has wrong size");
      double d = 0.0;
      for (std::size_t i = 0; i < f.size(); ++i) d += (f[i] - tp.prototype[i]) * (f[i] - tp.prototype[i]);
      if (d < best) {
        best = d;
        labels[t] = tp.symbol;
      }
    }
  }
  return labels;
}

// Collapses runs, discards runs shorter than `min_run`, merges neighbours
// that became adjacent, then removes silence.
inline std::vector<std::string> collapse_labels(const std::vector<std::string>& labels, std::size_t min_run) {
  std::vector<std::pair<std::string, std::size_t>> runs;
  for (const auto& l : labels) {
    if (!runs.empty() && runs.back().first == l) {
      ++runs.back().second;
    } else {
      runs.emplace_back(l, 1);
    }
  }
  std::vector<std::string> kept;
  for (const auto& [l, n] : runs) {
    if (n < min_run) continue;
    if (kept.empty() || kept.back() != l) kept.push_back(l);
  }
  std::vector<std::string> out;
  for (auto& l : kept) {
    if (l != kSilence) out.push_back(std::move(l));
  }
  return out;
}

inline PhonemeSequence toy_recognizer(const Waveform& w, const std::vector<PhonemeTemplate>& templates,
                                      const RecognizerConfig& cfg = {}, std::string utterance_id = {}) {
  if (w.sample_rate != cfg.mel.sample_rate) throw Error("toy_recognizer: sample rate mismatch");
  PhonemeSequence out{std::move(utterance_id), {}};
  if (w.size() == 0) return out;
  const auto m = mel_spectrogram(w, cfg.mel);
  out.tokens = collapse_labels(label_frames(m, templates, cfg), cfg.min_run);
  return out;
}

}  // namespace dvc::eval
