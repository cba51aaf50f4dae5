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
#include <cstdio>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvc/corpus.hpp"
#include "dvc/hash.hpp"
#include "dvc/wav.hpp"
#include "dvc/waveform.hpp"

// Two-domain toy corpus: "words" are sequences of harmonic tones, one tone
// per phoneme. Control speakers use the template frequencies; dysarthric
// speakers speak at a lower pitch and more slowly.

namespace dvc::corpus {

struct Phoneme {
  std::string symbol;
  double hz = 0.0;
};

inline const std::vector<Phoneme>& toy_phonemes() {
  static const std::vector<Phoneme> p{{"aa", 300.0}, {"iy", 350.0}, {"uw", 400.0}, {"eh", 450.0}, {"ow", 500.0}};
  return p;
}

inline const std::vector<double>& toy_harmonics() {
  static const std::vector<double> h{1.0, 0.4};
  return h;
}

struct SynthConfig {
  std::uint64_t seed = 7;
  std::size_t n_words = 12;
  std::vector<std::string> dysarthric{"D01", "D02", "D03", "D04"};
  std::vector<std::string> control{"C01"};
  int sample_rate = 16000;
  double lead_s = 0.8;
  double tail_s = 0.4;
  double control_phone_s = 0.12;
  double dysarthric_phone_s = 0.22;
  double duration_jitter = 0.15;
  double control_noise = 0.002;
  double dysarthric_noise = 0.002;
  double amplitude = 0.3;
  double dysarthric_pitch = 0.5;  // frequency ratio to the templates
};

struct SynthWord {
  std::string id;
  std::vector<std::string> phones;
};

// Harmonic tone with 10 ms raised-cosine edges.
inline std::vector<double> phoneme_tone(double hz, std::size_t n, double amplitude, int sr,
                                        const std::vector<double>& harmonics = toy_harmonics()) {
  std::vector<double> x(n, 0.0);
  const std::size_t ramp = std::min<std::size_t>(n / 2, static_cast<std::size_t>(0.01 * sr));
  for (std::size_t i = 0; i < n; ++i) {
    double v = 0.0;
    for (std::size_t h = 0; h < harmonics.size(); ++h) {
      v += harmonics[h] * std::sin(2.0 * std::numbers::pi * hz * static_cast<double>(h + 1) * static_cast<double>(i) / sr);
    }
    double env = 1.0;
    if (i < ramp) env = 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(ramp));
    if (i + ramp >= n) env = std::min(env, 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(n - 1 - i) / static_cast<double>(ramp)));
    x[i] = amplitude * env * v;
  }
  return x;
}

// Distinct words of 2-4 phonemes without immediate repeats.
inline std::vector<SynthWord> make_words(const SynthConfig& cfg) {
  std::mt19937_64 rng(cfg.seed);
  const auto& inv = toy_phonemes();
  std::uniform_int_distribution<std::size_t> len(2, 4), pick(0, inv.size() - 1);
  std::set<std::vector<std::string>> seen;
  std::vector<SynthWord> words;
  while (words.size() < cfg.n_words) {
    std::vector<std::string> phones;
    const std::size_t n = len(rng);
    while (phones.size() < n) {
      const auto& s = inv[pick(rng)].symbol;
      if (phones.empty() || phones.back() != s) phones.push_back(s);
    }
    if (!seen.insert(phones).second) continue;
    char id[16];
    std::snprintf(id, sizeof id, "W%02zu", words.size() + 1);
    words.push_back({id, std::move(phones)});
  }
  return words;
}

struct SpeakerVoice {
  double pitch = 1.0;     // multiplies template frequencies
  double phone_s = 0.12;  // mean phoneme duration
  double noise = 0.001;   // background noise standard deviation
};

inline Waveform synth_utterance(const std::vector<std::string>& phones, const SpeakerVoice& v, const SynthConfig& cfg,
                                std::mt19937_64& rng) {
  const int sr = cfg.sample_rate;
  std::uniform_real_distribution<double> jitter(1.0 - cfg.duration_jitter, 1.0 + cfg.duration_jitter);
  std::vector<double> x(seconds_to_samples(cfg.lead_s, sr), 0.0);
  for (const auto& p : phones) {
    double hz = 0.0;
    for (const auto& ph : toy_phonemes()) {
      if (ph.symbol == p) hz = ph.hz;
    }
    if (hz == 0.0) throw Error("synth: unknown phoneme '" + p + "'");
    const auto n = seconds_to_samples(v.phone_s * jitter(rng), sr);
    const auto tone = phoneme_tone(hz * v.pitch, n, cfg.amplitude, sr);
    x.insert(x.end(), tone.begin(), tone.end());
  }
  x.resize(x.size() + seconds_to_samples(cfg.tail_s, sr), 0.0);
  std::normal_distribution<double> noise(0.0, v.noise);
  for (double& s : x) s += noise(rng);
  return Waveform(std::move(x), sr);
}

inline SpeakerVoice voice_for(const SynthConfig& cfg, Role role, std::size_t index) {
  if (role == Role::control) return {1.0, cfg.control_phone_s, cfg.control_noise};
  static constexpr double spread[] = {0.96, 1.0, 1.04, 0.98, 1.02, 0.94};
  return {cfg.dysarthric_pitch * spread[index % 6], cfg.dysarthric_phone_s, cfg.dysarthric_noise};
}

inline nlohmann::json inventory_json(const SynthConfig& cfg) {
  nlohmann::json ph = nlohmann::json::array();
  for (const auto& p : toy_phonemes()) ph.push_back({{"symbol", p.symbol}, {"hz", p.hz}});
  return {{"sample_rate", cfg.sample_rate},
          {"amplitude", cfg.amplitude},
          {"harmonics", toy_harmonics()},
          {"phonemes", ph},
          {"silence_noise", cfg.control_noise}};
}

struct SynthSummary {
  std::size_t files = 0;
  std::vector<SynthWord> words;
};

// Writes <speaker>_B1_<word>_M2.wav plus .phn transcripts, refs.txt,
// inventory.json and speakers.json under root.
inline SynthSummary write_synth_corpus(const std::filesystem::path& root, const SynthConfig& cfg = {}) {
  namespace fs = std::filesystem;
  fs::create_directories(root);
  SynthSummary sum;
  sum.words = make_words(cfg);
  std::ofstream refs(root / "refs.txt");
  nlohmann::json speakers = nlohmann::json::object();
  auto emit = [&](const std::string& speaker, Role role, std::size_t index) {
    speakers[speaker] = to_string(role);
    const auto voice = voice_for(cfg, role, index);
    Fnv1a h;
    h.update(speaker);
    std::mt19937_64 rng(cfg.seed ^ h.digest());
    for (const auto& w : sum.words) {
      const auto stem = speaker + "_B1_" + w.id + "_M2";
      write_wav(root / (stem + ".wav"), synth_utterance(w.phones, voice, cfg, rng));
      std::ofstream phn(root / (stem + ".phn"));
      std::string line;
      for (const auto& p : w.phones) line += (line.empty() ? "" : " ") + p;
      phn << line << '\n';
      refs << utterance_id(speaker, w.id) << '\t' << line << '\n';
      ++sum.files;
    }
  };
  for (std::size_t i = 0; i < cfg.dysarthric.size(); ++i) emit(cfg.dysarthric[i], Role::dysarthric, i);
  for (std::size_t i = 0; i < cfg.control.size(); ++i) emit(cfg.control[i], Role::control, i);
  std::ofstream(root / "inventory.json") << inventory_json(cfg).dump(2) << '\n';
  std::ofstream(root / "speakers.json") << speakers.dump(2) << '\n';
  return sum;
}

}  // namespace dvc::corpus
