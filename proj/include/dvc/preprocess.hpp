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
#include <string>
#include <vector>

#include "dvc/dsp.hpp"
#include "dvc/error.hpp"
#include "dvc/waveform.hpp"

// Utterance clean-up: stationary spectral-gating denoise profiled on the
// utterance head, energy-based silence trimming and fixed-margin click
// removal.

namespace dvc::preprocess {

struct NoiseProfile {
  std::vector<double> mean_mag;
  std::vector<double> std_mag;
  std::size_t n_frames = 0;
  StftConfig stft;
  int sample_rate = 16000;

  std::size_t num_bins() const { return mean_mag.size(); }
};

struct GateParams {
  double n_std_thresh = 1.5;
  double attenuation_db = 30.0;
  std::size_t smoothing_bins = 4;
  std::size_t smoothing_frames = 4;
  // Width of the sigmoid transition around the threshold, in dB.
  double softness_db = 1.0;
  StftConfig stft{};
};

inline void validate(const GateParams& g) {
  if (!(g.n_std_thresh > 0.0)) throw Error("gate: n_std_thresh must be > 0");
  if (!(g.attenuation_db >= 0.0)) throw Error("gate: attenuation_db must be >= 0");
  if (!(g.softness_db > 0.0)) throw Error("gate: softness_db must be > 0");
  validate(g.stft);
}

namespace detail {

inline Waveform pad_to_frame(const Waveform& w, std::size_t fft_size) {
  Waveform out = w;
  if (out.size() < fft_size) out.samples.resize(fft_size, 0.0);
  return out;
}

// Separable triangular smoothing, renormalized at the borders.
inline std::vector<std::vector<double>> smooth(const std::vector<std::vector<double>>& x, std::size_t half_t,
                                               std::size_t half_f) {
  const std::size_t T = x.size();
  if (T == 0) return x;
  const std::size_t F = x[0].size();
  auto kernel = [](std::size_t half) {
    std::vector<double> k(2 * half + 1);
    for (std::size_t i = 0; i < k.size(); ++i) {
      k[i] = static_cast<double>(half + 1) - std::abs(static_cast<double>(i) - static_cast<double>(half));
    }
    return k;
  };
  const auto kt = kernel(half_t), kf = kernel(half_f);
  std::vector<std::vector<double>> tmp(T, std::vector<double>(F, 0.0)), out = tmp;
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      double acc = 0.0, wsum = 0.0;
      for (std::size_t i = 0; i < kf.size(); ++i) {
        const long long j = static_cast<long long>(f + i) - static_cast<long long>(half_f);
        if (j < 0 || j >= static_cast<long long>(F)) continue;
        acc += kf[i] * x[t][static_cast<std::size_t>(j)];
        wsum += kf[i];
      }
      tmp[t][f] = acc / wsum;
    }
  }
  for (std::size_t t = 0; t < T; ++t) {
    for (std::size_t f = 0; f < F; ++f) {
      double acc = 0.0, wsum = 0.0;
      for (std::size_t i = 0; i < kt.size(); ++i) {
        const long long j = static_cast<long long>(t + i) - static_cast<long long>(half_t);
        if (j < 0 || j >= static_cast<long long>(T)) continue;
        acc += kt[i] * tmp[static_cast<std::size_t>(j)][f];
        wsum += kt[i];
      }
      out[t][f] = acc / wsum;
    }
  }
  return out;
}

}  // namespace detail

// Per-bin mean and standard deviation of the STFT magnitude over the first
// `head_s` seconds.
inline NoiseProfile estimate_noise_profile(const Waveform& w, double head_s = 0.5, const StftConfig& cfg = {}) {
  validate(cfg);
  std::size_t n = seconds_to_samples(head_s, w.sample_rate);
  if (w.size() < n) {
    warn("noise profile: signal shorter than " + std::to_string(head_s) + " s, using the whole signal");
    n = w.size();
  }
  Waveform head(std::vector<double>(w.samples.begin(), w.samples.begin() + static_cast<std::ptrdiff_t>(n)),
                w.sample_rate);
  const auto spec = stft(detail::pad_to_frame(head, cfg.fft_size), cfg);
  NoiseProfile p;
  p.stft = cfg;
  p.sample_rate = w.sample_rate;
  p.n_frames = spec.num_frames();
  const std::size_t bins = spec.num_bins();
  p.mean_mag.assign(bins, 0.0);
  p.std_mag.assign(bins, 0.0);
  for (const auto& f : spec.frames) {
    for (std::size_t k = 0; k < bins; ++k) p.mean_mag[k] += std::abs(f[k]);
  }
  const double count = static_cast<double>(std::max<std::size_t>(p.n_frames, 1));
  for (double& m : p.mean_mag) m /= count;
  for (const auto& f : spec.frames) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double d = std::abs(f[k]) - p.mean_mag[k];
      p.std_mag[k] += d * d;
    }
  }
  for (double& s : p.std_mag) s = std::sqrt(s / count);
  return p;
}

// Stationary spectral gating. Bins below mean + n_std * std of the noise
// profile are attenuated by up to attenuation_db through a smoothed soft mask.
inline Waveform spectral_gate(const Waveform& w, const NoiseProfile& p, const GateParams& g = {}) {
  validate(g);
  if (w.sample_rate != p.sample_rate) throw Error("spectral_gate: sample rate of profile and signal differ");
  if (g.stft.fft_size != p.stft.fft_size || p.num_bins() != g.stft.fft_size / 2 + 1) {
    throw Error("spectral_gate: profile was computed with a different FFT size");
  }
  if (w.empty()) return w;
  auto spec = stft(detail::pad_to_frame(w, g.stft.fft_size), g.stft);
  const std::size_t bins = spec.num_bins();
  constexpr double kClampDb = 40.0;
  std::vector<double> threshold(bins);
  for (std::size_t k = 0; k < bins; ++k) threshold[k] = p.mean_mag[k] + g.n_std_thresh * p.std_mag[k];

  std::vector<std::vector<double>> dist(spec.num_frames(), std::vector<double>(bins));
  for (std::size_t t = 0; t < spec.num_frames(); ++t) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double a = std::abs(spec.frames[t][k]);
      double d = kClampDb;
      if (threshold[k] > 0.0) d = 20.0 * std::log10(std::max(a, 1e-300) / threshold[k]);
      dist[t][k] = std::clamp(d, -kClampDb, kClampDb);
    }
  }
  const auto smoothed = detail::smooth(dist, g.smoothing_frames, g.smoothing_bins);
  const double floor = std::pow(10.0, -g.attenuation_db / 20.0);
  for (std::size_t t = 0; t < spec.num_frames(); ++t) {
    for (std::size_t k = 0; k < bins; ++k) {
      const double mask = 1.0 / (1.0 + std::exp(-smoothed[t][k] / g.softness_db));
      spec.frames[t][k] *= floor + (1.0 - floor) * mask;
    }
  }
  auto out = istft(spec);
  out.samples.resize(w.size());
  return out;
}

struct TrimBounds {
  std::size_t start = 0;
  std::size_t end = 0;  // exclusive
};

struct TrimConfig {
  double top_db = 30.0;
  std::size_t frame_length = 2048;
  std::size_t hop = 512;
};

// Sample range kept by trim_silence. Frames are centered (zero padded) and
// compared to the loudest frame in dB.
inline TrimBounds trim_silence_bounds(const Waveform& w, const TrimConfig& cfg = {}) {
  if (cfg.hop == 0 || cfg.frame_length == 0) throw Error("trim: frame_length and hop must be positive");
  if (w.empty()) return {};
  const std::size_t frames = 1 + w.size() / cfg.hop;
  std::vector<double> power(frames, 0.0);
  const auto half = static_cast<long long>(cfg.frame_length / 2);
  for (std::size_t t = 0; t < frames; ++t) {
    const long long c = static_cast<long long>(t * cfg.hop);
    double acc = 0.0;
    for (long long j = std::max(0LL, c - half); j < std::min(static_cast<long long>(w.size()), c + half); ++j) {
      const double v = w.samples[static_cast<std::size_t>(j)];
      acc += v * v;
    }
    power[t] = acc / static_cast<double>(cfg.frame_length);
  }
  constexpr double kAmin = 1e-10;
  const double ref = std::max(kAmin, *std::max_element(power.begin(), power.end()));
  std::size_t first = frames, last = 0;
  for (std::size_t t = 0; t < frames; ++t) {
    const double db = 10.0 * std::log10(std::max(kAmin, power[t])) - 10.0 * std::log10(ref);
    if (db > -cfg.top_db) {
      first = std::min(first, t);
      last = t;
    }
  }
  if (first == frames || power[last] <= kAmin) return {};
  return {first * cfg.hop, std::min(w.size(), (last + 1) * cfg.hop)};
}

// Removes leading and trailing frames more than top_db below the loudest
// frame. The result is a contiguous slice of the input.
inline Waveform trim_silence(const Waveform& w, double top_db = 30.0) {
  TrimConfig cfg;
  cfg.top_db = top_db;
  const auto b = trim_silence_bounds(w, cfg);
  if (b.end <= b.start) {
    if (!w.empty()) warn("trim_silence: signal is entirely silent");
    return Waveform({}, w.sample_rate);
  }
  return Waveform(std::vector<double>(w.samples.begin() + static_cast<std::ptrdiff_t>(b.start),
                                      w.samples.begin() + static_cast<std::ptrdiff_t>(b.end)),
                  w.sample_rate);
}

// Drops `margin_s` seconds from both ends.
inline Waveform remove_clicks(const Waveform& w, double margin_s = 0.2) {
  const std::size_t m = seconds_to_samples(margin_s, w.sample_rate);
  if (m == 0) return w;
  if (w.size() <= 2 * m) {
    warn("remove_clicks: signal not longer than twice the margin, left unchanged");
    return w;
  }
  return Waveform(std::vector<double>(w.samples.begin() + static_cast<std::ptrdiff_t>(m),
                                      w.samples.end() - static_cast<std::ptrdiff_t>(m)),
                  w.sample_rate);
}

struct PipelineOptions {
  double noise_head_s = 0.5;
  double top_db = 30.0;
  double click_margin_s = 0.2;
  GateParams gate{};
};

struct PipelineResult {
  Waveform output;
  std::size_t input_samples = 0;
  std::size_t click_removed = 0;  // samples removed by click removal, both ends
  TrimBounds trim;                // relative to the denoised signal
};

// Click removal, then denoising, then silence trimming.
inline PipelineResult preprocess_pipeline(const Waveform& w, const PipelineOptions& opt = {}) {
  if (!w.all_finite()) throw Error("preprocess: waveform contains non-finite samples");
  PipelineResult r;
  r.input_samples = w.size();
  auto clicked = remove_clicks(w, opt.click_margin_s);
  r.click_removed = w.size() - clicked.size();
  const auto profile = estimate_noise_profile(clicked, opt.noise_head_s, opt.gate.stft);
  auto denoised = spectral_gate(clicked, profile, opt.gate);
  TrimConfig tc;
  tc.top_db = opt.top_db;
  r.trim = trim_silence_bounds(denoised, tc);
  if (r.trim.end <= r.trim.start) {
    warn("preprocess: nothing left after silence trimming");
    r.output = Waveform({}, w.sample_rate);
    return r;
  }
  r.output = Waveform(std::vector<double>(denoised.samples.begin() + static_cast<std::ptrdiff_t>(r.trim.start),
                                          denoised.samples.begin() + static_cast<std::ptrdiff_t>(r.trim.end)),
                      w.sample_rate);
  return r;
}

}  // namespace dvc::preprocess
