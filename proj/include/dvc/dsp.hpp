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
#include <complex>
#include <cstddef>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "dvc/error.hpp"
#include "dvc/fft.hpp"
#include "dvc/waveform.hpp"

namespace dvc {

using Complex = std::complex<double>;

enum class Window { hann };

inline const char* to_string(Window w) {
  switch (w) {
    case Window::hann:
      return "hann";
  }
  return "unknown";
}

// Periodic window (the DFT-even variant used for spectral analysis).
inline std::vector<double> make_window(Window kind, std::size_t n) {
  std::vector<double> w(n);
  switch (kind) {
    case Window::hann:
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
      }
      break;
  }
  return w;
}

struct StftConfig {
  std::size_t fft_size = 1024;
  std::size_t hop = 256;
  Window window = Window::hann;
  // Reflect-pad fft_size/2 samples on both sides so frame t is centered on
  // sample t * hop.
  bool center = true;
};

inline bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void validate(const StftConfig& cfg) {
  if (!is_power_of_two(cfg.fft_size)) throw Error("fft_size must be a power of two");
  if (cfg.hop == 0 || cfg.hop > cfg.fft_size) throw Error("hop must be in [1, fft_size]");
}

// T x F complex frames, F = fft_size / 2 + 1.
struct Spectrogram {
  std::vector<std::vector<Complex>> frames;
  StftConfig config;
  std::size_t length = 0;  // samples of the analysed signal
  int sample_rate = 16000;

  std::size_t num_frames() const { return frames.size(); }
  std::size_t num_bins() const { return config.fft_size / 2 + 1; }
};

struct MagnitudeSpectrogram {
  std::vector<std::vector<double>> frames;
  StftConfig config;
  std::size_t length = 0;
  int sample_rate = 16000;

  std::size_t num_frames() const { return frames.size(); }
  std::size_t num_bins() const { return config.fft_size / 2 + 1; }
};

namespace detail {

inline std::vector<double> reflect_pad(std::span<const double> x, std::size_t pad) {
  const std::size_t n = x.size();
  std::vector<double> out(n + 2 * pad);
  if (n == 0) return out;
  const std::size_t period = n > 1 ? 2 * (n - 1) : 1;
  auto reflect = [&](long long i) {
    if (n == 1) return x[0];
    long long m = i % static_cast<long long>(period);
    if (m < 0) m += static_cast<long long>(period);
    const auto k = static_cast<std::size_t>(m);
    return k < n ? x[k] : x[period - k];
  };
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = reflect(static_cast<long long>(i) - static_cast<long long>(pad));
  }
  return out;
}

// Analysis of an already padded signal: frame t starts at t * hop.
inline std::vector<std::vector<Complex>> analyse(std::span<const double> x, const StftConfig& cfg,
                                                 const std::vector<double>& window) {
  const std::size_t n = cfg.fft_size;
  if (x.size() < n) return {};
  const std::size_t frames = 1 + (x.size() - n) / cfg.hop;
  std::vector<std::vector<Complex>> out(frames);
  std::vector<double> buf(n);
  for (std::size_t t = 0; t < frames; ++t) {
    const double* src = x.data() + t * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) buf[i] = src[i] * window[i];
    out[t] = fft::rfft(buf);
  }
  return out;
}

// Least-squares overlap-add; samples with no window support come out zero.
inline std::vector<double> overlap_add(const std::vector<std::vector<Complex>>& frames, const StftConfig& cfg,
                                       const std::vector<double>& window) {
  const std::size_t n = cfg.fft_size;
  if (frames.empty()) return {};
  const std::size_t total = n + cfg.hop * (frames.size() - 1);
  std::vector<double> y(total, 0.0), wss(total, 0.0);
  for (std::size_t t = 0; t < frames.size(); ++t) {
    const auto frame = fft::irfft(frames[t], n);
    double* dst = y.data() + t * cfg.hop;
    double* norm = wss.data() + t * cfg.hop;
    for (std::size_t i = 0; i < n; ++i) {
      dst[i] += frame[i] * window[i];
      norm[i] += window[i] * window[i];
    }
  }
  for (std::size_t i = 0; i < total; ++i) y[i] = wss[i] > 1e-12 ? y[i] / wss[i] : 0.0;
  return y;
}

inline void require_cola(const StftConfig& cfg, const std::vector<double>& window) {
  // Steady-state squared-window sum over one hop period must be non-zero,
  // otherwise interior samples cannot be recovered.
  double lowest = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < cfg.hop; ++r) {
    double s = 0.0;
    for (std::size_t i = r; i < cfg.fft_size; i += cfg.hop) s += window[i] * window[i];
    lowest = std::min(lowest, s);
  }
  if (!(lowest > 1e-10)) {
    throw Error("istft: window/hop combination violates the overlap-add condition");
  }
}

inline std::vector<double> crop_centered(std::vector<double> padded, const StftConfig& cfg, std::size_t length) {
  const std::size_t offset = cfg.center ? cfg.fft_size / 2 : 0;
  std::vector<double> out(length, 0.0);
  for (std::size_t i = 0; i < length && offset + i < padded.size(); ++i) out[i] = padded[offset + i];
  return out;
}

}  // namespace detail

// Short-time Fourier transform. Signals shorter than one frame produce a
// spectrogram with zero frames.
inline Spectrogram stft(const Waveform& w, const StftConfig& cfg = {}) {
  validate(cfg);
  Spectrogram s;
  s.config = cfg;
  s.length = w.size();
  s.sample_rate = w.sample_rate;
  if (w.size() < cfg.fft_size) return s;
  const auto window = make_window(cfg.window, cfg.fft_size);
  if (cfg.center) {
    const auto padded = detail::reflect_pad(w.samples, cfg.fft_size / 2);
    s.frames = detail::analyse(padded, cfg, window);
  } else {
    s.frames = detail::analyse(w.samples, cfg, window);
  }
  return s;
}

inline MagnitudeSpectrogram magnitude(const Spectrogram& s) {
  MagnitudeSpectrogram m;
  m.config = s.config;
  m.length = s.length;
  m.sample_rate = s.sample_rate;
  m.frames.resize(s.frames.size());
  for (std::size_t t = 0; t < s.frames.size(); ++t) {
    m.frames[t].resize(s.frames[t].size());
    for (std::size_t k = 0; k < s.frames[t].size(); ++k) m.frames[t][k] = std::abs(s.frames[t][k]);
  }
  return m;
}

// Inverse STFT by least-squares overlap-add, cropped to the original
// analysis length.
inline Waveform istft(const Spectrogram& s) {
  validate(s.config);
  const auto window = make_window(s.config.window, s.config.fft_size);
  detail::require_cola(s.config, window);
  for (const auto& f : s.frames) {
    if (f.size() != s.num_bins()) throw Error("istft: frame has wrong number of bins");
  }
  auto padded = detail::overlap_add(s.frames, s.config, window);
  return Waveform(detail::crop_centered(std::move(padded), s.config, s.length), s.sample_rate);
}

namespace detail {

// Frobenius norm over the implied two-sided spectrum.
inline double two_sided_weight(std::size_t k, std::size_t bins) { return (k == 0 || k + 1 == bins) ? 1.0 : 2.0; }

}  // namespace detail

// Griffin-Lim phase retrieval. Starts from zero phase; with n_iter == 0 the
// result is the zero-phase reconstruction. If `convergence` is given it
// receives || |STFT(x_k)| - S || / ||S|| for k = 0..n_iter.
inline Waveform griffin_lim(const MagnitudeSpectrogram& mag, int n_iter = 60,
                            std::vector<double>* convergence = nullptr) {
  validate(mag.config);
  const auto& cfg = mag.config;
  const auto window = make_window(cfg.window, cfg.fft_size);
  detail::require_cola(cfg, window);
  const std::size_t bins = mag.num_bins();
  double norm_s = 0.0;
  for (const auto& f : mag.frames) {
    if (f.size() != bins) throw Error("griffin_lim: frame has wrong number of bins");
    for (std::size_t k = 0; k < bins; ++k) {
      if (!(f[k] >= 0.0)) throw Error("griffin_lim: magnitudes must be non-negative");
      norm_s += detail::two_sided_weight(k, bins) * f[k] * f[k];
    }
  }
  norm_s = std::sqrt(norm_s);

  std::vector<std::vector<Complex>> target(mag.frames.size(), std::vector<Complex>(bins));
  for (std::size_t t = 0; t < mag.frames.size(); ++t) {
    for (std::size_t k = 0; k < bins; ++k) target[t][k] = Complex(mag.frames[t][k], 0.0);
  }
  auto x = detail::overlap_add(target, cfg, window);

  auto spectral_convergence = [&](const std::vector<std::vector<Complex>>& est) {
    if (norm_s == 0.0) return 0.0;
    double acc = 0.0;
    for (std::size_t t = 0; t < est.size(); ++t) {
      for (std::size_t k = 0; k < bins; ++k) {
        const double d = std::abs(est[t][k]) - mag.frames[t][k];
        acc += detail::two_sided_weight(k, bins) * d * d;
      }
    }
    return std::sqrt(acc) / norm_s;
  };

  if (convergence) convergence->clear();
  for (int it = 0; it <= n_iter; ++it) {
    if (it == n_iter && !convergence) break;
    const auto est = detail::analyse(x, cfg, window);
    if (convergence) convergence->push_back(spectral_convergence(est));
    if (it == n_iter) break;
    for (std::size_t t = 0; t < est.size(); ++t) {
      for (std::size_t k = 0; k < bins; ++k) {
        const double a = std::abs(est[t][k]);
        const Complex phase = a > 0.0 ? est[t][k] / a : Complex(1.0, 0.0);
        target[t][k] = mag.frames[t][k] * phase;
      }
    }
    x = detail::overlap_add(target, cfg, window);
  }
  return Waveform(detail::crop_centered(std::move(x), cfg, mag.length), mag.sample_rate);
}

// ---------------------------------------------------------------------------
// Mel features

struct MelConfig {
  int sample_rate = 16000;
  std::size_t fft_size = 1024;
  std::size_t hop = 256;
  std::size_t n_mels = 80;
  double fmin = 0.0;
  double fmax = 8000.0;
  double log_floor = 1e-10;

  StftConfig stft() const { return StftConfig{fft_size, hop, Window::hann, true}; }
  auto key() const { return std::tuple(sample_rate, fft_size, hop, n_mels, fmin, fmax); }
};

// T x n_mels log-compressed mel power.
struct MelSpectrogram {
  std::vector<std::vector<double>> frames;
  MelConfig config;
  std::size_t length = 0;  // samples of the analysed signal

  std::size_t num_frames() const { return frames.size(); }
  std::size_t n_mels() const { return config.n_mels; }
};

inline double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
inline double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

inline void validate(const MelConfig& cfg) {
  if (cfg.sample_rate <= 0) throw Error("mel: sample rate must be positive");
  if (cfg.n_mels < 1) throw Error("mel: n_mels must be >= 1");
  if (!(cfg.fmin >= 0.0) || !(cfg.fmin < cfg.fmax) || cfg.fmax > cfg.sample_rate / 2.0) {
    throw Error("mel: require 0 <= fmin < fmax <= sample_rate / 2");
  }
  validate(cfg.stft());
}

// Triangular filters on the HTK mel scale, stored sparsely.
class MelFilterbank {
 public:
  explicit MelFilterbank(const MelConfig& cfg) : cfg_(cfg) {
    validate(cfg);
    const std::size_t bins = cfg.fft_size / 2 + 1;
    const double lo = hz_to_mel(cfg.fmin), hi = hz_to_mel(cfg.fmax);
    std::vector<double> edges(cfg.n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i) {
      edges[i] = mel_to_hz(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(cfg.n_mels + 1));
    }
    filters_.resize(cfg.n_mels);
    dense_ = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(cfg.n_mels), static_cast<Eigen::Index>(bins));
    for (std::size_t m = 0; m < cfg.n_mels; ++m) {
      const double f0 = edges[m], f1 = edges[m + 1], f2 = edges[m + 2];
      auto& filt = filters_[m];
      for (std::size_t k = 0; k < bins; ++k) {
        const double f = static_cast<double>(k) * cfg.sample_rate / static_cast<double>(cfg.fft_size);
        const double w = std::max(0.0, std::min((f - f0) / (f1 - f0), (f2 - f) / (f2 - f1)));
        if (w > 0.0) {
          if (filt.weights.empty()) filt.first_bin = k;
          filt.weights.resize(k - filt.first_bin + 1, 0.0);
          filt.weights.back() = w;
          dense_(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = w;
        }
      }
    }
    pinv_ = dense_.completeOrthogonalDecomposition().pseudoInverse();
  }

  const MelConfig& config() const { return cfg_; }
  std::size_t num_bins() const { return cfg_.fft_size / 2 + 1; }

  std::vector<double> apply(std::span<const double> power) const {
    std::vector<double> out(filters_.size(), 0.0);
    for (std::size_t m = 0; m < filters_.size(); ++m) {
      const auto& f = filters_[m];
      double acc = 0.0;
      for (std::size_t i = 0; i < f.weights.size(); ++i) acc += f.weights[i] * power[f.first_bin + i];
      out[m] = acc;
    }
    return out;
  }

  std::vector<double> apply_transpose(std::span<const double> mel) const {
    std::vector<double> out(num_bins(), 0.0);
    for (std::size_t m = 0; m < filters_.size(); ++m) {
      const auto& f = filters_[m];
      for (std::size_t i = 0; i < f.weights.size(); ++i) out[f.first_bin + i] += f.weights[i] * mel[m];
    }
    return out;
  }

  // Non-negative least-squares estimate of the linear power spectrum:
  // pseudo-inverse start, clipped, refined with multiplicative updates.
  std::vector<double> invert(std::span<const double> mel_power, int iterations = 100) const {
    const std::size_t bins = num_bins();
    Eigen::Map<const Eigen::VectorXd> m(mel_power.data(), static_cast<Eigen::Index>(mel_power.size()));
    const Eigen::VectorXd start = pinv_ * m;
    const auto numer = apply_transpose(mel_power);
    const double peak = *std::max_element(mel_power.begin(), mel_power.end());
    const double floor = std::max(peak, 0.0) * 1e-12 + 1e-300;
    std::vector<double> x(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      x[k] = std::max(start(static_cast<Eigen::Index>(k)), floor);
    }
    std::vector<double> covered = apply_transpose(std::vector<double>(filters_.size(), 1.0));
    for (int it = 0; it < iterations; ++it) {
      const auto denom = apply_transpose(apply(x));
      for (std::size_t k = 0; k < bins; ++k) {
        if (covered[k] > 0.0 && denom[k] > 0.0) x[k] *= numer[k] / denom[k];
      }
    }
    for (std::size_t k = 0; k < bins; ++k) {
      if (covered[k] == 0.0) x[k] = 0.0;
    }
    return x;
  }

  static std::shared_ptr<const MelFilterbank> cached(const MelConfig& cfg) {
    static std::mutex mu;
    static std::map<decltype(cfg.key()), std::shared_ptr<const MelFilterbank>> cache;
    std::lock_guard lock(mu);
    auto& slot = cache[cfg.key()];
    if (!slot) slot = std::make_shared<const MelFilterbank>(cfg);
    return slot;
  }

 private:
  struct Filter {
    std::size_t first_bin = 0;
    std::vector<double> weights;
  };
  MelConfig cfg_;
  std::vector<Filter> filters_;
  Eigen::MatrixXd dense_;
  Eigen::MatrixXd pinv_;
};

inline MelSpectrogram mel_spectrogram(const Waveform& w, const MelConfig& cfg = {}) {
  validate(cfg);
  if (w.sample_rate != cfg.sample_rate) throw Error("mel_spectrogram: sample rate mismatch");
  const auto bank = MelFilterbank::cached(cfg);
  const auto spec = stft(w, cfg.stft());
  MelSpectrogram out;
  out.config = cfg;
  out.length = w.size();
  out.frames.reserve(spec.frames.size());
  std::vector<double> power(spec.num_bins());
  for (const auto& frame : spec.frames) {
    for (std::size_t k = 0; k < frame.size(); ++k) power[k] = std::norm(frame[k]);
    auto mel = bank->apply(power);
    for (double& v : mel) v = std::log(std::max(v, cfg.log_floor));
    out.frames.push_back(std::move(mel));
  }
  return out;
}

// Magnitude spectrogram whose mel projection best matches `m` under a
// non-negativity constraint.
inline MagnitudeSpectrogram mel_to_linear(const MelSpectrogram& m) {
  validate(m.config);
  const auto bank = MelFilterbank::cached(m.config);
  MagnitudeSpectrogram out;
  out.config = m.config.stft();
  out.length = m.length;
  out.sample_rate = m.config.sample_rate;
  out.frames.reserve(m.frames.size());
  std::vector<double> power(m.config.n_mels);
  for (const auto& frame : m.frames) {
    if (frame.size() != m.config.n_mels) throw Error("mel_to_linear: frame has wrong number of bands");
    for (std::size_t i = 0; i < frame.size(); ++i) {
      power[i] = frame[i] <= std::log(m.config.log_floor) ? 0.0 : std::exp(frame[i]);
    }
    auto lin = bank->invert(power);
    for (double& v : lin) v = std::sqrt(std::max(v, 0.0));
    out.frames.push_back(std::move(lin));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Phase-vocoder time stretching

// Changes duration by 1/rate without changing pitch: magnitudes are linearly
// interpolated between analysis frames while each bin's phase advances by
// its measured instantaneous frequency.
inline Waveform time_stretch(const Waveform& w, double rate, const StftConfig& cfg = {}) {
  if (!(rate > 0.0) || !std::isfinite(rate)) throw Error("time_stretch: rate must be > 0");
  validate(cfg);
  const auto out_len = static_cast<std::size_t>(std::llround(static_cast<double>(w.size()) / rate));
  if (w.empty()) return Waveform({}, w.sample_rate);
  Waveform padded = w;
  if (padded.size() < cfg.fft_size) padded.samples.resize(cfg.fft_size, 0.0);
  const auto spec = stft(padded, cfg);
  const std::size_t frames = spec.num_frames();
  const std::size_t bins = spec.num_bins();

  std::vector<double> advance(bins);
  for (std::size_t k = 0; k < bins; ++k) {
    advance[k] = 2.0 * std::numbers::pi * static_cast<double>(cfg.hop) * static_cast<double>(k) /
                 static_cast<double>(cfg.fft_size);
  }
  auto column = [&](std::size_t t) -> const std::vector<Complex>* {
    return t < frames ? &spec.frames[t] : nullptr;
  };

  Spectrogram out;
  out.config = cfg;
  out.sample_rate = w.sample_rate;
  out.length = out_len;
  std::vector<double> phase(bins);
  for (std::size_t k = 0; k < bins; ++k) phase[k] = std::arg(spec.frames[0][k]);
  const Complex zero(0.0, 0.0);
  for (double step = 0.0; step < static_cast<double>(frames); step += rate) {
    const auto t = static_cast<std::size_t>(step);
    const double alpha = step - static_cast<double>(t);
    const auto* c0 = column(t);
    const auto* c1 = column(t + 1);
    std::vector<Complex> frame(bins);
    for (std::size_t k = 0; k < bins; ++k) {
      const Complex a = c0 ? (*c0)[k] : zero;
      const Complex b = c1 ? (*c1)[k] : zero;
      const double mag = (1.0 - alpha) * std::abs(a) + alpha * std::abs(b);
      frame[k] = std::polar(mag, phase[k]);
      double dphi = std::arg(b) - std::arg(a) - advance[k];
      dphi -= 2.0 * std::numbers::pi * std::round(dphi / (2.0 * std::numbers::pi));
      phase[k] += advance[k] + dphi;
    }
    out.frames.push_back(std::move(frame));
  }
  return istft(out);
}

// ---------------------------------------------------------------------------
// F0

// Per-frame F0 in Hz; 0 marks an unvoiced frame.
struct F0Track {
  std::vector<double> values;
  std::size_t hop = 256;
  int sample_rate = 16000;

  std::vector<double> voiced() const {
    std::vector<double> v;
    for (double f : values) {
      if (f > 0.0) v.push_back(f);
    }
    return v;
  }
};

struct F0Stats {
  double mu = 0.0;     // mean of log-Hz over voiced frames
  double sigma = 0.0;  // standard deviation of log-Hz
  std::string speaker_id;
};

struct F0Config {
  double fmin = 60.0;
  double fmax = 400.0;
  std::size_t hop = 256;
  std::size_t frame_length = 1024;
  double voicing_threshold = 0.5;  // normalized autocorrelation peak
  double silence_rms = 1e-4;       // absolute frame RMS below this is unvoiced
};

inline F0Track estimate_f0(const Waveform& w, const F0Config& cfg = {}) {
  if (!(cfg.fmin > 0.0) || !(cfg.fmin < cfg.fmax)) throw Error("estimate_f0: require 0 < fmin < fmax");
  const int sr = w.sample_rate;
  const auto min_lag = static_cast<std::size_t>(std::floor(sr / cfg.fmax));
  const auto max_lag = static_cast<std::size_t>(std::ceil(sr / cfg.fmin));
  const std::size_t len = std::max(cfg.frame_length, 2 * max_lag + 2);
  F0Track track;
  track.hop = cfg.hop;
  track.sample_rate = sr;
  if (w.empty()) return track;
  const std::size_t frames = 1 + w.size() / cfg.hop;
  track.values.assign(frames, 0.0);
  std::vector<double> buf(len);
  std::vector<double> corr(max_lag + 2, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    const long long start = static_cast<long long>(t * cfg.hop) - static_cast<long long>(len / 2);
    double mean = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const long long j = start + static_cast<long long>(i);
      buf[i] = (j >= 0 && j < static_cast<long long>(w.size())) ? w.samples[static_cast<std::size_t>(j)] : 0.0;
      mean += buf[i];
    }
    mean /= static_cast<double>(len);
    for (double& v : buf) v -= mean;
    if (rms(buf) < cfg.silence_rms) continue;

    // Prefix energies give the normalization of each lagged product.
    std::vector<double> prefix(len + 1, 0.0);
    for (std::size_t i = 0; i < len; ++i) prefix[i + 1] = prefix[i] + buf[i] * buf[i];
    double best = -1.0;
    for (std::size_t lag = min_lag; lag <= max_lag + 1 && lag < len; ++lag) {
      double acc = 0.0;
      for (std::size_t i = 0; i + lag < len; ++i) acc += buf[i] * buf[i + lag];
      const double ea = prefix[len - lag];
      const double eb = prefix[len] - prefix[lag];
      corr[lag] = (ea > 0.0 && eb > 0.0) ? acc / std::sqrt(ea * eb) : 0.0;
      if (lag <= max_lag) best = std::max(best, corr[lag]);
    }
    if (best < cfg.voicing_threshold) continue;
    // Smallest-lag local maximum close to the global one avoids octave errors.
    std::size_t pick = 0;
    for (std::size_t lag = min_lag; lag <= max_lag; ++lag) {
      const bool local = (lag == min_lag || corr[lag] >= corr[lag - 1]) && corr[lag] >= corr[lag + 1];
      if (local && corr[lag] >= 0.9 * best) {
        pick = lag;
        break;
      }
    }
    if (pick == 0) continue;
    double refined = static_cast<double>(pick);
    if (pick > min_lag && pick < max_lag) {
      const double a = corr[pick - 1], b = corr[pick], c = corr[pick + 1];
      const double denom = a - 2.0 * b + c;
      if (denom < 0.0) refined += 0.5 * (a - c) / denom;
    }
    track.values[t] = sr / refined;
  }
  return track;
}

inline F0Stats compute_f0_stats(std::span<const F0Track> tracks, std::string speaker_id = {}) {
  double sum = 0.0, sq = 0.0;
  std::size_t n = 0;
  for (const auto& tr : tracks) {
    for (double f : tr.values) {
      if (f > 0.0) {
        const double l = std::log(f);
        sum += l;
        sq += l * l;
        ++n;
      }
    }
  }
  F0Stats s;
  s.speaker_id = std::move(speaker_id);
  if (n == 0) return s;
  s.mu = sum / static_cast<double>(n);
  s.sigma = std::sqrt(std::max(0.0, sq / static_cast<double>(n) - s.mu * s.mu));
  return s;
}

// Log-Gaussian F0 mapping between speakers; unvoiced frames stay 0.
inline F0Track convert_f0(const F0Track& f, const F0Stats& src, const F0Stats& tgt) {
  if (!(src.sigma > 0.0)) throw Error("convert_f0: source sigma must be > 0");
  F0Track out = f;
  for (double& v : out.values) {
    if (v > 0.0) v = std::exp((std::log(v) - src.mu) / src.sigma * tgt.sigma + tgt.mu);
  }
  return out;
}

}  // namespace dvc
