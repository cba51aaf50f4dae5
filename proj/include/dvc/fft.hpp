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

#include <fftw3.h>

#include <complex>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "dvc/error.hpp"

// Real-input FFT on top of FFTW. Plans are created once per size with
// FFTW_ESTIMATE (deterministic, no timing measurements) and shared between
// threads; execution uses thread-local aligned buffers.

namespace dvc::fft {

using Complex = std::complex<double>;

namespace detail {

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
};

inline std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

struct Buffers {
  std::size_t n = 0;
  double* real = nullptr;
  fftw_complex* spec = nullptr;
  Buffers() = default;
  Buffers(const Buffers&) = delete;
  Buffers& operator=(const Buffers&) = delete;
  ~Buffers() {
    if (real) fftw_free(real);
    if (spec) fftw_free(spec);
  }
  void ensure(std::size_t size) {
    if (size == n) return;
    if (real) fftw_free(real);
    if (spec) fftw_free(spec);
    n = size;
    real = static_cast<double*>(fftw_malloc(sizeof(double) * n));
    spec = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * (n / 2 + 1)));
  }
};

inline Buffers& thread_buffers(std::size_t n) {
  thread_local std::map<std::size_t, std::unique_ptr<Buffers>> cache;
  auto& slot = cache[n];
  if (!slot) {
    slot = std::make_unique<Buffers>();
    slot->ensure(n);
  }
  return *slot;
}

inline const PlanPair& plans_for(std::size_t n) {
  static std::map<std::size_t, PlanPair> plans;
  std::lock_guard lock(planner_mutex());
  auto it = plans.find(n);
  if (it != plans.end()) return it->second;
  Buffers scratch;
  scratch.ensure(n);
  PlanPair p;
  const int ni = static_cast<int>(n);
  p.forward = fftw_plan_dft_r2c_1d(ni, scratch.real, scratch.spec, FFTW_ESTIMATE);
  p.inverse = fftw_plan_dft_c2r_1d(ni, scratch.spec, scratch.real, FFTW_ESTIMATE);
  if (!p.forward || !p.inverse) throw Error("FFTW planning failed");
  return plans.emplace(n, p).first->second;
}

}  // namespace detail

// One-sided spectrum of a real frame: n/2 + 1 bins.
inline std::vector<Complex> rfft(std::span<const double> input) {
  const std::size_t n = input.size();
  if (n == 0) return {};
  const auto& plan = detail::plans_for(n);
  auto& buf = detail::thread_buffers(n);
  std::copy(input.begin(), input.end(), buf.real);
  fftw_execute_dft_r2c(plan.forward, buf.real, buf.spec);
  std::vector<Complex> out(n / 2 + 1);
  for (std::size_t k = 0; k < out.size(); ++k) out[k] = Complex(buf.spec[k][0], buf.spec[k][1]);
  return out;
}

// Inverse of rfft, normalized so that irfft(rfft(x), n) == x.
inline std::vector<double> irfft(std::span<const Complex> spectrum, std::size_t n) {
  if (n == 0) return {};
  if (spectrum.size() != n / 2 + 1) throw Error("irfft: spectrum size does not match frame size");
  const auto& plan = detail::plans_for(n);
  auto& buf = detail::thread_buffers(n);
  for (std::size_t k = 0; k < spectrum.size(); ++k) {
    buf.spec[k][0] = spectrum[k].real();
    buf.spec[k][1] = spectrum[k].imag();
  }
  // c2r ignores the imaginary part of DC and Nyquist; keep that explicit.
  buf.spec[0][1] = 0.0;
  if (n % 2 == 0) buf.spec[n / 2][1] = 0.0;
  fftw_execute_dft_c2r(plan.inverse, buf.spec, buf.real);
  std::vector<double> out(buf.real, buf.real + n);
  const double scale = 1.0 / static_cast<double>(n);
  for (double& v : out) v *= scale;
  return out;
}

}  // namespace dvc::fft
