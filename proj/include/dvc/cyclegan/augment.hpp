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
#include <random>
#include <vector>

#include "dvc/error.hpp"
#include "dvc/nn/tensor.hpp"

// Training-time segment sampling and fill-in-the-frame masking on
// [features, frames] tensors.

namespace dvc::cyclegan {

// Index into [0, n) reflecting at both ends without repeating the edge
// sample, periodically for offsets beyond one reflection.
inline std::size_t reflect_index(std::size_t i, std::size_t n) {
  if (n == 1) return 0;
  const std::size_t period = 2 * (n - 1);
  const std::size_t r = i % period;
  return r < n ? r : period - r;
}

template <class T>
nn::Tensor<T> crop_frames(const nn::Tensor<T>& feats, std::size_t start, std::size_t len) {
  const std::size_t D = feats.dim(0), frames = feats.dim(1);
  nn::Tensor<T> out(nn::Shape{D, len});
  for (std::size_t d = 0; d < D; ++d) {
    for (std::size_t t = 0; t < len; ++t) out.values[d * len + t] = feats.values[d * frames + reflect_index(start + t, frames)];
  }
  return out;
}

// First frame of a segment: uniform over valid positions, 0 when the
// utterance is not longer than the segment.
inline std::size_t sample_start(std::size_t frames, std::size_t segment_len, std::mt19937_64& rng) {
  if (frames <= segment_len) return 0;
  return std::uniform_int_distribution<std::size_t>(0, frames - segment_len)(rng);
}

struct Segment {
  std::size_t start = 0;
  std::size_t length = 0;
};

// Contiguous segment_len-frame slice; shorter utterances are reflected out
// to exactly segment_len frames.
template <class T>
nn::Tensor<T> sample_segment(const nn::Tensor<T>& feats, std::size_t segment_len, std::mt19937_64& rng,
                             Segment* where = nullptr) {
  if (feats.rank() != 2) throw ShapeError("sample_segment: expected [features, frames]");
  if (feats.dim(1) == 0 || feats.dim(0) == 0) throw Error("sample_segment: empty feature sequence");
  if (segment_len < 1) throw Error("sample_segment: segment_len must be >= 1");
  const std::size_t start = sample_start(feats.dim(1), segment_len, rng);
  if (where) *where = {start, segment_len};
  return crop_frames(feats, start, segment_len);
}

struct FrameMask {
  std::vector<float> values;  // 1 = keep, 0 = filled
  std::size_t start = 0;
  std::size_t width = 0;

  std::size_t size() const { return values.size(); }
};

inline FrameMask make_frame_mask(std::size_t length, std::size_t start, std::size_t width) {
  if (start + width > length) throw Error("frame mask: region exceeds the segment");
  FrameMask m{std::vector<float>(length, 1.0f), start, width};
  for (std::size_t t = start; t < start + width; ++t) m.values[t] = 0.0f;
  return m;
}

inline FrameMask all_ones_mask(std::size_t length) { return make_frame_mask(length, 0, 0); }

// Width ~ uniform{0..L/2}, start uniform over the positions that fit.
inline FrameMask sample_frame_mask(std::size_t length, std::mt19937_64& rng) {
  const std::size_t width = std::uniform_int_distribution<std::size_t>(0, length / 2)(rng);
  const std::size_t start = std::uniform_int_distribution<std::size_t>(0, length - width)(rng);
  return make_frame_mask(length, start, width);
}

// Expected masked fraction of sample_frame_mask for a given length.
inline double expected_masked_fraction(std::size_t length) {
  return static_cast<double>(length / 2) / 2.0 / static_cast<double>(length);
}

template <class T>
nn::Tensor<T> apply_frame_mask(const nn::Tensor<T>& seg, const FrameMask& m) {
  if (seg.rank() != 2 || seg.dim(1) != m.size()) throw ShapeError("apply_frame_mask: mask length differs from segment");
  nn::Tensor<T> out = seg;
  const std::size_t L = seg.dim(1);
  for (std::size_t d = 0; d < seg.dim(0); ++d) {
    for (std::size_t t = m.start; t < m.start + m.width; ++t) out.values[d * L + t] = T(0);
  }
  return out;
}

template <class T>
std::pair<nn::Tensor<T>, FrameMask> fif_mask(const nn::Tensor<T>& seg, std::mt19937_64& rng) {
  if (seg.rank() != 2) throw ShapeError("fif_mask: expected [features, frames]");
  auto m = sample_frame_mask(seg.dim(1), rng);
  return {apply_frame_mask(seg, m), std::move(m)};
}

// [features + 1, frames]: the segment with the mask appended as a channel.
template <class T>
nn::Tensor<T> with_mask_channel(const nn::Tensor<T>& seg, const FrameMask& m) {
  if (seg.rank() != 2 || seg.dim(1) != m.size()) throw ShapeError("with_mask_channel: mask length differs from segment");
  nn::Tensor<T> out(nn::Shape{seg.dim(0) + 1, seg.dim(1)});
  std::copy(seg.values.begin(), seg.values.end(), out.values.begin());
  for (std::size_t t = 0; t < m.size(); ++t) out.values[seg.size() + t] = static_cast<T>(m.values[t]);
  return out;
}

}  // namespace dvc::cyclegan
