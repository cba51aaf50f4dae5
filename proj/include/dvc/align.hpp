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
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "dvc/error.hpp"

// Dynamic time warping with a Euclidean frame distance and the symmetric
// step set {(1,0), (0,1), (1,1)} without slope weights.

namespace dvc::align {

using FeatureSequence = std::vector<std::vector<double>>;

struct WarpPath {
  std::vector<std::pair<std::size_t, std::size_t>> steps;
  double cost = 0.0;
};

inline double frame_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double acc = 0.0;
  for (std::size_t d = 0; d < a.size(); ++d) {
    const double diff = a[d] - b[d];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

inline void check_sequence(const FeatureSequence& s, const char* name, std::size_t dim) {
  if (s.empty()) throw Error(std::string("dtw: ") + name + " sequence is empty");
  for (const auto& f : s) {
    if (f.size() != dim) throw Error(std::string("dtw: ") + name + " frames have inconsistent dimension");
  }
}

// Globally optimal warping path. Ties prefer the diagonal step, then (1,0),
// then (0,1).
inline WarpPath dtw(const FeatureSequence& x, const FeatureSequence& y) {
  if (x.empty() || y.empty()) throw Error("dtw: empty sequence");
  const std::size_t dim = x[0].size();
  check_sequence(x, "source", dim);
  check_sequence(y, "target", dim);
  const std::size_t n = x.size(), m = y.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> acc(n * m, inf);
  auto at = [&](std::size_t i, std::size_t j) -> double& { return acc[i * m + j]; };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double d = frame_distance(x[i], y[j]);
      if (i == 0 && j == 0) {
        at(i, j) = d;
        continue;
      }
      double best = inf;
      if (i > 0 && j > 0) best = at(i - 1, j - 1);
      if (i > 0) best = std::min(best, at(i - 1, j));
      if (j > 0) best = std::min(best, at(i, j - 1));
      at(i, j) = d + best;
    }
  }
  WarpPath path;
  path.cost = at(n - 1, m - 1);
  std::size_t i = n - 1, j = m - 1;
  path.steps.emplace_back(i, j);
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0) {
      const double diag = at(i - 1, j - 1), up = at(i - 1, j), left = at(i, j - 1);
      if (diag <= up && diag <= left) {
        --i;
        --j;
      } else if (up <= left) {
        --i;
      } else {
        --j;
      }
    } else if (i > 0) {
      --i;
    } else {
      --j;
    }
    path.steps.emplace_back(i, j);
  }
  std::reverse(path.steps.begin(), path.steps.end());
  return path;
}

enum class Axis { source, target };

// Maps `x` onto the other sequence's timeline. With Axis::source, `x` is
// indexed by the path's first coordinate and the output has one frame per
// target index; frames mapped to the same output index are averaged.
inline FeatureSequence apply_warp(const FeatureSequence& x, const WarpPath& p, Axis axis) {
  if (p.steps.empty()) throw Error("apply_warp: empty path");
  auto own = [&](const std::pair<std::size_t, std::size_t>& s) { return axis == Axis::source ? s.first : s.second; };
  auto other = [&](const std::pair<std::size_t, std::size_t>& s) { return axis == Axis::source ? s.second : s.first; };
  const std::size_t own_len = own(p.steps.back()) + 1;
  const std::size_t out_len = other(p.steps.back()) + 1;
  if (own_len != x.size()) throw Error("apply_warp: path does not match sequence length");
  const std::size_t dim = x.empty() ? 0 : x[0].size();
  FeatureSequence out(out_len, std::vector<double>(dim, 0.0));
  std::vector<std::size_t> counts(out_len, 0);
  for (const auto& s : p.steps) {
    const auto src = own(s), dst = other(s);
    if (src >= x.size() || dst >= out_len) throw Error("apply_warp: path index out of range");
    for (std::size_t d = 0; d < dim; ++d) out[dst][d] += x[src][d];
    ++counts[dst];
  }
  for (std::size_t t = 0; t < out_len; ++t) {
    if (counts[t] == 0) throw Error("apply_warp: path skips an output frame");
    for (double& v : out[t]) v /= static_cast<double>(counts[t]);
  }
  return out;
}

// Rate for time_stretch that maps a source of src_dur seconds onto tgt_dur.
inline double stretch_rate_for_target(double src_dur, double tgt_dur) {
  if (!(src_dur > 0.0) || !(tgt_dur > 0.0)) throw Error("stretch_rate_for_target: durations must be positive");
  return src_dur / tgt_dur;
}

}  // namespace dvc::align
