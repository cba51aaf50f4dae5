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

#include <catch_amalgamated.hpp>

#include <random>

#include "dvc/align.hpp"
#include "dvc/dsp.hpp"
#include "test_support.hpp"

using namespace dvc::align;

namespace {

FeatureSequence seq1(std::initializer_list<double> v) {
  FeatureSequence s;
  for (double x : v) s.push_back({x});
  return s;
}

FeatureSequence random_seq(std::mt19937_64& rng, std::size_t len, std::size_t dim, bool integer) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> k(0, 3);
  FeatureSequence s(len, std::vector<double>(dim));
  for (auto& f : s)
    for (double& v : f) v = integer ? k(rng) : g(rng);
  return s;
}

bool valid_path(const WarpPath& p, std::size_t n, std::size_t m) {
  if (p.steps.front() != std::pair<std::size_t, std::size_t>{0, 0}) return false;
  if (p.steps.back() != std::pair<std::size_t, std::size_t>{n - 1, m - 1}) return false;
  for (std::size_t s = 1; s < p.steps.size(); ++s) {
    const auto di = p.steps[s].first - p.steps[s - 1].first;
    const auto dj = p.steps[s].second - p.steps[s - 1].second;
    if (di > 1 || dj > 1 || di + dj == 0) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("dtw examples", "[align]") {
  const auto x = seq1({0, 1, 2});
  const auto p = dtw(x, x);
  CHECK(p.cost == 0.0);
  CHECK(p.steps == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {1, 1}, {2, 2}});

  const auto y = seq1({0, 0, 1, 2});
  const auto q = dtw(x, y);
  CHECK(q.cost == 0.0);
  CHECK(q.steps == std::vector<std::pair<std::size_t, std::size_t>>{{0, 0}, {0, 1}, {1, 2}, {2, 3}});
  CHECK(apply_warp(x, q, Axis::source) == y);
  CHECK(apply_warp(y, q, Axis::target).size() == x.size());
  CHECK(apply_warp(x, p, Axis::source) == x);
}

TEST_CASE("dtw errors", "[align]") {
  CHECK_THROWS_AS(dtw({}, seq1({1})), dvc::Error);
  CHECK_THROWS_AS(dtw(seq1({1}), {{1.0, 2.0}}), dvc::Error);
  CHECK_THROWS_AS(dtw({{1.0}, {1.0, 2.0}}, seq1({1, 2})), dvc::Error);
  const auto p = dtw(seq1({0, 1, 2}), seq1({0, 1}));
  CHECK_THROWS_AS(apply_warp(seq1({0, 1}), p, Axis::source), dvc::Error);
  CHECK_THROWS_AS(apply_warp(seq1({}), WarpPath{}, Axis::source), dvc::Error);
}

TEST_CASE("dtw matches exhaustive enumeration", "[align][oracle]") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<std::size_t> len(1, 6), dim(1, 3);
  for (int trial = 0; trial < 200; ++trial) {
    const bool integer = trial % 2 == 0;
    const auto d = integer ? 1 : dim(rng);
    const auto x = random_seq(rng, len(rng), d, integer);
    const auto y = random_seq(rng, len(rng), d, integer);
    const auto p = dtw(x, y);
    const auto o = dvc::testing::exhaustive_dtw(x, y);
    REQUIRE(valid_path(p, x.size(), y.size()));
    CHECK(p.cost == o.cost);
    CHECK(p.steps == o.path);
  }
}

TEST_CASE("dtw properties", "[align]") {
  std::mt19937_64 rng(12);
  std::uniform_int_distribution<std::size_t> len(1, 20), dim(1, 4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto d = dim(rng);
    const auto x = random_seq(rng, len(rng), d, false);
    const auto y = random_seq(rng, len(rng), d, false);
    CHECK(dtw(x, x).cost == 0.0);
    const auto xy = dtw(x, y), yx = dtw(y, x);
    CHECK(xy.cost == Catch::Approx(yx.cost).epsilon(1e-12));
    // Duplicating a shared final frame on both sides leaves the cost unchanged.
    auto xs = x, ys = y;
    ys.back() = xs.back();
    const double shared = dtw(xs, ys).cost;
    xs.push_back(xs.back());
    ys.push_back(ys.back());
    CHECK(dtw(xs, ys).cost == Catch::Approx(shared).epsilon(1e-12));
    CHECK(apply_warp(x, xy, Axis::source).size() == y.size());
    CHECK(apply_warp(y, xy, Axis::target).size() == x.size());
    // Merged frames are averages, so the warped sequence stays in the source's range.
    const auto w = apply_warp(x, xy, Axis::source);
    for (std::size_t k = 0; k < d; ++k) {
      double lo = x[0][k], hi = x[0][k];
      for (const auto& f : x) lo = std::min(lo, f[k]), hi = std::max(hi, f[k]);
      for (const auto& f : w) CHECK((f[k] >= lo - 1e-12 && f[k] <= hi + 1e-12));
    }
  }
}

TEST_CASE("stretch rate", "[align]") {
  CHECK(stretch_rate_for_target(2.0, 1.0) == 2.0);
  CHECK(stretch_rate_for_target(1.3, 1.3) == 1.0);
  CHECK_THROWS_AS(stretch_rate_for_target(0.0, 1.0), dvc::Error);
  CHECK_THROWS_AS(stretch_rate_for_target(1.0, -1.0), dvc::Error);

  dvc::MelConfig cfg;
  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> dur(0.3, 1.5);
  for (int i = 0; i < 50; ++i) {
    const double src = dur(rng), tgt = dur(rng);
    const auto w = dvc::testing::tone(300.0, src, 0.4);
    const auto out = dvc::time_stretch(w, stretch_rate_for_target(w.duration(), tgt), cfg.stft());
    CHECK(std::abs(out.duration() - tgt) <= 256.0 / 16000.0 + 1.0 / 16000.0);
  }
}
