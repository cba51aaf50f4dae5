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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <random>

#include "dvc/cyclegan.hpp"
#include "test_support.hpp"

using namespace dvc;
using namespace dvc::cyclegan;
using dvc::testing::LossKind;
using T1 = nn::Tensor<double>;

namespace {

double value(nn::Var<double> v) { return v.value().item(); }

nn::Tensor<float> random_features(std::size_t D, std::size_t T, std::mt19937_64& rng, float offset = 0.0f) {
  nn::Tensor<float> x(nn::Shape{D, T});
  std::normal_distribution<float> g(offset, 1.0f);
  for (auto& v : x.values) v = g(rng);
  return x;
}

TrainingSet tiny_set(std::uint64_t seed, std::size_t D = 6) {
  std::mt19937_64 rng(seed);
  TrainingSet s;
  for (int i = 0; i < 3; ++i) s.source.push_back(random_features(D, 20 + 3 * i, rng, -0.5f));
  for (int i = 0; i < 3; ++i) s.target.push_back(random_features(D, 14 + 2 * i, rng, 0.5f));
  s.pairs = {{0, 0}, {1, 1}, {2, 2}};
  return s;
}

GanConfig tiny_config(std::size_t iterations = 12) {
  GanConfig c;
  c.name = "tiny";
  c.hidden = 4;
  c.disc_hidden = 4;
  c.residual_blocks = 1;
  c.segment_len = 8;
  c.iterations = iterations;
  c.seed = 3;
  return c;
}

FeatureStats unit_stats(std::size_t D) { return {std::vector<double>(D, 0.0), std::vector<double>(D, 1.0)}; }

std::vector<float> flat_parameters(ModelPair<float>& m) {
  std::vector<float> out;
  for (auto* p : m.parameters()) out.insert(out.end(), p->value.values.begin(), p->value.values.end());
  return out;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("loss values on hand-computed inputs", "[cyclegan][losses]") {
  nn::Tape<double> t;
  auto c = [&](std::vector<double> v) {
    const std::size_t n = v.size();
    return t.constant(T1(nn::Shape{1, n}, std::move(v)));
  };
  CHECK(value(adversarial_loss(c({1, 1}), c({0, 0}), Side::discriminator)) == 0.0);
  CHECK(value(adversarial_loss(c({1, 1}), c({0, 0}), Side::generator)) == 1.0);
  CHECK(value(adversarial_loss(c({0.5, 1.5}), c({0.5, -0.5}), Side::discriminator)) == Catch::Approx(0.5));
  CHECK(value(adversarial_loss(c({0.5, 1.5}), c({0.5, -0.5}), Side::generator)) == Catch::Approx(1.25));
  CHECK(value(generator_adversarial_loss(c({0.5, -0.5}))) == Catch::Approx(1.25));

  const auto x = c({1, 2}), xc = c({1.5, 1}), y = c({0, 0}), yc = c({1, -1});
  CHECK(value(cycle_loss(x, xc, y, yc, CycleNorm::l1)) == Catch::Approx(0.75 + 1.0));
  CHECK(value(cycle_loss(x, xc, y, yc, CycleNorm::l2)) == Catch::Approx(0.625 + 1.0));
  // identity: mean|G(y) - y| + mean|F(x) - x|
  CHECK(value(identity_loss(x, xc, y, yc)) == Catch::Approx(0.75 + 1.0));

  GanConfig plain;
  CHECK_THROWS_AS(second_adversarial_loss(plain, x, xc, Side::generator), Error);
  GanConfig two;
  two.two_step = true;
  CHECK(value(second_adversarial_loss(two, c({1, 1}), c({0, 0}), Side::discriminator)) == 0.0);
}

TEST_CASE("total loss weighting", "[cyclegan][losses]") {
  nn::Tape<double> t;
  auto s = [&](double v) { return t.constant(T1::scalar(v)); };
  GanConfig cfg;
  cfg.lambda_cycle = 10.0;
  cfg.lambda_id = 5.0;
  cfg.id_zero_after = 1000;
  cfg.scale = 10.0;  // identity active for iterations < 100
  LossTerms<double> terms{s(1.0), s(2.0), s(0.5), s(0.25), std::nullopt, std::nullopt};
  CHECK(value(total_loss(terms, cfg, 0)) == Catch::Approx(1 + 2 + 10 * 0.5 + 5 * 0.25));
  CHECK(value(total_loss(terms, cfg, 99)) == Catch::Approx(1 + 2 + 10 * 0.5 + 5 * 0.25));
  CHECK(value(total_loss(terms, cfg, 100)) == Catch::Approx(1 + 2 + 10 * 0.5));
  cfg.two_step = true;
  CHECK_THROWS_AS(total_loss(terms, cfg, 0), Error);
  terms.adv2_x = s(0.125);
  terms.adv2_y = s(0.0625);
  CHECK(value(total_loss(terms, cfg, 100)) == Catch::Approx(1 + 2 + 10 * 0.5 + 0.1875));
}

TEST_CASE("loss gradients match central differences", "[cyclegan][gradcheck]") {
  for (auto kind : {LossKind::adversarial_generator, LossKind::adversarial_discriminator, LossKind::cycle_l1,
                    LossKind::cycle_l2, LossKind::identity, LossKind::second_adversarial}) {
    for (std::uint64_t seed = 1; seed <= 4; ++seed) {
      const auto r = dvc::testing::loss_gradient_instance(kind, seed);
      INFO(dvc::testing::to_string(kind) << " seed " << seed << " max_rel " << r.max_rel);
      CHECK(r.checked > 0);
      CHECK(r.max_rel <= 1e-4);
    }
  }
}

TEST_CASE("variant registry", "[cyclegan][config]") {
  const auto v = ablation_variants();
  REQUIRE(v.size() == 12);
  std::set<std::string> names;
  for (const auto& c : v) names.insert(c.name);
  CHECK(names.size() == 12);
  for (std::size_t i = 0; i < 6; ++i) {
    CHECK_FALSE(v[i].ts_input);
    CHECK(v[i + 6].ts_input);
    CHECK(v[i + 6].name == v[i].name + "+ts");
    CHECK(to_json(v[i + 6].base()) == to_json(v[i]));
  }
  const auto d = find_variant("discogan");
  CHECK(d.cycle_norm == CycleNorm::l2);
  CHECK(d.use_dtw);
  CHECK_FALSE(d.two_step);
  const auto m = find_variant("maskcyclegan-vc");
  CHECK(m.fif_da);
  CHECK(m.two_step);
  CHECK_FALSE(m.use_dtw);
  CHECK(find_variant("cyclegan-vc+dtw+2step").use_dtw);
  CHECK(find_variant("cyclegan-vc+dtw+2step").two_step);
  CHECK(is_reference_row("dysarthric"));
  CHECK(is_reference_row("dysarthric+ts"));
  CHECK_FALSE(is_reference_row("cyclegan-vc"));
  try {
    find_variant("stargan");
    FAIL("no error");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("stargan") != std::string::npos);
    for (const auto& n : names) CHECK(msg.find(n) != std::string::npos);
  }
}

TEST_CASE("config overrides, hashing and scaling", "[cyclegan][config]") {
  const auto base = cyclegan_vc();
  const auto c = apply_overrides(base, {{"lambda_cycle", 3.0}, {"cycle_norm", "l2"}, {"iterations", 7}});
  CHECK(c.lambda_cycle == 3.0);
  CHECK(c.cycle_norm == CycleNorm::l2);
  CHECK(c.total_iterations(100) == 7);
  CHECK(config_hash(c) != config_hash(base));
  CHECK(config_hash(from_json(to_json(c))) == config_hash(c));
  CHECK_THROWS_AS(apply_overrides(base, {{"lamda_cycle", 1.0}}), Error);
  CHECK_THROWS_AS(apply_overrides(base, {{"cycle_norm", "l3"}}), Error);

  GanConfig s;
  s.scale = 1000.0;
  CHECK(s.scaled_id_zero_after() == 10);
  CHECK(s.total_iterations(36) == 36);  // 1000 epochs x 36 pairs / 1000
  CHECK(s.scaled_schedule().decay_start == 200);
  s.scale = 1e9;
  CHECK(s.scaled_id_zero_after() == 1);
  s.scale = 0.0;
  CHECK_THROWS_AS(s.validate(), Error);
  GanConfig b;
  b.batch_size = 2;
  CHECK_THROWS_AS(b.validate(), Error);
}

TEST_CASE("segments and reflection", "[cyclegan][augment]") {
  CHECK(reflect_index(0, 4) == 0);
  CHECK(reflect_index(3, 4) == 3);
  CHECK(reflect_index(4, 4) == 2);
  CHECK(reflect_index(6, 4) == 0);
  CHECK(reflect_index(7, 4) == 1);
  CHECK(reflect_index(5, 1) == 0);
  nn::Tensor<float> x(nn::Shape{2, 3}, std::vector<float>{0, 1, 2, 10, 11, 12});
  const auto c = crop_frames(x, 1, 5);
  CHECK(c.values == std::vector<float>{1, 2, 1, 0, 1, 11, 12, 11, 10, 11});
  std::mt19937_64 rng(1);
  Segment where;
  nn::Tensor<float> long_x(nn::Shape{1, 50});
  for (std::size_t i = 0; i < 50; ++i) long_x.values[i] = static_cast<float>(i);
  for (int i = 0; i < 100; ++i) {
    const auto s = sample_segment(long_x, 8, rng, &where);
    REQUIRE(s.dim(1) == 8);
    CHECK(where.start + 8 <= 50);
    CHECK(s.values.front() == static_cast<float>(where.start));
  }
  CHECK(sample_segment(x, 8, rng).dim(1) == 8);
  CHECK_THROWS_AS(sample_segment(nn::Tensor<float>(nn::Shape{2, 0}), 8, rng), Error);
}

TEST_CASE("fill-in-frame masks", "[cyclegan][augment][fif]") {
  std::mt19937_64 rng(11);
  const std::size_t L = 64;
  auto seg = random_features(5, L, rng, 1.0f);
  double masked = 0.0;
  const int draws = 10000;
  for (int i = 0; i < draws; ++i) {
    const auto [out, m] = fif_mask(seg, rng);
    REQUIRE(m.width <= L / 2);
    REQUIRE(m.start + m.width <= L);
    std::size_t zeros = 0;
    for (float v : m.values) zeros += v == 0.0f;
    REQUIRE(zeros == m.width);
    for (std::size_t d = 0; d < 5; ++d) {
      for (std::size_t t = 0; t < L; ++t) {
        const float expect = m.values[t] == 0.0f ? 0.0f : seg.values[d * L + t];
        REQUIRE(out.values[d * L + t] == expect);
      }
    }
    if (i < 50) {
      const auto ch = with_mask_channel(out, m);
      REQUIRE(ch.dim(0) == 6);
      for (std::size_t t = 0; t < L; ++t) REQUIRE(ch.values[5 * L + t] == m.values[t]);
    }
    masked += static_cast<double>(m.width) / static_cast<double>(L);
  }
  // width ~ U{0..32}: mean 16 frames of 64
  CHECK(expected_masked_fraction(L) == 0.25);
  CHECK(std::abs(masked / draws - 0.25) <= 0.01);
  CHECK(all_ones_mask(4).values == std::vector<float>{1, 1, 1, 1});
  CHECK_THROWS_AS(make_frame_mask(4, 3, 2), Error);
  CHECK_THROWS_AS(apply_frame_mask(seg, all_ones_mask(L - 1)), Error);
}

TEST_CASE("feature statistics", "[cyclegan][model]") {
  MelSpectrogram a, b;
  a.config.n_mels = b.config.n_mels = 2;
  a.frames = {{0, 10}, {2, 10}};
  b.frames = {{4, 16}};
  const auto s = compute_feature_stats({&a, &b});
  CHECK(s.mean[0] == Catch::Approx(2.0));
  CHECK(s.mean[1] == Catch::Approx(12.0));
  // squared deviations: band 0 {4, 0, 4}, band 1 {4, 4, 16}
  const double pooled = std::sqrt((8.0 + 24.0) / 6.0);
  CHECK(s.std[0] == Catch::Approx(pooled));
  CHECK(s.std[1] == Catch::Approx(pooled));
  const auto x = normalize(a, s);
  CHECK(x.dim(0) == 2);
  CHECK(x.dim(1) == 2);
  CHECK(x.values[0] == Catch::Approx(-2.0 / pooled));
  const auto back = denormalize(x, s, a.config, 7);
  CHECK(back.length == 7);
  for (std::size_t t = 0; t < 2; ++t)
    for (std::size_t d = 0; d < 2; ++d) CHECK(back.frames[t][d] == Catch::Approx(a.frames[t][d]).margin(1e-5));
  MelSpectrogram flat;
  flat.config.n_mels = 2;
  flat.frames = {{1, 1}, {1, 1}};
  CHECK(compute_feature_stats({&flat}).std[0] == 1e-3);
  CHECK_THROWS_AS(compute_feature_stats({}), Error);
}

TEST_CASE("training logs, identity cutoff and determinism", "[cyclegan][train]") {
  auto cfg = tiny_config(30);
  cfg.id_zero_after = 1000;
  cfg.scale = 100.0;  // identity term off from iteration 10
  const auto set = tiny_set(1);
  auto a = train(cfg, set, unit_stats(6));
  CHECK(a.iterations == 30);
  const auto series = loss_series(cfg);
  CHECK(a.curve.size() == 30 * series.size());
  for (const auto& r : a.curve) {
    CHECK(std::isfinite(r.value));
    if (r.name == "identity") {
      if (r.iteration >= 10) CHECK(r.value == 0.0);
      else CHECK(r.value > 0.0);
    }
  }
  auto b = train(cfg, set, unit_stats(6));
  CHECK(flat_parameters(a.models) == flat_parameters(b.models));
  cfg.seed = 4;
  auto c = train(cfg, set, unit_stats(6));
  CHECK(flat_parameters(a.models) != flat_parameters(c.models));

  auto two = tiny_config(4);
  two.two_step = true;
  two.fif_da = true;
  two.use_dtw = true;
  const auto r = train(two, set, unit_stats(6));
  CHECK(r.curve.size() == 4 * loss_series(two).size());
  CHECK(r.models.has_second());

  auto dtw = tiny_config(2);
  dtw.use_dtw = true;
  auto unpaired = set;
  unpaired.pairs.clear();
  CHECK_THROWS_AS(train(dtw, unpaired, unit_stats(6)), Error);
  CHECK_THROWS_AS(train(dtw, TrainingSet{}, unit_stats(6)), Error);
}

TEST_CASE("non-finite features abort training with a last-good checkpoint", "[cyclegan][train]") {
  auto set = tiny_set(2);
  for (auto& x : set.source)
    for (auto& v : x.values) v = std::numeric_limits<float>::quiet_NaN();
  const auto dir = std::filesystem::temp_directory_path() / "dvc_test_abort";
  std::filesystem::remove_all(dir);
  TrainOptions opt;
  opt.checkpoint_dir = dir;
  try {
    train(tiny_config(5), set, unit_stats(6), opt);
    FAIL("training did not abort");
  } catch (const TrainingAborted& e) {
    CHECK(e.iteration == 0);
    CHECK(std::string(e.what()).find("non-finite") != std::string::npos);
  }
  CHECK(std::filesystem::exists(dir / "last_good.json"));
  CHECK_FALSE(std::filesystem::exists(dir / "model.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("checkpoints, conversion and time stretching", "[cyclegan][convert]") {
  MelConfig mel;
  mel.fft_size = 256;
  mel.hop = 64;
  mel.n_mels = 12;
  const auto src = dvc::testing::tone(300.0, 1.0, 0.3);
  const auto tgt = dvc::testing::tone(500.0, 0.5, 0.3);
  const auto ms = mel_spectrogram(src, mel), mt = mel_spectrogram(tgt, mel);
  const auto stats = compute_feature_stats({&ms, &mt});
  TrainingSet set{{normalize(ms, stats)}, {normalize(mt, stats)}, {}};
  auto cfg = tiny_config(6);
  const auto dir = std::filesystem::temp_directory_path() / "dvc_test_convert";
  std::filesystem::remove_all(dir);
  TrainOptions opt;
  opt.checkpoint_dir = dir;
  auto res = train(cfg, set, stats, opt);
  REQUIRE(std::filesystem::exists(dir / "model.bin"));

  ConvertOptions co;
  co.griffin_lim_iters = 4;
  const auto a = convert(res.models, stats, src, mel, co);
  CHECK(a.audio.size() == src.size());
  CHECK(a.output_mel.num_frames() == ms.num_frames());
  CHECK(a.stretch_rate == 1.0);

  auto loaded = load_model(dir / "model");
  CHECK(flat_parameters(loaded.models) == flat_parameters(res.models));
  CHECK(loaded.stats.mean == stats.mean);
  const auto b = convert(loaded.models, loaded.stats, src, mel, co);
  CHECK(b.audio.samples == a.audio.samples);

  // a +ts config trains the base model: same seed, same bytes
  const auto bytes = slurp(dir / "model.bin");
  TrainOptions opt2;
  opt2.checkpoint_dir = dir / "ts";
  train(with_ts(cfg), set, stats, opt2);
  CHECK(slurp(dir / "ts" / "model.bin") == bytes);

  co.time_stretch = true;
  co.target_duration = 0.5;
  const auto s = convert(res.models, stats, src, mel, co);
  CHECK(s.stretch_rate == Catch::Approx(2.0));
  CHECK(std::abs(static_cast<double>(s.audio.size()) - 8000.0) <= static_cast<double>(mel.hop));
  co.target_duration = 0.0;
  CHECK_THROWS_AS(convert(res.models, stats, src, mel, co), Error);
  co.time_stretch = false;
  co.direction = Direction::y2x;
  CHECK(convert(res.models, stats, tgt, mel, co).audio.size() == tgt.size());
  CHECK(parse_direction("y2x") == Direction::y2x);
  CHECK_THROWS_AS(parse_direction("xy"), Error);
  std::filesystem::remove_all(dir);
}
