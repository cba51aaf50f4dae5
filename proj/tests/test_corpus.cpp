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

#include <filesystem>
#include <fstream>
#include <set>

#include "dvc/corpus.hpp"
#include "dvc/synth.hpp"
#include "test_support.hpp"

using namespace dvc;
using namespace dvc::corpus;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

void touch_wav(const fs::path& p, double seconds = 0.1) {
  fs::create_directories(p.parent_path());
  write_wav(p, dvc::testing::tone(200.0, seconds, 0.1));
}

}  // namespace

TEST_CASE("layout patterns", "[corpus][layout]") {
  Layout flat(kDefaultLayout);
  const auto m = flat.match("F02_B1_UW33_M2.wav");
  REQUIRE(m);
  CHECK(m->first == "F02");
  CHECK(m->second == "UW33");
  CHECK_FALSE(flat.match("F02_B2_UW33_M2.wav"));
  CHECK_FALSE(flat.match("F02_B1_UW33_M2.wav.bak"));
  Layout nested("{speaker}/{word}.wav");
  CHECK(nested.match("M05/C1.wav")->first == "M05");
  CHECK_FALSE(nested.match("M05/x/C1.wav"));
  Layout repeated("{speaker}/{speaker}_{word}.wav");
  CHECK(repeated.match("A/A_w1.wav"));
  CHECK_FALSE(repeated.match("A/B_w1.wav"));
  CHECK_THROWS_AS(Layout("{speaker}.wav"), Error);
  CHECK_THROWS_AS(Layout("{speaker}_{word"), Error);
  CHECK_THROWS_AS(Layout("{speaker}_{take}_{word}"), Error);
}

TEST_CASE("manifest building", "[corpus][manifest]") {
  TempDir dir("dvc_test_manifest");
  const auto& root = dir.path;
  for (const char* s : {"D01", "D02", "C01"}) {
    for (const char* w : {"W01", "W02"}) touch_wav(root / (std::string(s) + "_B1_" + w + "_M2.wav"));
  }
  std::ofstream(root / "D01_B1_W01_M2.phn") << "aa eh\n";
  std::ofstream(root / "notes.txt") << "ignored\n";
  std::ofstream(root / "D02_B1_W03_M2.wav") << "not a wav";
  fs::create_directories(root / "sub");
  touch_wav(root / "sub" / "D01_B1_W01_M2.wav");

  ScopedWarningCapture warnings;
  const auto m = build_manifest(root, Layout(kDefaultLayout), {"C01"});
  CHECK(m.utterances.size() == 6);
  CHECK(warnings.messages().size() == 1);  // the unreadable wav
  CHECK(m.speakers.at("C01") == Role::control);
  CHECK(m.speakers.at("D01") == Role::dysarthric);
  CHECK(m.speakers_with(Role::control) == std::vector<std::string>{"C01"});
  const auto& u = m.find("D01_W01");
  CHECK(u.word_id == "W01");
  CHECK(u.duration_s == Catch::Approx(0.1));
  REQUIRE(u.transcript_path);
  CHECK(read_transcript(*u.transcript_path) == std::vector<std::string>{"aa", "eh"});
  CHECK_FALSE(m.find("D02_W01").transcript_path);
  CHECK_THROWS_AS(m.find("D09_W01"), Error);

  std::set<std::string> ids;
  for (const auto& x : m.utterances) ids.insert(x.utterance_id);
  CHECK(ids.size() == m.utterances.size());

  const auto again = build_manifest(root, Layout(kDefaultLayout), {"C01"});
  write_manifest(root / "a.jsonl", m);
  write_manifest(root / "b.jsonl", again);
  CHECK(hash_file(root / "a.jsonl") == hash_file(root / "b.jsonl"));
  const auto back = read_manifest(root / "a.jsonl");
  REQUIRE(back.utterances.size() == m.utterances.size());
  for (std::size_t i = 0; i < m.utterances.size(); ++i) {
    CHECK(back.utterances[i].utterance_id == m.utterances[i].utterance_id);
    CHECK(back.utterances[i].audio_path == m.utterances[i].audio_path);
    CHECK(back.utterances[i].transcript_path == m.utterances[i].transcript_path);
  }
  CHECK(back.speakers == m.speakers);

  Layout nested("{speaker}/{speaker}_B1_{word}_M2.wav");
  touch_wav(root / "n" / "D01" / "D01_B1_W01_M2.wav");
  CHECK(build_manifest(root / "n", nested).utterances.size() == 1);
  CHECK_THROWS_AS(build_manifest(root / "missing", nested), Error);
  CHECK_THROWS_AS(build_manifest(root, Layout("{speaker}-{word}.flac")), Error);
}

TEST_CASE("parallel pairing", "[corpus][pairing]") {
  Manifest m;
  m.speakers = {{"S", Role::dysarthric}, {"T", Role::control}};
  m.utterances = {{"S_A", "S", "A", "s_a.wav", std::nullopt, 1.0},
                  {"S_B", "S", "B", "s_b.wav", std::nullopt, 1.0},
                  {"T_B", "T", "B", "t_b.wav", std::nullopt, 1.0},
                  {"T_C", "T", "C", "t_c.wav", std::nullopt, 1.0}};
  ScopedWarningCapture warnings;
  std::size_t unmatched = 0;
  const auto p = pair_parallel(m, "S", "T", &unmatched);
  REQUIRE(p.size() == 1);
  CHECK(p[0].first.utterance_id == "S_B");
  CHECK(p[0].second.utterance_id == "T_B");
  CHECK(unmatched == 2);
  const auto q = pair_parallel(m, "T", "S");
  REQUIRE(q.size() == 1);
  CHECK(q[0].first.utterance_id == p[0].second.utterance_id);
  CHECK(q[0].second.utterance_id == p[0].first.utterance_id);
  CHECK_THROWS_AS(pair_parallel(m, "S", "X"), Error);
  m.utterances.erase(m.utterances.begin() + 1);
  CHECK_THROWS_AS(pair_parallel(m, "S", "T"), Error);
}

TEST_CASE("leave-one-out splits", "[corpus][splits]") {
  Manifest m;
  const std::vector<std::string> group{"D1", "D2", "D3", "D4"};
  for (const auto& s : group) {
    m.speakers[s] = Role::dysarthric;
    for (const char* w : {"A", "B", "C"}) m.utterances.push_back({s + "_" + w, s, w, "x.wav", std::nullopt, 1.0});
  }
  m.speakers["C1"] = Role::control;
  m.utterances.push_back({"C1_A", "C1", "A", "c.wav", std::nullopt, 1.0});
  const auto folds = leave_one_out_splits(m, group);
  REQUIRE(folds.size() == 4);
  std::set<std::string> held_out;
  for (const auto& f : folds) {
    held_out.insert(f.eval_speaker);
    CHECK(f.train_speakers.size() == 3);
    CHECK(f.eval_utts.size() == 3);
    CHECK(f.train_utts.size() == 9);
    std::set<std::string> train(f.train_utts.begin(), f.train_utts.end());
    for (const auto& id : f.eval_utts) {
      CHECK_FALSE(train.count(id));
      CHECK(id.rfind(f.eval_speaker + "_", 0) == 0);
    }
    CHECK(std::find(f.train_speakers.begin(), f.train_speakers.end(), f.eval_speaker) == f.train_speakers.end());
  }
  CHECK(held_out == std::set<std::string>(group.begin(), group.end()));
  CHECK_THROWS_AS(leave_one_out_splits(m, {"D1", "D2", "D3"}), Error);
  CHECK_THROWS_AS(leave_one_out_splits(m, {"D1", "D2", "D3", "D3"}), Error);
  CHECK_THROWS_AS(leave_one_out_splits(m, {"D1", "D2", "D3", "D9"}), Error);

  TempDir dir("dvc_test_splits");
  write_splits(dir.path / "s.json", folds);
  const auto back = read_splits(dir.path / "s.json");
  REQUIRE(back.size() == 4);
  CHECK(back[2].eval_speaker == folds[2].eval_speaker);
  CHECK(back[2].train_utts == folds[2].train_utts);
}

TEST_CASE("synthetic corpus", "[corpus][synth]") {
  TempDir dir("dvc_test_synth");
  SynthConfig cfg;
  cfg.n_words = 5;
  const auto sum = write_synth_corpus(dir.path, cfg);
  CHECK(sum.files == 25);
  CHECK(sum.words.size() == 5);
  std::set<std::vector<std::string>> distinct;
  for (const auto& w : sum.words) {
    distinct.insert(w.phones);
    CHECK(w.phones.size() >= 2);
    CHECK(w.phones.size() <= 4);
    for (std::size_t i = 1; i < w.phones.size(); ++i) CHECK(w.phones[i] != w.phones[i - 1]);
  }
  CHECK(distinct.size() == 5);
  const auto m = build_manifest(dir.path, Layout(kDefaultLayout), {"C01"});
  CHECK(m.utterances.size() == 25);
  CHECK(m.speakers_with(Role::dysarthric).size() == 4);

  // dysarthric words are longer and lower than the control recordings
  const auto c = read_wav(dir.path / "C01_B1_W01_M2.wav");
  const auto d = read_wav(dir.path / "D02_B1_W01_M2.wav");
  CHECK(d.duration() > c.duration());
  const auto first = sum.words[0].phones[0];
  double hz = 0.0;
  for (const auto& p : toy_phonemes()) {
    if (p.symbol == first) hz = p.hz;
  }
  auto head = [](const Waveform& w) {
    const auto start = seconds_to_samples(0.8, w.sample_rate);
    return Waveform(std::vector<double>(w.samples.begin() + static_cast<std::ptrdiff_t>(start),
                                        w.samples.begin() + static_cast<std::ptrdiff_t>(start + 1024)),
                    w.sample_rate);
  };
  CHECK(dvc::testing::dominant_frequency(head(c)) == Catch::Approx(hz).margin(20.0));
  CHECK(dvc::testing::dominant_frequency(head(d)) == Catch::Approx(hz * 0.5).margin(20.0));

  TempDir again("dvc_test_synth2");
  write_synth_corpus(again.path, cfg);
  for (const auto& e : fs::directory_iterator(dir.path)) {
    CHECK(hash_file(e.path()) == hash_file(again.path / e.path().filename()));
  }
}
