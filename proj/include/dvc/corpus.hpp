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
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "dvc/error.hpp"
#include "dvc/wav.hpp"

// Word-recording manifests, parallel pairing and leave-one-speaker-out folds.

namespace dvc::corpus {

enum class Role { dysarthric, control };

inline const char* to_string(Role r) { return r == Role::dysarthric ? "dysarthric" : "control"; }

inline Role parse_role(const std::string& s) {
  if (s == "dysarthric") return Role::dysarthric;
  if (s == "control") return Role::control;
  throw Error("unknown speaker role '" + s + "'");
}

struct Utterance {
  std::string utterance_id;
  std::string speaker_id;
  std::string word_id;
  std::filesystem::path audio_path;
  std::optional<std::filesystem::path> transcript_path;
  double duration_s = 0.0;
};

struct Manifest {
  std::vector<Utterance> utterances;
  std::map<std::string, Role> speakers;

  std::vector<const Utterance*> of_speaker(const std::string& speaker) const {
    std::vector<const Utterance*> out;
    for (const auto& u : utterances) {
      if (u.speaker_id == speaker) out.push_back(&u);
    }
    return out;
  }

  const Utterance& find(const std::string& utterance_id) const {
    for (const auto& u : utterances) {
      if (u.utterance_id == utterance_id) return u;
    }
    throw Error("manifest has no utterance '" + utterance_id + "'");
  }

  std::vector<std::string> speakers_with(Role r) const {
    std::vector<std::string> out;
    for (const auto& [s, role] : speakers) {
      if (role == r) out.push_back(s);
    }
    return out;
  }
};

// Filename pattern with {speaker} and {word} placeholders, matched against
// the path relative to the corpus root, e.g. "{speaker}_B1_{word}_M2.wav".
class Layout {
 public:
  explicit Layout(std::string pattern) : pattern_(std::move(pattern)) {
    std::string re;
    int next_group = 1;
    std::map<std::string, int> groups;
    for (std::size_t i = 0; i < pattern_.size();) {
      if (pattern_[i] == '{') {
        const auto close = pattern_.find('}', i);
        if (close == std::string::npos) throw Error("layout: unterminated placeholder in '" + pattern_ + "'");
        const auto name = pattern_.substr(i + 1, close - i - 1);
        if (name != "speaker" && name != "word") throw Error("layout: unknown placeholder {" + name + "}");
        if (auto it = groups.find(name); it != groups.end()) {
          re += "\\" + std::to_string(it->second);
        } else {
          groups[name] = next_group++;
          re += "([^/]+?)";
        }
        i = close + 1;
      } else {
        const char c = pattern_[i++];
        if (std::string_view(".^$|()[]*+?\\{}").find(c) != std::string_view::npos) re += '\\';
        re += c;
      }
    }
    if (!groups.count("speaker") || !groups.count("word")) throw Error("layout: pattern needs {speaker} and {word}");
    speaker_group_ = groups["speaker"];
    word_group_ = groups["word"];
    re_ = std::regex(re);
  }

  std::optional<std::pair<std::string, std::string>> match(const std::string& relative) const {
    std::smatch m;
    if (!std::regex_match(relative, m, re_)) return std::nullopt;
    return std::pair{m[speaker_group_].str(), m[word_group_].str()};
  }

  const std::string& pattern() const { return pattern_; }

 private:
  std::string pattern_;
  std::regex re_;
  int speaker_group_ = 0;
  int word_group_ = 0;
};

inline constexpr const char* kDefaultLayout = "{speaker}_B1_{word}_M2.wav";

inline std::string utterance_id(const std::string& speaker, const std::string& word) { return speaker + "_" + word; }

// Scans root recursively (sorted by path). Speakers listed in `control` get
// the control role, all others are dysarthric.
inline Manifest build_manifest(const std::filesystem::path& root, const Layout& layout,
                               const std::set<std::string>& control = {}) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(root)) throw Error("corpus root " + root.string() + " is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  Manifest m;
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto& f : files) {
    const auto rel = fs::relative(f, root).generic_string();
    const auto hit = layout.match(rel);
    if (!hit) continue;
    const auto& [speaker, word] = *hit;
    if (word.empty() || speaker.empty()) continue;
    if (!seen.insert({speaker, word}).second) {
      warn("manifest: duplicate recording of word '" + word + "' by " + speaker + " (" + rel + "), skipped");
      continue;
    }
    Utterance u{utterance_id(speaker, word), speaker, word, f, std::nullopt, 0.0};
    try {
      u.duration_s = read_wav_info(f).duration();
    } catch (const std::exception& e) {
      warn("manifest: skipping unreadable " + rel + ": " + e.what());
      seen.erase({speaker, word});
      continue;
    }
    auto phn = f;
    phn.replace_extension(".phn");
    if (fs::exists(phn)) u.transcript_path = phn;
    m.speakers.emplace(speaker, control.count(speaker) ? Role::control : Role::dysarthric);
    m.utterances.push_back(std::move(u));
  }
  if (m.utterances.empty()) throw Error("no utterances found under " + root.string() + " matching " + layout.pattern());
  return m;
}

inline nlohmann::json to_json(const Utterance& u, Role role) {
  nlohmann::json j{{"utterance_id", u.utterance_id},
                   {"speaker_id", u.speaker_id},
                   {"word_id", u.word_id},
                   {"audio_path", u.audio_path.generic_string()},
                   {"duration_s", u.duration_s},
                   {"role", to_string(role)}};
  j["transcript_path"] = u.transcript_path ? nlohmann::json(u.transcript_path->generic_string()) : nlohmann::json();
  return j;
}

inline void write_manifest(const std::filesystem::path& path, const Manifest& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  for (const auto& u : m.utterances) out << to_json(u, m.speakers.at(u.speaker_id)).dump() << '\n';
}

inline Manifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open manifest " + path.string());
  Manifest m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    Utterance u{j.at("utterance_id"), j.at("speaker_id"), j.at("word_id"),
                j.at("audio_path").get<std::string>(), std::nullopt, j.at("duration_s")};
    if (!j.at("transcript_path").is_null()) u.transcript_path = j.at("transcript_path").get<std::string>();
    m.speakers[u.speaker_id] = parse_role(j.at("role"));
    m.utterances.push_back(std::move(u));
  }
  if (m.utterances.empty()) throw Error("manifest " + path.string() + " is empty");
  return m;
}

// Source/target utterances with the same word, in source order.
inline std::vector<std::pair<Utterance, Utterance>> pair_parallel(const Manifest& m, const std::string& src,
                                                                  const std::string& tgt,
                                                                  std::size_t* unmatched = nullptr) {
  for (const auto* s : {&src, &tgt}) {
    if (!m.speakers.count(*s)) throw Error("pair_parallel: unknown speaker '" + *s + "'");
  }
  std::map<std::string, const Utterance*> by_word;
  for (const auto* u : m.of_speaker(tgt)) by_word[u->word_id] = u;
  std::vector<std::pair<Utterance, Utterance>> out;
  std::size_t missing = 0;
  const auto src_utts = m.of_speaker(src);
  for (const auto* u : src_utts) {
    if (auto it = by_word.find(u->word_id); it != by_word.end()) {
      out.emplace_back(*u, *it->second);
    } else {
      ++missing;
    }
  }
  missing += by_word.size() - out.size();
  if (out.empty()) throw Error("pair_parallel: " + src + " and " + tgt + " share no words");
  if (missing) warn("pair_parallel: " + std::to_string(missing) + " unmatched utterances dropped (" + src + " / " + tgt + ")");
  if (unmatched) *unmatched = missing;
  return out;
}

struct FoldSplit {
  int fold_id = 0;
  std::vector<std::string> train_speakers;
  std::string eval_speaker;
  std::vector<std::string> train_utts;
  std::vector<std::string> eval_utts;
};

inline std::vector<FoldSplit> leave_one_out_splits(const Manifest& m, const std::vector<std::string>& group) {
  if (group.size() != 4) throw Error("leave_one_out_splits: expected 4 speakers, got " + std::to_string(group.size()));
  std::set<std::string> unique(group.begin(), group.end());
  if (unique.size() != group.size()) throw Error("leave_one_out_splits: duplicate speaker in group");
  std::vector<std::size_t> counts;
  for (const auto& s : group) {
    if (!m.speakers.count(s)) throw Error("leave_one_out_splits: unknown speaker '" + s + "'");
    counts.push_back(m.of_speaker(s).size());
  }
  if (std::adjacent_find(counts.begin(), counts.end(), std::not_equal_to<>()) != counts.end()) {
    warn("leave_one_out_splits: speakers have unequal utterance counts");
  }
  std::vector<FoldSplit> folds;
  for (std::size_t k = 0; k < group.size(); ++k) {
    FoldSplit f;
    f.fold_id = static_cast<int>(k);
    f.eval_speaker = group[k];
    for (std::size_t j = 0; j < group.size(); ++j) {
      auto& ids = j == k ? f.eval_utts : f.train_utts;
      if (j != k) f.train_speakers.push_back(group[j]);
      for (const auto* u : m.of_speaker(group[j])) ids.push_back(u->utterance_id);
    }
    folds.push_back(std::move(f));
  }
  return folds;
}

inline nlohmann::json to_json(const FoldSplit& f) {
  return {{"fold_id", f.fold_id},
          {"train_speakers", f.train_speakers},
          {"eval_speaker", f.eval_speaker},
          {"train_utts", f.train_utts},
          {"eval_utts", f.eval_utts}};
}

inline FoldSplit fold_from_json(const nlohmann::json& j) {
  return {j.at("fold_id"), j.at("train_speakers"), j.at("eval_speaker"), j.at("train_utts"), j.at("eval_utts")};
}

inline void write_splits(const std::filesystem::path& path, const std::vector<FoldSplit>& folds) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& f : folds) j.push_back(to_json(f));
  std::ofstream(path) << j.dump(2) << '\n';
}

inline std::vector<FoldSplit> read_splits(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open splits " + path.string());
  std::vector<FoldSplit> out;
  for (const auto& j : nlohmann::json::parse(in)) out.push_back(fold_from_json(j));
  return out;
}

// One line of space-separated phoneme tokens.
inline std::vector<std::string> read_transcript(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open transcript " + path.string());
  std::vector<std::string> tokens;
  std::string tok;
  while (in >> tok) tokens.push_back(tok);
  return tokens;
}

}  // namespace dvc::corpus
