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
#include <cctype>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "dvc/error.hpp"

namespace dvc::eval {

struct PhonemeSequence {
  std::string utterance_id;
  std::vector<std::string> tokens;
};

inline bool valid_token(const std::string& t) {
  return !t.empty() && std::none_of(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); });
}

inline void check_tokens(const PhonemeSequence& s) {
  for (const auto& t : s.tokens) {
    if (!valid_token(t)) throw Error("phoneme sequence " + s.utterance_id + ": invalid token '" + t + "'");
  }
}

inline std::vector<std::string> split_tokens(const std::string& line) {
  std::istringstream in(line);
  std::vector<std::string> out;
  for (std::string t; in >> t;) out.push_back(t);
  return out;
}

inline std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (const auto& t : tokens) out += (out.empty() ? "" : " ") + t;
  return out;
}

struct PerResult {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t ref_len = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }
  double per() const {
    if (ref_len == 0) throw Error("PER undefined for an empty reference");
    return 100.0 * static_cast<double>(errors()) / static_cast<double>(ref_len);
  }
  PerResult& operator+=(const PerResult& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    ref_len += o.ref_len;
    return *this;
  }
  bool operator==(const PerResult&) const = default;
};

enum class EditOp { match, substitution, deletion, insertion };

inline constexpr std::size_t kNone = static_cast<std::size_t>(-1);

struct EditStep {
  EditOp op;
  std::size_t ref = kNone;  // index into the reference, kNone for insertions
  std::size_t hyp = kNone;  // index into the hypothesis, kNone for deletions
};

struct EditAlignment {
  std::vector<EditStep> steps;
  PerResult result;
};

// Unit-cost Levenshtein alignment. Among equal-cost predecessors the
// backtrace takes the diagonal (match or substitution), then a deletion,
// then an insertion.
inline EditAlignment edit_align(const PhonemeSequence& ref, const PhonemeSequence& hyp) {
  if (ref.tokens.empty()) throw Error("edit_align: empty reference for " + ref.utterance_id);
  check_tokens(ref);
  check_tokens(hyp);
  const auto& r = ref.tokens;
  const auto& h = hyp.tokens;
  const std::size_t n = r.size(), m = h.size();
  std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      d[i][j] = std::min({d[i - 1][j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1), d[i - 1][j] + 1, d[i][j - 1] + 1});
    }
  }
  EditAlignment out;
  out.result.ref_len = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && d[i][j] == d[i - 1][j - 1] + (r[i - 1] == h[j - 1] ? 0 : 1)) {
      const bool same = r[i - 1] == h[j - 1];
      out.steps.push_back({same ? EditOp::match : EditOp::substitution, i - 1, j - 1});
      if (!same) ++out.result.substitutions;
      --i;
      --j;
    } else if (i > 0 && d[i][j] == d[i - 1][j] + 1) {
      out.steps.push_back({EditOp::deletion, i - 1, kNone});
      ++out.result.deletions;
      --i;
    } else {
      out.steps.push_back({EditOp::insertion, kNone, j - 1});
      ++out.result.insertions;
      --j;
    }
  }
  std::reverse(out.steps.begin(), out.steps.end());
  return out;
}

using TranscriptMap = std::map<std::string, PhonemeSequence>;

// `utterance_id<TAB>tok tok tok`, one utterance per line. An id with no
// tokens is an empty hypothesis.
inline TranscriptMap read_transcripts(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open transcript file " + path.string());
  TranscriptMap out;
  std::string line;
  for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    const std::string id = line.substr(0, tab);
    if (id.empty() || !valid_token(id)) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": malformed utterance id");
    }
    PhonemeSequence s{id, tab == std::string::npos ? std::vector<std::string>{} : split_tokens(line.substr(tab + 1))};
    if (!out.emplace(id, std::move(s)).second) {
      throw Error(path.string() + ":" + std::to_string(lineno) + ": duplicate utterance id " + id);
    }
  }
  return out;
}

inline void write_transcripts(const std::filesystem::path& path, const TranscriptMap& seqs) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write transcript file " + path.string());
  for (const auto& [id, s] : seqs) out << id << '\t' << join_tokens(s.tokens) << '\n';
}

// Speaker id is the utterance id up to the first underscore.
inline std::string speaker_from_id(const std::string& utterance_id) {
  return utterance_id.substr(0, utterance_id.find('_'));
}

struct UtteranceScore {
  std::string utterance_id;
  std::string speaker;
  PerResult result;
};

struct CorpusScores {
  std::vector<UtteranceScore> utterances;   // sorted by utterance id
  std::map<std::string, PerResult> speakers;  // pooled counts per speaker
  PerResult pooled;                           // pooled over every utterance

  // Unweighted mean of the speaker PERs.
  double speaker_average() const {
    if (speakers.empty()) throw Error("no speakers scored");
    double acc = 0.0;
    for (const auto& [_, r] : speakers) acc += r.per();
    return acc / static_cast<double>(speakers.size());
  }
};

inline CorpusScores evaluate_corpus(const TranscriptMap& hyps, const TranscriptMap& refs,
                                    const std::function<std::string(const std::string&)>& speaker_of = speaker_from_id) {
  std::vector<std::string> missing;
  for (const auto& [id, _] : hyps) {
    if (!refs.count(id)) missing.push_back(id);
  }
  if (!missing.empty()) {
    std::string list;
    for (const auto& id : missing) list += (list.empty() ? "" : ", ") + id;
    throw Error("no reference transcript for: " + list);
  }
  CorpusScores out;
  for (const auto& [id, hyp] : hyps) {
    const auto r = edit_align(refs.at(id), hyp).result;
    const auto spk = speaker_of(id);
    out.utterances.push_back({id, spk, r});
    out.speakers[spk] += r;
    out.pooled += r;
  }
  return out;
}

}  // namespace dvc::eval
