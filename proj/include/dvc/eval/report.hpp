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

#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "dvc/error.hpp"
#include "dvc/eval/per.hpp"

namespace dvc::eval {

// Row blocks of the ablation table: unconverted references, conversion
// without time stretching, conversion of time-stretched input.
enum class Block { reference, no_ts, ts };

inline std::string to_string(Block b) {
  switch (b) {
    case Block::reference: return "reference";
    case Block::no_ts: return "no-ts";
    case Block::ts: return "ts";
  }
  return "?";
}

inline Block block_of(const std::string& row_name) {
  if (row_name == "dysarthric" || row_name == "control") return Block::reference;
  if (row_name.size() >= 3 && row_name.compare(row_name.size() - 3, 3, "+ts") == 0) return Block::ts;
  return Block::no_ts;
}

struct ReportRow {
  std::string name;
  std::optional<CorpusScores> scores;  // empty when the cell failed
  std::string error;
};

struct SpeakerGroup {
  std::string name;
  std::vector<std::string> speakers;
};

struct Column {
  enum class Kind { speaker, average, pooled } kind;
  std::string header;
  std::size_t group = 0;
  std::string speaker;
};

struct AblationReport {
  std::vector<std::string> rows;
  std::vector<Block> blocks;
  std::vector<std::string> errors;          // empty string for successful rows
  std::vector<Column> columns;
  std::vector<std::vector<double>> values;  // NaN for failed rows
  std::vector<std::vector<bool>> best;

  std::size_t failed() const {
    std::size_t n = 0;
    for (const auto& e : errors) n += !e.empty();
    return n;
  }
};

inline std::string format_per(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v);
  return buf;
}

// One row per config, one column per speaker, then the unweighted speaker
// average and pooled PER of each group that has more than one speaker. Best
// (lowest displayed value) per column is flagged inside the no-ts and ts
// blocks; reference rows are never flagged.
inline AblationReport ablation_report(const std::vector<ReportRow>& rows, std::vector<SpeakerGroup> groups = {}) {
  if (rows.empty()) throw Error("ablation_report: no configs");
  std::optional<std::set<std::string>> speakers;
  for (const auto& r : rows) {
    if (!r.scores) continue;
    std::set<std::string> s;
    for (const auto& [spk, _] : r.scores->speakers) s.insert(spk);
    if (!speakers) {
      speakers = s;
    } else if (s != *speakers) {
      throw Error("ablation_report: config " + r.name + " was scored on a different speaker set");
    }
  }
  if (!speakers) speakers.emplace();
  if (groups.empty()) groups.push_back({"all", {speakers->begin(), speakers->end()}});
  std::set<std::string> grouped;
  for (const auto& g : groups) {
    for (const auto& s : g.speakers) {
      if (!speakers->empty() && !speakers->count(s)) throw Error("ablation_report: unknown speaker " + s);
      if (!grouped.insert(s).second) throw Error("ablation_report: speaker " + s + " is in two groups");
    }
  }
  if (!speakers->empty() && grouped != *speakers) throw Error("ablation_report: groups do not cover every speaker");

  AblationReport rep;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const auto& g = groups[gi];
    for (const auto& s : g.speakers) rep.columns.push_back({Column::Kind::speaker, s, gi, s});
    if (g.speakers.size() > 1) {
      const std::string suffix = groups.size() > 1 ? " " + g.name : "";
      rep.columns.push_back({Column::Kind::average, "average" + suffix, gi, ""});
      rep.columns.push_back({Column::Kind::pooled, "pooled" + suffix, gi, ""});
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (const auto& r : rows) {
    rep.rows.push_back(r.name);
    rep.blocks.push_back(block_of(r.name));
    rep.errors.push_back(r.scores ? "" : (r.error.empty() ? "failed" : r.error));
    std::vector<double> v;
    for (const auto& c : rep.columns) {
      if (!r.scores) {
        v.push_back(nan);
        continue;
      }
      const auto& sp = r.scores->speakers;
      switch (c.kind) {
        case Column::Kind::speaker: v.push_back(sp.at(c.speaker).per()); break;
        case Column::Kind::average: {
          double acc = 0.0;
          for (const auto& s : groups[c.group].speakers) acc += sp.at(s).per();
          v.push_back(acc / static_cast<double>(groups[c.group].speakers.size()));
          break;
        }
        case Column::Kind::pooled: {
          PerResult acc;
          for (const auto& s : groups[c.group].speakers) acc += sp.at(s);
          v.push_back(acc.per());
          break;
        }
      }
    }
    rep.values.push_back(std::move(v));
  }
  rep.best.assign(rows.size(), std::vector<bool>(rep.columns.size(), false));
  auto tenths = [](double v) { return std::llround(v * 10.0); };
  for (Block b : {Block::no_ts, Block::ts}) {
    for (std::size_t c = 0; c < rep.columns.size(); ++c) {
      std::optional<long long> lo;
      for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rep.blocks[r] != b || std::isnan(rep.values[r][c])) continue;
        const auto t = tenths(rep.values[r][c]);
        if (!lo || t < *lo) lo = t;
      }
      for (std::size_t r = 0; lo && r < rows.size(); ++r) {
        if (rep.blocks[r] == b && !std::isnan(rep.values[r][c]) && tenths(rep.values[r][c]) == *lo) {
          rep.best[r][c] = true;
        }
      }
    }
  }
  return rep;
}

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

inline std::string report_csv(const AblationReport& rep) {
  std::ostringstream out;
  out << "variant,block,status";
  for (const auto& c : rep.columns) out << ',' << csv_field(c.header);
  out << '\n';
  for (std::size_t r = 0; r < rep.rows.size(); ++r) {
    out << csv_field(rep.rows[r]) << ',' << to_string(rep.blocks[r]) << ','
        << (rep.errors[r].empty() ? "ok" : "failed");
    for (double v : rep.values[r]) out << ',' << format_per(v);
    out << '\n';
  }
  return out.str();
}

// Plain-text table; `*` marks the best value of a column within its block.
inline std::string report_text(const AblationReport& rep) {
  std::vector<std::string> header{"variant"};
  for (const auto& c : rep.columns) header.push_back(c.header);
  std::vector<std::vector<std::string>> cells;
  for (std::size_t r = 0; r < rep.rows.size(); ++r) {
    std::vector<std::string> line{rep.rows[r]};
    for (std::size_t c = 0; c < rep.columns.size(); ++c) {
      if (!rep.errors[r].empty()) {
        line.push_back("failed");
        continue;
      }
      line.push_back(format_per(rep.values[r][c]) + "%" + (rep.best[r][c] ? "*" : " "));
    }
    cells.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& line : cells) width[c] = std::max(width[c], line[c].size());
  }
  auto emit = [&](std::ostringstream& out, const std::vector<std::string>& line) {
    for (std::size_t c = 0; c < line.size(); ++c) {
      const auto padding = std::string(width[c] - line[c].size(), ' ');
      out << (c ? "  " : "") << (c ? padding + line[c] : line[c] + padding);
    }
    out << '\n';
  };
  std::size_t total = 0;
  for (auto w : width) total += w + 2;
  const std::string rule(total - 2, '-');
  std::ostringstream out;
  emit(out, header);
  for (std::size_t r = 0; r < cells.size(); ++r) {
    if (r == 0 || rep.blocks[r] != rep.blocks[r - 1]) out << rule << '\n';
    emit(out, cells[r]);
  }
  out << rule << '\n';
  out << "PER in percent; * best in column within block (reference rows unmarked).\n";
  for (std::size_t r = 0; r < rep.rows.size(); ++r) {
    if (!rep.errors[r].empty()) out << rep.rows[r] << " failed: " << rep.errors[r] << '\n';
  }
  return out.str();
}

inline void write_report(const std::filesystem::path& stem, const AblationReport& rep) {
  auto csv = stem;
  csv += ".csv";
  auto txt = stem;
  txt += ".txt";
  std::ofstream(csv) << report_csv(rep);
  std::ofstream(txt) << report_text(rep);
}

inline void write_scores_csv(const std::filesystem::path& path, const CorpusScores& s) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << "utterance_id,speaker,substitutions,deletions,insertions,ref_len,per\n";
  for (const auto& u : s.utterances) {
    out << u.utterance_id << ',' << u.speaker << ',' << u.result.substitutions << ',' << u.result.deletions << ','
        << u.result.insertions << ',' << u.result.ref_len << ',' << format_per(u.result.per()) << '\n';
  }
}

}  // namespace dvc::eval
