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
#include <atomic>
#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "dvc/corpus.hpp"
#include "dvc/cyclegan.hpp"
#include "dvc/dsp.hpp"
#include "dvc/error.hpp"
#include "dvc/eval.hpp"
#include "dvc/feature_io.hpp"
#include "dvc/hash.hpp"
#include "dvc/preprocess.hpp"
#include "dvc/wav.hpp"

// Stage functions behind the command-line verbs. Everything lives under one
// work directory:
//
//   manifest.jsonl splits.json refs.txt f0_stats.json [inventory.json]
//   stages/<stage>.json                       stage manifests
//   preprocessed/<utt>.wav features/<utt>.*   cleaned audio and log-mel
//   <variant>/fold<k>/{checkpoints,converted,scores}/ and cell.json
//   report.csv report.txt scores.csv          ablation outputs

namespace dvc::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;

struct RunConfig {
  fs::path corpus;
  fs::path work = "work";
  std::string layout = corpus::kDefaultLayout;
  std::vector<std::string> control;  // control speakers; empty = read speakers.json
  std::vector<std::string> group;    // leave-one-out speakers; empty = every dysarthric speaker
  json overrides = json::object();   // GanConfig fields applied to every variant
  double scale = 1.0;
  std::uint64_t seed = 0;
  std::size_t workers = 1;
  std::vector<std::string> variants;  // empty = the 12 ablation cells
  std::vector<int> folds;             // empty = every fold
  int griffin_lim_iters = 60;
  MelConfig mel;
  preprocess::PipelineOptions prep;
};

inline const std::set<std::string>& run_keys() {
  static const std::set<std::string> k{"corpus", "work", "layout", "control", "group", "scale", "seed",
                                       "workers", "variants", "folds", "griffin_lim_iters",
                                       "top_db", "noise_head", "click_margin"};
  return k;
}

// Flat key-value config: run keys above, every other key is a GanConfig
// field override.
inline void apply_config(RunConfig& rc, const json& j) {
  if (!j.is_object()) throw Error("config file must hold a JSON object");
  for (const auto& [k, v] : j.items()) {
    if (k == "corpus") rc.corpus = v.get<std::string>();
    else if (k == "work") rc.work = v.get<std::string>();
    else if (k == "layout") rc.layout = v.get<std::string>();
    else if (k == "control") rc.control = v.get<std::vector<std::string>>();
    else if (k == "group") rc.group = v.get<std::vector<std::string>>();
    else if (k == "scale") rc.scale = v.get<double>();
    else if (k == "seed") rc.seed = v.get<std::uint64_t>();
    else if (k == "workers") rc.workers = v.get<std::size_t>();
    else if (k == "variants") rc.variants = v.get<std::vector<std::string>>();
    else if (k == "folds") rc.folds = v.get<std::vector<int>>();
    else if (k == "griffin_lim_iters") rc.griffin_lim_iters = v.get<int>();
    else if (k == "top_db") rc.prep.top_db = v.get<double>();
    else if (k == "noise_head") rc.prep.noise_head_s = v.get<double>();
    else if (k == "click_margin") rc.prep.click_margin_s = v.get<double>();
    else rc.overrides[k] = v;
  }
  cyclegan::apply_overrides(cyclegan::GanConfig{}, rc.overrides);  // rejects unknown keys early
}

inline RunConfig read_run_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path.string());
  RunConfig rc;
  try {
    apply_config(rc, json::parse(in));
  } catch (const json::exception& e) {
    throw Error(path.string() + ": " + e.what());
  }
  return rc;
}

// ---------------------------------------------------------------------------
// Work directory

struct WorkDir {
  fs::path root;

  fs::path manifest() const { return root / "manifest.jsonl"; }
  fs::path splits() const { return root / "splits.json"; }
  fs::path refs() const { return root / "refs.txt"; }
  fs::path f0_stats() const { return root / "f0_stats.json"; }
  fs::path inventory() const { return root / "inventory.json"; }
  fs::path stage(const std::string& name) const { return root / "stages" / (name + ".json"); }
  fs::path preprocessed(const std::string& utt) const { return root / "preprocessed" / (utt + ".wav"); }
  fs::path features(const std::string& utt) const { return root / "features" / utt; }
  fs::path cell(const std::string& variant, int fold) const { return root / variant / ("fold" + std::to_string(fold)); }
};

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("cannot open " + p.string());
  return json::parse(in);
}

inline void write_json(const fs::path& p, const json& j) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p);
  if (!out) throw Error("cannot write " + p.string());
  out << j.dump(2) << '\n';
}

inline std::string hash_files(const std::vector<fs::path>& files, const fs::path& base) {
  Fnv1a h;
  for (const auto& f : files) {
    h.update(fs::relative(f, base).generic_string());
    h.update(hash_file(f));
  }
  return h.hex();
}

// Records a finished stage: what went in, the config hash and the hash of
// every output file (paths relative to `base`).
inline void write_stage(const fs::path& path, const std::string& stage, const std::string& inputs_hash,
                        const std::string& cfg_hash, const std::vector<fs::path>& outputs, const fs::path& base,
                        json extra = json::object()) {
  json out = json::object();
  for (const auto& f : outputs) out[fs::relative(f, base).generic_string()] = hash_file(f);
  extra["stage"] = stage;
  extra["inputs_hash"] = inputs_hash;
  extra["config_hash"] = cfg_hash;
  extra["created"] = utc_timestamp();
  extra["outputs"] = out;
  write_json(path, extra);
}

inline json require_stage(const WorkDir& w, const std::string& stage, const std::string& verb) {
  const auto p = w.stage(stage);
  if (!fs::exists(p)) {
    throw Error("missing " + stage + " output " + p.string() + "; run `dvc " + verb + "` first");
  }
  return read_json(p);
}

// ---------------------------------------------------------------------------
// ingest / preprocess

struct Corpus {
  corpus::Manifest manifest;
  std::vector<corpus::FoldSplit> folds;
  eval::TranscriptMap refs;
};

inline Corpus load_corpus(const WorkDir& w) {
  require_stage(w, "ingest", "ingest");
  Corpus c;
  c.manifest = corpus::read_manifest(w.manifest());
  c.folds = corpus::read_splits(w.splits());
  if (fs::exists(w.refs())) c.refs = eval::read_transcripts(w.refs());
  return c;
}

inline std::set<std::string> control_speakers(const RunConfig& rc) {
  if (!rc.control.empty()) return {rc.control.begin(), rc.control.end()};
  const auto p = rc.corpus / "speakers.json";
  if (!fs::exists(p)) throw Error("no control speakers given and " + p.string() + " does not exist");
  std::set<std::string> out;
  const auto roles = read_json(p);
  for (const auto& [spk, role] : roles.items()) {
    if (corpus::parse_role(role.get<std::string>()) == corpus::Role::control) out.insert(spk);
  }
  return out;
}

inline json f0_to_json(const F0Stats& s) { return {{"mu", s.mu}, {"sigma", s.sigma}}; }
inline F0Stats f0_from_json(const json& j, std::string speaker) {
  return {j.at("mu").get<double>(), j.at("sigma").get<double>(), std::move(speaker)};
}

inline Corpus cmd_ingest(const RunConfig& rc) {
  if (rc.corpus.empty()) throw Error("ingest: no corpus directory given");
  const WorkDir w{rc.work};
  fs::create_directories(w.root);
  const auto controls = control_speakers(rc);
  Corpus c;
  c.manifest = corpus::build_manifest(rc.corpus, corpus::Layout(rc.layout), controls);
  if (c.manifest.speakers_with(corpus::Role::control).empty()) throw Error("ingest: corpus has no control speaker");
  const auto group = rc.group.empty() ? c.manifest.speakers_with(corpus::Role::dysarthric) : rc.group;
  c.folds = corpus::leave_one_out_splits(c.manifest, group);
  corpus::write_manifest(w.manifest(), c.manifest);
  corpus::write_splits(w.splits(), c.folds);

  std::vector<fs::path> inputs, outputs{w.manifest(), w.splits()};
  json f0 = json::object();
  std::map<std::string, std::vector<F0Track>> tracks;
  for (const auto& u : c.manifest.utterances) {
    inputs.push_back(u.audio_path);
    if (u.transcript_path) c.refs[u.utterance_id] = {u.utterance_id, corpus::read_transcript(*u.transcript_path)};
    tracks[u.speaker_id].push_back(estimate_f0(read_wav(u.audio_path), F0Config{60.0, 600.0}));
  }
  for (const auto& [spk, tr] : tracks) f0[spk] = f0_to_json(compute_f0_stats(tr, spk));
  write_json(w.f0_stats(), f0);
  outputs.push_back(w.f0_stats());
  if (!c.refs.empty()) {
    eval::write_transcripts(w.refs(), c.refs);
    outputs.push_back(w.refs());
  }
  if (fs::exists(rc.corpus / "inventory.json")) {
    fs::copy_file(rc.corpus / "inventory.json", w.inventory(), fs::copy_options::overwrite_existing);
    outputs.push_back(w.inventory());
  }
  const json cfg{{"layout", rc.layout}, {"control", controls}, {"group", group}};
  write_stage(w.stage("ingest"), "ingest", hash_files(inputs, rc.corpus), hash_string(cfg.dump()), outputs, w.root,
              {{"corpus", fs::absolute(rc.corpus).string()}, {"utterances", c.manifest.utterances.size()}});
  return c;
}

inline json mel_json(const MelConfig& m) {
  return {{"sample_rate", m.sample_rate}, {"fft_size", m.fft_size}, {"hop", m.hop}, {"n_mels", m.n_mels},
          {"fmin", m.fmin},               {"fmax", m.fmax},         {"log_floor", m.log_floor}};
}

inline std::size_t cmd_preprocess(const RunConfig& rc) {
  const WorkDir w{rc.work};
  const auto ingest = require_stage(w, "ingest", "ingest");
  const auto m = corpus::read_manifest(w.manifest());
  fs::create_directories(w.root / "preprocessed");
  fs::create_directories(w.root / "features");
  std::vector<fs::path> outputs;
  json excluded = json::array(), report = json::object();
  for (const auto& u : m.utterances) {
    const auto r = preprocess::preprocess_pipeline(read_wav(u.audio_path), rc.prep);
    report[u.utterance_id] = {{"input_samples", r.input_samples},
                              {"click_removed", r.click_removed},
                              {"trim_start", r.trim.start},
                              {"trim_end", r.trim.end},
                              {"output_samples", r.output.size()}};
    if (r.output.size() < rc.mel.fft_size) {
      warn("preprocess: " + u.utterance_id + " is empty after preprocessing; excluded");
      excluded.push_back(u.utterance_id);
      continue;
    }
    write_wav(w.preprocessed(u.utterance_id), r.output);
    write_feature_dump(w.features(u.utterance_id), to_dump(mel_spectrogram(r.output, rc.mel)));
    outputs.push_back(w.preprocessed(u.utterance_id));
    outputs.push_back(nn::with_suffix(w.features(u.utterance_id), ".f32"));
  }
  write_json(w.root / "preprocess_report.json", report);
  outputs.push_back(w.root / "preprocess_report.json");
  const json cfg{{"mel", mel_json(rc.mel)},
                 {"top_db", rc.prep.top_db},
                 {"noise_head", rc.prep.noise_head_s},
                 {"click_margin", rc.prep.click_margin_s}};
  write_stage(w.stage("preprocess"), "preprocess", ingest.at("inputs_hash").get<std::string>(), hash_string(cfg.dump()),
              outputs, w.root, {{"excluded", excluded}});
  return m.utterances.size() - excluded.size();
}

inline std::set<std::string> excluded_utterances(const WorkDir& w) {
  const auto st = require_stage(w, "preprocess", "preprocess");
  return st.value("excluded", json::array()).get<std::set<std::string>>();
}

inline MelSpectrogram load_features(const WorkDir& w, const std::string& utt, const MelConfig& mel) {
  const auto d = read_feature_dump(w.features(utt));
  MelSpectrogram m;
  m.frames = d.frames;
  m.config = mel;
  m.length = d.extra.value("length", std::size_t{0});
  if (!m.frames.empty() && m.frames.front().size() != mel.n_mels) throw Error("features of " + utt + " have wrong band count");
  return m;
}

// ---------------------------------------------------------------------------
// Cells

inline bool is_ts(const std::string& variant) { return variant.size() > 3 && variant.ends_with("+ts"); }

inline std::string base_variant(const std::string& variant) {
  return is_ts(variant) ? variant.substr(0, variant.size() - 3) : variant;
}

inline void check_variant(const std::string& v) {
  if (!cyclegan::is_reference_row(v)) cyclegan::find_variant(v);
}

inline std::vector<std::string> run_variants(const RunConfig& rc) {
  if (rc.variants.empty()) {
    std::vector<std::string> out{"dysarthric"};
    for (const auto& c : cyclegan::base_variants()) out.push_back(c.name);
    out.push_back("dysarthric+ts");
    for (const auto& c : cyclegan::base_variants()) out.push_back(cyclegan::with_ts(c).name);
    return out;
  }
  for (const auto& v : rc.variants) check_variant(v);
  return rc.variants;
}

inline cyclegan::GanConfig cell_config(const RunConfig& rc, const std::string& variant, int fold) {
  auto c = cyclegan::apply_overrides(cyclegan::find_variant(variant), rc.overrides);
  c.scale = rc.scale;
  c.seed = rc.seed + static_cast<std::uint64_t>(fold);
  c.validate();
  return c;
}

// Identity of a cell's results: fold, features and, for trained variants,
// the model config and vocoder iterations.
inline std::string cell_hash(const RunConfig& rc, const std::string& variant, int fold) {
  json j{{"variant", variant}, {"fold", fold}, {"mel", mel_json(rc.mel)}};
  if (!cyclegan::is_reference_row(variant)) {
    j["config"] = cyclegan::to_json(cell_config(rc, variant, fold));
    j["griffin_lim_iters"] = rc.griffin_lim_iters;
  }
  return hash_string(j.dump());
}

// Creates or validates <cell>/cell.json. A cell produced under another
// config is never overwritten.
inline fs::path open_cell(const RunConfig& rc, const std::string& variant, int fold) {
  const WorkDir w{rc.work};
  const auto dir = w.cell(variant, fold);
  const auto h = cell_hash(rc, variant, fold);
  const auto meta = dir / "cell.json";
  if (fs::exists(meta)) {
    const auto old = read_json(meta).value("config_hash", std::string{});
    if (old != h) {
      throw Error("cell " + dir.string() + " was produced by config " + old + ", current config is " + h +
                  "; use a fresh work directory");
    }
    return dir;
  }
  json j{{"variant", variant}, {"fold", fold}, {"config_hash", h}};
  if (!cyclegan::is_reference_row(variant)) j["config"] = cyclegan::to_json(cell_config(rc, variant, fold));
  write_json(meta, j);
  return dir;
}

inline const corpus::FoldSplit& find_fold(const Corpus& c, int fold) {
  for (const auto& f : c.folds) {
    if (f.fold_id == fold) return f;
  }
  throw Error("no fold " + std::to_string(fold) + " (have " + std::to_string(c.folds.size()) + ")");
}

inline std::string target_speaker(const corpus::Manifest& m) {
  const auto c = m.speakers_with(corpus::Role::control);
  if (c.empty()) throw Error("manifest has no control speaker");
  return c.front();
}

// Trains a cell (or, for +ts cells, copies the base cell's checkpoint) and
// returns the checkpoint stem. Existing checkpoints are reused.
inline fs::path cmd_train(const RunConfig& rc, const std::string& variant, int fold) {
  if (cyclegan::is_reference_row(variant)) throw Error("'" + variant + "' is a reference row and has no model");
  const auto cfg = cell_config(rc, variant, fold);
  const WorkDir w{rc.work};
  const auto c = load_corpus(w);
  const auto& split = find_fold(c, fold);
  const auto dir = open_cell(rc, variant, fold);
  const auto stem = dir / "checkpoints" / "model";
  if (fs::exists(nn::with_suffix(stem, ".json")) && fs::exists(w.stage(variant + "-fold" + std::to_string(fold) + "-train"))) {
    return stem;
  }
  if (is_ts(variant)) {
    const auto base = cmd_train(rc, base_variant(variant), fold);
    fs::create_directories(stem.parent_path());
    for (const char* ext : {".bin", ".json"}) {
      fs::copy_file(nn::with_suffix(base, ext), nn::with_suffix(stem, ext), fs::copy_options::overwrite_existing);
    }
    write_stage(w.stage(variant + "-fold" + std::to_string(fold) + "-train"), "train", hash_file(nn::with_suffix(base, ".bin")),
                cyclegan::config_hash(cfg), {nn::with_suffix(stem, ".bin"), nn::with_suffix(stem, ".json")}, w.root,
                {{"reused_from", fs::relative(base, w.root).generic_string()}});
    return stem;
  }
  const auto skip = excluded_utterances(w);
  const auto tgt_spk = target_speaker(c.manifest);
  cyclegan::TrainingSet set;
  std::vector<MelSpectrogram> mels;
  std::map<std::string, std::size_t> tgt_index;
  std::vector<fs::path> inputs;
  std::vector<std::pair<std::string, bool>> order;  // utterance, is_target
  for (const auto* u : c.manifest.of_speaker(tgt_spk)) {
    if (!skip.count(u->utterance_id)) order.emplace_back(u->utterance_id, true);
  }
  std::map<std::string, std::string> word_of;
  for (const auto& u : c.manifest.utterances) word_of[u.utterance_id] = u.word_id;
  for (const auto& id : split.train_utts) {
    if (!skip.count(id)) order.emplace_back(id, false);
  }
  for (const auto& [id, _] : order) {
    mels.push_back(load_features(w, id, rc.mel));
    inputs.push_back(nn::with_suffix(w.features(id), ".f32"));
  }
  std::vector<const MelSpectrogram*> all;
  for (const auto& m : mels) all.push_back(&m);
  const auto stats = cyclegan::compute_feature_stats(all);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& [id, is_target] = order[i];
    auto x = cyclegan::normalize(mels[i], stats);
    if (is_target) {
      tgt_index[word_of.at(id)] = set.target.size();
      set.target.push_back(std::move(x));
    } else {
      if (auto it = tgt_index.find(word_of.at(id)); it != tgt_index.end()) set.pairs.emplace_back(set.source.size(), it->second);
      set.source.push_back(std::move(x));
    }
  }
  if (!cfg.use_dtw) {
    set.pairs.clear();
  } else if (set.pairs.size() < set.source.size()) {
    warn(variant + ": " + std::to_string(set.source.size() - set.pairs.size()) + " source utterances have no parallel target");
  }
  cyclegan::TrainOptions opt;
  opt.checkpoint_dir = stem.parent_path();
  const auto res = cyclegan::train(cfg, set, stats, opt);
  cyclegan::write_loss_curve(dir / "loss_curve.csv", res.curve);
  write_stage(w.stage(variant + "-fold" + std::to_string(fold) + "-train"), "train", hash_files(inputs, w.root),
              cyclegan::config_hash(cfg),
              {nn::with_suffix(stem, ".bin"), nn::with_suffix(stem, ".json"), dir / "loss_curve.csv"}, w.root,
              {{"iterations", res.iterations}});
  return stem;
}

// Duration the +ts input is stretched to: the parallel control utterance,
// else the control speaker's mean.
inline double ts_target_duration(const WorkDir& w, const Corpus& c, const std::string& utt,
                                 const std::set<std::string>& skip) {
  const auto& u = c.manifest.find(utt);
  const auto tgt = target_speaker(c.manifest);
  const auto id = corpus::utterance_id(tgt, u.word_id);
  if (!skip.count(id) && fs::exists(w.preprocessed(id))) return read_wav_info(w.preprocessed(id)).duration();
  double acc = 0.0;
  std::size_t n = 0;
  for (const auto* t : c.manifest.of_speaker(tgt)) {
    if (skip.count(t->utterance_id)) continue;
    acc += read_wav_info(w.preprocessed(t->utterance_id)).duration();
    ++n;
  }
  if (n == 0) throw Error("no control utterances to take a target duration from");
  return acc / static_cast<double>(n);
}

// Writes one WAV per converted utterance into <cell>/converted and returns
// their paths. x2y converts the fold's held-out dysarthric speaker, y2x the
// control speaker.
inline std::vector<fs::path> cmd_convert(const RunConfig& rc, const std::string& variant, int fold,
                                         cyclegan::Direction dir = cyclegan::Direction::x2y) {
  check_variant(variant);
  const WorkDir w{rc.work};
  const auto c = load_corpus(w);
  const auto& split = find_fold(c, fold);
  const auto skip = excluded_utterances(w);
  const bool reference = cyclegan::is_reference_row(variant);
  if (reference && dir != cyclegan::Direction::x2y) throw Error("reference rows only exist for x2y");
  const auto cell = open_cell(rc, variant, fold);
  std::optional<cyclegan::LoadedModel> model;
  if (!reference) {
    const auto stem = cell / "checkpoints" / "model";
    if (!fs::exists(nn::with_suffix(stem, ".json"))) {
      throw Error("missing checkpoint " + nn::with_suffix(stem, ".json").string() + "; run `dvc train --variant " +
                  variant + " --fold " + std::to_string(fold) + "` first");
    }
    model.emplace(cyclegan::load_model(stem));
  }
  std::vector<std::string> ids;
  if (dir == cyclegan::Direction::x2y) {
    ids = split.eval_utts;
  } else {
    for (const auto* u : c.manifest.of_speaker(target_speaker(c.manifest))) ids.push_back(u->utterance_id);
  }
  const auto out_dir = cell / (dir == cyclegan::Direction::x2y ? "converted" : "converted_y2x");
  fs::create_directories(out_dir);
  const bool ts = is_ts(variant);
  std::vector<fs::path> inputs, outputs;
  for (const auto& id : ids) {
    if (skip.count(id)) continue;
    const auto src = read_wav(w.preprocessed(id));
    inputs.push_back(w.preprocessed(id));
    Waveform out;
    if (reference) {
      out = ts ? time_stretch(src, align::stretch_rate_for_target(src.duration(), ts_target_duration(w, c, id, skip)),
                              rc.mel.stft())
               : src;
    } else {
      cyclegan::ConvertOptions opt;
      opt.direction = dir;
      opt.griffin_lim_iters = rc.griffin_lim_iters;
      if (ts && dir == cyclegan::Direction::x2y) {
        opt.time_stretch = true;
        opt.target_duration = ts_target_duration(w, c, id, skip);
      }
      out = cyclegan::convert(model->models, model->stats, src, rc.mel, opt).audio;
    }
    const auto path = out_dir / (id + ".wav");
    write_wav(path, out);
    outputs.push_back(path);
  }
  write_stage(cell / "stages" / (dir == cyclegan::Direction::x2y ? "convert.json" : "convert_y2x.json"), "convert",
              hash_files(inputs, w.root), cell_hash(rc, variant, fold), outputs, w.root);
  return outputs;
}

inline std::vector<eval::PhonemeTemplate> load_templates(const WorkDir& w, const MelConfig& mel) {
  if (!fs::exists(w.inventory())) {
    throw Error("no phoneme inventory at " + w.inventory().string() + "; pass --hyps with external hypotheses");
  }
  eval::RecognizerConfig rc;
  rc.mel = mel;
  return eval::build_templates(eval::read_inventory(w.inventory()), rc);
}

inline json scores_json(const eval::CorpusScores& s) {
  json spk = json::object();
  auto one = [](const eval::PerResult& r) {
    return json{{"substitutions", r.substitutions}, {"deletions", r.deletions}, {"insertions", r.insertions},
                {"ref_len", r.ref_len},             {"per", r.per()}};
  };
  for (const auto& [k, r] : s.speakers) spk[k] = one(r);
  json utts = json::array();
  for (const auto& u : s.utterances) utts.push_back({{"utterance_id", u.utterance_id}, {"speaker", u.speaker}, {"result", one(u.result)}});
  return {{"speakers", spk}, {"pooled", one(s.pooled)}, {"utterances", utts}};
}

inline eval::CorpusScores scores_from_json(const json& j) {
  auto one = [](const json& r) {
    return eval::PerResult{r.at("substitutions"), r.at("deletions"), r.at("insertions"), r.at("ref_len")};
  };
  eval::CorpusScores s;
  for (const auto& [k, r] : j.at("speakers").items()) s.speakers[k] = one(r);
  s.pooled = one(j.at("pooled"));
  for (const auto& u : j.at("utterances")) s.utterances.push_back({u.at("utterance_id"), u.at("speaker"), one(u.at("result"))});
  return s;
}

// Scores a cell's converted audio with the toy recognizer, or scores the
// given hypothesis file instead.
inline eval::CorpusScores cmd_evaluate(const RunConfig& rc, const std::string& variant, int fold,
                                       const std::optional<fs::path>& hyps_file = std::nullopt) {
  check_variant(variant);
  const WorkDir w{rc.work};
  const auto c = load_corpus(w);
  const auto& split = find_fold(c, fold);
  if (c.refs.empty()) throw Error("no reference transcripts in " + w.refs().string());
  const auto cell = open_cell(rc, variant, fold);
  const auto scores_dir = cell / "scores";
  fs::create_directories(scores_dir);
  eval::TranscriptMap hyps;
  std::vector<fs::path> inputs;
  if (hyps_file) {
    hyps = eval::read_transcripts(*hyps_file);
    inputs.push_back(*hyps_file);
  } else {
    const auto conv_stage = cell / "stages" / "convert.json";
    if (!fs::exists(conv_stage)) {
      throw Error("missing " + conv_stage.string() + "; run `dvc convert --variant " + variant + " --fold " +
                  std::to_string(fold) + "` first");
    }
    const auto templates = load_templates(w, rc.mel);
    eval::RecognizerConfig rcfg;
    rcfg.mel = rc.mel;
    for (const auto& id : split.eval_utts) {
      const auto p = cell / "converted" / (id + ".wav");
      if (!fs::exists(p)) continue;
      hyps[id] = eval::toy_recognizer(read_wav(p), templates, rcfg, id);
      inputs.push_back(p);
    }
    eval::write_transcripts(scores_dir / "hyps.txt", hyps);
  }
  const auto scores = eval::evaluate_corpus(hyps, c.refs);
  eval::write_scores_csv(scores_dir / "per_utterance.csv", scores);
  write_json(scores_dir / "summary.json", scores_json(scores));
  std::vector<fs::path> outputs{scores_dir / "per_utterance.csv", scores_dir / "summary.json"};
  if (!hyps_file) outputs.push_back(scores_dir / "hyps.txt");
  write_stage(cell / "stages" / "evaluate.json", "evaluate", hash_files(inputs, w.root), cell_hash(rc, variant, fold),
              outputs, w.root);
  return scores;
}

// ---------------------------------------------------------------------------
// ablate / report

struct CellOutcome {
  std::string variant;
  int fold = 0;
  bool ok = false;
  std::string error;
};

struct AblationRun {
  std::vector<CellOutcome> cells;
  eval::AblationReport report;

  std::size_t failed() const {
    return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](const auto& c) { return !c.ok; }));
  }
};

inline std::vector<int> run_folds(const RunConfig& rc, const Corpus& c) {
  if (!rc.folds.empty()) {
    for (int f : rc.folds) find_fold(c, f);
    return rc.folds;
  }
  std::vector<int> out;
  for (const auto& f : c.folds) out.push_back(f.fold_id);
  return out;
}

// Collects finished cell scores into the report; a variant with any
// missing or failed fold becomes a failed row.
inline eval::AblationReport cmd_report(const RunConfig& rc, const std::vector<CellOutcome>& outcomes = {}) {
  const WorkDir w{rc.work};
  const auto c = load_corpus(w);
  const auto variants = run_variants(rc);
  const auto folds = run_folds(rc, c);
  std::vector<eval::ReportRow> rows;
  std::ofstream raw(w.root / "scores.csv");
  raw << "variant,fold,utterance_id,speaker,substitutions,deletions,insertions,ref_len,per\n";
  for (const auto& v : variants) {
    eval::ReportRow row{v, eval::CorpusScores{}, ""};
    for (int f : folds) {
      const auto summary = w.cell(v, f) / "scores" / "summary.json";
      std::string err;
      for (const auto& o : outcomes) {
        if (o.variant == v && o.fold == f && !o.ok) err = o.error;
      }
      if (err.empty() && !fs::exists(summary)) err = "no scores for fold " + std::to_string(f);
      if (err.empty()) {
        const auto cell_meta = read_json(w.cell(v, f) / "cell.json");
        if (cell_meta.value("config_hash", std::string{}) != cell_hash(rc, v, f)) {
          err = "fold " + std::to_string(f) + " was scored under a different config";
        }
      }
      if (!err.empty()) {
        row.scores.reset();
        row.error = err;
        break;
      }
      const auto s = scores_from_json(read_json(summary));
      for (const auto& u : s.utterances) {
        raw << v << ',' << f << ',' << u.utterance_id << ',' << u.speaker << ',' << u.result.substitutions << ','
            << u.result.deletions << ',' << u.result.insertions << ',' << u.result.ref_len << ','
            << eval::format_per(u.result.per()) << '\n';
        row.scores->utterances.push_back(u);
      }
      for (const auto& [spk, r] : s.speakers) row.scores->speakers[spk] += r;
      row.scores->pooled += s.pooled;
    }
    rows.push_back(std::move(row));
  }
  auto rep = eval::ablation_report(rows);
  eval::write_report(w.root / "report", rep);
  return rep;
}

// Runs train, convert and evaluate for every variant x fold. Model cells run
// first; +ts and reference cells follow, so +ts cells find their base
// checkpoint. Up to `workers` cells run at once.
inline AblationRun cmd_ablate(const RunConfig& rc, const std::function<void(const CellOutcome&)>& on_cell = {}) {
  const WorkDir w{rc.work};
  const auto c = load_corpus(w);
  excluded_utterances(w);
  const auto variants = run_variants(rc);
  const auto folds = run_folds(rc, c);
  std::vector<std::pair<std::string, int>> first, second;
  for (const auto& v : variants) {
    for (int f : folds) {
      (cyclegan::is_reference_row(v) || is_ts(v) ? second : first).emplace_back(v, f);
    }
  }
  AblationRun run;
  std::mutex mu;
  auto run_cell = [&](const std::string& v, int f) {
    CellOutcome o{v, f, false, ""};
    try {
      if (!cyclegan::is_reference_row(v)) cmd_train(rc, v, f);
      cmd_convert(rc, v, f);
      cmd_evaluate(rc, v, f);
      o.ok = true;
    } catch (const std::exception& e) {
      o.error = e.what();
    }
    std::lock_guard lock(mu);
    run.cells.push_back(o);
    if (on_cell) on_cell(o);
  };
  auto run_phase = [&](const std::vector<std::pair<std::string, int>>& jobs) {
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
      for (std::size_t i; (i = next++) < jobs.size();) run_cell(jobs[i].first, jobs[i].second);
    };
    const std::size_t n = std::clamp<std::size_t>(rc.workers, 1, std::max<std::size_t>(jobs.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
  };
  run_phase(first);
  run_phase(second);
  std::sort(run.cells.begin(), run.cells.end(), [&](const CellOutcome& a, const CellOutcome& b) {
    const auto ia = std::find(variants.begin(), variants.end(), a.variant) - variants.begin();
    const auto ib = std::find(variants.begin(), variants.end(), b.variant) - variants.begin();
    return std::tie(ia, a.fold) < std::tie(ib, b.fold);
  });
  run.report = cmd_report(rc, run.cells);
  return run;
}

}  // namespace dvc::pipeline
