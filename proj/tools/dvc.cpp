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

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dvc/pipeline.hpp"
#include "dvc/synth.hpp"

namespace {

using namespace dvc;
namespace fs = std::filesystem;

// KEY=VALUE; VALUE is read as JSON when it parses, else as a string.
nlohmann::json parse_setting(const std::string& kv, std::string& key) {
  const auto eq = kv.find('=');
  if (eq == std::string::npos || eq == 0) throw Error("--set expects KEY=VALUE, got '" + kv + "'");
  key = kv.substr(0, eq);
  const auto v = kv.substr(eq + 1);
  try {
    return nlohmann::json::parse(v);
  } catch (const nlohmann::json::exception&) {
    return v;
  }
}

void print_report(const eval::AblationReport& r, const fs::path& work) {
  std::cout << eval::report_text(r);
  std::cout << "report written to " << (work / "report.csv").string() << " and " << (work / "report.txt").string()
            << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dysarthric speech voice conversion pipeline"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  std::string config_file, work, corpus_dir;
  std::optional<std::uint64_t> seed;
  std::optional<double> scale;
  std::optional<std::size_t> workers;
  std::vector<std::string> settings;
  app.add_option("--config", config_file, "JSON key-value config file")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "Base random seed (fold k trains with seed + k)");
  app.add_option("--scale", scale, "Divides every iteration count")->check(CLI::PositiveNumber);
  app.add_option("--workers", workers, "Concurrent ablation cells")->check(CLI::PositiveNumber);
  app.add_option("--work", work, "Work directory (default: work)");
  app.add_option("--set", settings, "Config setting KEY=VALUE, repeatable");

  auto* synth = app.add_subcommand("synth-corpus", "Write the synthetic two-domain corpus");
  std::string synth_out;
  std::size_t synth_words = 12;
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--words", synth_words, "Number of words")->check(CLI::PositiveNumber);

  auto* ingest = app.add_subcommand("ingest", "Build the manifest, folds, references and F0 statistics");
  std::string layout;
  std::vector<std::string> control, group;
  ingest->add_option("--corpus", corpus_dir, "Corpus root directory");
  ingest->add_option("--layout", layout, "File pattern with {speaker} and {word}");
  ingest->add_option("--control", control, "Control speakers (default: speakers.json)")->delimiter(',');
  ingest->add_option("--group", group, "Four speakers for leave-one-out folds")->delimiter(',');

  auto* prep = app.add_subcommand("preprocess", "Click removal, denoising, trimming and features");
  std::optional<double> top_db, noise_head, click_margin;
  prep->add_option("--top-db", top_db, "Silence trimming threshold in dB");
  prep->add_option("--noise-head", noise_head, "Seconds of leading audio used as the noise profile");
  prep->add_option("--click-margin", click_margin, "Seconds cut from each end");
  prep->add_option("--out", work, "Work directory (same as --work)");

  std::string variant, direction = "x2y", hyps;
  int fold = 0;
  auto add_cell = [&](CLI::App* sub) {
    sub->add_option("--variant", variant, "Variant name")->required();
    sub->add_option("--fold", fold, "Fold index")->check(CLI::NonNegativeNumber);
  };
  auto* train = app.add_subcommand("train", "Train one variant on one fold");
  add_cell(train);
  auto* convert = app.add_subcommand("convert", "Convert the eval utterances of one fold");
  add_cell(convert);
  convert->add_option("--direction", direction, "x2y or y2x")->check(CLI::IsMember({"x2y", "y2x"}));
  auto* evaluate = app.add_subcommand("evaluate", "Score one cell's converted audio");
  add_cell(evaluate);
  evaluate->add_option("--hyps", hyps, "Score this hypothesis file instead of running the recognizer")
      ->check(CLI::ExistingFile);

  std::vector<std::string> variants;
  std::vector<int> folds;
  auto* ablate = app.add_subcommand("ablate", "Run every variant x fold and write the report");
  ablate->add_option("--variants", variants, "Variants (default: all)")->delimiter(',');
  ablate->add_option("--folds", folds, "Folds (default: all)")->delimiter(',');
  auto* report = app.add_subcommand("report", "Rebuild the report from finished cells");
  report->add_option("--variants", variants, "Variants (default: all)")->delimiter(',');
  report->add_option("--folds", folds, "Folds (default: all)")->delimiter(',');

  CLI11_PARSE(app, argc, argv);

  try {
    pipeline::RunConfig rc;
    if (!config_file.empty()) rc = pipeline::read_run_config(config_file);
    nlohmann::json extra = nlohmann::json::object();
    for (const auto& kv : settings) {
      std::string key;
      const auto v = parse_setting(kv, key);
      extra[key] = v;
    }
    pipeline::apply_config(rc, extra);
    if (!work.empty()) rc.work = work;
    if (!corpus_dir.empty()) rc.corpus = corpus_dir;
    if (seed) rc.seed = *seed;
    if (scale) rc.scale = *scale;
    if (workers) rc.workers = *workers;
    if (!layout.empty()) rc.layout = layout;
    if (!control.empty()) rc.control = control;
    if (!group.empty()) rc.group = group;
    if (top_db) rc.prep.top_db = *top_db;
    if (noise_head) rc.prep.noise_head_s = *noise_head;
    if (click_margin) rc.prep.click_margin_s = *click_margin;
    if (!variants.empty()) rc.variants = variants;
    if (!folds.empty()) rc.folds = folds;

    if (*synth) {
      corpus::SynthConfig sc;
      if (seed) sc.seed = *seed;
      sc.n_words = synth_words;
      const auto s = corpus::write_synth_corpus(synth_out, sc);
      std::cout << "wrote " << s.files << " utterances to " << synth_out << '\n';
    } else if (*ingest) {
      const auto c = pipeline::cmd_ingest(rc);
      std::cout << "ingested " << c.manifest.utterances.size() << " utterances, " << c.folds.size() << " folds\n";
    } else if (*prep) {
      std::cout << "preprocessed " << pipeline::cmd_preprocess(rc) << " utterances\n";
    } else if (*train) {
      std::cout << "checkpoint " << pipeline::cmd_train(rc, variant, fold).string() << '\n';
    } else if (*convert) {
      const auto out = pipeline::cmd_convert(rc, variant, fold, cyclegan::parse_direction(direction));
      std::cout << "converted " << out.size() << " utterances\n";
    } else if (*evaluate) {
      const auto s = pipeline::cmd_evaluate(rc, variant, fold, hyps.empty() ? std::nullopt : std::optional<fs::path>(hyps));
      std::cout << "PER " << eval::format_per(s.pooled.per()) << "% over " << s.utterances.size() << " utterances\n";
    } else if (*ablate) {
      const auto run = pipeline::cmd_ablate(rc, [](const pipeline::CellOutcome& o) {
        std::cerr << (o.ok ? "done   " : "FAILED ") << o.variant << " fold " << o.fold
                  << (o.ok ? "" : ": " + o.error) << '\n';
      });
      print_report(run.report, rc.work);
      if (const auto n = run.failed()) {
        std::cerr << n << " of " << run.cells.size() << " cells failed\n";
        return 2;
      }
    } else if (*report) {
      const auto r = pipeline::cmd_report(rc);
      print_report(r, rc.work);
      if (r.failed()) return 2;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
