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

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dvc/dsp.hpp"
#include "dvc/error.hpp"

// Feature dumps: `<stem>.f32` holds row-major little-endian float32 frames,
// `<stem>.json` the header {shape, hop, sample_rate, ...}.

namespace dvc {

struct FeatureDump {
  std::vector<std::vector<double>> frames;
  std::size_t hop = 0;
  int sample_rate = 0;
  nlohmann::json extra = nlohmann::json::object();
};

inline void write_feature_dump(const std::filesystem::path& stem, const FeatureDump& dump) {
  const std::size_t rows = dump.frames.size();
  const std::size_t cols = rows ? dump.frames.front().size() : 0;
  std::vector<float> flat;
  flat.reserve(rows * cols);
  for (const auto& r : dump.frames) {
    if (r.size() != cols) throw Error("feature dump rows must have equal width");
    for (double v : r) flat.push_back(static_cast<float>(v));
  }
  auto bin = stem;
  bin += ".f32";
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw Error("cannot write " + bin.string());
  out.write(reinterpret_cast<const char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(float)));
  nlohmann::json header = {{"shape", {rows, cols}},
                           {"dtype", "float32"},
                           {"hop", dump.hop},
                           {"sample_rate", dump.sample_rate},
                           {"extra", dump.extra}};
  auto js = stem;
  js += ".json";
  std::ofstream(js) << header.dump(2) << '\n';
}

inline FeatureDump read_feature_dump(const std::filesystem::path& stem) {
  auto js = stem;
  js += ".json";
  std::ifstream hin(js);
  if (!hin) throw Error("cannot open " + js.string());
  const auto header = nlohmann::json::parse(hin);
  const auto rows = header.at("shape").at(0).get<std::size_t>();
  const auto cols = header.at("shape").at(1).get<std::size_t>();
  FeatureDump d;
  d.hop = header.at("hop").get<std::size_t>();
  d.sample_rate = header.at("sample_rate").get<int>();
  d.extra = header.value("extra", nlohmann::json::object());
  std::vector<float> flat(rows * cols);
  auto bin = stem;
  bin += ".f32";
  std::ifstream in(bin, std::ios::binary);
  if (!in.read(reinterpret_cast<char*>(flat.data()), static_cast<std::streamsize>(flat.size() * sizeof(float)))) {
    throw Error("truncated feature dump " + bin.string());
  }
  d.frames.assign(rows, std::vector<double>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) d.frames[r][c] = flat[r * cols + c];
  }
  return d;
}

inline FeatureDump to_dump(const MelSpectrogram& m) {
  FeatureDump d;
  d.frames = m.frames;
  d.hop = m.config.hop;
  d.sample_rate = m.config.sample_rate;
  d.extra = {{"n_mels", m.config.n_mels}, {"fmin", m.config.fmin}, {"fmax", m.config.fmax},
             {"fft_size", m.config.fft_size}, {"length", m.length}};
  return d;
}

}  // namespace dvc
