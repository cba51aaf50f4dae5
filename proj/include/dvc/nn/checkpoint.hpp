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

#include "dvc/error.hpp"
#include "dvc/nn/tensor.hpp"

// Checkpoints are a flat little-endian float32 blob (`<stem>.bin`) holding
// the parameters back to back, plus `<stem>.json` with names, shapes and
// caller-supplied metadata (iteration, config hash, ...).

namespace dvc::nn {

inline constexpr const char* kCheckpointFormat = "dvc-checkpoint-1";

inline std::filesystem::path with_suffix(std::filesystem::path stem, const char* suffix) {
  stem += suffix;
  return stem;
}

template <class T>
void save_checkpoint(const std::filesystem::path& stem, const std::vector<Parameter<T>*>& params,
                     nlohmann::json meta = nlohmann::json::object()) {
  std::vector<float> blob;
  nlohmann::json layout = nlohmann::json::array();
  for (const auto* p : params) {
    layout.push_back({{"name", p->name}, {"shape", p->value.shape}});
    for (T v : p->value.values) blob.push_back(static_cast<float>(v));
  }
  const auto bin = with_suffix(stem, ".bin");
  std::ofstream out(bin, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + bin.string());
  out.write(reinterpret_cast<const char*>(blob.data()), static_cast<std::streamsize>(blob.size() * sizeof(float)));
  if (!out) throw Error("failed writing checkpoint " + bin.string());
  meta["format"] = kCheckpointFormat;
  meta["parameters"] = layout;
  meta["num_values"] = blob.size();
  std::ofstream(with_suffix(stem, ".json")) << meta.dump(2) << '\n';
}

// Restores parameter values in place; names and shapes must match. Returns
// the stored metadata.
template <class T>
nlohmann::json load_checkpoint(const std::filesystem::path& stem, const std::vector<Parameter<T>*>& params) {
  const auto js = with_suffix(stem, ".json");
  std::ifstream min(js);
  if (!min) throw Error("cannot open checkpoint metadata " + js.string());
  auto meta = nlohmann::json::parse(min);
  if (meta.value("format", "") != kCheckpointFormat) throw Error(js.string() + ": unknown checkpoint format");
  const auto& layout = meta.at("parameters");
  if (layout.size() != params.size()) {
    throw Error(js.string() + ": checkpoint holds " + std::to_string(layout.size()) + " parameters, model has " +
                std::to_string(params.size()));
  }
  std::size_t total = 0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto name = layout[i].at("name").get<std::string>();
    const auto shape = layout[i].at("shape").get<Shape>();
    if (name != params[i]->name || shape != params[i]->value.shape) {
      throw Error(js.string() + ": parameter " + std::to_string(i) + " is " + name + shape_string(shape) +
                  ", model expects " + params[i]->name + shape_string(params[i]->value.shape));
    }
    total += params[i]->size();
  }
  const auto bin = with_suffix(stem, ".bin");
  std::ifstream in(bin, std::ios::binary);
  std::vector<float> blob(total);
  if (!in.read(reinterpret_cast<char*>(blob.data()), static_cast<std::streamsize>(total * sizeof(float)))) {
    throw Error("truncated checkpoint " + bin.string());
  }
  std::size_t offset = 0;
  for (auto* p : params) {
    for (auto& v : p->value.values) v = static_cast<T>(blob[offset++]);
  }
  return meta;
}

}  // namespace dvc::nn
