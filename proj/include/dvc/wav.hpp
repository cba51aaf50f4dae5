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
#include <array>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "dvc/error.hpp"
#include "dvc/waveform.hpp"

// RIFF/WAVE PCM16 mono reader and writer.

namespace dvc {

struct WavInfo {
  int sample_rate = 0;
  int channels = 0;
  int bits_per_sample = 0;
  std::size_t frames = 0;
  double duration() const { return sample_rate > 0 ? static_cast<double>(frames) / sample_rate : 0.0; }
};

namespace detail {

inline std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
inline std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

inline void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}
inline void put_u16(std::ostream& out, std::uint16_t v) {
  const unsigned char b[2] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8)};
  out.write(reinterpret_cast<const char*>(b), 2);
}

// Walks the chunk list; leaves the stream positioned at the start of the
// data chunk and returns its size.
inline std::uint32_t parse_wav_header(std::istream& in, const std::string& name, WavInfo& info) {
  unsigned char riff[12];
  if (!in.read(reinterpret_cast<char*>(riff), 12) || std::memcmp(riff, "RIFF", 4) != 0 ||
      std::memcmp(riff + 8, "WAVE", 4) != 0) {
    throw Error(name + ": not a RIFF/WAVE file");
  }
  bool have_fmt = false;
  unsigned char hdr[8];
  while (in.read(reinterpret_cast<char*>(hdr), 8)) {
    const std::uint32_t size = read_u32(hdr + 4);
    if (std::memcmp(hdr, "fmt ", 4) == 0) {
      if (size < 16) throw Error(name + ": malformed fmt chunk");
      std::vector<unsigned char> fmt(size);
      if (!in.read(reinterpret_cast<char*>(fmt.data()), size)) throw Error(name + ": truncated fmt chunk");
      const std::uint16_t format = read_u16(fmt.data());
      info.channels = read_u16(fmt.data() + 2);
      info.sample_rate = static_cast<int>(read_u32(fmt.data() + 4));
      info.bits_per_sample = read_u16(fmt.data() + 14);
      if (format != 1 && format != 0xFFFE) throw Error(name + ": only PCM WAV is supported");
      have_fmt = true;
      if (size % 2) in.ignore(1);
    } else if (std::memcmp(hdr, "data", 4) == 0) {
      if (!have_fmt) throw Error(name + ": data chunk before fmt chunk");
      if (info.channels <= 0 || info.bits_per_sample != 16) {
        throw Error(name + ": only 16-bit PCM is supported");
      }
      info.frames = size / (2u * static_cast<std::uint32_t>(info.channels));
      return size;
    } else {
      in.ignore(size + (size % 2));
    }
  }
  throw Error(name + ": no data chunk");
}

}  // namespace detail

inline WavInfo read_wav_info(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  WavInfo info;
  detail::parse_wav_header(in, path.string(), info);
  return info;
}

inline Waveform read_wav(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  WavInfo info;
  const std::uint32_t size = detail::parse_wav_header(in, path.string(), info);
  if (info.channels != 1) throw Error(path.string() + ": expected mono audio");
  std::vector<unsigned char> raw(size);
  in.read(reinterpret_cast<char*>(raw.data()), size);
  const auto got = static_cast<std::size_t>(in.gcount()) / 2;
  std::vector<double> samples(got);
  for (std::size_t i = 0; i < got; ++i) {
    const auto v = static_cast<std::int16_t>(detail::read_u16(raw.data() + 2 * i));
    samples[i] = static_cast<double>(v) / 32768.0;
  }
  return Waveform(std::move(samples), info.sample_rate);
}

inline void write_wav(const std::filesystem::path& path, const Waveform& w) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  const auto n = static_cast<std::uint32_t>(w.samples.size());
  const auto sr = static_cast<std::uint32_t>(w.sample_rate);
  out.write("RIFF", 4);
  detail::put_u32(out, 36 + 2 * n);
  out.write("WAVEfmt ", 8);
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);
  detail::put_u16(out, 1);
  detail::put_u32(out, sr);
  detail::put_u32(out, 2 * sr);
  detail::put_u16(out, 2);
  detail::put_u16(out, 16);
  out.write("data", 4);
  detail::put_u32(out, 2 * n);
  std::vector<char> buf(2 * static_cast<std::size_t>(n));
  for (std::uint32_t i = 0; i < n; ++i) {
    const double clamped = std::clamp(w.samples[i], -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::clamp(std::lround(clamped * 32768.0), -32768L, 32767L));
    const auto u = static_cast<std::uint16_t>(v);
    buf[2 * i] = static_cast<char>(u & 0xff);
    buf[2 * i + 1] = static_cast<char>(u >> 8);
  }
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace dvc
