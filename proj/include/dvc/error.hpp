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

#include <functional>
#include <iostream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dvc {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by tensor primitives on incompatible operand shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Raised when a loss, gradient or parameter stops being finite.
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

using WarningSink = std::function<void(std::string_view)>;

namespace detail {
inline WarningSink& thread_warning_sink() {
  thread_local WarningSink sink;
  return sink;
}
}  // namespace detail

// Non-fatal diagnostics. Printed to stderr unless a thread-local sink is
// installed (see ScopedWarningCapture).
inline void warn(std::string_view message) {
  auto& sink = detail::thread_warning_sink();
  if (sink) {
    sink(message);
  } else {
    std::cerr << "WARNING: " << message << '\n';
  }
}

class ScopedWarningCapture {
 public:
  ScopedWarningCapture()
      : previous_(std::exchange(detail::thread_warning_sink(),
                                [this](std::string_view m) { messages_.emplace_back(m); })) {}
  ~ScopedWarningCapture() { detail::thread_warning_sink() = std::move(previous_); }
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }
  bool empty() const { return messages_.empty(); }

 private:
  WarningSink previous_;
  std::vector<std::string> messages_;
};

}  // namespace dvc
