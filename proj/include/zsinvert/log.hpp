// Copyright 2026 The zsinvert Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <atomic>
#include <functional>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>

namespace zsinvert::log {

enum class Level { kDebug = 0, kInfo = 1, kWarning = 2, kError = 3, kOff = 4 };

inline std::string_view LevelName(Level level) {
  switch (level) {
    case Level::kDebug: return "debug";
    case Level::kInfo: return "info";
    case Level::kWarning: return "warning";
    case Level::kError: return "error";
    case Level::kOff: return "off";
  }
  return "?";
}

using Sink = std::function<void(Level, std::string_view)>;

namespace detail {

inline std::atomic<Level>& Threshold() {
  static std::atomic<Level> threshold{Level::kWarning};
  return threshold;
}

struct SinkSlot {
  std::mutex mu;
  Sink sink;
};

inline SinkSlot& Slot() {
  static SinkSlot slot;
  return slot;
}

}  // namespace detail

inline void SetLevel(Level level) { detail::Threshold().store(level); }
inline Level GetLevel() { return detail::Threshold().load(); }
inline bool Enabled(Level level) { return level >= GetLevel() && level != Level::kOff; }

// Replaces the stderr sink. Pass an empty function to restore it.
inline void SetSink(Sink sink) {
  auto& slot = detail::Slot();
  std::lock_guard lock(slot.mu);
  slot.sink = std::move(sink);
}

template <typename... Args>
void Write(Level level, Args&&... args) {
  if (!Enabled(level)) return;
  std::ostringstream os;
  (os << ... << std::forward<Args>(args));
  auto& slot = detail::Slot();
  std::lock_guard lock(slot.mu);
  if (slot.sink) {
    slot.sink(level, os.str());
  } else {
    std::cerr << "[zsinvert " << LevelName(level) << "] " << os.str() << '\n';
  }
}

template <typename... Args>
void Debug(Args&&... args) { Write(Level::kDebug, std::forward<Args>(args)...); }
template <typename... Args>
void Info(Args&&... args) { Write(Level::kInfo, std::forward<Args>(args)...); }
template <typename... Args>
void Warn(Args&&... args) { Write(Level::kWarning, std::forward<Args>(args)...); }
template <typename... Args>
void Err(Args&&... args) { Write(Level::kError, std::forward<Args>(args)...); }

}  // namespace zsinvert::log
