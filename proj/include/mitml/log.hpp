/*
 * Copyright 2026 The mitml Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef MITML_LOG_HPP
#define MITML_LOG_HPP

#include <cstdlib>
#include <iostream>
#include <string>

// Leveled logging to stderr, controlled by the MITML_LOG environment
// variable: error (default), info, debug.

namespace mitml {

enum class LogLevel : int { kError = 0, kInfo = 1, kDebug = 2 };

inline LogLevel log_level() {
  static const LogLevel level = [] {
    const char* env = std::getenv("MITML_LOG");
    if (env == nullptr) return LogLevel::kError;
    const std::string s(env);
    if (s == "debug") return LogLevel::kDebug;
    if (s == "info") return LogLevel::kInfo;
    return LogLevel::kError;
  }();
  return level;
}

inline bool log_enabled(LogLevel lv) {
  return static_cast<int>(lv) <= static_cast<int>(log_level());
}

}  // namespace mitml

#define MITML_LOG(level, stream_expr)                                     \
  do {                                                                    \
    if (::mitml::log_enabled(::mitml::LogLevel::level)) {                 \
      std::cerr << "[mitml] " << stream_expr << std::endl;                \
    }                                                                     \
  } while (0)

#endif  // MITML_LOG_HPP
