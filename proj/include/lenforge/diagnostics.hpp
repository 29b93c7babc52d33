// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string_view>

namespace lenforge::diag {

enum class Level { info, warning, error };

using Sink = std::function<void(Level, std::string_view)>;

// Replaces the process-wide sink and returns the previous one. The default
// sink writes to stderr.
Sink set_sink(Sink sink);

void emit(Level level, std::string_view message);
inline void info(std::string_view message) { emit(Level::info, message); }
inline void warn(std::string_view message) { emit(Level::warning, message); }
inline void error(std::string_view message) { emit(Level::error, message); }

}  // namespace lenforge::diag
