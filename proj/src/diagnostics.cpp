// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "lenforge/diagnostics.hpp"

#include <iostream>
#include <mutex>
#include <utility>

namespace lenforge::diag {
namespace {

std::mutex& sink_mutex() {
  static std::mutex m;
  return m;
}

void stderr_sink(Level level, std::string_view message) {
  const char* tag = level == Level::info ? "info" : level == Level::warning ? "warning" : "error";
  std::cerr << "lenforge: " << tag << ": " << message << '\n';
}

Sink& current() {
  static Sink sink = stderr_sink;
  return sink;
}

}  // namespace

Sink set_sink(Sink sink) {
  std::lock_guard lock(sink_mutex());
  if (!sink) sink = stderr_sink;
  return std::exchange(current(), std::move(sink));
}

void emit(Level level, std::string_view message) {
  std::lock_guard lock(sink_mutex());
  current()(level, message);
}

}  // namespace lenforge::diag
