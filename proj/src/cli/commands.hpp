// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace lenforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;    // bad flags, config or input
inline constexpr int kExitRuntime = 3;  // training or other runtime failure

struct Streams {
  std::istream& in;
  std::ostream& out;
  std::ostream& err;
};

// Parses and dispatches one invocation. `args` excludes the program name.
// Diagnostics are routed to `streams.err` for the duration of the call.
int run(const std::vector<std::string>& args, Streams streams);

}  // namespace lenforge::cli
