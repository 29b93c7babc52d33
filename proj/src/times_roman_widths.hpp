// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>

namespace lenforge::metrics::detail {

struct GlyphWidth {
  char32_t code;
  int width;
};

inline constexpr int kTimesRomanDefaultWidth = 500;

extern const std::array<GlyphWidth, 191> kTimesRomanWidths;

}  // namespace lenforge::metrics::detail
