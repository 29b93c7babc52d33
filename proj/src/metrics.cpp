// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "lenforge/metrics.hpp"

#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <charconv>
#include <cmath>
#include <cstdio>

#include "lenforge/diagnostics.hpp"
#include "lenforge/error.hpp"

namespace lenforge::metrics {
namespace {

constexpr char32_t kReplacement = 0xFFFD;

// Calls fn(code_point) for every scalar value; malformed bytes decode to
// U+FFFD and consume one or more bytes as ICU's U8_NEXT decides.
template <class Fn>
void for_each_scalar(std::string_view text, Fn&& fn) {
  const auto* bytes = reinterpret_cast<const uint8_t*>(text.data());
  const auto length = static_cast<int32_t>(text.size());
  int32_t i = 0;
  while (i < length) {
    UChar32 c;
    U8_NEXT(bytes, i, length, c);
    fn(c < 0 ? kReplacement : static_cast<char32_t>(c));
  }
}

double scale_of(LengthMetricKind kind) { return is_integral(kind) ? 1.0 : 10.0; }

}  // namespace

std::string_view to_string(LengthMetricKind kind) {
  switch (kind) {
    case LengthMetricKind::characters: return "characters";
    case LengthMetricKind::letters: return "letters";
    case LengthMetricKind::speech_seconds: return "speech";
    case LengthMetricKind::print_cm: return "print";
    case LengthMetricKind::words: return "words";
  }
  return "unknown";
}

std::optional<LengthMetricKind> parse_metric_kind(std::string_view name) {
  if (name == "characters") return LengthMetricKind::characters;
  if (name == "letters") return LengthMetricKind::letters;
  if (name == "speech" || name == "speech_seconds") return LengthMetricKind::speech_seconds;
  if (name == "print" || name == "print_cm") return LengthMetricKind::print_cm;
  if (name == "words") return LengthMetricKind::words;
  return std::nullopt;
}

double round_to_resolution(LengthMetricKind kind, double value) {
  const double scale = scale_of(kind);
  return std::round(value * scale) / scale;
}

LengthRequirement::LengthRequirement(LengthMetricKind kind, double target)
    : kind_(kind), target_(target + 0.0) {
  if (!std::isfinite(target) || target < 0.0) {
    throw DomainError("length target must be finite and non-negative");
  }
  if (round_to_resolution(kind, target) != target) {
    throw DomainError("length target " + std::to_string(target) + " is not on the " +
                      std::string(to_string(kind)) + " resolution grid");
  }
}

std::string LengthRequirement::format_target() const {
  char buffer[64];
  if (is_integral(kind_)) {
    std::snprintf(buffer, sizeof buffer, "%.0f", target_);
  } else {
    std::snprintf(buffer, sizeof buffer, "%.1f", target_);
  }
  return buffer;
}

LengthRequirement LengthRequirement::parse(LengthMetricKind kind, std::string_view text) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value, std::chars_format::fixed);
  if (ec != std::errc{} || ptr != last || text.empty()) {
    throw DomainError("malformed length target '" + std::string(text) + "'");
  }
  LengthRequirement requirement(kind, value);
  if (requirement.format_target() != text) {
    throw DomainError("length target '" + std::string(text) + "' is not in canonical form");
  }
  return requirement;
}

void SpeechRateModel::validate() const {
  if (!(chars_per_second > 0.0) || !std::isfinite(chars_per_second)) {
    throw ConfigError("speech rate must be a positive number of characters per second");
  }
}

MeasureConfig MeasureConfig::defaults() { return MeasureConfig{SpeechRateModel{}, FontMetricTable::times_roman()}; }

std::size_t measure_characters(std::string_view text) {
  std::size_t n = 0;
  for_each_scalar(text, [&](char32_t) { ++n; });
  return n;
}

std::size_t measure_letters(std::string_view text) {
  std::size_t n = 0;
  for_each_scalar(text, [&](char32_t c) {
    if (u_isalnum(static_cast<UChar32>(c))) ++n;
  });
  return n;
}

std::size_t measure_words(std::string_view text) {
  std::size_t n = 0;
  bool in_word = false;
  for_each_scalar(text, [&](char32_t c) {
    const bool space = u_isUWhiteSpace(static_cast<UChar32>(c));
    if (!space && !in_word) ++n;
    in_word = !space;
  });
  return n;
}

double estimate_speech_seconds(std::string_view text, const SpeechRateModel& model) {
  model.validate();
  return static_cast<double>(measure_characters(text)) / model.chars_per_second;
}

double estimate_print_cm(std::string_view text, const FontMetricTable& table) {
  long long units = 0;
  bool line_break = false;
  for_each_scalar(text, [&](char32_t c) {
    if (c == U'\n' || c == U'\r' || c == 0x2028 || c == 0x2029) line_break = true;
    units += table.advance(c);
  });
  if (line_break) diag::warn("print width measured on text containing a line break");
  return table.to_cm(units);
}

double measure(std::string_view text, LengthMetricKind kind, const MeasureConfig& config) {
  switch (kind) {
    case LengthMetricKind::characters: return static_cast<double>(measure_characters(text));
    case LengthMetricKind::letters: return static_cast<double>(measure_letters(text));
    case LengthMetricKind::words: return static_cast<double>(measure_words(text));
    case LengthMetricKind::speech_seconds:
      if (!config.speech) throw ConfigError("speech metric requires a speech rate model");
      return estimate_speech_seconds(text, *config.speech);
    case LengthMetricKind::print_cm:
      if (!config.font) throw ConfigError("print metric requires a font metric table");
      return estimate_print_cm(text, *config.font);
  }
  throw DomainError("unknown length metric");
}

}  // namespace lenforge::metrics
