// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

// Length measures for response text. A "character" is a Unicode scalar value
// of the UTF-8 input; malformed bytes count as one U+FFFD each.

#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>

namespace lenforge::metrics {

enum class LengthMetricKind { characters, letters, speech_seconds, print_cm, words };

inline constexpr std::array<LengthMetricKind, 5> kAllMetricKinds = {
    LengthMetricKind::characters, LengthMetricKind::letters, LengthMetricKind::speech_seconds,
    LengthMetricKind::print_cm, LengthMetricKind::words};

inline constexpr std::array<LengthMetricKind, 4> kTrainingMetricKinds = {
    LengthMetricKind::characters, LengthMetricKind::letters, LengthMetricKind::speech_seconds,
    LengthMetricKind::print_cm};

/// `words` is an evaluation-only probe; it never labels training data.
constexpr bool is_held_out(LengthMetricKind kind) { return kind == LengthMetricKind::words; }

constexpr bool is_integral(LengthMetricKind kind) {
  return kind == LengthMetricKind::characters || kind == LengthMetricKind::letters ||
         kind == LengthMetricKind::words;
}

/// Granularity of targets for `kind`: 1 for counts, 0.1 for seconds and cm.
constexpr double resolution(LengthMetricKind kind) { return is_integral(kind) ? 1.0 : 0.1; }

/// Canonical names: characters, letters, speech, print, words.
std::string_view to_string(LengthMetricKind kind);

/// Accepts the canonical names plus "speech_seconds" and "print_cm".
std::optional<LengthMetricKind> parse_metric_kind(std::string_view name);

/// Rounds half away from zero onto the metric's resolution grid.
double round_to_resolution(LengthMetricKind kind, double value);

class LengthRequirement {
 public:
  /// Throws DomainError unless target is finite, >= 0 and on the resolution grid.
  LengthRequirement(LengthMetricKind kind, double target);

  LengthMetricKind kind() const { return kind_; }
  double target() const { return target_; }

  /// "105" for integral metrics, "10.0" for real-valued ones.
  std::string format_target() const;

  /// Inverse of format_target; throws DomainError on malformed text.
  static LengthRequirement parse(LengthMetricKind kind, std::string_view text);

  friend bool operator==(const LengthRequirement&, const LengthRequirement&) = default;

 private:
  LengthMetricKind kind_;
  double target_;
};

struct SpeechRateModel {
  double chars_per_second = 15.0;

  void validate() const;
};

/// Horizontal advance widths in 1/1000 em.
class FontMetricTable {
 public:
  static constexpr double kCmPerPoint = 0.0352778;

  FontMetricTable(std::unordered_map<char32_t, int> widths, int default_width, double point_size = 12.0);

  /// Embedded Times-Roman metrics at 12pt.
  static const FontMetricTable& times_roman();

  /// Two-column text format: `<code> <width>` per line where code is
  /// decimal, 0x-hex or U+hex; `#` starts a comment; an optional
  /// `default <width>` line sets the fallback. Throws ConfigError.
  static FontMetricTable parse(std::istream& in, double point_size = 12.0);
  static FontMetricTable load(const std::filesystem::path& path, double point_size = 12.0);

  int advance(char32_t c) const;
  int default_width() const { return default_width_; }
  double point_size() const { return point_size_; }
  std::size_t size() const { return widths_.size(); }

  /// Converts a summed advance (per-mille em units) to centimeters.
  double to_cm(long long advance_units) const;

  /// Serializes in the format accepted by parse().
  std::string to_text() const;

 private:
  std::unordered_map<char32_t, int> widths_;
  int default_width_;
  double point_size_;
};

struct MeasureConfig {
  std::optional<SpeechRateModel> speech;
  std::optional<FontMetricTable> font;

  /// Speech rate 15 chars/s and the embedded Times-Roman table.
  static MeasureConfig defaults();
};

std::size_t measure_characters(std::string_view text);

/// Counts code points in Unicode categories L* and Nd.
std::size_t measure_letters(std::string_view text);

/// Maximal non-empty runs separated by White_Space code points.
std::size_t measure_words(std::string_view text);

double estimate_speech_seconds(std::string_view text, const SpeechRateModel& model);

/// Emits a warning diagnostic if `text` contains a line break; newline
/// characters are measured at the table's default width.
double estimate_print_cm(std::string_view text, const FontMetricTable& table);

/// Dispatches on `kind`. Throws ConfigError if the speech or print model
/// needed by `kind` is missing from `config`.
double measure(std::string_view text, LengthMetricKind kind, const MeasureConfig& config);

}  // namespace lenforge::metrics
