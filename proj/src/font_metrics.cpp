// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <vector>

#include "lenforge/error.hpp"
#include "lenforge/metrics.hpp"
#include "times_roman_widths.hpp"

namespace lenforge::metrics {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

template <class T>
bool parse_number(std::string_view text, T& value, int base = 10) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value, base);
  return ec == std::errc{} && ptr == text.data() + text.size() && !text.empty();
}

bool parse_code(std::string_view text, char32_t& code) {
  unsigned long value = 0;
  bool ok = false;
  if (text.starts_with("U+") || text.starts_with("u+") || text.starts_with("0x") || text.starts_with("0X")) {
    ok = parse_number(text.substr(2), value, 16);
  } else {
    ok = parse_number(text, value);
  }
  if (!ok || value > 0x10FFFF) return false;
  code = static_cast<char32_t>(value);
  return true;
}

}  // namespace

FontMetricTable::FontMetricTable(std::unordered_map<char32_t, int> widths, int default_width, double point_size)
    : widths_(std::move(widths)), default_width_(default_width), point_size_(point_size) {
  if (default_width_ <= 0) throw ConfigError("font default width must be positive");
  if (!(point_size_ > 0.0)) throw ConfigError("font point size must be positive");
  for (const auto& [code, width] : widths_) {
    if (width <= 0) throw ConfigError("font advance widths must be positive");
  }
  for (char32_t c = 0x20; c <= 0x7E; ++c) {
    if (!widths_.contains(c)) {
      throw ConfigError("font metric table does not cover printable ASCII (missing code " +
                        std::to_string(static_cast<unsigned>(c)) + ")");
    }
  }
}

const FontMetricTable& FontMetricTable::times_roman() {
  static const FontMetricTable table = [] {
    std::unordered_map<char32_t, int> widths;
    for (const auto& glyph : detail::kTimesRomanWidths) widths.emplace(glyph.code, glyph.width);
    return FontMetricTable(std::move(widths), detail::kTimesRomanDefaultWidth);
  }();
  return table;
}

FontMetricTable FontMetricTable::parse(std::istream& in, double point_size) {
  std::unordered_map<char32_t, int> widths;
  int default_width = detail::kTimesRomanDefaultWidth;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const auto split = view.find_first_of(" \t");
    if (split == std::string_view::npos) {
      throw ConfigError("font table line " + std::to_string(line_no) + ": expected two columns");
    }
    const auto key = view.substr(0, split);
    const auto value_text = trim(view.substr(split));
    int width = 0;
    if (!parse_number(value_text, width) || width <= 0) {
      throw ConfigError("font table line " + std::to_string(line_no) + ": bad width");
    }
    if (key == "default") {
      default_width = width;
      continue;
    }
    char32_t code = 0;
    if (!parse_code(key, code)) {
      throw ConfigError("font table line " + std::to_string(line_no) + ": bad character code");
    }
    widths[code] = width;
  }
  if (in.bad()) throw IoError("read error in font table");
  return FontMetricTable(std::move(widths), default_width, point_size);
}

FontMetricTable FontMetricTable::load(const std::filesystem::path& path, double point_size) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open font table '" + path.string() + "'");
  return parse(in, point_size);
}

int FontMetricTable::advance(char32_t c) const {
  const auto it = widths_.find(c);
  return it == widths_.end() ? default_width_ : it->second;
}

double FontMetricTable::to_cm(long long advance_units) const {
  return static_cast<double>(advance_units) / 1000.0 * point_size_ * kCmPerPoint;
}

std::string FontMetricTable::to_text() const {
  std::vector<std::pair<char32_t, int>> sorted(widths_.begin(), widths_.end());
  std::sort(sorted.begin(), sorted.end());
  std::ostringstream out;
  out << "default " << default_width_ << '\n';
  for (const auto& [code, width] : sorted) out << static_cast<unsigned long>(code) << ' ' << width << '\n';
  return out.str();
}

}  // namespace lenforge::metrics
