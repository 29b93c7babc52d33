// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli/config.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <set>
#include <sstream>

#include "lenforge/error.hpp"
#include "lenforge/io.hpp"

namespace lenforge::cli {
namespace {

using metrics::LengthMetricKind;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, std::string_view expected) {
  throw ConfigError("invalid value '" + std::string(value) + "' for '" + std::string(key) + "': expected " +
                    std::string(expected));
}

template <class T>
T parse_number(std::string_view key, std::string_view value, std::string_view expected) {
  T out{};
  const auto* end = value.data() + value.size();
  const auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end) bad_value(key, value, expected);
  if constexpr (std::is_floating_point_v<T>) {
    if (!std::isfinite(out)) bad_value(key, value, expected);
  }
  return out;
}

LengthMetricKind parse_kind(std::string_view key, std::string_view value) {
  const auto kind = metrics::parse_metric_kind(value);
  if (!kind) bad_value(key, value, "characters, letters, speech, print or words");
  return *kind;
}

std::string format_number(double v) { return io::format_double(v); }

}  // namespace

std::string_view to_string(OutputFormat format) {
  switch (format) {
    case OutputFormat::json: return "json";
    case OutputFormat::csv: return "csv";
    case OutputFormat::text: return "text";
  }
  return "json";
}

void apply_setting(RunConfig& config, std::string_view key, std::string_view value) {
  value = trim(value);
  auto& t = config.train;
  if (key == "metric") {
    config.metrics.clear();
    std::set<LengthMetricKind> seen;
    for (std::size_t start = 0; start <= value.size();) {
      const auto comma = value.find(',', start);
      const auto item = trim(value.substr(start, comma == std::string_view::npos ? value.npos : comma - start));
      const auto kind = parse_kind(key, item);
      if (seen.insert(kind).second) config.metrics.push_back(kind);
      if (comma == std::string_view::npos) break;
      start = comma + 1;
    }
  } else if (key.starts_with("template.")) {
    const auto kind = parse_kind(key, key.substr(9));
    config.templates[kind] = std::string(value);
  } else if (key == "speech_rate") {
    config.speech_rate = parse_number<double>(key, value, "a positive number");
  } else if (key == "font_table") {
    config.font_table = value.empty() ? std::nullopt : std::optional<std::filesystem::path>(std::string(value));
  } else if (key == "lr") {
    t.learning_rate = parse_number<double>(key, value, "a positive number");
  } else if (key == "epochs") {
    t.epochs = parse_number<int>(key, value, "a positive integer");
  } else if (key == "batch_size") {
    t.batch_size = parse_number<std::size_t>(key, value, "a non-negative integer");
  } else if (key == "beta") {
    t.hyper.beta = parse_number<double>(key, value, "a positive number");
  } else if (key == "lambda") {
    t.hyper.lambda = parse_number<double>(key, value, "a non-negative number");
  } else if (key == "clip_eps") {
    t.hyper.clip_epsilon = parse_number<double>(key, value, "a number in (0, 1)");
  } else if (key == "seed") {
    t.seed = parse_number<std::uint64_t>(key, value, "a non-negative integer");
  } else if (key == "ppo_samples") {
    t.ppo_samples = parse_number<int>(key, value, "a positive integer");
  } else if (key == "ppo_inner_steps") {
    t.ppo_inner_steps = parse_number<int>(key, value, "a positive integer");
  } else if (key == "kl_order") {
    if (value == "reference_first") {
      t.kl_order = objectives::KlOrder::reference_first;
    } else if (value == "policy_first") {
      t.kl_order = objectives::KlOrder::policy_first;
    } else {
      bad_value(key, value, "reference_first or policy_first");
    }
  } else if (key == "sft_reduction") {
    if (value == "mean") {
      t.sft_reduction = objectives::Reduction::mean;
    } else if (value == "sum") {
      t.sft_reduction = objectives::Reduction::sum;
    } else {
      bad_value(key, value, "mean or sum");
    }
  } else if (key == "max_target") {
    config.max_target = parse_number<int>(key, value, "a non-negative integer");
  } else if (key == "reference") {
    config.reference = value.empty() ? std::nullopt : std::optional<std::filesystem::path>(std::string(value));
  } else if (key == "format") {
    if (value == "json") {
      config.format = OutputFormat::json;
    } else if (value == "csv") {
      config.format = OutputFormat::csv;
    } else if (value == "text") {
      config.format = OutputFormat::text;
    } else {
      bad_value(key, value, "json, csv or text");
    }
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

void apply_config_text(RunConfig& config, std::string_view text, std::string_view source) {
  std::set<std::string, std::less<>> seen;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.empty() || line.front() == '#') continue;
    const auto where = std::string(source) + ":" + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + "expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw ConfigError(where + "missing key");
    if (!seen.emplace(key).second) throw ConfigError(where + "duplicate key '" + std::string(key) + "'");
    try {
      apply_setting(config, key, line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(where + e.what());
    }
  }
}

RunConfig load_config(const std::optional<std::filesystem::path>& explicit_path, const Overrides& overrides) {
  RunConfig config;
  std::optional<std::filesystem::path> path = explicit_path;
  if (!path) {
    if (const char* env = std::getenv("LENFORGE_CONFIG"); env != nullptr && *env != '\0') path = env;
  }
  if (path) {
    std::string text;
    try {
      text = io::read_file(*path);
    } catch (const IoError& e) {
      throw ConfigError(std::string("cannot read config: ") + e.what());
    }
    apply_config_text(config, text, path->string());
  }
  for (const auto& [key, value] : overrides) apply_setting(config, key, value);
  config.validate();
  return config;
}

void RunConfig::validate() const {
  if (metrics.empty()) throw ConfigError("at least one metric is required");
  if (!(speech_rate > 0.0)) throw ConfigError("speech_rate must be positive");
  if (max_target < 0) throw ConfigError("max_target must be non-negative");
  train.validate();
  prompt_template();  // validates template overrides
}

metrics::MeasureConfig RunConfig::measure_config() const {
  metrics::MeasureConfig config = metrics::MeasureConfig::defaults();
  config.speech = metrics::SpeechRateModel{speech_rate};
  config.speech->validate();
  if (font_table) config.font = metrics::FontMetricTable::load(*font_table);
  return config;
}

dataset::PromptTemplate RunConfig::prompt_template() const {
  auto templ = dataset::PromptTemplate::defaults();
  for (const auto& [kind, pattern] : templates) templ.set(kind, pattern);
  return templ;
}

std::string RunConfig::to_text() const {
  std::ostringstream out;
  out << "metric = ";
  for (std::size_t i = 0; i < metrics.size(); ++i) out << (i ? "," : "") << metrics::to_string(metrics[i]);
  out << '\n';
  for (const auto& [kind, pattern] : templates) out << "template." << metrics::to_string(kind) << " = " << pattern << '\n';
  out << "speech_rate = " << format_number(speech_rate) << '\n';
  out << "font_table = " << (font_table ? font_table->string() : "") << '\n';
  out << "lr = " << format_number(train.learning_rate) << '\n';
  out << "epochs = " << train.epochs << '\n';
  out << "batch_size = " << train.batch_size << '\n';
  out << "beta = " << format_number(train.hyper.beta) << '\n';
  out << "lambda = " << format_number(train.hyper.lambda) << '\n';
  out << "clip_eps = " << format_number(train.hyper.clip_epsilon) << '\n';
  out << "seed = " << train.seed << '\n';
  out << "ppo_samples = " << train.ppo_samples << '\n';
  out << "ppo_inner_steps = " << train.ppo_inner_steps << '\n';
  out << "kl_order = "
      << (train.kl_order == objectives::KlOrder::reference_first ? "reference_first" : "policy_first") << '\n';
  out << "sft_reduction = " << (train.sft_reduction == objectives::Reduction::mean ? "mean" : "sum") << '\n';
  out << "max_target = " << max_target << '\n';
  out << "reference = " << (reference ? reference->string() : "") << '\n';
  out << "format = " << to_string(format) << '\n';
  return out.str();
}

std::string RunConfig::digest() const { return io::sha256_hex(to_text()); }

}  // namespace lenforge::cli
