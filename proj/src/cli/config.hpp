// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "lenforge/dataset.hpp"
#include "lenforge/metrics.hpp"
#include "lenforge/training.hpp"

namespace lenforge::cli {

enum class OutputFormat { json, csv, text };

// Settings shared by every subcommand. A config file uses the same keys as
// `apply_setting`; see `kConfigGrammar`.
struct RunConfig {
  std::vector<metrics::LengthMetricKind> metrics{metrics::LengthMetricKind::characters};
  std::map<metrics::LengthMetricKind, std::string> templates;
  double speech_rate = 15.0;
  std::optional<std::filesystem::path> font_table;
  toy::TrainConfig train;
  int max_target = 0;  // 0: derive from the corpus
  std::optional<std::filesystem::path> reference;
  OutputFormat format = OutputFormat::json;

  // Throws ConfigError.
  void validate() const;

  metrics::MeasureConfig measure_config() const;
  dataset::PromptTemplate prompt_template() const;

  // Canonical `key = value` text; identical configs give identical text.
  std::string to_text() const;
  std::string digest() const;
};

inline constexpr std::string_view kConfigGrammar =
    "line    := blank | comment | setting\n"
    "comment := '#' any*\n"
    "setting := key ws* '=' ws* value ws*\n"
    "keys    := metric, template.<metric>, speech_rate, font_table, lr, epochs, batch_size,\n"
    "           beta, lambda, clip_eps, seed, ppo_samples, ppo_inner_steps, kl_order,\n"
    "           sft_reduction, max_target, reference, format\n";

// Throws ConfigError for unknown keys or malformed values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

// Applies a whole file; `source` names it in error messages. Keys may appear
// at most once.
void apply_config_text(RunConfig& config, std::string_view text, std::string_view source);

using Overrides = std::vector<std::pair<std::string, std::string>>;

// defaults <- config file (explicit path, else $LENFORGE_CONFIG) <- overrides.
RunConfig load_config(const std::optional<std::filesystem::path>& explicit_path, const Overrides& overrides);

std::string_view to_string(OutputFormat format);

}  // namespace lenforge::cli
