// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "lenforge/error.hpp"
#include "lenforge/metrics.hpp"

namespace lenforge::dataset {

using metrics::LengthMetricKind;
using metrics::LengthRequirement;

struct PromptResponse {
  std::string id;
  std::string prompt;
  std::string response;

  friend bool operator==(const PromptResponse&, const PromptResponse&) = default;
};

struct IngestResult {
  std::vector<PromptResponse> samples;
  std::size_t total = 0;    // non-blank lines seen
  std::size_t skipped = 0;  // lines that did not yield a sample
};

/// Reads newline-delimited JSON records. Accepted shapes:
///   {"id"?, "prompt", "response"}
///   {"id"?, "conversation": ["user", "assistant", ...]}  (first pair only)
/// Bad records are skipped and counted; ids default to the 1-based line
/// number. Throws IoError on a stream failure and EmptyCorpusError when no
/// record is usable.
IngestResult ingest_jsonl(std::istream& source);

/// Requirement sentences, one per metric, each holding a single `{LEN}`.
class PromptTemplate {
 public:
  static constexpr std::string_view kPlaceholder = "{LEN}";

  /// "Generate precisely {LEN} <unit> in your response." for every metric.
  static PromptTemplate defaults();

  /// Throws ConfigError unless `pattern` contains exactly one {LEN}.
  void set(LengthMetricKind kind, std::string pattern);
  const std::string& pattern(LengthMetricKind kind) const;

  std::string render(const LengthRequirement& requirement) const;

  /// Finds the requirement sentence at the end of `augmented_prompt`.
  std::optional<LengthRequirement> parse(std::string_view augmented_prompt) const;

 private:
  std::map<LengthMetricKind, std::string> patterns_;
};

struct AugmentedSample {
  PromptResponse base;
  LengthRequirement requirement;
  std::string augmented_prompt;
};

/// Measures the response under `kind`, rounds to the metric's resolution and
/// appends the rendered requirement sentence after one space. Throws
/// DomainError for held-out kinds (unless `allow_held_out`), and
/// DegenerateSampleError when the response measures zero.
AugmentedSample augment(const PromptResponse& sample, LengthMetricKind kind, const PromptTemplate& templ,
                        const metrics::MeasureConfig& config, bool allow_held_out = false);

struct PreferencePair {
  std::string id;
  std::string augmented_prompt;
  LengthRequirement requirement;
  std::string chosen;
  std::string rejected;
  bool tied = false;
};

/// Index of the measurement with the highest length reward; ties go to the
/// earliest index.
std::size_t select_preferred(std::span<const double> measures, double target);

/// One pair per non-chosen candidate. Throws DomainError for < 2 candidates
/// or a zero target.
std::vector<PreferencePair> build_preference_pairs(std::string_view id, std::string_view prompt,
                                                   std::span<const std::string> candidates,
                                                   const LengthRequirement& requirement,
                                                   const metrics::MeasureConfig& config);

inline constexpr std::string_view kDefaultAlphabet = "abcdefghijklmnopqrstuvwxyz";

/// Seeded corpus whose responses are words over `alphabet` with character
/// lengths uniform on [min_length, max_length].
std::vector<PromptResponse> synthesize_toy_corpus(std::uint64_t seed, std::size_t n, std::size_t min_length,
                                                  std::size_t max_length,
                                                  std::string_view alphabet = kDefaultAlphabet);

template <class T>
struct Split {
  std::vector<T> train;
  std::vector<T> eval;
  std::vector<T> test;
};

/// Sizes for a three-way split by largest remainder.
std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& fractions);

/// Seeded shuffle, then cut by split_sizes. Throws DomainError for fewer
/// than 3 items or fractions that are not positive and summing to 1.
template <class T>
Split<T> split(std::vector<T> corpus, const std::array<double, 3>& fractions, std::uint64_t seed) {
  if (corpus.size() < 3) throw DomainError("cannot split a corpus of fewer than 3 samples");
  const auto sizes = split_sizes(corpus.size(), fractions);
  std::mt19937_64 rng(seed);
  for (std::size_t i = corpus.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(corpus[i - 1], corpus[pick(rng)]);
  }
  Split<T> out;
  auto it = std::make_move_iterator(corpus.begin());
  out.train.assign(it, it + static_cast<std::ptrdiff_t>(sizes[0]));
  it += static_cast<std::ptrdiff_t>(sizes[0]);
  out.eval.assign(it, it + static_cast<std::ptrdiff_t>(sizes[1]));
  it += static_cast<std::ptrdiff_t>(sizes[1]);
  out.test.assign(it, std::make_move_iterator(corpus.end()));
  return out;
}

// -- JSONL schemas -----------------------------------------------------------

nlohmann::json target_to_json(const LengthRequirement& requirement);
LengthRequirement requirement_from_json(const nlohmann::json& metric, const nlohmann::json& target);

/// {"id","prompt","response"}
nlohmann::json to_json(const PromptResponse& sample);
/// {"id","prompt","response","metric","target"}
nlohmann::json to_json(const AugmentedSample& sample);
/// {"id","prompt","metric","target","chosen","rejected","tied"}
nlohmann::json to_json(const PreferencePair& pair);

/// The base prompt is recovered by stripping the requirement sentence.
AugmentedSample augmented_from_json(const nlohmann::json& j, const PromptTemplate& templ = PromptTemplate::defaults());
PreferencePair pair_from_json(const nlohmann::json& j);

/// One compact JSON object per line, each line '\n'-terminated.
std::string to_jsonl(std::span<const nlohmann::json> records);

/// Parses every non-blank line; throws DomainError naming the bad line.
std::vector<nlohmann::json> parse_jsonl(std::string_view text);

}  // namespace lenforge::dataset
