// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

// A tabular, length-conditioned stop/continue chain. For prompt bucket t the
// policy starts at emitted length s = 0 and at every step either stops
// (response length s) or continues to s + 1. At s = max_length() stopping is
// forced, so every response terminates and the outcome space {0..S_max} can
// be enumerated exactly.

#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lenforge/metrics.hpp"

namespace lenforge::toy {

using Rng = std::mt19937_64;

class ToyPolicy {
 public:
  enum Action : int { kContinue = 0, kStop = 1 };

  /// Logits drawn from N(0, 0.01^2). max_length defaults to 2 * max_target
  /// and must be at least that. Throws DomainError if max_target < 1.
  static ToyPolicy init(int max_target, std::uint64_t seed, int max_length = 0);

  /// Table built from explicit logits laid out as index(t, s, action).
  static ToyPolicy from_logits(int max_target, int max_length, std::uint64_t seed, std::vector<double> logits);

  int max_target() const { return max_target_; }
  int max_length() const { return max_length_; }
  std::uint64_t seed() const { return seed_; }

  std::size_t num_parameters() const { return logits_.size(); }
  std::size_t index(int target, int length, Action action) const;
  std::span<double> parameters() { return logits_; }
  std::span<const double> parameters() const { return logits_; }

  double log_continue(int target, int length) const;
  double log_stop(int target, int length) const;
  double continue_probability(int target, int length) const;

  /// log pi(length | target) = sum_{s<length} log p_cont(s) + log p_stop(length).
  double response_logprob(int target, int length) const;

  /// The length + 1 decision log-probabilities whose sum is response_logprob.
  std::vector<double> token_logprobs(int target, int length) const;

  /// Adds scale * d response_logprob / d theta into grad.
  void accumulate_logprob_grad(int target, int length, double scale, std::span<double> grad) const;

  /// exp(response_logprob) for every length 0..max_length().
  std::vector<double> length_distribution(int target) const;

  int sample_response(int target, Rng& rng) const;

  /// Throws DomainError if target is outside [1, max_target()].
  void check_target(int target) const;

  friend bool operator==(const ToyPolicy&, const ToyPolicy&) = default;

 private:
  ToyPolicy(int max_target, int max_length, std::uint64_t seed, std::vector<double> logits);
  void check_length(int length) const;
  double logit_gap(int target, int length) const;

  int max_target_ = 0;
  int max_length_ = 0;
  std::uint64_t seed_ = 0;
  std::vector<double> logits_;
};

/// Expected |relative deviation| in percent of the response length from the
/// target, by exact enumeration.
double expected_abs_deviation(const ToyPolicy& policy, int target);
double mean_expected_abs_deviation(const ToyPolicy& policy, std::span<const int> targets);

enum class Stage { init, sft, ppo, dpo, orpo };
std::string_view to_string(Stage stage);
Stage parse_stage(std::string_view name);

struct Checkpoint {
  ToyPolicy policy;
  Stage stage = Stage::init;
  int epoch = 0;
  std::string corpus_digest;

  /// SHA-256 of serialize(*this).
  std::string digest() const;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

/// Versioned JSON; parsing the output reproduces every logit bit-exactly.
std::string serialize(const Checkpoint& checkpoint);
Checkpoint deserialize(std::string_view text);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// -- bridging metric values and policy lengths -------------------------------

/// Metric value -> integral policy units (counts, or tenths for seconds/cm).
int to_units(metrics::LengthMetricKind kind, double value);
double from_units(metrics::LengthMetricKind kind, int units);

/// Deterministic filler text with exactly `characters` code points, built
/// from a fixed word list separated by single spaces.
std::string render_characters(int characters);

/// Text whose measure under `kind` is as close as the filler allows to
/// `units` policy units.
std::string realize_text(metrics::LengthMetricKind kind, int units, const metrics::MeasureConfig& config);

}  // namespace lenforge::toy
