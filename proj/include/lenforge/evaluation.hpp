// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lenforge/metrics.hpp"

namespace lenforge::eval {

using metrics::LengthMetricKind;
using metrics::LengthRequirement;

struct EvaluationRecord {
  std::string id;
  LengthRequirement requirement;
  double actual = 0.0;
  double signed_deviation_pct = 0.0;

  /// Computes the signed deviation; throws DomainError if target <= 0.
  static EvaluationRecord make(std::string id, const LengthRequirement& requirement, double actual);

  friend bool operator==(const EvaluationRecord&, const EvaluationRecord&) = default;
};

/// Strictly increasing edges; bins are [e_i, e_{i+1}).
class BinSpec {
 public:
  explicit BinSpec(std::vector<double> edges);  // throws DomainError
  static BinSpec uniform(double lo, double hi, std::size_t bins);
  /// 41 bins over [-50 %, +50 %].
  static BinSpec default_deviation_bins();

  const std::vector<double>& edges() const { return edges_; }

 private:
  std::vector<double> edges_;
};

/// counts.front() is the underflow bin (< first edge), counts.back() the
/// overflow bin (>= last edge); edges.size() + 1 entries in total.
struct Histogram {
  std::vector<double> edges;
  std::vector<std::size_t> counts;

  std::size_t total() const;
  friend bool operator==(const Histogram&, const Histogram&) = default;
};

Histogram histogram(std::span<const double> values, const BinSpec& bins);

struct MetricSummary {
  LengthMetricKind kind = LengthMetricKind::characters;
  std::size_t n = 0;
  double mean_abs_pct = 0.0;
  double median_abs_pct = 0.0;
  double p90_abs_pct = 0.0;
  double mean_signed_pct = 0.0;
  Histogram histogram;

  friend bool operator==(const MetricSummary&, const MetricSummary&) = default;
};

struct EvaluationReport {
  static constexpr int kSchemaVersion = 1;

  std::vector<MetricSummary> metrics;  // training metrics, in enum order
  std::vector<MetricSummary> held_out;  // generalization probe; empty if none
  double overall_mean_abs_pct = 0.0;  // over training-metric records
  std::string config_digest;
  std::map<std::string, double> quality_scores;  // externally supplied
  std::vector<EvaluationRecord> records;

  const MetricSummary* find(LengthMetricKind kind) const;
  friend bool operator==(const EvaluationReport&, const EvaluationReport&) = default;
};

/// Aggregates records per metric. Held-out (`words`) records are summarized
/// by generalization_probe() and never enter `metrics` or the overall mean.
/// Throws DomainError for an empty input.
EvaluationReport evaluate(std::span<const EvaluationRecord> records,
                          const BinSpec& bins = BinSpec::default_deviation_bins(),
                          std::string config_digest = {});

/// Summaries for held-out-metric records. Returns nullopt for an empty input
/// and throws DomainError if any record uses a training metric.
std::optional<std::vector<MetricSummary>> generalization_probe(
    std::span<const EvaluationRecord> records, const BinSpec& bins = BinSpec::default_deviation_bins());

/// 100 * (candidate - baseline) / baseline; negative means improvement.
double percent_change(double baseline, double candidate);

struct MetricComparison {
  LengthMetricKind kind = LengthMetricKind::characters;
  double baseline_mean_abs_pct = 0.0;
  double candidate_mean_abs_pct = 0.0;
  double percent_change = 0.0;
};

struct ComparisonReport {
  std::vector<MetricComparison> metrics;
  double baseline_overall = 0.0;
  double candidate_overall = 0.0;
  double overall_percent_change = 0.0;
};

/// Throws DomainError if the reports share no training metric.
ComparisonReport compare(const EvaluationReport& baseline, const EvaluationReport& candidate);

// -- export ------------------------------------------------------------------

/// Header: id,metric,target,actual,signed_deviation_pct
std::string export_csv(std::span<const EvaluationRecord> records);
std::vector<EvaluationRecord> parse_csv(std::string_view text);

std::string export_json(const EvaluationReport& report);
EvaluationReport parse_json(std::string_view text);

std::string export_json(const ComparisonReport& comparison);

/// One histogram panel per summarized metric (held-out panels included).
std::string export_svg(const EvaluationReport& report);

}  // namespace lenforge::eval
