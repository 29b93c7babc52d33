// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "lenforge/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "lenforge/error.hpp"
#include "lenforge/io.hpp"
#include "lenforge/objectives.hpp"

namespace lenforge::eval {
namespace {

using ojson = nlohmann::ordered_json;

// Neumaier compensated summation.
class CompensatedSum {
 public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      compensation_ += (sum_ - t) + x;
    } else {
      compensation_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

// Linear interpolation between order statistics of sorted data.
double quantile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

MetricSummary summarize(LengthMetricKind kind, std::span<const EvaluationRecord* const> records, const BinSpec& bins) {
  MetricSummary s;
  s.kind = kind;
  s.n = records.size();
  CompensatedSum abs_sum;
  CompensatedSum signed_sum;
  std::vector<double> abs_values;
  std::vector<double> signed_values;
  abs_values.reserve(records.size());
  signed_values.reserve(records.size());
  for (const auto* r : records) {
    abs_values.push_back(std::abs(r->signed_deviation_pct));
    signed_values.push_back(r->signed_deviation_pct);
    abs_sum.add(std::abs(r->signed_deviation_pct));
    signed_sum.add(r->signed_deviation_pct);
  }
  std::sort(abs_values.begin(), abs_values.end());
  const auto n = static_cast<double>(records.size());
  s.mean_abs_pct = abs_sum.value() / n;
  s.mean_signed_pct = signed_sum.value() / n;
  s.median_abs_pct = quantile(abs_values, 0.5);
  s.p90_abs_pct = quantile(abs_values, 0.9);
  std::sort(signed_values.begin(), signed_values.end());
  s.histogram = histogram(signed_values, bins);
  return s;
}

std::vector<MetricSummary> summarize_all(std::span<const EvaluationRecord> records, const BinSpec& bins,
                                         bool held_out) {
  std::vector<MetricSummary> out;
  for (auto kind : metrics::kAllMetricKinds) {
    if (metrics::is_held_out(kind) != held_out) continue;
    std::vector<const EvaluationRecord*> subset;
    for (const auto& r : records) {
      if (r.requirement.kind() == kind) subset.push_back(&r);
    }
    if (!subset.empty()) out.push_back(summarize(kind, subset, bins));
  }
  return out;
}

std::string csv_field(std::string_view s) {
  if (s.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(s);
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

// RFC 4180 rows; quoted fields may span lines.
std::vector<std::vector<std::string>> parse_csv_rows(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  bool field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = true;
      field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      field_started = false;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw DomainError("unterminated quoted CSV field");
  if (field_started || !field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_double(const std::string& s, const char* what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw DomainError("");
    return v;
  } catch (const std::exception&) {
    throw DomainError(std::string("bad ") + what + " value '" + s + "'");
  }
}

ojson record_to_json(const EvaluationRecord& r) {
  ojson j;
  j["id"] = r.id;
  j["metric"] = std::string(metrics::to_string(r.requirement.kind()));
  j["target"] = r.requirement.target();
  j["actual"] = r.actual;
  j["signed_deviation_pct"] = r.signed_deviation_pct;
  return j;
}

ojson summary_to_json(const MetricSummary& s) {
  ojson j;
  j["metric"] = std::string(metrics::to_string(s.kind));
  j["n"] = s.n;
  j["mean_abs_pct"] = s.mean_abs_pct;
  j["median_abs_pct"] = s.median_abs_pct;
  j["p90_abs_pct"] = s.p90_abs_pct;
  j["mean_signed_pct"] = s.mean_signed_pct;
  j["histogram"] = ojson{{"edges", s.histogram.edges}, {"counts", s.histogram.counts}};
  return j;
}

LengthMetricKind kind_from(const ojson& j) {
  const auto kind = metrics::parse_metric_kind(j.get<std::string>());
  if (!kind) throw DomainError("unknown metric '" + j.get<std::string>() + "'");
  return *kind;
}

MetricSummary summary_from_json(const ojson& j) {
  MetricSummary s;
  s.kind = kind_from(j.at("metric"));
  s.n = j.at("n").get<std::size_t>();
  s.mean_abs_pct = j.at("mean_abs_pct").get<double>();
  s.median_abs_pct = j.at("median_abs_pct").get<double>();
  s.p90_abs_pct = j.at("p90_abs_pct").get<double>();
  s.mean_signed_pct = j.at("mean_signed_pct").get<double>();
  s.histogram.edges = j.at("histogram").at("edges").get<std::vector<double>>();
  s.histogram.counts = j.at("histogram").at("counts").get<std::vector<std::size_t>>();
  if (s.histogram.counts.size() != s.histogram.edges.size() + 1 || s.histogram.total() != s.n) {
    throw DomainError("histogram does not match its metric summary");
  }
  return s;
}

std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fmt(const char* pattern, double v) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, pattern, v);
  return buffer;
}

}  // namespace

EvaluationRecord EvaluationRecord::make(std::string id, const LengthRequirement& requirement, double actual) {
  return EvaluationRecord{std::move(id), requirement, actual,
                          objectives::relative_deviation(actual, requirement.target())};
}

BinSpec::BinSpec(std::vector<double> edges) : edges_(std::move(edges)) {
  if (edges_.size() < 2) throw DomainError("a bin spec needs at least two edges");
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    if (!std::isfinite(edges_[i])) throw DomainError("bin edges must be finite");
    if (i > 0 && !(edges_[i] > edges_[i - 1])) throw DomainError("bin edges must be strictly increasing");
  }
}

BinSpec BinSpec::uniform(double lo, double hi, std::size_t bins) {
  if (bins == 0 || !(hi > lo)) throw DomainError("uniform bins need hi > lo and at least one bin");
  std::vector<double> edges(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  return BinSpec(std::move(edges));
}

BinSpec BinSpec::default_deviation_bins() { return uniform(-50.0, 50.0, 41); }

std::size_t Histogram::total() const {
  std::size_t n = 0;
  for (auto c : counts) n += c;
  return n;
}

Histogram histogram(std::span<const double> values, const BinSpec& bins) {
  Histogram h{bins.edges(), std::vector<std::size_t>(bins.edges().size() + 1, 0)};
  for (double v : values) {
    if (std::isnan(v)) throw DomainError("cannot bin NaN");
    const auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
    ++h.counts[static_cast<std::size_t>(it - h.edges.begin())];
  }
  return h;
}

const MetricSummary* EvaluationReport::find(LengthMetricKind kind) const {
  for (const auto* list : {&metrics, &held_out}) {
    for (const auto& s : *list) {
      if (s.kind == kind) return &s;
    }
  }
  return nullptr;
}

EvaluationReport evaluate(std::span<const EvaluationRecord> records, const BinSpec& bins, std::string config_digest) {
  if (records.empty()) throw DomainError("cannot evaluate an empty record set");
  EvaluationReport report;
  std::vector<EvaluationRecord> trained;
  std::vector<EvaluationRecord> probe;
  for (const auto& r : records) {
    (metrics::is_held_out(r.requirement.kind()) ? probe : trained).push_back(r);
  }
  report.metrics = summarize_all(trained, bins, false);
  if (auto section = generalization_probe(probe, bins)) report.held_out = std::move(*section);
  CompensatedSum total;
  for (const auto& r : trained) total.add(std::abs(r.signed_deviation_pct));
  report.overall_mean_abs_pct = trained.empty() ? 0.0 : total.value() / static_cast<double>(trained.size());
  report.config_digest = std::move(config_digest);
  report.records.assign(records.begin(), records.end());
  return report;
}

std::optional<std::vector<MetricSummary>> generalization_probe(std::span<const EvaluationRecord> records,
                                                               const BinSpec& bins) {
  if (records.empty()) return std::nullopt;
  for (const auto& r : records) {
    if (!metrics::is_held_out(r.requirement.kind())) {
      throw DomainError("generalization probe accepts held-out metrics only, got '" +
                        std::string(metrics::to_string(r.requirement.kind())) + "'");
    }
  }
  return summarize_all(records, bins, true);
}

double percent_change(double baseline, double candidate) {
  if (baseline == 0.0) {
    if (candidate == 0.0) return 0.0;
    throw DomainError("percent change from a zero baseline is undefined");
  }
  return (candidate - baseline) * 100.0 / baseline;
}

ComparisonReport compare(const EvaluationReport& baseline, const EvaluationReport& candidate) {
  ComparisonReport out;
  for (const auto& b : baseline.metrics) {
    for (const auto& c : candidate.metrics) {
      if (b.kind != c.kind) continue;
      out.metrics.push_back(
          MetricComparison{b.kind, b.mean_abs_pct, c.mean_abs_pct, percent_change(b.mean_abs_pct, c.mean_abs_pct)});
    }
  }
  if (out.metrics.empty()) throw DomainError("reports share no metric to compare");
  out.baseline_overall = baseline.overall_mean_abs_pct;
  out.candidate_overall = candidate.overall_mean_abs_pct;
  out.overall_percent_change = percent_change(out.baseline_overall, out.candidate_overall);
  return out;
}

std::string export_csv(std::span<const EvaluationRecord> records) {
  std::string out = "id,metric,target,actual,signed_deviation_pct\n";
  for (const auto& r : records) {
    out += csv_field(r.id);
    out += ',';
    out += metrics::to_string(r.requirement.kind());
    out += ',';
    out += io::format_double(r.requirement.target());
    out += ',';
    out += io::format_double(r.actual);
    out += ',';
    out += io::format_double(r.signed_deviation_pct);
    out += '\n';
  }
  return out;
}

std::vector<EvaluationRecord> parse_csv(std::string_view text) {
  const auto rows = parse_csv_rows(text);
  if (rows.empty() || rows.front() != std::vector<std::string>{"id", "metric", "target", "actual",
                                                                 "signed_deviation_pct"}) {
    throw DomainError("CSV header must be id,metric,target,actual,signed_deviation_pct");
  }
  std::vector<EvaluationRecord> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& row = rows[i];
    if (row.size() != 5) throw DomainError("CSV row " + std::to_string(i) + " does not have 5 fields");
    const auto kind = metrics::parse_metric_kind(row[1]);
    if (!kind) throw DomainError("unknown metric '" + row[1] + "'");
    auto record = EvaluationRecord::make(row[0], LengthRequirement(*kind, parse_double(row[2], "target")),
                                         parse_double(row[3], "actual"));
    const double stated = parse_double(row[4], "deviation");
    if (std::abs(stated - record.signed_deviation_pct) > 1e-9 * std::max(1.0, std::abs(stated))) {
      throw DomainError("CSV row " + std::to_string(i) + " has an inconsistent deviation");
    }
    record.signed_deviation_pct = stated;
    out.push_back(std::move(record));
  }
  return out;
}

std::string export_json(const EvaluationReport& report) {
  ojson j;
  j["schema_version"] = EvaluationReport::kSchemaVersion;
  j["config_digest"] = report.config_digest;
  j["overall_mean_abs_pct"] = report.overall_mean_abs_pct;
  j["metrics"] = ojson::array();
  for (const auto& s : report.metrics) j["metrics"].push_back(summary_to_json(s));
  j["held_out"] = ojson::array();
  for (const auto& s : report.held_out) j["held_out"].push_back(summary_to_json(s));
  j["quality_scores"] = ojson::object();
  for (const auto& [name, score] : report.quality_scores) j["quality_scores"][name] = score;
  j["records"] = ojson::array();
  for (const auto& r : report.records) j["records"].push_back(record_to_json(r));
  return j.dump(2) + "\n";
}

EvaluationReport parse_json(std::string_view text) {
  const auto j = ojson::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DomainError("report is not valid JSON");
  try {
    if (j.at("schema_version").get<int>() != EvaluationReport::kSchemaVersion) {
      throw DomainError("unsupported report schema version");
    }
    EvaluationReport report;
    report.config_digest = j.at("config_digest").get<std::string>();
    report.overall_mean_abs_pct = j.at("overall_mean_abs_pct").get<double>();
    for (const auto& s : j.at("metrics")) report.metrics.push_back(summary_from_json(s));
    for (const auto& s : j.at("held_out")) report.held_out.push_back(summary_from_json(s));
    for (const auto& [name, score] : j.at("quality_scores").items()) report.quality_scores[name] = score.get<double>();
    for (const auto& r : j.at("records")) {
      auto record = EvaluationRecord::make(r.at("id").get<std::string>(),
                                           LengthRequirement(kind_from(r.at("metric")), r.at("target").get<double>()),
                                           r.at("actual").get<double>());
      record.signed_deviation_pct = r.at("signed_deviation_pct").get<double>();
      report.records.push_back(std::move(record));
    }
    return report;
  } catch (const ojson::exception& e) {
    throw DomainError(std::string("malformed report: ") + e.what());
  }
}

std::string export_json(const ComparisonReport& comparison) {
  ojson j;
  j["schema_version"] = EvaluationReport::kSchemaVersion;
  j["metrics"] = ojson::array();
  for (const auto& m : comparison.metrics) {
    j["metrics"].push_back(ojson{{"metric", std::string(metrics::to_string(m.kind))},
                                 {"baseline_mean_abs_pct", m.baseline_mean_abs_pct},
                                 {"candidate_mean_abs_pct", m.candidate_mean_abs_pct},
                                 {"percent_change", m.percent_change}});
  }
  j["overall"] = ojson{{"baseline_mean_abs_pct", comparison.baseline_overall},
                       {"candidate_mean_abs_pct", comparison.candidate_overall},
                       {"percent_change", comparison.overall_percent_change}};
  return j.dump(2) + "\n";
}

std::string export_svg(const EvaluationReport& report) {
  constexpr double kWidth = 640;
  constexpr double kPanelHeight = 240;
  constexpr double kLeft = 60;
  constexpr double kRight = 20;
  constexpr double kTop = 30;
  constexpr double kBottom = 50;

  std::vector<std::pair<const MetricSummary*, bool>> panels;
  for (const auto& s : report.metrics) panels.emplace_back(&s, false);
  for (const auto& s : report.held_out) panels.emplace_back(&s, true);

  std::ostringstream svg;
  const double height = kPanelHeight * static_cast<double>(std::max<std::size_t>(panels.size(), 1));
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << kWidth << ' ' << height << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  for (std::size_t p = 0; p < panels.size(); ++p) {
    const auto& [summary, held_out] = panels[p];
    const auto& counts = summary->histogram.counts;
    const double y0 = kPanelHeight * static_cast<double>(p);
    const double plot_w = kWidth - kLeft - kRight;
    const double plot_h = kPanelHeight - kTop - kBottom;
    const std::size_t max_count = std::max<std::size_t>(1, *std::max_element(counts.begin(), counts.end()));
    const double bar_w = plot_w / static_cast<double>(counts.size());

    svg << "<g class=\"panel\" data-metric=\"" << metrics::to_string(summary->kind) << "\">\n";
    svg << "<text x=\"" << kWidth / 2 << "\" y=\"" << y0 + 18 << "\" text-anchor=\"middle\" font-size=\"13\">"
        << xml_escape(std::string(metrics::to_string(summary->kind)) + (held_out ? " (held-out)" : "") +
                      ": n=" + std::to_string(summary->n) + ", mean |deviation| " +
                      fmt("%.2f", summary->mean_abs_pct) + "%")
        << "</text>\n";
    for (std::size_t i = 0; i < counts.size(); ++i) {
      const double h = plot_h * static_cast<double>(counts[i]) / static_cast<double>(max_count);
      svg << "<rect x=\"" << fmt("%.2f", kLeft + bar_w * static_cast<double>(i)) << "\" y=\""
          << fmt("%.2f", y0 + kTop + plot_h - h) << "\" width=\"" << fmt("%.2f", bar_w * 0.9) << "\" height=\""
          << fmt("%.2f", h) << "\" fill=\"" << (i == 0 || i + 1 == counts.size() ? "#999999" : "#4477aa")
          << "\"/>\n";
    }
    const double axis_y = y0 + kTop + plot_h;
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << axis_y << "\" x2=\"" << kWidth - kRight << "\" y2=\"" << axis_y
        << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << kLeft << "\" y1=\"" << y0 + kTop << "\" x2=\"" << kLeft << "\" y2=\"" << axis_y
        << "\" stroke=\"black\"/>\n";
    const auto& edges = summary->histogram.edges;
    svg << "<text x=\"" << kLeft + bar_w << "\" y=\"" << axis_y + 14 << "\" text-anchor=\"middle\">"
        << fmt("%g", edges.front()) << "</text>\n";
    svg << "<text x=\"" << kLeft + bar_w * static_cast<double>(counts.size() - 1) << "\" y=\"" << axis_y + 14
        << "\" text-anchor=\"middle\">" << fmt("%g", edges.back()) << "</text>\n";
    svg << "<text x=\"" << kLeft + plot_w / 2 << "\" y=\"" << axis_y + 34
        << "\" text-anchor=\"middle\">Deviation from length target (%)</text>\n";
    svg << "<text x=\"" << kLeft - 8 << "\" y=\"" << y0 + kTop + 4 << "\" text-anchor=\"end\">" << max_count
        << "</text>\n";
    svg << "<text transform=\"translate(" << 16 << ',' << y0 + kTop + plot_h / 2
        << ") rotate(-90)\" text-anchor=\"middle\">Responses</text>\n";
    svg << "</g>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lenforge::eval
