// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli/commands.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "cli/config.hpp"
#include "lenforge/dataset.hpp"
#include "lenforge/diagnostics.hpp"
#include "lenforge/error.hpp"
#include "lenforge/evaluation.hpp"
#include "lenforge/io.hpp"
#include "lenforge/toy_policy.hpp"
#include "lenforge/training.hpp"

namespace lenforge::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using metrics::LengthMetricKind;
using metrics::LengthRequirement;

struct FlagKey {
  const char* flag;
  const char* key;
  const char* help;
};

constexpr FlagKey kFlagKeys[] = {
    {"--metric", "metric", "Comma-separated metrics: characters, letters, speech, print, words"},
    {"--speech-rate", "speech_rate", "Speech rate in characters per second"},
    {"--font-table", "font_table", "Font advance-width table file"},
    {"--beta", "beta", "DPO/PPO KL coefficient"},
    {"--lambda", "lambda", "ORPO odds-ratio weight"},
    {"--clip-eps", "clip_eps", "PPO clip epsilon"},
    {"--lr", "lr", "Learning rate"},
    {"--epochs", "epochs", "Training epochs"},
    {"--batch-size", "batch_size", "Mini-batch size (0: full batch)"},
    {"--seed", "seed", "Random seed"},
    {"--reference", "reference", "Reference checkpoint for dpo and ppo"},
    {"--format", "format", "Output format: json, csv or text"},
    {"--max-target", "max_target", "Largest target the toy policy covers (0: corpus maximum)"},
};

// Config-related flags of one subcommand.
class ConfigFlags {
 public:
  void attach(CLI::App& app) {
    app.add_option("--config", config_path_, "Config file (default: $LENFORGE_CONFIG)");
    for (const auto& [flag, key, help] : kFlagKeys) {
      options_.emplace_back(key, app.add_option(flag, values_[key], help));
    }
    app.add_option("--template", templates_, "Prompt template override, KIND=PATTERN with one {LEN}");
    app.add_option("--set", sets_, "Any config setting, KEY=VALUE");
  }

  RunConfig load() const {
    Overrides overrides;
    auto split = [](const std::string& item, const char* flag) {
      const auto eq = item.find('=');
      if (eq == std::string::npos) throw ConfigError(std::string(flag) + " expects KEY=VALUE, got '" + item + "'");
      return std::pair{item.substr(0, eq), item.substr(eq + 1)};
    };
    for (const auto& s : sets_) overrides.push_back(split(s, "--set"));
    for (const auto& t : templates_) {
      auto [kind, pattern] = split(t, "--template");
      overrides.emplace_back("template." + kind, pattern);
    }
    for (const auto& [key, option] : options_) {
      if (option->count() > 0) overrides.emplace_back(key, values_.at(key));
    }
    return load_config(config_path_.empty() ? std::nullopt : std::optional<fs::path>(config_path_), overrides);
  }

 private:
  std::string config_path_;
  std::map<std::string, std::string> values_;
  std::vector<std::pair<std::string, CLI::Option*>> options_;
  std::vector<std::string> templates_;
  std::vector<std::string> sets_;
};

// Routes library diagnostics to the caller's error stream.
class DiagnosticsScope {
 public:
  explicit DiagnosticsScope(std::ostream& err)
      : previous_(diag::set_sink([&err](diag::Level level, std::string_view message) {
          const char* tag = level == diag::Level::info ? "info" : level == diag::Level::warning ? "warning" : "error";
          err << "lenforge: " << tag << ": " << message << '\n';
        })) {}
  ~DiagnosticsScope() { diag::set_sink(previous_); }
  DiagnosticsScope(const DiagnosticsScope&) = delete;
  DiagnosticsScope& operator=(const DiagnosticsScope&) = delete;

 private:
  diag::Sink previous_;
};

std::string read_input(const std::string& path, std::istream& in) {
  if (path.empty() || path == "-") {
    std::ostringstream buffer;
    buffer << in.rdbuf();
    if (in.bad()) throw IoError("failed reading standard input");
    return buffer.str();
  }
  return io::read_file(path);
}

void write_output(const std::string& path, std::string_view text, std::ostream& out) {
  if (path.empty() || path == "-") {
    out << text;
    out.flush();
  } else {
    io::write_atomic(path, text);
  }
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    auto line = text.substr(0, nl);
    if (line.ends_with('\r')) line.remove_suffix(1);
    lines.push_back(line);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
  }
  return lines;
}

std::string format_measure(LengthMetricKind kind, double value) {
  if (metrics::is_integral(kind)) return std::to_string(static_cast<long long>(value));
  return io::format_double(value);
}

std::string record_id(const json& record, std::size_t line_no) {
  if (const auto it = record.find("id"); it != record.end()) {
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<long long>());
  }
  return std::to_string(line_no);
}

std::string string_field(const json& record, const char* key, std::size_t line_no) {
  const auto it = record.find(key);
  if (it == record.end() || !it->is_string()) {
    throw DomainError("record " + std::to_string(line_no) + " lacks string field '" + key + "'");
  }
  return it->get<std::string>();
}

LengthRequirement requirement_of(const json& record, std::size_t line_no) {
  if (!record.is_object() || !record.contains("metric") || !record.contains("target")) {
    throw DomainError("record " + std::to_string(line_no) + " lacks 'metric' or 'target'");
  }
  return dataset::requirement_from_json(record.at("metric"), record.at("target"));
}

// ---- measure ---------------------------------------------------------------

struct MeasureArgs {
  ConfigFlags flags;
  std::string input = "-";
  bool jsonl = false;
};

int cmd_measure(const MeasureArgs& args, Streams& s) {
  const auto config = args.flags.load();
  const auto mc = config.measure_config();
  const auto text = read_input(args.input, s.in);
  std::vector<std::pair<std::string, std::string>> items;
  if (args.jsonl) {
    if (text.find_first_not_of(" \t\r\n") != std::string::npos) {
      std::istringstream stream(text);
      for (auto& sample : dataset::ingest_jsonl(stream).samples) items.emplace_back(sample.id, sample.response);
    }
  } else {
    std::size_t line_no = 0;
    for (auto line : split_lines(text)) items.emplace_back(std::to_string(++line_no), std::string(line));
  }
  std::string out;
  for (const auto& [id, body] : items) {
    for (auto kind : config.metrics) {
      out += id + '\t' + std::string(metrics::to_string(kind)) + '\t' +
             format_measure(kind, metrics::measure(body, kind, mc)) + '\n';
    }
  }
  write_output("-", out, s.out);
  return kExitOk;
}

// ---- synthesize ------------------------------------------------------------

struct SynthesizeArgs {
  ConfigFlags flags;
  std::size_t count = 0;
  std::size_t min_length = 1;
  std::size_t max_length = 50;
  std::string alphabet{dataset::kDefaultAlphabet};
  std::string output = "-";
};

int cmd_synthesize(const SynthesizeArgs& args, Streams& s) {
  const auto config = args.flags.load();
  const auto corpus =
      dataset::synthesize_toy_corpus(config.train.seed, args.count, args.min_length, args.max_length, args.alphabet);
  std::vector<json> records;
  records.reserve(corpus.size());
  for (const auto& sample : corpus) records.push_back(dataset::to_json(sample));
  write_output(args.output, dataset::to_jsonl(records), s.out);
  return kExitOk;
}

// ---- split -----------------------------------------------------------------

struct SplitArgs {
  ConfigFlags flags;
  std::string input = "-";
  std::vector<double> fractions{0.8, 0.1, 0.1};
  std::string output_dir;
};

int cmd_split(const SplitArgs& args, Streams& s) {
  const auto config = args.flags.load();
  if (args.fractions.size() != 3) throw ConfigError("--fractions takes exactly three values");
  auto records = dataset::parse_jsonl(read_input(args.input, s.in));
  const auto parts = dataset::split(std::move(records), {args.fractions[0], args.fractions[1], args.fractions[2]},
                                    config.train.seed);
  fs::create_directories(args.output_dir);
  write_output((fs::path(args.output_dir) / "train.jsonl").string(), dataset::to_jsonl(parts.train), s.out);
  write_output((fs::path(args.output_dir) / "eval.jsonl").string(), dataset::to_jsonl(parts.eval), s.out);
  write_output((fs::path(args.output_dir) / "test.jsonl").string(), dataset::to_jsonl(parts.test), s.out);
  diag::info("split " + std::to_string(parts.train.size()) + "/" + std::to_string(parts.eval.size()) + "/" +
             std::to_string(parts.test.size()));
  return kExitOk;
}

// ---- augment ---------------------------------------------------------------

struct AugmentArgs {
  ConfigFlags flags;
  std::string input = "-";
  std::string output = "-";
  bool probe = false;
};

int cmd_augment(const AugmentArgs& args, Streams& s) {
  const auto config = args.flags.load();
  for (auto kind : config.metrics) {
    if (metrics::is_held_out(kind) && !args.probe) {
      throw ConfigError("metric '" + std::string(metrics::to_string(kind)) +
                        "' is held out for evaluation; pass --probe to build probe prompts");
    }
  }
  const auto mc = config.measure_config();
  const auto templ = config.prompt_template();
  std::istringstream stream(read_input(args.input, s.in));
  const auto ingest = dataset::ingest_jsonl(stream);
  std::vector<json> records;
  std::size_t degenerate = 0;
  for (std::size_t i = 0; i < ingest.samples.size(); ++i) {
    const auto kind = config.metrics[i % config.metrics.size()];
    try {
      records.push_back(dataset::to_json(dataset::augment(ingest.samples[i], kind, templ, mc, args.probe)));
    } catch (const DegenerateSampleError& e) {
      ++degenerate;
      diag::warn(e.what());
    }
  }
  write_output(args.output, dataset::to_jsonl(records), s.out);
  diag::info("augmented " + std::to_string(records.size()) + " samples; skipped " +
             std::to_string(ingest.skipped + degenerate) + " (" + std::to_string(ingest.skipped) + " malformed, " +
             std::to_string(degenerate) + " degenerate)");
  return kExitOk;
}

// ---- pairs -----------------------------------------------------------------

struct PairsArgs {
  ConfigFlags flags;
  std::string input = "-";
  std::string output = "-";
};

int cmd_pairs(const PairsArgs& args, Streams& s) {
  const auto config = args.flags.load();
  const auto mc = config.measure_config();
  const auto records = dataset::parse_jsonl(read_input(args.input, s.in));
  std::vector<json> out;
  std::size_t skipped = 0;
  std::size_t ties = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto requirement = requirement_of(r, i + 1);
    const auto it = r.find("candidates");
    if (it == r.end() || !it->is_array() || it->size() < 2) {
      ++skipped;
      diag::warn("record " + std::to_string(i + 1) + " has fewer than two candidates; skipped");
      continue;
    }
    const auto candidates = it->get<std::vector<std::string>>();
    for (const auto& pair : dataset::build_preference_pairs(record_id(r, i + 1), string_field(r, "prompt", i + 1),
                                                            candidates, requirement, mc)) {
      ties += pair.tied ? 1 : 0;
      out.push_back(dataset::to_json(pair));
    }
  }
  write_output(args.output, dataset::to_jsonl(out), s.out);
  diag::info("built " + std::to_string(out.size()) + " pairs (" + std::to_string(ties) + " tied); skipped " +
             std::to_string(skipped) + " records");
  return kExitOk;
}

// ---- generate --------------------------------------------------------------

struct GenerateArgs {
  ConfigFlags flags;
  std::string checkpoint;
  std::string input = "-";
  std::string output = "-";
  int candidates = 1;
  std::string policy_metric = "characters";
};

int cmd_generate(const GenerateArgs& args, Streams& s) {
  const auto config = args.flags.load();
  const auto mc = config.measure_config();
  const auto policy_kind = metrics::parse_metric_kind(args.policy_metric);
  if (!policy_kind) throw ConfigError("unknown --policy-metric '" + args.policy_metric + "'");
  if (args.candidates < 1) throw ConfigError("--candidates must be at least 1");
  const auto checkpoint = toy::load_checkpoint(args.checkpoint);
  const auto& policy = checkpoint.policy;
  const auto records = dataset::parse_jsonl(read_input(args.input, s.in));
  toy::Rng rng(config.train.seed);
  std::vector<json> out;
  std::size_t clamped = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto requirement = requirement_of(r, i + 1);
    // The policy reads the requested number as its own unit count.
    int units = toy::to_units(requirement.kind(), requirement.target());
    if (units < 1 || units > policy.max_target()) {
      ++clamped;
      units = std::clamp(units, 1, policy.max_target());
    }
    json record;
    record["id"] = record_id(r, i + 1);
    record["prompt"] = r.contains("prompt") ? string_field(r, "prompt", i + 1) : std::string();
    record["metric"] = std::string(metrics::to_string(requirement.kind()));
    record["target"] = dataset::target_to_json(requirement);
    std::vector<std::string> texts;
    for (int k = 0; k < args.candidates; ++k) {
      texts.push_back(toy::realize_text(*policy_kind, policy.sample_response(units, rng), mc));
    }
    if (args.candidates == 1) {
      record["response"] = texts.front();
    } else {
      record["candidates"] = texts;
    }
    out.push_back(std::move(record));
  }
  if (clamped > 0) {
    diag::warn(std::to_string(clamped) + " targets fell outside the policy's range [1, " +
               std::to_string(policy.max_target()) + "] and were clamped");
  }
  write_output(args.output, dataset::to_jsonl(out), s.out);
  return kExitOk;
}

// ---- train -----------------------------------------------------------------

struct TrainArgs {
  ConfigFlags flags;
  std::string stage;
  std::string input = "-";
  std::string output_dir;
  std::string init;
};

struct UnitCorpus {
  std::vector<toy::SftExample> sft;
  std::vector<toy::PairExample> pairs;
  std::vector<int> targets;
};

UnitCorpus read_unit_corpus(const std::vector<json>& records, toy::Stage stage, const metrics::MeasureConfig& mc) {
  UnitCorpus corpus;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto requirement = requirement_of(r, i + 1);
    const auto kind = requirement.kind();
    if (metrics::is_held_out(kind)) {
      throw DomainError("record " + std::to_string(i + 1) + " uses the held-out metric; refusing to train on it");
    }
    const int target = toy::to_units(kind, requirement.target());
    auto units_of = [&](const char* key) {
      return toy::to_units(kind, metrics::measure(string_field(r, key, i + 1), kind, mc));
    };
    corpus.targets.push_back(target);
    if (stage == toy::Stage::sft) {
      corpus.sft.push_back({target, units_of("response")});
    } else if (stage == toy::Stage::dpo || stage == toy::Stage::orpo) {
      corpus.pairs.push_back({target, units_of("chosen"), units_of("rejected")});
    }
  }
  if (corpus.targets.empty()) throw EmptyCorpusError("training corpus is empty");
  return corpus;
}

// Drops examples the policy table cannot represent.
template <class Example, class Pred>
void drop_unrepresentable(std::vector<Example>& examples, Pred&& fits, const char* what) {
  const auto before = examples.size();
  std::erase_if(examples, [&](const Example& e) { return !fits(e); });
  if (examples.size() != before) {
    diag::warn("dropped " + std::to_string(before - examples.size()) + " " + what +
               " outside the policy table's range");
  }
}

std::string checkpoint_name(int epoch) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "epoch-%03d.ckpt", epoch);
  return buffer;
}

int cmd_train(const TrainArgs& args, Streams& s) {
  const auto config = args.flags.load();
  const auto stage = toy::parse_stage(args.stage);
  if (stage == toy::Stage::init) throw ConfigError("stage must be one of sft, dpo, orpo, ppo");
  const bool needs_reference = stage == toy::Stage::dpo || stage == toy::Stage::ppo;
  if (needs_reference && !config.reference) {
    throw ConfigError(std::string(toy::to_string(stage)) + " training requires --reference (the SFT checkpoint)");
  }
  const auto mc = config.measure_config();
  auto corpus = read_unit_corpus(dataset::parse_jsonl(read_input(args.input, s.in)), stage, mc);

  std::optional<toy::Checkpoint> reference;
  if (config.reference) reference = toy::load_checkpoint(*config.reference);
  std::optional<toy::ToyPolicy> policy;
  if (!args.init.empty()) {
    policy = toy::load_checkpoint(args.init).policy;
  } else if (needs_reference) {
    policy = reference->policy;
  } else {
    const int max_target = config.max_target > 0
                               ? config.max_target
                               : *std::max_element(corpus.targets.begin(), corpus.targets.end());
    policy = toy::ToyPolicy::init(std::max(max_target, 1), config.train.seed);
  }
  const int T = policy->max_target();
  const int S = policy->max_length();
  auto in_range = [&](int t) { return t >= 1 && t <= T; };
  drop_unrepresentable(corpus.sft, [&](const toy::SftExample& e) { return in_range(e.target) && e.length <= S; },
                       "examples");
  drop_unrepresentable(
      corpus.pairs,
      [&](const toy::PairExample& e) { return in_range(e.target) && e.chosen <= S && e.rejected <= S; }, "pairs");
  drop_unrepresentable(corpus.targets, in_range, "prompts");

  fs::create_directories(args.output_dir);
  const fs::path dir = args.output_dir;
  toy::TrainResult result;
  try {
    switch (stage) {
      case toy::Stage::sft: result = toy::train_sft(*policy, corpus.sft, config.train); break;
      case toy::Stage::dpo: result = toy::train_dpo(*policy, reference->policy, corpus.pairs, config.train); break;
      case toy::Stage::orpo: result = toy::train_orpo(*policy, corpus.pairs, config.train); break;
      case toy::Stage::ppo: result = toy::train_ppo(*policy, reference->policy, corpus.targets, config.train); break;
      case toy::Stage::init: break;
    }
  } catch (const toy::TrainingError& e) {
    toy::save_checkpoint(dir / "last-good.ckpt", e.last_good());
    diag::error(std::string(e.what()) + "; last good checkpoint written to " + (dir / "last-good.ckpt").string());
    return kExitRuntime;
  }

  std::string csv = "epoch,loss,mean_abs_deviation_pct\n";
  csv += "0," + io::format_double(result.initial_loss) + "," +
         io::format_double(toy::mean_expected_abs_deviation(*policy, corpus.targets)) + "\n";
  std::vector<double> deviations;
  for (std::size_t i = 0; i < result.checkpoints.size(); ++i) {
    const auto& ckpt = result.checkpoints[i];
    toy::save_checkpoint(dir / checkpoint_name(ckpt.epoch), ckpt);
    deviations.push_back(toy::mean_expected_abs_deviation(ckpt.policy, corpus.targets));
    csv += std::to_string(ckpt.epoch) + "," + io::format_double(result.epochs[i].loss) + "," +
           io::format_double(deviations.back()) + "\n";
  }
  io::write_atomic(dir / "metrics.csv", csv);
  toy::save_checkpoint(dir / "final.ckpt", result.final_checkpoint());
  const auto selected = toy::select_epoch(deviations);
  toy::save_checkpoint(dir / "selected.ckpt", result.checkpoints[selected]);
  diag::info("selected epoch " + std::to_string(result.checkpoints[selected].epoch) + " of " +
             std::to_string(result.checkpoints.size()));
  s.out << (dir / "final.ckpt").string() << '\t' << result.final_checkpoint().digest() << '\n';
  return kExitOk;
}

// ---- describe --------------------------------------------------------------

struct DescribeArgs {
  std::string checkpoint;
};

int cmd_describe(const DescribeArgs& args, Streams& s) {
  const auto c = toy::load_checkpoint(args.checkpoint);
  std::vector<int> targets(static_cast<std::size_t>(c.policy.max_target()));
  for (std::size_t i = 0; i < targets.size(); ++i) targets[i] = static_cast<int>(i) + 1;
  s.out << "stage: " << toy::to_string(c.stage) << '\n'
        << "epoch: " << c.epoch << '\n'
        << "max_target: " << c.policy.max_target() << '\n'
        << "max_length: " << c.policy.max_length() << '\n'
        << "seed: " << c.policy.seed() << '\n'
        << "corpus_digest: " << c.corpus_digest << '\n'
        << "digest: " << c.digest() << '\n'
        << "mean_abs_deviation_pct: " << io::format_double(toy::mean_expected_abs_deviation(c.policy, targets))
        << '\n';
  return kExitOk;
}

// ---- evaluate / compare / report ------------------------------------------

struct EvaluateArgs {
  ConfigFlags flags;
  std::string input = "-";
  std::string output = "-";
  std::vector<std::string> quality;
};

std::string summary_table(const eval::EvaluationReport& report) {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-22s %8s %12s %12s %12s %14s\n", "metric", "n", "mean|dev|%", "median|dev|%",
                "p90|dev|%", "mean signed %");
  out << line;
  auto row = [&](const eval::MetricSummary& m, bool held_out) {
    const std::string name = std::string(metrics::to_string(m.kind)) + (held_out ? " (held-out)" : "");
    std::snprintf(line, sizeof line, "%-22s %8zu %12.2f %12.2f %12.2f %14.2f\n", name.c_str(), m.n, m.mean_abs_pct,
                  m.median_abs_pct, m.p90_abs_pct, m.mean_signed_pct);
    out << line;
  };
  for (const auto& m : report.metrics) row(m, false);
  for (const auto& m : report.held_out) row(m, true);
  std::snprintf(line, sizeof line, "overall mean |deviation|: %.2f%%\n", report.overall_mean_abs_pct);
  out << line;
  return out.str();
}

int cmd_evaluate(const EvaluateArgs& args, Streams& s) {
  const auto config = args.flags.load();
  const auto mc = config.measure_config();
  const auto records = dataset::parse_jsonl(read_input(args.input, s.in));
  std::vector<eval::EvaluationRecord> evals;
  evals.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    const auto requirement = requirement_of(r, i + 1);
    const double actual = metrics::measure(string_field(r, "response", i + 1), requirement.kind(), mc);
    evals.push_back(eval::EvaluationRecord::make(record_id(r, i + 1), requirement, actual));
  }
  auto report = eval::evaluate(evals, eval::BinSpec::default_deviation_bins(), config.digest());
  for (const auto& q : args.quality) {
    const auto eq = q.find('=');
    if (eq == std::string::npos) throw ConfigError("--quality expects NAME=SCORE, got '" + q + "'");
    try {
      report.quality_scores[q.substr(0, eq)] = std::stod(q.substr(eq + 1));
    } catch (const std::exception&) {
      throw ConfigError("--quality score must be a number, got '" + q.substr(eq + 1) + "'");
    }
  }
  switch (config.format) {
    case OutputFormat::json: write_output(args.output, eval::export_json(report), s.out); break;
    case OutputFormat::csv: write_output(args.output, eval::export_csv(report.records), s.out); break;
    case OutputFormat::text: write_output(args.output, summary_table(report), s.out); break;
  }
  return kExitOk;
}

struct CompareArgs {
  ConfigFlags flags;
  std::string baseline;
  std::string candidate;
  std::string output = "-";
};

int cmd_compare(const CompareArgs& args, Streams& s) {
  const auto config = args.flags.load();
  const auto baseline = eval::parse_json(io::read_file(args.baseline));
  const auto candidate = eval::parse_json(io::read_file(args.candidate));
  const auto cmp = eval::compare(baseline, candidate);
  if (config.format == OutputFormat::csv) throw ConfigError("compare supports --format json or text");
  if (config.format == OutputFormat::json) {
    write_output(args.output, eval::export_json(cmp), s.out);
    return kExitOk;
  }
  std::ostringstream out;
  char line[160];
  for (const auto& m : cmp.metrics) {
    std::snprintf(line, sizeof line, "%-12s %10.2f -> %10.2f  %+8.2f%%\n", std::string(metrics::to_string(m.kind)).c_str(),
                  m.baseline_mean_abs_pct, m.candidate_mean_abs_pct, m.percent_change);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-12s %10.2f -> %10.2f  %+8.2f%%\n", "overall", cmp.baseline_overall,
                cmp.candidate_overall, cmp.overall_percent_change);
  out << line;
  write_output(args.output, out.str(), s.out);
  return kExitOk;
}

struct ReportArgs {
  std::string input;
  std::string output = "-";
};

int cmd_report(const ReportArgs& args, Streams& s) {
  write_output(args.output, eval::export_svg(eval::parse_json(io::read_file(args.input))), s.out);
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, Streams streams) {
  DiagnosticsScope diagnostics(streams.err);
  CLI::App app{"Length-controlled text generation toolkit: measure, augment, train and evaluate."};
  app.name("lenforge");
  app.require_subcommand(1);
  app.set_version_flag("--version", "lenforge 0.1.0");

  MeasureArgs measure;
  auto* measure_cmd = app.add_subcommand("measure", "Measure each input line under the selected metrics");
  measure.flags.attach(*measure_cmd);
  measure_cmd->add_option("input", measure.input, "Input file, '-' for standard input");
  measure_cmd->add_flag("--jsonl", measure.jsonl, "Read a JSONL corpus and measure each response");

  SynthesizeArgs synthesize;
  auto* synthesize_cmd = app.add_subcommand("synthesize", "Write a seeded synthetic prompt/response corpus");
  synthesize.flags.attach(*synthesize_cmd);
  synthesize_cmd->add_option("--count", synthesize.count, "Number of samples")->required();
  synthesize_cmd->add_option("--min-length", synthesize.min_length, "Minimum response length in characters");
  synthesize_cmd->add_option("--max-length", synthesize.max_length, "Maximum response length in characters");
  synthesize_cmd->add_option("--alphabet", synthesize.alphabet, "Characters to draw words from");
  synthesize_cmd->add_option("-o,--output", synthesize.output, "Output JSONL");

  SplitArgs split;
  auto* split_cmd = app.add_subcommand("split", "Shuffle a JSONL file into train/eval/test parts");
  split.flags.attach(*split_cmd);
  split_cmd->add_option("input", split.input, "Input JSONL");
  split_cmd->add_option("--fractions", split.fractions, "Train, eval and test fractions")->expected(3)->delimiter(',');
  split_cmd->add_option("--output-dir", split.output_dir, "Directory for train/eval/test.jsonl")->required();

  AugmentArgs augment;
  auto* augment_cmd = app.add_subcommand("augment", "Append a length requirement to each prompt");
  augment.flags.attach(*augment_cmd);
  augment_cmd->add_option("input", augment.input, "Input corpus JSONL");
  augment_cmd->add_option("-o,--output", augment.output, "Output JSONL");
  augment_cmd->add_flag("--probe", augment.probe, "Allow the held-out metric (evaluation prompts only)");

  PairsArgs pairs;
  auto* pairs_cmd = app.add_subcommand("pairs", "Build preference pairs from candidate responses");
  pairs.flags.attach(*pairs_cmd);
  pairs_cmd->add_option("input", pairs.input, "JSONL with prompt, metric, target and candidates");
  pairs_cmd->add_option("-o,--output", pairs.output, "Output JSONL");

  GenerateArgs generate;
  auto* generate_cmd = app.add_subcommand("generate", "Sample responses from a toy policy checkpoint");
  generate.flags.attach(*generate_cmd);
  generate_cmd->add_option("--checkpoint", generate.checkpoint, "Policy checkpoint")->required();
  generate_cmd->add_option("input", generate.input, "JSONL with metric and target per line");
  generate_cmd->add_option("-o,--output", generate.output, "Output JSONL");
  generate_cmd->add_option("--candidates", generate.candidates, "Responses per prompt (>1 writes 'candidates')");
  generate_cmd->add_option("--policy-metric", generate.policy_metric, "Unit the policy was trained to emit");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train the toy policy (sft, dpo, orpo or ppo)");
  train.flags.attach(*train_cmd);
  train_cmd->add_option("stage", train.stage, "sft, dpo, orpo or ppo")->required();
  train_cmd->add_option("input", train.input, "Augmented samples (sft, ppo) or preference pairs (dpo, orpo)");
  train_cmd->add_option("--output-dir", train.output_dir, "Directory for checkpoints and metrics.csv")->required();
  train_cmd->add_option("--init", train.init, "Starting checkpoint (default: reference, else fresh)");

  DescribeArgs describe;
  auto* describe_cmd = app.add_subcommand("describe", "Print checkpoint metadata");
  describe_cmd->add_option("checkpoint", describe.checkpoint, "Checkpoint file")->required();

  EvaluateArgs evaluate;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Score generated responses against their requirements");
  evaluate.flags.attach(*evaluate_cmd);
  evaluate_cmd->add_option("input", evaluate.input, "JSONL with metric, target and response");
  evaluate_cmd->add_option("-o,--output", evaluate.output, "Output file");
  evaluate_cmd->add_option("--quality", evaluate.quality, "Externally supplied quality score, NAME=SCORE");

  CompareArgs compare;
  auto* compare_cmd = app.add_subcommand("compare", "Percent change in mean |deviation| between two reports");
  compare.flags.attach(*compare_cmd);
  compare_cmd->add_option("baseline", compare.baseline, "Baseline report JSON")->required();
  compare_cmd->add_option("candidate", compare.candidate, "Candidate report JSON")->required();
  compare_cmd->add_option("-o,--output", compare.output, "Output file");

  ReportArgs report;
  auto* report_cmd = app.add_subcommand("report", "Render deviation histograms of a report as SVG");
  report_cmd->add_option("input", report.input, "Report JSON")->required();
  report_cmd->add_option("-o,--output", report.output, "Output SVG");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::Success& e) {
    return app.exit(e, streams.out, streams.err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, streams.out, streams.err);
    return kExitUsage;
  }

  try {
    if (measure_cmd->parsed()) return cmd_measure(measure, streams);
    if (synthesize_cmd->parsed()) return cmd_synthesize(synthesize, streams);
    if (split_cmd->parsed()) return cmd_split(split, streams);
    if (augment_cmd->parsed()) return cmd_augment(augment, streams);
    if (pairs_cmd->parsed()) return cmd_pairs(pairs, streams);
    if (generate_cmd->parsed()) return cmd_generate(generate, streams);
    if (train_cmd->parsed()) return cmd_train(train, streams);
    if (describe_cmd->parsed()) return cmd_describe(describe, streams);
    if (evaluate_cmd->parsed()) return cmd_evaluate(evaluate, streams);
    if (compare_cmd->parsed()) return cmd_compare(compare, streams);
    if (report_cmd->parsed()) return cmd_report(report, streams);
  } catch (const toy::TrainingError& e) {
    diag::error(e.what());
    return kExitRuntime;
  } catch (const Error& e) {
    // Config, I/O, empty-corpus and domain errors all stem from user input.
    diag::error(e.what());
    return kExitUsage;
  } catch (const json::exception& e) {
    diag::error(std::string("malformed input: ") + e.what());
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    diag::error(e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    diag::error(e.what());
    return kExitRuntime;
  }
  return kExitUsage;
}

}  // namespace lenforge::cli
