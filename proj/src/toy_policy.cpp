// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "lenforge/toy_policy.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "lenforge/error.hpp"
#include "lenforge/io.hpp"
#include "lenforge/objectives.hpp"

namespace lenforge::toy {
namespace {

constexpr std::string_view kCheckpointFormat = "lenforge.checkpoint";
constexpr int kCheckpointVersion = 1;

constexpr std::string_view kFiller =
    "lorem ipsum dolor sit amet consectetur adipiscing elit sed do eiusmod tempor incididunt ut labore et "
    "dolore magna aliqua ";

}  // namespace

ToyPolicy::ToyPolicy(int max_target, int max_length, std::uint64_t seed, std::vector<double> logits)
    : max_target_(max_target), max_length_(max_length), seed_(seed), logits_(std::move(logits)) {}

ToyPolicy ToyPolicy::init(int max_target, std::uint64_t seed, int max_length) {
  if (max_target < 1) throw DomainError("max_target must be at least 1");
  if (max_length == 0) max_length = 2 * max_target;
  if (max_length < 2 * max_target) throw DomainError("max_length must be at least 2 * max_target");
  const auto n = static_cast<std::size_t>(max_target) * static_cast<std::size_t>(max_length + 1) * 2;
  std::vector<double> logits(n);
  Rng rng(seed);
  std::normal_distribution<double> noise(0.0, 0.01);
  for (auto& v : logits) v = noise(rng);
  return ToyPolicy(max_target, max_length, seed, std::move(logits));
}

ToyPolicy ToyPolicy::from_logits(int max_target, int max_length, std::uint64_t seed, std::vector<double> logits) {
  if (max_target < 1) throw DomainError("max_target must be at least 1");
  if (max_length < 2 * max_target) throw DomainError("max_length must be at least 2 * max_target");
  const auto n = static_cast<std::size_t>(max_target) * static_cast<std::size_t>(max_length + 1) * 2;
  if (logits.size() != n) throw DomainError("logit table has the wrong size");
  for (double v : logits) {
    if (!std::isfinite(v)) throw DomainError("logits must be finite");
  }
  return ToyPolicy(max_target, max_length, seed, std::move(logits));
}

void ToyPolicy::check_target(int target) const {
  if (target < 1 || target > max_target_) {
    throw DomainError("target " + std::to_string(target) + " outside [1, " + std::to_string(max_target_) + "]");
  }
}

void ToyPolicy::check_length(int length) const {
  if (length < 0 || length > max_length_) {
    throw DomainError("length " + std::to_string(length) + " outside [0, " + std::to_string(max_length_) + "]");
  }
}

std::size_t ToyPolicy::index(int target, int length, Action action) const {
  return ((static_cast<std::size_t>(target - 1) * static_cast<std::size_t>(max_length_ + 1)) +
          static_cast<std::size_t>(length)) *
             2 +
         static_cast<std::size_t>(action);
}

double ToyPolicy::logit_gap(int target, int length) const {
  return logits_[index(target, length, kContinue)] - logits_[index(target, length, kStop)];
}

double ToyPolicy::log_continue(int target, int length) const {
  if (length == max_length_) return -std::numeric_limits<double>::infinity();
  return objectives::log_sigmoid(logit_gap(target, length));
}

double ToyPolicy::log_stop(int target, int length) const {
  if (length == max_length_) return 0.0;
  return objectives::log_sigmoid(-logit_gap(target, length));
}

double ToyPolicy::continue_probability(int target, int length) const {
  if (length == max_length_) return 0.0;
  return objectives::sigmoid(logit_gap(target, length));
}

double ToyPolicy::response_logprob(int target, int length) const {
  check_target(target);
  check_length(length);
  double total = log_stop(target, length);
  for (int s = 0; s < length; ++s) total += log_continue(target, s);
  return total;
}

std::vector<double> ToyPolicy::token_logprobs(int target, int length) const {
  check_target(target);
  check_length(length);
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(length) + 1);
  for (int s = 0; s < length; ++s) out.push_back(log_continue(target, s));
  out.push_back(log_stop(target, length));
  return out;
}

void ToyPolicy::accumulate_logprob_grad(int target, int length, double scale, std::span<double> grad) const {
  check_target(target);
  check_length(length);
  for (int s = 0; s < length; ++s) {
    const double g = scale * objectives::sigmoid(-logit_gap(target, s));
    grad[index(target, s, kContinue)] += g;
    grad[index(target, s, kStop)] -= g;
  }
  if (length < max_length_) {
    const double g = scale * objectives::sigmoid(logit_gap(target, length));
    grad[index(target, length, kContinue)] -= g;
    grad[index(target, length, kStop)] += g;
  }
}

std::vector<double> ToyPolicy::length_distribution(int target) const {
  check_target(target);
  std::vector<double> dist(static_cast<std::size_t>(max_length_) + 1);
  double log_survival = 0.0;
  for (int s = 0; s <= max_length_; ++s) {
    dist[static_cast<std::size_t>(s)] = std::exp(log_survival + log_stop(target, s));
    if (s < max_length_) log_survival += log_continue(target, s);
  }
  return dist;
}

int ToyPolicy::sample_response(int target, Rng& rng) const {
  check_target(target);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  for (int s = 0; s < max_length_; ++s) {
    if (uniform(rng) >= continue_probability(target, s)) return s;
  }
  return max_length_;
}

double expected_abs_deviation(const ToyPolicy& policy, int target) {
  const auto dist = policy.length_distribution(target);
  double total = 0.0;
  for (std::size_t length = 0; length < dist.size(); ++length) {
    total += dist[length] * std::abs(objectives::relative_deviation(static_cast<double>(length), target));
  }
  return total;
}

double mean_expected_abs_deviation(const ToyPolicy& policy, std::span<const int> targets) {
  if (targets.empty()) throw DomainError("no targets to evaluate");
  double total = 0.0;
  for (int t : targets) total += expected_abs_deviation(policy, t);
  return total / static_cast<double>(targets.size());
}

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::init: return "init";
    case Stage::sft: return "sft";
    case Stage::ppo: return "ppo";
    case Stage::dpo: return "dpo";
    case Stage::orpo: return "orpo";
  }
  return "unknown";
}

Stage parse_stage(std::string_view name) {
  for (auto stage : {Stage::init, Stage::sft, Stage::ppo, Stage::dpo, Stage::orpo}) {
    if (to_string(stage) == name) return stage;
  }
  throw DomainError("unknown training stage '" + std::string(name) + "'");
}

std::string Checkpoint::digest() const { return io::sha256_hex(serialize(*this)); }

std::string serialize(const Checkpoint& checkpoint) {
  const auto& policy = checkpoint.policy;
  nlohmann::json j;
  j["format"] = kCheckpointFormat;
  j["version"] = kCheckpointVersion;
  j["stage"] = to_string(checkpoint.stage);
  j["epoch"] = checkpoint.epoch;
  j["corpus_digest"] = checkpoint.corpus_digest;
  j["seed"] = policy.seed();
  j["max_target"] = policy.max_target();
  j["max_length"] = policy.max_length();
  j["logits"] = std::vector<double>(policy.parameters().begin(), policy.parameters().end());
  return j.dump() + "\n";
}

Checkpoint deserialize(std::string_view text) {
  const auto j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw DomainError("checkpoint is not valid JSON");
  try {
    if (j.at("format").get<std::string>() != kCheckpointFormat) throw DomainError("not a lenforge checkpoint");
    if (j.at("version").get<int>() != kCheckpointVersion) throw DomainError("unsupported checkpoint version");
    auto policy = ToyPolicy::from_logits(j.at("max_target").get<int>(), j.at("max_length").get<int>(),
                                         j.at("seed").get<std::uint64_t>(), j.at("logits").get<std::vector<double>>());
    return Checkpoint{std::move(policy), parse_stage(j.at("stage").get<std::string>()), j.at("epoch").get<int>(),
                      j.at("corpus_digest").get<std::string>()};
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("malformed checkpoint: ") + e.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  io::write_atomic(path, serialize(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize(io::read_file(path)); }

int to_units(metrics::LengthMetricKind kind, double value) {
  return static_cast<int>(std::lround(metrics::is_integral(kind) ? value : value * 10.0));
}

double from_units(metrics::LengthMetricKind kind, int units) {
  return metrics::is_integral(kind) ? static_cast<double>(units) : static_cast<double>(units) / 10.0;
}

std::string render_characters(int characters) {
  std::string out;
  out.reserve(static_cast<std::size_t>(std::max(characters, 0)));
  for (int i = 0; i < characters; ++i) out.push_back(kFiller[static_cast<std::size_t>(i) % kFiller.size()]);
  if (!out.empty() && out.back() == ' ') out.back() = '.';
  return out;
}

std::string realize_text(metrics::LengthMetricKind kind, int units, const metrics::MeasureConfig& config) {
  using metrics::LengthMetricKind;
  if (units <= 0) return {};
  switch (kind) {
    case LengthMetricKind::characters: return render_characters(units);
    case LengthMetricKind::speech_seconds: {
      if (!config.speech) throw ConfigError("speech metric requires a speech rate model");
      return render_characters(static_cast<int>(std::lround(units / 10.0 * config.speech->chars_per_second)));
    }
    case LengthMetricKind::letters: {
      std::string out;
      for (std::size_t i = 0, letters = 0; letters < static_cast<std::size_t>(units); ++i) {
        const char c = kFiller[i % kFiller.size()];
        out.push_back(c);
        if (c != ' ') ++letters;
      }
      return out;
    }
    case LengthMetricKind::words: {
      std::string out;
      std::size_t pos = 0;
      for (int w = 0; w < units; ++w) {
        const auto end = kFiller.find(' ', pos);
        if (!out.empty()) out.push_back(' ');
        out.append(kFiller.substr(pos, end - pos));
        pos = end + 1 == kFiller.size() ? 0 : end + 1;
      }
      return out;
    }
    case LengthMetricKind::print_cm: {
      if (!config.font) throw ConfigError("print metric requires a font metric table");
      const auto& table = *config.font;
      const double target_cm = units / 10.0;
      std::string out;
      long long advance = 0;
      for (std::size_t i = 0;; ++i) {
        const char c = kFiller[i % kFiller.size()];
        const int w = table.advance(static_cast<char32_t>(c));
        if (table.to_cm(advance + w / 2) > target_cm) break;
        out.push_back(c);
        advance += w;
      }
      return out;
    }
  }
  return {};
}

}  // namespace lenforge::toy
