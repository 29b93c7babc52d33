// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "lenforge/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "lenforge/diagnostics.hpp"
#include "lenforge/objectives.hpp"

namespace lenforge::dataset {
namespace {

using nlohmann::json;

std::string unit_phrase(LengthMetricKind kind) {
  switch (kind) {
    case LengthMetricKind::characters: return "characters";
    case LengthMetricKind::letters: return "letters";
    case LengthMetricKind::speech_seconds: return "seconds of speech";
    case LengthMetricKind::print_cm: return "centimeters of printed text";
    case LengthMetricKind::words: return "words";
  }
  return "units";
}

std::size_t count_occurrences(std::string_view haystack, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = haystack.find(needle); pos != std::string_view::npos; pos = haystack.find(needle, pos + 1)) ++n;
  return n;
}

std::optional<std::string> string_field(const json& record, const char* key) {
  const auto it = record.find(key);
  if (it == record.end() || !it->is_string()) return std::nullopt;
  return it->get<std::string>();
}

std::optional<std::string> turn_text(const json& turn) {
  if (turn.is_string()) return turn.get<std::string>();
  if (turn.is_object()) return string_field(turn, "content");
  return std::nullopt;
}

std::optional<PromptResponse> record_to_sample(const json& record, std::size_t line_no) {
  if (!record.is_object()) return std::nullopt;
  PromptResponse sample;
  if (const auto it = record.find("id"); it != record.end()) {
    if (it->is_string()) {
      sample.id = it->get<std::string>();
    } else if (it->is_number_integer()) {
      sample.id = std::to_string(it->get<long long>());
    } else {
      return std::nullopt;
    }
  } else {
    sample.id = std::to_string(line_no);
  }
  if (sample.id.empty()) return std::nullopt;

  auto prompt = string_field(record, "prompt");
  auto response = string_field(record, "response");
  if (!prompt || !response) {
    const json* turns = nullptr;
    for (const char* key : {"conversation", "data"}) {
      if (const auto it = record.find(key); it != record.end() && it->is_array()) {
        turns = &*it;
        break;
      }
    }
    if (turns == nullptr || turns->size() < 2) return std::nullopt;
    prompt = turn_text((*turns)[0]);
    response = turn_text((*turns)[1]);
    if (!prompt || !response) return std::nullopt;
  }
  if (prompt->empty()) return std::nullopt;
  sample.prompt = std::move(*prompt);
  sample.response = std::move(*response);
  return sample;
}

// Splits UTF-8 text into one string per code point (lead-byte driven).
std::vector<std::string> code_points(std::string_view text) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < text.size();) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t len = lead < 0x80 ? 1 : (lead >> 5) == 0x6 ? 2 : (lead >> 4) == 0xE ? 3 : (lead >> 3) == 0x1E ? 4 : 1;
    len = std::min(len, text.size() - i);
    out.emplace_back(text.substr(i, len));
    i += len;
  }
  return out;
}

}  // namespace

IngestResult ingest_jsonl(std::istream& source) {
  if (!source) throw IoError("corpus stream is not readable");
  IngestResult result;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(source, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++result.total;
    json record = json::parse(line, nullptr, /*allow_exceptions=*/false);
    std::optional<PromptResponse> sample;
    if (!record.is_discarded()) sample = record_to_sample(record, line_no);
    if (!sample) {
      ++result.skipped;
      diag::warn("skipping malformed record on line " + std::to_string(line_no));
      continue;
    }
    if (!seen.insert(sample->id).second) {
      ++result.skipped;
      diag::warn("skipping duplicate id '" + sample->id + "' on line " + std::to_string(line_no));
      continue;
    }
    result.samples.push_back(std::move(*sample));
  }
  if (source.bad()) throw IoError("read error while ingesting corpus");
  if (result.samples.empty()) throw EmptyCorpusError("corpus contains no valid records");
  return result;
}

PromptTemplate PromptTemplate::defaults() {
  PromptTemplate t;
  for (auto kind : metrics::kAllMetricKinds) {
    t.patterns_[kind] = "Generate precisely {LEN} " + unit_phrase(kind) + " in your response.";
  }
  return t;
}

void PromptTemplate::set(LengthMetricKind kind, std::string pattern) {
  if (count_occurrences(pattern, kPlaceholder) != 1) {
    throw ConfigError("template for " + std::string(metrics::to_string(kind)) +
                      " must contain exactly one {LEN} placeholder");
  }
  patterns_[kind] = std::move(pattern);
}

const std::string& PromptTemplate::pattern(LengthMetricKind kind) const {
  const auto it = patterns_.find(kind);
  if (it == patterns_.end()) throw ConfigError("no template for metric " + std::string(metrics::to_string(kind)));
  return it->second;
}

std::string PromptTemplate::render(const LengthRequirement& requirement) const {
  std::string out = pattern(requirement.kind());
  out.replace(out.find(kPlaceholder), kPlaceholder.size(), requirement.format_target());
  return out;
}

std::optional<LengthRequirement> PromptTemplate::parse(std::string_view augmented_prompt) const {
  std::optional<LengthRequirement> best;
  std::size_t best_suffix = 0;
  for (const auto& [kind, pattern] : patterns_) {
    const auto at = pattern.find(kPlaceholder);
    const std::string_view prefix = std::string_view(pattern).substr(0, at);
    const std::string_view suffix = std::string_view(pattern).substr(at + kPlaceholder.size());
    if (!augmented_prompt.ends_with(suffix)) continue;
    if (best && suffix.size() <= best_suffix) continue;
    const auto head = augmented_prompt.substr(0, augmented_prompt.size() - suffix.size());
    const auto number_start = head.find_last_not_of("0123456789.") + 1;
    const auto number = head.substr(number_start == std::string_view::npos ? 0 : number_start);
    if (number.empty() || !head.substr(0, head.size() - number.size()).ends_with(prefix)) continue;
    try {
      best = LengthRequirement::parse(kind, number);
      best_suffix = suffix.size();
    } catch (const DomainError&) {
    }
  }
  return best;
}

AugmentedSample augment(const PromptResponse& sample, LengthMetricKind kind, const PromptTemplate& templ,
                        const metrics::MeasureConfig& config, bool allow_held_out) {
  if (metrics::is_held_out(kind) && !allow_held_out) {
    throw DomainError("metric '" + std::string(metrics::to_string(kind)) +
                      "' is held out for evaluation and cannot label training data");
  }
  const double measured = metrics::measure(sample.response, kind, config);
  const double target = metrics::round_to_resolution(kind, measured);
  if (target <= 0.0) {
    throw DegenerateSampleError("sample '" + sample.id + "' has a zero-length response under " +
                                std::string(metrics::to_string(kind)));
  }
  LengthRequirement requirement(kind, target);
  std::string prompt = sample.prompt + " " + templ.render(requirement);
  return AugmentedSample{sample, requirement, std::move(prompt)};
}

std::size_t select_preferred(std::span<const double> measures, double target) {
  if (measures.empty()) throw DomainError("no candidates to choose from");
  std::size_t best = 0;
  double best_reward = objectives::length_reward(measures[0], target).value;
  for (std::size_t i = 1; i < measures.size(); ++i) {
    const double reward = objectives::length_reward(measures[i], target).value;
    if (reward > best_reward) {
      best = i;
      best_reward = reward;
    }
  }
  return best;
}

std::vector<PreferencePair> build_preference_pairs(std::string_view id, std::string_view prompt,
                                                   std::span<const std::string> candidates,
                                                   const LengthRequirement& requirement,
                                                   const metrics::MeasureConfig& config) {
  if (candidates.size() < 2) throw DomainError("preference pairs need at least two candidates");
  if (requirement.target() <= 0.0) throw DomainError("preference pairs need a positive length target");
  std::vector<double> measures;
  measures.reserve(candidates.size());
  for (const auto& c : candidates) measures.push_back(metrics::measure(c, requirement.kind(), config));
  const auto chosen = select_preferred(measures, requirement.target());
  const double chosen_reward = objectives::length_reward(measures[chosen], requirement.target()).value;

  std::vector<PreferencePair> pairs;
  pairs.reserve(candidates.size() - 1);
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (i == chosen) continue;
    const double reward = objectives::length_reward(measures[i], requirement.target()).value;
    pairs.push_back(PreferencePair{std::string(id) + "-" + std::to_string(pairs.size() + 1), std::string(prompt),
                                   requirement, candidates[chosen], candidates[i], reward == chosen_reward});
  }
  return pairs;
}

std::vector<PromptResponse> synthesize_toy_corpus(std::uint64_t seed, std::size_t n, std::size_t min_length,
                                                  std::size_t max_length, std::string_view alphabet) {
  if (n == 0) throw DomainError("corpus size must be positive");
  if (min_length == 0 || min_length > max_length) throw DomainError("length range must satisfy 0 < min <= max");
  const auto symbols = code_points(alphabet);
  if (symbols.empty()) throw DomainError("alphabet must not be empty");

  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> length_dist(min_length, max_length);
  std::uniform_int_distribution<std::size_t> symbol_dist(0, symbols.size() - 1);
  std::uniform_int_distribution<int> word_len_dist(2, 9);

  auto random_word = [&](int length) {
    std::string w;
    for (int i = 0; i < length; ++i) w += symbols[symbol_dist(rng)];
    return w;
  };

  std::vector<PromptResponse> corpus;
  corpus.reserve(n);
  const int width = static_cast<int>(std::to_string(n).size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t target = length_dist(rng);
    std::string prompt = "Write something about " + random_word(word_len_dist(rng)) + ".";
    std::vector<std::string> units;
    units.reserve(target);
    while (units.size() < target) {
      if (!units.empty()) units.emplace_back(" ");
      const int len = word_len_dist(rng);
      for (int k = 0; k < len && units.size() < target; ++k) units.push_back(symbols[symbol_dist(rng)]);
    }
    if (units.back() == " ") units.back() = symbols[symbol_dist(rng)];
    std::string response;
    for (const auto& u : units) response += u;
    std::string id = std::to_string(i + 1);
    id.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(id.size()))), '0');
    corpus.push_back(PromptResponse{"toy-" + id, std::move(prompt), std::move(response)});
  }
  return corpus;
}

std::array<std::size_t, 3> split_sizes(std::size_t n, const std::array<double, 3>& fractions) {
  double total = 0.0;
  for (double f : fractions) {
    if (!(f > 0.0)) throw DomainError("split fractions must be positive");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw DomainError("split fractions must sum to 1");
  std::array<std::size_t, 3> sizes{};
  std::array<double, 3> remainders{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    // Round away float noise such as 0.1 * 10 = 1.0000000000000002.
    const double exact = std::round(fractions[i] * static_cast<double>(n) * 1e9) / 1e9;
    sizes[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = exact - static_cast<double>(sizes[i]);
    assigned += sizes[i];
  }
  std::array<std::size_t, 3> order{0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainders[a] > remainders[b]; });
  for (std::size_t k = 0; assigned < n; k = (k + 1) % 3, ++assigned) ++sizes[order[k]];
  return sizes;
}

json target_to_json(const LengthRequirement& requirement) {
  if (metrics::is_integral(requirement.kind())) return json(static_cast<long long>(requirement.target()));
  return json(requirement.target());
}

LengthRequirement requirement_from_json(const json& metric, const json& target) {
  if (!metric.is_string()) throw DomainError("'metric' must be a string");
  const auto kind = metrics::parse_metric_kind(metric.get<std::string>());
  if (!kind) throw DomainError("unknown metric '" + metric.get<std::string>() + "'");
  if (!target.is_number()) throw DomainError("'target' must be a number");
  return LengthRequirement(*kind, target.get<double>());
}

json to_json(const PromptResponse& sample) {
  return json{{"id", sample.id}, {"prompt", sample.prompt}, {"response", sample.response}};
}

json to_json(const AugmentedSample& sample) {
  json j;
  j["id"] = sample.base.id;
  j["prompt"] = sample.augmented_prompt;
  j["response"] = sample.base.response;
  j["metric"] = std::string(metrics::to_string(sample.requirement.kind()));
  j["target"] = target_to_json(sample.requirement);
  return j;
}

json to_json(const PreferencePair& pair) {
  json j;
  j["id"] = pair.id;
  j["prompt"] = pair.augmented_prompt;
  j["metric"] = std::string(metrics::to_string(pair.requirement.kind()));
  j["target"] = target_to_json(pair.requirement);
  j["chosen"] = pair.chosen;
  j["rejected"] = pair.rejected;
  j["tied"] = pair.tied;
  return j;
}

AugmentedSample augmented_from_json(const json& j, const PromptTemplate& templ) {
  try {
    auto requirement = requirement_from_json(j.at("metric"), j.at("target"));
    const auto prompt = j.at("prompt").get<std::string>();
    std::string base_prompt = prompt;
    const auto sentence = " " + templ.render(requirement);
    if (prompt.size() > sentence.size() && prompt.ends_with(sentence)) {
      base_prompt = prompt.substr(0, prompt.size() - sentence.size());
    }
    PromptResponse base{j.at("id").get<std::string>(), std::move(base_prompt), j.at("response").get<std::string>()};
    return AugmentedSample{std::move(base), requirement, prompt};
  } catch (const json::exception& e) {
    throw DomainError(std::string("malformed augmented sample: ") + e.what());
  }
}

PreferencePair pair_from_json(const json& j) {
  try {
    return PreferencePair{j.at("id").get<std::string>(),        j.at("prompt").get<std::string>(),
                          requirement_from_json(j.at("metric"), j.at("target")),
                          j.at("chosen").get<std::string>(),    j.at("rejected").get<std::string>(),
                          j.value("tied", false)};
  } catch (const json::exception& e) {
    throw DomainError(std::string("malformed preference pair: ") + e.what());
  }
}

std::string to_jsonl(std::span<const json> records) {
  std::string out;
  for (const auto& r : records) {
    out += r.dump();
    out += '\n';
  }
  return out;
}

std::vector<json> parse_jsonl(std::string_view text) {
  std::vector<json> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) throw DomainError("invalid JSON on line " + std::to_string(line_no));
    out.push_back(std::move(j));
  }
  return out;
}

}  // namespace lenforge::dataset
