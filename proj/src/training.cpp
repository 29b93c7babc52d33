// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "lenforge/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "lenforge/io.hpp"

namespace lenforge::toy {
namespace {

using objectives::KlOrder;
using objectives::Reduction;

class Adam {
 public:
  Adam(std::size_t n, double learning_rate, double beta1 = 0.9)
      : m_(n, 0.0), v_(n, 0.0), lr_(learning_rate), beta1_(beta1) {}

  void step(std::span<double> params, std::span<const double> grad) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, t_);
    for (std::size_t i = 0; i < params.size(); ++i) {
      if (grad[i] == 0.0 && m_[i] == 0.0) continue;
      m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grad[i];
      v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
      params[i] -= step_size(i) * (m_[i] / c1);
    }
  }

  // Effective per-coordinate step size of the last update; 0 if never updated.
  double step_size(std::size_t i) const {
    if (v_[i] == 0.0) return 0.0;
    return lr_ / (std::sqrt(v_[i] / (1.0 - std::pow(kBeta2, t_))) + kEps);
  }

 private:
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;
  std::vector<double> m_;
  std::vector<double> v_;
  double lr_;
  double beta1_;
  int t_ = 0;
};

void prepare_grad(const ToyPolicy& policy, std::span<double> grad) {
  if (grad.empty()) return;
  if (grad.size() != policy.num_parameters()) throw DomainError("gradient buffer has the wrong size");
  std::fill(grad.begin(), grad.end(), 0.0);
}

template <class T>
void require_nonempty(std::span<const T> data, const char* what) {
  if (data.empty()) throw DomainError(std::string(what) + " must not be empty");
}

std::vector<std::size_t> shuffled_indices(std::size_t n, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(idx[i - 1], idx[pick(rng)]);
  }
  return idx;
}

std::string digest_of(std::span<const SftExample> data) {
  std::string text;
  for (const auto& e : data) text += std::to_string(e.target) + ":" + std::to_string(e.length) + "\n";
  return io::sha256_hex(text);
}

std::string digest_of(std::span<const PairExample> data) {
  std::string text;
  for (const auto& e : data) {
    text += std::to_string(e.target) + ":" + std::to_string(e.chosen) + ":" + std::to_string(e.rejected) + "\n";
  }
  return io::sha256_hex(text);
}

std::string digest_of(std::span<const int> data) {
  std::string text;
  for (int t : data) text += std::to_string(t) + "\n";
  return io::sha256_hex(text);
}

void check_finite(double loss, const char* stage, const Checkpoint& last_good) {
  if (!std::isfinite(loss)) {
    throw TrainingError(std::string(stage) + " loss became non-finite", last_good);
  }
}

// Shared minibatch loop: `loss_fn(policy, batch, grad)` returns the mean batch
// loss and fills grad.
template <class Example, class LossFn>
TrainResult run_minibatch(ToyPolicy policy, std::span<const Example> data, const TrainConfig& config, Stage stage,
                          const std::string& corpus_digest, LossFn&& loss_fn) {
  config.validate();
  TrainResult result;
  Checkpoint last_good{policy, stage, 0, corpus_digest};
  std::vector<double> grad(policy.num_parameters());
  result.initial_loss = loss_fn(policy, data, std::span<double>{});
  check_finite(result.initial_loss, std::string(to_string(stage)).c_str(), last_good);

  Adam adam(policy.num_parameters(), config.learning_rate);
  Rng rng(config.seed);
  const std::size_t batch = config.batch_size == 0 ? data.size() : std::min(config.batch_size, data.size());
  std::vector<Example> buffer;
  buffer.reserve(batch);
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = shuffled_indices(data.size(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      buffer.clear();
      for (std::size_t k = start; k < std::min(start + batch, order.size()); ++k) buffer.push_back(data[order[k]]);
      double loss = 0.0;
      try {
        loss = loss_fn(policy, std::span<const Example>(buffer), std::span<double>(grad));
      } catch (const DomainError& e) {
        throw TrainingError(std::string(to_string(stage)) + " training failed: " + e.what(), last_good);
      }
      check_finite(loss, std::string(to_string(stage)).c_str(), last_good);
      adam.step(policy.parameters(), grad);
    }
    double epoch_loss = 0.0;
    try {
      epoch_loss = loss_fn(policy, data, std::span<double>{});
    } catch (const DomainError& e) {
      throw TrainingError(std::string(to_string(stage)) + " training failed: " + e.what(), last_good);
    }
    check_finite(epoch_loss, std::string(to_string(stage)).c_str(), last_good);
    last_good = Checkpoint{policy, stage, epoch, corpus_digest};
    result.checkpoints.push_back(last_good);
    result.epochs.push_back(EpochMetrics{epoch, epoch_loss});
  }
  return result;
}

void check_compatible(const ToyPolicy& policy, const ToyPolicy& reference) {
  if (policy.max_target() != reference.max_target() || policy.max_length() != reference.max_length()) {
    throw DomainError("policy and reference tables have different shapes");
  }
}

// Touched (target, state) pairs, for the gradient check.
std::set<std::pair<int, int>> touched_states(const ToyPolicy& policy, const GradCheckCase& c, LossKind kind) {
  std::set<std::pair<int, int>> states;
  auto add_path = [&](int target, int length) {
    for (int s = 0; s <= std::min(length, policy.max_length() - 1); ++s) states.emplace(target, s);
  };
  switch (kind) {
    case LossKind::sft:
      for (const auto& e : c.sft) add_path(e.target, e.length);
      break;
    case LossKind::dpo:
    case LossKind::orpo:
      for (const auto& e : c.pairs) {
        add_path(e.target, e.chosen);
        add_path(e.target, e.rejected);
      }
      break;
    case LossKind::ppo:
      for (const auto& e : c.ppo) add_path(e.target, e.length);
      break;
  }
  return states;
}

double evaluate_case(const ToyPolicy& policy, LossKind kind, const GradCheckCase& c, std::span<double> grad) {
  switch (kind) {
    case LossKind::sft: return sft_batch_loss(policy, c.sft, c.reduction, grad);
    case LossKind::dpo:
      if (c.reference == nullptr) throw DomainError("DPO gradient check needs a reference policy");
      return dpo_batch_loss(policy, *c.reference, c.pairs, c.hyper.beta, grad);
    case LossKind::orpo: return orpo_batch_loss(policy, c.pairs, c.hyper.lambda, c.reduction, grad);
    case LossKind::ppo:
      if (c.reference == nullptr) throw DomainError("PPO gradient check needs a reference policy");
      return ppo_batch_loss(policy, *c.reference, c.ppo, c.hyper, c.kl_order, grad);
  }
  throw DomainError("unknown loss kind");
}

}  // namespace

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be positive");
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (ppo_samples < 1 || ppo_inner_steps < 1) throw ConfigError("PPO sample and step counts must be positive");
  hyper.validate();
}

double sft_batch_loss(const ToyPolicy& policy, std::span<const SftExample> batch, Reduction reduction,
                      std::span<double> grad) {
  require_nonempty(batch, "SFT batch");
  prepare_grad(policy, grad);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& e : batch) {
    const auto tokens = policy.token_logprobs(e.target, e.length);
    total += objectives::sft_loss(tokens, reduction);
    if (!grad.empty()) {
      policy.accumulate_logprob_grad(e.target, e.length,
                                     scale * objectives::sft_loss_token_grad(tokens.size(), reduction), grad);
    }
  }
  return total * scale;
}

double dpo_batch_loss(const ToyPolicy& policy, const ToyPolicy& reference, std::span<const PairExample> batch,
                      double beta, std::span<double> grad) {
  require_nonempty(batch, "DPO batch");
  check_compatible(policy, reference);
  prepare_grad(policy, grad);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& e : batch) {
    const objectives::PreferenceLogProbs lp{
        {policy.response_logprob(e.target, e.chosen), reference.response_logprob(e.target, e.chosen)},
        {policy.response_logprob(e.target, e.rejected), reference.response_logprob(e.target, e.rejected)}};
    total += objectives::dpo_loss(lp, beta);
    if (!grad.empty()) {
      const auto g = objectives::dpo_loss_grad(lp, beta);
      policy.accumulate_logprob_grad(e.target, e.chosen, scale * g.chosen_policy, grad);
      policy.accumulate_logprob_grad(e.target, e.rejected, scale * g.rejected_policy, grad);
    }
  }
  return total * scale;
}

double orpo_batch_loss(const ToyPolicy& policy, std::span<const PairExample> batch, double lambda,
                       Reduction reduction, std::span<double> grad) {
  require_nonempty(batch, "ORPO batch");
  prepare_grad(policy, grad);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (const auto& e : batch) {
    const auto tokens = policy.token_logprobs(e.target, e.chosen);
    const double sft = objectives::sft_loss(tokens, reduction);
    double odds_ratio = 0.0;
    if (lambda != 0.0) {
      const double lw = policy.response_logprob(e.target, e.chosen);
      const double ll = policy.response_logprob(e.target, e.rejected);
      odds_ratio = objectives::odds_ratio_loss(lw, ll);
      if (!grad.empty()) {
        const auto g = objectives::odds_ratio_loss_grad(lw, ll);
        policy.accumulate_logprob_grad(e.target, e.chosen, scale * lambda * g.chosen, grad);
        policy.accumulate_logprob_grad(e.target, e.rejected, scale * lambda * g.rejected, grad);
      }
    }
    total += objectives::orpo_loss(sft, odds_ratio, lambda);
    if (!grad.empty()) {
      policy.accumulate_logprob_grad(e.target, e.chosen,
                                     scale * objectives::sft_loss_token_grad(tokens.size(), reduction), grad);
    }
  }
  return total * scale;
}

namespace {

// d KL / d gap at policy gap x, gap = continue logit - stop logit.
double kl_gap_derivative(double x, double ref_gap, KlOrder order) {
  const double p = objectives::sigmoid(x);
  if (order == KlOrder::reference_first) return p - objectives::sigmoid(ref_gap);
  return p * (1.0 - p) * (x - ref_gap);
}

double kl_gap_second_derivative(double x, double ref_gap, KlOrder order) {
  const double p = objectives::sigmoid(x);
  if (order == KlOrder::reference_first) return p * (1.0 - p);
  return p * (1.0 - p) * ((1.0 - 2.0 * p) * (x - ref_gap) + 1.0);
}

// Root of x - x0 + k * K'(x) bracketed by x0 and ref_gap (safeguarded Newton).
double kl_prox_gap(double x0, double ref_gap, double k, KlOrder order) {
  auto f = [&](double x) { return x - x0 + k * kl_gap_derivative(x, ref_gap, order); };
  double lo = std::min(x0, ref_gap);
  double hi = std::max(x0, ref_gap);
  if (hi - lo == 0.0) return x0;
  const bool increasing_at_lo = f(lo) < 0.0;
  double x = ref_gap;
  for (int iter = 0; iter < 100 && hi - lo > 1e-15 * std::max(1.0, std::abs(x)); ++iter) {
    const double fx = f(x);
    if (std::abs(fx) <= 1e-15 * std::max(1.0, std::abs(x))) return x;
    if ((fx < 0.0) == increasing_at_lo) lo = x; else hi = x;
    const double slope = 1.0 + k * kl_gap_second_derivative(x, ref_gap, order);
    double next = slope > 0.0 ? x - fx / slope : lo - 1.0;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    x = next;
  }
  return x;
}

}  // namespace

double state_kl(const ToyPolicy& policy, const ToyPolicy& reference, int target, int length, KlOrder order) {
  if (length >= policy.max_length()) return 0.0;
  const double pc = policy.log_continue(target, length);
  const double ps = policy.log_stop(target, length);
  const double rc = reference.log_continue(target, length);
  const double rs = reference.log_stop(target, length);
  if (order == KlOrder::reference_first) return std::max(0.0, std::exp(rc) * (rc - pc) + std::exp(rs) * (rs - ps));
  return std::max(0.0, std::exp(pc) * (pc - rc) + std::exp(ps) * (ps - rs));
}

double trajectory_kl(const ToyPolicy& policy, const ToyPolicy& reference, int target, int length, KlOrder order) {
  double total = 0.0;
  for (int s = 0; s <= std::min(length, policy.max_length() - 1); ++s) {
    total += state_kl(policy, reference, target, s, order);
  }
  return total;
}

namespace {

double ppo_loss_impl(const ToyPolicy& policy, const ToyPolicy& reference, std::span<const PpoSample> batch,
                     const objectives::HyperParams& hyper, KlOrder order, std::span<double> grad, bool kl_grad) {
  require_nonempty(batch, "PPO batch");
  check_compatible(policy, reference);
  prepare_grad(policy, grad);
  const double scale = 1.0 / static_cast<double>(batch.size());
  double surrogate = 0.0;
  double kl = 0.0;
  for (const auto& e : batch) {
    const double logp = policy.response_logprob(e.target, e.length);
    const double ratio = std::exp(logp - e.old_logprob);
    surrogate += objectives::clipped_surrogate(ratio, e.advantage, hyper.clip_epsilon);
    kl += trajectory_kl(policy, reference, e.target, e.length, order);
    if (grad.empty()) continue;
    const double d_ratio = objectives::clipped_surrogate_grad(ratio, e.advantage, hyper.clip_epsilon);
    if (d_ratio != 0.0) policy.accumulate_logprob_grad(e.target, e.length, -scale * d_ratio * ratio, grad);
    if (!kl_grad) continue;
    for (int s = 0; s <= std::min(e.length, policy.max_length() - 1); ++s) {
      // d KL / d gap, gap = continue logit - stop logit
      const double gap = policy.log_continue(e.target, s) - policy.log_stop(e.target, s);
      const double ref_gap = reference.log_continue(e.target, s) - reference.log_stop(e.target, s);
      const double d_gap = kl_gap_derivative(gap, ref_gap, order);
      const double g = scale * hyper.beta * d_gap;
      grad[policy.index(e.target, s, ToyPolicy::kContinue)] += g;
      grad[policy.index(e.target, s, ToyPolicy::kStop)] -= g;
    }
  }
  return -surrogate * scale + hyper.beta * kl * scale;
}

// Proximal step for the KL penalty after a surrogate-only optimizer step.
// Each visited state solves its 1-D subproblem in the logit gap exactly, so a
// stiff penalty (large beta) cannot be overshot.
void apply_kl_prox(ToyPolicy& policy, const ToyPolicy& reference, std::span<const PpoSample> batch, double beta,
                   KlOrder order, const Adam& adam) {
  std::vector<int> visits(policy.num_parameters() / 2, 0);
  for (const auto& e : batch) {
    for (int s = 0; s <= std::min(e.length, policy.max_length() - 1); ++s) {
      ++visits[policy.index(e.target, s, ToyPolicy::kContinue) / 2];
    }
  }
  auto params = policy.parameters();
  const auto& ref = reference.parameters();
  const double n = static_cast<double>(batch.size());
  for (std::size_t state = 0; state < visits.size(); ++state) {
    if (visits[state] == 0) continue;
    const std::size_t ic = 2 * state + ToyPolicy::kContinue;
    const std::size_t is = 2 * state + ToyPolicy::kStop;
    const double eta = adam.step_size(ic) + adam.step_size(is);
    if (eta == 0.0) continue;
    const double k = eta * beta * visits[state] / n;
    const double x0 = params[ic] - params[is];
    const double x = kl_prox_gap(x0, ref[ic] - ref[is], k, order);
    const double lambda = (x0 - x) / eta;
    params[ic] -= adam.step_size(ic) * lambda;
    params[is] += adam.step_size(is) * lambda;
  }
}

}  // namespace

double ppo_batch_loss(const ToyPolicy& policy, const ToyPolicy& reference, std::span<const PpoSample> batch,
                      const objectives::HyperParams& hyper, KlOrder order, std::span<double> grad) {
  return ppo_loss_impl(policy, reference, batch, hyper, order, grad, true);
}

TrainResult train_sft(ToyPolicy policy, std::span<const SftExample> corpus, const TrainConfig& config) {
  require_nonempty(corpus, "SFT corpus");
  for (const auto& e : corpus) {
    policy.check_target(e.target);
    policy.response_logprob(e.target, e.length);  // validates length
  }
  return run_minibatch(std::move(policy), corpus, config, Stage::sft, digest_of(corpus),
                       [&](const ToyPolicy& p, std::span<const SftExample> b, std::span<double> g) {
                         return sft_batch_loss(p, b, config.sft_reduction, g);
                       });
}

TrainResult train_dpo(ToyPolicy policy, const ToyPolicy& reference, std::span<const PairExample> pairs,
                      const TrainConfig& config) {
  require_nonempty(pairs, "DPO pairs");
  check_compatible(policy, reference);
  return run_minibatch(std::move(policy), pairs, config, Stage::dpo, digest_of(pairs),
                       [&](const ToyPolicy& p, std::span<const PairExample> b, std::span<double> g) {
                         return dpo_batch_loss(p, reference, b, config.hyper.beta, g);
                       });
}

TrainResult train_orpo(ToyPolicy policy, std::span<const PairExample> pairs, const TrainConfig& config) {
  require_nonempty(pairs, "ORPO pairs");
  return run_minibatch(std::move(policy), pairs, config, Stage::orpo, digest_of(pairs),
                       [&](const ToyPolicy& p, std::span<const PairExample> b, std::span<double> g) {
                         return orpo_batch_loss(p, b, config.hyper.lambda, config.sft_reduction, g);
                       });
}

TrainResult train_ppo(ToyPolicy policy, const ToyPolicy& reference, std::span<const int> prompts,
                      const TrainConfig& config) {
  config.validate();
  require_nonempty(prompts, "PPO prompts");
  check_compatible(policy, reference);
  for (int t : prompts) policy.check_target(t);

  const auto corpus_digest = digest_of(prompts);
  TrainResult result;
  Checkpoint last_good{policy, Stage::ppo, 0, corpus_digest};
  // No momentum: a stale surrogate direction would keep moving states that
  // the next batch does not visit, outside the reach of the proximal step.
  Adam adam(policy.num_parameters(), config.learning_rate, 0.0);
  Rng rng(config.seed);
  std::vector<double> grad(policy.num_parameters());
  const std::size_t batch = config.batch_size == 0 ? prompts.size() : std::min(config.batch_size, prompts.size());

  std::vector<PpoSample> samples;
  std::vector<objectives::RewardValue> rewards;
  std::vector<double> kls;
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto order = shuffled_indices(prompts.size(), rng);
    double epoch_objective = 0.0;
    int iterations = 0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      samples.clear();
      rewards.clear();
      kls.clear();
      for (std::size_t k = start; k < std::min(start + batch, order.size()); ++k) {
        const int target = prompts[order[k]];
        for (int draw = 0; draw < config.ppo_samples; ++draw) {
          const int length = policy.sample_response(target, rng);
          rewards.push_back(objectives::length_reward(length, target));
          kls.push_back(trajectory_kl(policy, reference, target, length, config.kl_order));
          samples.push_back(PpoSample{target, length, 0.0, policy.response_logprob(target, length)});
        }
      }
      const double objective = objectives::ppo_objective(rewards, kls, config.hyper.beta);
      check_finite(objective, "ppo", last_good);
      result.ppo_objectives.push_back(objective);
      epoch_objective += objective;
      ++iterations;

      double mean_reward = 0.0;
      for (const auto& r : rewards) mean_reward += r.value;
      mean_reward /= static_cast<double>(rewards.size());
      for (std::size_t i = 0; i < samples.size(); ++i) samples[i].advantage = rewards[i].value - mean_reward;

      for (int step = 0; step < config.ppo_inner_steps; ++step) {
        const double loss = ppo_loss_impl(policy, reference, samples, config.hyper, config.kl_order, grad, false);
        check_finite(loss, "ppo", last_good);
        adam.step(policy.parameters(), grad);
        apply_kl_prox(policy, reference, samples, config.hyper.beta, config.kl_order, adam);
      }
    }
    if (result.epochs.empty()) result.initial_loss = -result.ppo_objectives.front();
    last_good = Checkpoint{policy, Stage::ppo, epoch, corpus_digest};
    result.checkpoints.push_back(last_good);
    result.epochs.push_back(EpochMetrics{epoch, -epoch_objective / iterations});
  }
  return result;
}

std::size_t select_epoch(std::span<const double> eval_deviations, double tolerance) {
  if (eval_deviations.empty()) throw DomainError("no epochs to select from");
  const double best = *std::min_element(eval_deviations.begin(), eval_deviations.end());
  for (std::size_t i = 0; i < eval_deviations.size(); ++i) {
    if (eval_deviations[i] <= best * (1.0 + tolerance)) return i;
  }
  return eval_deviations.size() - 1;
}

double grad_check(const ToyPolicy& policy, LossKind kind, const GradCheckCase& sample, double h) {
  std::vector<double> analytic(policy.num_parameters());
  const double loss = evaluate_case(policy, kind, sample, analytic);
  const double floor = 1e-4 * std::max(1.0, std::abs(loss));
  ToyPolicy probe = policy;
  auto params = probe.parameters();
  double worst = 0.0;
  for (const auto& [target, state] : touched_states(policy, sample, kind)) {
    for (auto action : {ToyPolicy::kContinue, ToyPolicy::kStop}) {
      const auto i = policy.index(target, state, action);
      const double original = params[i];
      params[i] = original + h;
      const double up = evaluate_case(probe, kind, sample, {});
      params[i] = original - h;
      const double down = evaluate_case(probe, kind, sample, {});
      params[i] = original;
      const double numeric = (up - down) / (2.0 * h);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace lenforge::toy
