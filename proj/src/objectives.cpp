// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "lenforge/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "lenforge/error.hpp"

namespace lenforge::objectives {
namespace {

void require(bool condition, const char* message) {
  if (!condition) throw DomainError(message);
}

}  // namespace

PolicyLogProbs::PolicyLogProbs(double policy, double reference) : policy_(policy), reference_(reference) {
  require(std::isfinite(policy) && policy <= 0.0, "policy log-probability must be finite and <= 0");
  require(std::isfinite(reference) && reference <= 0.0, "reference log-probability must be finite and <= 0");
}

void HyperParams::validate() const {
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be positive");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be non-negative");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) throw ConfigError("clip epsilon must lie in (0, 1)");
}

double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

double log_sigmoid(double x) { return -softplus(-x); }

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log1mexp(double x) {
  // Mächler's switch point: expm1 is accurate near 0, log1p far from it.
  return x > -std::numbers::ln2 ? std::log(-std::expm1(x)) : std::log1p(-std::exp(x));
}

RewardValue length_reward(double actual, double target) {
  require(std::isfinite(actual) && std::isfinite(target), "length reward arguments must be finite");
  require(target > 0.0, "length target must be positive");
  require(actual >= 0.0, "actual length must be non-negative");
  const double d = actual - target;
  return RewardValue{-(d * d)};
}

double length_reward_grad(double actual, double target) { return -2.0 * (actual - target); }

double relative_deviation(double actual, double target) {
  require(std::isfinite(actual) && std::isfinite(target), "deviation arguments must be finite");
  require(target > 0.0, "length target must be positive");
  return (actual - target) * 100.0 / target;
}

double round_percent(double percent) {
  // nearbyint honours the default round-to-nearest-even mode.
  return std::nearbyint(percent);
}

double sft_loss(std::span<const double> token_logprobs, Reduction reduction) {
  require(!token_logprobs.empty(), "SFT loss needs at least one token");
  double total = 0.0;
  for (double lp : token_logprobs) {
    require(std::isfinite(lp) && lp <= 0.0, "token log-probabilities must be finite and <= 0");
    total += lp;
  }
  const double loss = -total;
  return reduction == Reduction::mean ? loss / static_cast<double>(token_logprobs.size()) : loss;
}

double sft_loss_token_grad(std::size_t n_tokens, Reduction reduction) {
  require(n_tokens > 0, "SFT loss needs at least one token");
  return reduction == Reduction::mean ? -1.0 / static_cast<double>(n_tokens) : -1.0;
}

double dpo_margin(const PreferenceLogProbs& p, double beta) {
  return beta * (p.chosen.log_ratio() - p.rejected.log_ratio());
}

double dpo_loss(const PreferenceLogProbs& p, double beta) {
  require(beta > 0.0, "beta must be positive");
  return -log_sigmoid(dpo_margin(p, beta));
}

DpoGrad dpo_loss_grad(const PreferenceLogProbs& p, double beta) {
  require(beta > 0.0, "beta must be positive");
  // d/dm [-log sigma(m)] = -sigma(-m)
  const double outer = -sigmoid(-dpo_margin(p, beta));
  return DpoGrad{outer * beta, -outer * beta};
}

double log_odds(double logp) {
  require(logp < 0.0, "log-odds require log-probability < 0");
  return logp - log1mexp(logp);
}

double log_odds_grad(double logp) {
  require(logp < 0.0, "log-odds require log-probability < 0");
  // d/dl [l - log(1 - e^l)] = 1 / (1 - e^l)
  return -1.0 / std::expm1(logp);
}

double odds_ratio_loss(double logp_chosen, double logp_rejected) {
  return -log_sigmoid(log_odds(logp_chosen) - log_odds(logp_rejected));
}

OddsRatioGrad odds_ratio_loss_grad(double logp_chosen, double logp_rejected) {
  const double outer = -sigmoid(-(log_odds(logp_chosen) - log_odds(logp_rejected)));
  return OddsRatioGrad{outer * log_odds_grad(logp_chosen), -outer * log_odds_grad(logp_rejected)};
}

double orpo_loss(double sft, double or_loss, double lambda) {
  require(sft >= 0.0 && or_loss >= 0.0 && lambda >= 0.0, "ORPO terms and lambda must be non-negative");
  return sft + lambda * or_loss;
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
  require(p.size() == q.size() && !p.empty(), "KL arguments must have equal, non-zero length");
  double sum_p = 0.0;
  double sum_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    require(p[i] >= 0.0 && q[i] >= 0.0, "probabilities must be non-negative");
    sum_p += p[i];
    sum_q += q[i];
  }
  require(std::abs(sum_p - 1.0) <= 1e-9 && std::abs(sum_q - 1.0) <= 1e-9, "probability vectors must sum to 1");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    require(q[i] > 0.0, "KL support violation: q is zero where p is positive");
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

double ppo_objective(std::span<const RewardValue> rewards, std::span<const double> kls, double beta) {
  require(!rewards.empty() && rewards.size() == kls.size(), "PPO objective needs equal, non-empty inputs");
  require(beta > 0.0, "beta must be positive");
  double reward_sum = 0.0;
  double kl_sum = 0.0;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    require(kls[i] >= 0.0, "KL terms must be non-negative");
    reward_sum += rewards[i].value;
    kl_sum += kls[i];
  }
  const auto n = static_cast<double>(rewards.size());
  return reward_sum / n - beta * (kl_sum / n);
}

double clipped_surrogate(double ratio, double advantage, double eps) {
  require(ratio > 0.0, "probability ratio must be positive");
  require(eps > 0.0 && eps < 1.0, "clip epsilon must lie in (0, 1)");
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

double clipped_surrogate_grad(double ratio, double advantage, double eps) {
  require(ratio > 0.0, "probability ratio must be positive");
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  // The unclipped branch is selected (or tied) exactly when it is the min.
  return ratio * advantage <= clipped * advantage ? advantage : 0.0;
}

}  // namespace lenforge::objectives
