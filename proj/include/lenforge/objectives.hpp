// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

// Rewards and training objectives over log-probabilities. Every sigmoid and
// log term is evaluated in log space; no probability is materialized by
// exponentiating a large-magnitude log-probability.

#pragma once

#include <span>

namespace lenforge::objectives {

/// log pi_theta(y|x) and log pi_ref(y|x) for one response.
class PolicyLogProbs {
 public:
  /// Throws DomainError unless both are finite and <= 0.
  PolicyLogProbs(double policy, double reference);

  double policy() const { return policy_; }
  double reference() const { return reference_; }
  double log_ratio() const { return policy_ - reference_; }

 private:
  double policy_;
  double reference_;
};

struct PreferenceLogProbs {
  PolicyLogProbs chosen;
  PolicyLogProbs rejected;
};

struct HyperParams {
  double beta = 0.1;
  double lambda = 1.0;
  double clip_epsilon = 0.2;

  /// Throws ConfigError.
  void validate() const;
};

struct RewardValue {
  double value = 0.0;
};

enum class Reduction { mean, sum };

/// Which argument comes first in the PPO KL penalty.
enum class KlOrder { reference_first, policy_first };

// -- scalar helpers ----------------------------------------------------------

double softplus(double x);
double log_sigmoid(double x);
double sigmoid(double x);

/// log(1 - exp(x)) for x < 0.
double log1mexp(double x);

// -- rewards and deviations --------------------------------------------------

/// -(actual - target)^2. Maximal (0) iff actual == target.
RewardValue length_reward(double actual, double target);
double length_reward_grad(double actual, double target);

/// Signed percent: 100 * (actual - target) / target.
double relative_deviation(double actual, double target);

/// Integer percent with ties to even, for display.
double round_percent(double percent);

// -- losses ------------------------------------------------------------------

/// Negative mean (or sum) of token log-probabilities.
double sft_loss(std::span<const double> token_logprobs, Reduction reduction = Reduction::mean);

/// d sft_loss / d token_logprob, the same for every token.
double sft_loss_token_grad(std::size_t n_tokens, Reduction reduction = Reduction::mean);

double dpo_margin(const PreferenceLogProbs& p, double beta);
double dpo_loss(const PreferenceLogProbs& p, double beta);

struct DpoGrad {
  double chosen_policy = 0.0;    // d loss / d log pi_theta(y_w)
  double rejected_policy = 0.0;  // d loss / d log pi_theta(y_l)
};
DpoGrad dpo_loss_grad(const PreferenceLogProbs& p, double beta);

/// log(p / (1 - p)) from log p; requires logp < 0.
double log_odds(double logp);
double log_odds_grad(double logp);

double odds_ratio_loss(double logp_chosen, double logp_rejected);

struct OddsRatioGrad {
  double chosen = 0.0;
  double rejected = 0.0;
};
OddsRatioGrad odds_ratio_loss_grad(double logp_chosen, double logp_rejected);

/// sft + lambda * or_loss.
double orpo_loss(double sft, double or_loss, double lambda);

/// sum p_i ln(p_i / q_i); 0 ln 0 = 0.
double kl_divergence(std::span<const double> p, std::span<const double> q);

/// mean(rewards) - beta * mean(kls).
double ppo_objective(std::span<const RewardValue> rewards, std::span<const double> kls, double beta);

/// min(ratio * A, clamp(ratio, 1 - eps, 1 + eps) * A).
double clipped_surrogate(double ratio, double advantage, double eps);

/// d clipped_surrogate / d ratio (zero where the clipped branch is active).
double clipped_surrogate_grad(double ratio, double advantage, double eps);

}  // namespace lenforge::objectives
