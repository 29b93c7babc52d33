// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "lenforge/objectives.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "lenforge/error.hpp"
#include "swallow_fixture.hpp"

namespace lenforge::objectives {
namespace {

constexpr double kLn2 = std::numbers::ln2;

PreferenceLogProbs make_pair(double pw, double rw, double pl, double rl) {
  return PreferenceLogProbs{PolicyLogProbs(pw, rw), PolicyLogProbs(pl, rl)};
}

// Central difference of a scalar function.
template <class F>
double central_difference(F&& f, double x, double h = 1e-6) {
  return (f(x + h) - f(x - h)) / (2.0 * h);
}

double rel_err(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

TEST(LengthReward, IsNegatedSquaredDifference) {
  EXPECT_EQ(length_reward(100, 100).value, 0.0);
  EXPECT_EQ(length_reward(105, 100).value, -25.0);
  EXPECT_EQ(length_reward(74, 10).value, -4096.0);
}

TEST(LengthReward, RejectsNonPositiveTarget) {
  EXPECT_THROW(length_reward(5, 0), DomainError);
  EXPECT_THROW(length_reward(5, -2), DomainError);
}

TEST(LengthReward, IsSymmetricAndMaximalOnlyAtTarget) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> target(1.0, 500.0);
  std::uniform_real_distribution<double> delta(0.001, 100.0);
  for (int i = 0; i < 1000; ++i) {
    const double t = target(rng);
    const double d = std::min(delta(rng), t);
    EXPECT_LT(length_reward(t + d, t).value, 0.0);
    // Equal up to the rounding of t +/- d.
    EXPECT_NEAR(length_reward(t + d, t).value, length_reward(t - d, t).value, 1e-9 * d * d + 1e-9);
    EXPECT_EQ(length_reward(t, t).value, 0.0);
  }
}

TEST(RelativeDeviation, MatchesSwallowTable) {
  EXPECT_DOUBLE_EQ(relative_deviation(105, 100), 5.0);
  EXPECT_DOUBLE_EQ(relative_deviation(74, 10), 640.0);
  EXPECT_DOUBLE_EQ(relative_deviation(245, 250), -2.0);
  for (const auto& row : testing::kSwallowRows) {
    const double pct = relative_deviation(row.actual, row.target);
    EXPECT_EQ(round_percent(pct), row.reported_error_pct) << row.target;
  }
  EXPECT_THROW(relative_deviation(1, 0), DomainError);
}

TEST(RoundPercent, TiesGoToEven) {
  EXPECT_EQ(round_percent(-10.5), -10.0);
  EXPECT_EQ(round_percent(2.5), 2.0);
  EXPECT_EQ(round_percent(3.5), 4.0);
  EXPECT_EQ(round_percent(2.6666), 3.0);
}

TEST(SftLoss, IsNegativeMeanTokenLogProb) {
  EXPECT_EQ(sft_loss(std::vector<double>{0.0, 0.0}), 0.0);
  EXPECT_NEAR(sft_loss(std::vector<double>{std::log(0.5)}), kLn2, 1e-15);
  EXPECT_NEAR(sft_loss(std::vector<double>{std::log(0.5), std::log(0.25)}), 1.5 * kLn2, 1e-15);
  EXPECT_NEAR(sft_loss(std::vector<double>{std::log(0.5), std::log(0.25)}, Reduction::sum), 3.0 * kLn2, 1e-15);
}

TEST(SftLoss, RejectsEmptyOrInvalidTokens) {
  EXPECT_THROW(sft_loss(std::vector<double>{}), DomainError);
  EXPECT_THROW(sft_loss(std::vector<double>{0.1}), DomainError);
  EXPECT_THROW(sft_loss(std::vector<double>{-INFINITY}), DomainError);
}

TEST(PolicyLogProbs, EnforcesInvariants) {
  EXPECT_THROW(PolicyLogProbs(0.5, -1.0), DomainError);
  EXPECT_THROW(PolicyLogProbs(-1.0, NAN), DomainError);
  EXPECT_NO_THROW(PolicyLogProbs(0.0, 0.0));
}

TEST(DpoLoss, EqualsLn2WhenPolicyMatchesReference) {
  EXPECT_NEAR(dpo_loss(make_pair(-3.0, -3.0, -7.0, -7.0), 0.1), kLn2, 1e-15);
}

TEST(DpoLoss, HandEvaluatedMargin) {
  // beta = 1, chosen log-ratio ln 2, rejected 0: -ln sigma(ln 2) = ln(3/2)
  EXPECT_NEAR(dpo_loss(make_pair(std::log(0.5), std::log(0.25), -1.0, -1.0), 1.0), 0.405465108108164382, 1e-14);
}

TEST(DpoLoss, DecreasesTowardZeroAsChosenMarginGrows) {
  double previous = dpo_loss(make_pair(-10.0, -10.0, -10.0, -10.0), 1.0);
  for (double margin = 1.0; margin <= 600.0; margin *= 2.0) {
    const double loss = dpo_loss(make_pair(-1.0, -1.0 - margin, -1.0, -1.0), 1.0);
    EXPECT_LT(loss, previous);
    EXPECT_GE(loss, 0.0);
    previous = loss;
  }
  EXPECT_LT(previous, 1e-100);
}

TEST(DpoLoss, DependsOnlyOnLogRatioDifference) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lp(-30.0, -0.01);
  for (int i = 0; i < 500; ++i) {
    const auto p = make_pair(lp(rng), lp(rng), lp(rng), lp(rng));
    const double c = std::uniform_real_distribution<double>(-5.0, 5.0)(rng);
    // Shift both log-ratios by c through the reference terms.
    const double rw = p.chosen.reference() - c;
    const double rl = p.rejected.reference() - c;
    if (rw > 0 || rl > 0) continue;
    const auto shifted = make_pair(p.chosen.policy(), rw, p.rejected.policy(), rl);
    EXPECT_NEAR(dpo_loss(p, 0.3), dpo_loss(shifted, 0.3), 1e-12);
  }
}

TEST(DpoLoss, StrictlyBelowLn2ForPositiveChosenMargin) {
  EXPECT_LT(dpo_loss(make_pair(-1.0, -1.1, -2.0, -2.0), 0.1), kLn2);
  EXPECT_GT(dpo_loss(make_pair(-1.1, -1.0, -2.0, -2.0), 0.1), kLn2);
}

TEST(LogOdds, KnownValues) {
  EXPECT_NEAR(log_odds(std::log(0.5)), 0.0, 1e-15);
  EXPECT_NEAR(log_odds(std::log(0.75)), std::log(3.0), 1e-14);
  EXPECT_NEAR(log_odds(std::log(0.9)), std::log(9.0), 1e-13);
  EXPECT_THROW(log_odds(0.0), DomainError);
  EXPECT_THROW(log_odds(0.3), DomainError);
}

TEST(LogOdds, StableAtExtremes) {
  EXPECT_NEAR(log_odds(-1e-12), std::log(1e12), 1e-3);
  EXPECT_NEAR(log_odds(-700.0), -700.0, 1e-12);
  EXPECT_TRUE(std::isfinite(log_odds_grad(-1e-12)));
}

TEST(LogOdds, StrictlyIncreasing) {
  double previous = log_odds(-800.0);
  for (double l = -799.0; l < 0.0; l += 0.37) {
    const double v = log_odds(l);
    EXPECT_GT(v, previous) << l;
    previous = v;
  }
}

TEST(OddsRatioLoss, KnownValues) {
  EXPECT_NEAR(odds_ratio_loss(-1.3, -1.3), kLn2, 1e-15);
  EXPECT_NEAR(odds_ratio_loss(std::log(0.75), std::log(0.5)), 0.287682072451780927, 1e-14);
}

TEST(OddsRatioLoss, DecreasesAsChosenBecomesLikelier) {
  double previous = odds_ratio_loss(-20.0, -2.0);
  for (double lw = -19.5; lw < 0.0; lw += 0.5) {
    const double v = odds_ratio_loss(lw, -2.0);
    EXPECT_LT(v, previous);
    previous = v;
  }
}

TEST(OrpoLoss, CombinesTerms) {
  EXPECT_EQ(orpo_loss(1.0, 5.0, 0.0), 1.0);
  EXPECT_EQ(orpo_loss(1.0, 0.5, 1.0), 1.5);
  EXPECT_NEAR(orpo_loss(0.0, kLn2, 2.0), 2.0 * kLn2, 1e-15);
  EXPECT_THROW(orpo_loss(1.0, 1.0, -1.0), DomainError);
}

TEST(KlDivergence, KnownValues) {
  const std::vector<double> half{0.5, 0.5};
  EXPECT_EQ(kl_divergence(half, half), 0.0);
  EXPECT_NEAR(kl_divergence(std::vector<double>{1.0, 0.0}, half), kLn2, 1e-15);
  EXPECT_NEAR(kl_divergence(std::vector<double>{0.75, 0.25}, half), 0.130812035941136959, 1e-15);
}

TEST(KlDivergence, RejectsSupportViolationAndBadInputs) {
  EXPECT_THROW(kl_divergence(std::vector<double>{0.5, 0.5}, std::vector<double>{1.0, 0.0}), DomainError);
  EXPECT_THROW(kl_divergence(std::vector<double>{0.5, 0.4}, std::vector<double>{0.5, 0.5}), DomainError);
  EXPECT_THROW(kl_divergence(std::vector<double>{1.0}, std::vector<double>{0.5, 0.5}), DomainError);
}

TEST(KlDivergence, GibbsInequalityOnRandomSimplex) {
  std::mt19937_64 rng(5);
  std::gamma_distribution<double> gamma(1.0, 1.0);
  for (int i = 0; i < 1000; ++i) {
    const std::size_t k = 2 + rng() % 6;
    std::vector<double> p(k);
    std::vector<double> q(k);
    double sp = 0.0;
    double sq = 0.0;
    for (std::size_t j = 0; j < k; ++j) {
      sp += (p[j] = gamma(rng));
      sq += (q[j] = gamma(rng));
    }
    for (std::size_t j = 0; j < k; ++j) {
      p[j] /= sp;
      q[j] /= sq;
    }
    EXPECT_GT(kl_divergence(p, q), 0.0);
    EXPECT_NEAR(kl_divergence(p, p), 0.0, 1e-12);
  }
}

TEST(PpoObjective, MeanRewardMinusScaledKl) {
  const std::vector<RewardValue> zero{{0.0}, {0.0}};
  EXPECT_EQ(ppo_objective(zero, std::vector<double>{0.0, 0.0}, 1.0), 0.0);
  EXPECT_EQ(ppo_objective(std::vector<RewardValue>{{-25.0}}, std::vector<double>{0.5}, 2.0), -26.0);
  EXPECT_THROW(ppo_objective(std::vector<RewardValue>{}, std::vector<double>{}, 1.0), DomainError);
  EXPECT_THROW(ppo_objective(zero, std::vector<double>{0.0}, 1.0), DomainError);
}

TEST(PpoObjective, StrictlyDecreasingInBetaWhenKlPositive) {
  const std::vector<RewardValue> rewards{{-4.0}, {-1.0}};
  const std::vector<double> kls{0.1, 0.3};
  double previous = ppo_objective(rewards, kls, 0.01);
  for (double beta = 0.02; beta < 1e6; beta *= 3.0) {
    const double v = ppo_objective(rewards, kls, beta);
    EXPECT_LT(v, previous);
    previous = v;
  }
}

TEST(ClippedSurrogate, ClipsPessimistically) {
  for (double a : {-3.0, -0.5, 0.0, 0.7, 12.0}) EXPECT_EQ(clipped_surrogate(1.0, a, 0.2), a);
  EXPECT_DOUBLE_EQ(clipped_surrogate(2.0, 1.0, 0.2), 1.2);
  // min(-0.5, -0.8): negative advantage keeps the lower clipped value.
  EXPECT_DOUBLE_EQ(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
  EXPECT_DOUBLE_EQ(clipped_surrogate(2.0, -1.0, 0.2), -2.0);
  EXPECT_THROW(clipped_surrogate(0.0, 1.0, 0.2), DomainError);
}

TEST(HyperParams, Validation) {
  EXPECT_NO_THROW(HyperParams{}.validate());
  EXPECT_THROW((HyperParams{0.0, 1.0, 0.2}.validate()), ConfigError);
  EXPECT_THROW((HyperParams{0.1, -1.0, 0.2}.validate()), ConfigError);
  EXPECT_THROW((HyperParams{0.1, 1.0, 1.0}.validate()), ConfigError);
}

TEST(Stability, LossesFiniteAtExtremeLogProbs) {
  for (double a : {-1e-12, -700.0}) {
    for (double b : {-1e-12, -700.0}) {
      EXPECT_TRUE(std::isfinite(dpo_loss(make_pair(a, b, b, a), 0.1)));
      EXPECT_TRUE(std::isfinite(dpo_loss(make_pair(a, b, b, a), 1e6)));
      EXPECT_TRUE(std::isfinite(odds_ratio_loss(a, b)));
      EXPECT_TRUE(std::isfinite(log_odds(a)));
      const auto g = odds_ratio_loss_grad(a, b);
      EXPECT_TRUE(std::isfinite(g.chosen) && std::isfinite(g.rejected));
      EXPECT_TRUE(std::isfinite(sft_loss(std::vector<double>{a, b})));
    }
  }
}

// Analytic partials against central differences on randomized inputs.
class GradientCheck : public ::testing::Test {
 protected:
  std::mt19937_64 rng_{42};
  std::uniform_real_distribution<double> logp_{-8.0, -0.05};
  static constexpr double kTol = 1e-5;
};

TEST_F(GradientCheck, DpoLoss) {
  for (int i = 0; i < 100; ++i) {
    const double pw = logp_(rng_), rw = logp_(rng_), pl = logp_(rng_), rl = logp_(rng_);
    const double beta = std::uniform_real_distribution<double>(0.05, 2.0)(rng_);
    const auto g = dpo_loss_grad(make_pair(pw, rw, pl, rl), beta);
    // Steps stay within the <= 0 domain since logp_ <= -0.05.
    const double nw = central_difference([&](double x) { return dpo_loss(make_pair(x, rw, pl, rl), beta); }, pw);
    const double nl = central_difference([&](double x) { return dpo_loss(make_pair(pw, rw, x, rl), beta); }, pl);
    EXPECT_LT(rel_err(g.chosen_policy, nw), kTol);
    EXPECT_LT(rel_err(g.rejected_policy, nl), kTol);
  }
}

TEST_F(GradientCheck, LogOddsAndOddsRatioLoss) {
  for (int i = 0; i < 100; ++i) {
    const double lw = logp_(rng_), ll = logp_(rng_);
    EXPECT_LT(rel_err(log_odds_grad(lw), central_difference([](double x) { return log_odds(x); }, lw)), kTol);
    const auto g = odds_ratio_loss_grad(lw, ll);
    EXPECT_LT(rel_err(g.chosen, central_difference([&](double x) { return odds_ratio_loss(x, ll); }, lw)), kTol);
    EXPECT_LT(rel_err(g.rejected, central_difference([&](double x) { return odds_ratio_loss(lw, x); }, ll)), kTol);
  }
}

TEST_F(GradientCheck, SftLossAndLengthReward) {
  for (int i = 0; i < 100; ++i) {
    std::vector<double> tokens(1 + rng_() % 8);
    for (auto& t : tokens) t = logp_(rng_);
    const std::size_t k = rng_() % tokens.size();
    for (auto reduction : {Reduction::mean, Reduction::sum}) {
      const double numeric = central_difference(
          [&](double x) {
            auto copy = tokens;
            copy[k] = x;
            return sft_loss(copy, reduction);
          },
          tokens[k]);
      EXPECT_LT(rel_err(sft_loss_token_grad(tokens.size(), reduction), numeric), kTol);
    }
    const double target = std::uniform_real_distribution<double>(1.0, 300.0)(rng_);
    const double actual = std::uniform_real_distribution<double>(1.0, 600.0)(rng_);
    EXPECT_LT(rel_err(length_reward_grad(actual, target),
                      central_difference([&](double x) { return length_reward(x, target).value; }, actual, 1e-4)),
              kTol);
  }
}

TEST_F(GradientCheck, ClippedSurrogateAwayFromKinks) {
  for (int i = 0; i < 100; ++i) {
    double ratio = std::uniform_real_distribution<double>(0.3, 2.0)(rng_);
    if (std::abs(ratio - 0.8) < 1e-3 || std::abs(ratio - 1.2) < 1e-3) ratio += 0.01;
    const double adv = std::uniform_real_distribution<double>(-5.0, 5.0)(rng_);
    const double numeric = central_difference([&](double r) { return clipped_surrogate(r, adv, 0.2); }, ratio);
    EXPECT_LT(rel_err(clipped_surrogate_grad(ratio, adv, 0.2), numeric), kTol) << ratio << " " << adv;
  }
}

}  // namespace
}  // namespace lenforge::objectives
