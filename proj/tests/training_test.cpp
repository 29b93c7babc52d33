// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

#include "lenforge/training.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <numeric>

namespace lenforge::toy {
namespace {

using objectives::KlOrder;
using objectives::Reduction;

ToyPolicy random_policy(int max_target, std::uint64_t seed, double scale) {
  auto policy = ToyPolicy::init(max_target, seed);
  Rng rng(seed + 1000);
  std::normal_distribution<double> n(0.0, scale);
  for (auto& v : policy.parameters()) v = n(rng);
  return policy;
}

std::vector<SftExample> gold_corpus(int max_target, int n, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_int_distribution<int> t(1, max_target);
  std::vector<SftExample> out;
  for (int i = 0; i < n; ++i) {
    const int target = t(rng);
    out.push_back({target, target});
  }
  return out;
}

bool bitwise_equal(std::span<const double> a, std::span<const double> b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

TEST(SftBatchLoss, MatchesPerExampleAverage) {
  const auto p = random_policy(5, 1, 1.0);
  const std::vector<SftExample> batch{{1, 1}, {3, 0}, {5, 7}};
  double expected = 0.0;
  for (const auto& e : batch) {
    const auto tokens = p.token_logprobs(e.target, e.length);
    expected += -std::accumulate(tokens.begin(), tokens.end(), 0.0) / static_cast<double>(tokens.size());
  }
  EXPECT_NEAR(sft_batch_loss(p, batch, Reduction::mean), expected / 3.0, 1e-14);
}

TEST(DpoBatchLoss, IsLn2AgainstItself) {
  const auto p = random_policy(4, 2, 1.0);
  const std::vector<PairExample> pairs{{1, 1, 3}, {4, 4, 0}};
  EXPECT_NEAR(dpo_batch_loss(p, p, pairs, 0.1), std::numbers::ln2, 1e-15);
}

TEST(Kl, StateKlMatchesGenericDivergence) {
  const auto p = random_policy(4, 3, 1.0);
  const auto r = random_policy(4, 4, 1.0);
  for (int s = 0; s < p.max_length(); ++s) {
    const double pc = p.continue_probability(2, s);
    const double rc = r.continue_probability(2, s);
    const std::vector<double> pv{pc, 1.0 - pc};
    const std::vector<double> rv{rc, 1.0 - rc};
    EXPECT_NEAR(state_kl(p, r, 2, s, KlOrder::reference_first), objectives::kl_divergence(rv, pv), 1e-12);
    EXPECT_NEAR(state_kl(p, r, 2, s, KlOrder::policy_first), objectives::kl_divergence(pv, rv), 1e-12);
    EXPECT_EQ(state_kl(p, p, 2, s, KlOrder::reference_first), 0.0);
  }
  EXPECT_EQ(state_kl(p, r, 2, p.max_length(), KlOrder::reference_first), 0.0);
  EXPECT_GT(trajectory_kl(p, r, 2, 3, KlOrder::reference_first), state_kl(p, r, 2, 3, KlOrder::reference_first));
}

class GradCheck : public ::testing::TestWithParam<LossKind> {};

TEST_P(GradCheck, AnalyticMatchesNumeric) {
  Rng rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto policy = random_policy(5, rng(), 1.0);
    const auto reference = random_policy(5, rng(), 1.0);
    std::uniform_int_distribution<int> target(1, 5);
    std::uniform_int_distribution<int> length(0, 10);
    GradCheckCase c;
    c.reference = &reference;
    c.hyper.beta = 0.5;
    c.hyper.lambda = 0.7;
    c.kl_order = trial % 2 ? KlOrder::policy_first : KlOrder::reference_first;
    c.reduction = trial % 3 ? Reduction::mean : Reduction::sum;
    for (int i = 0; i < 4; ++i) {
      const int t = target(rng);
      const int a = length(rng);
      int b = length(rng);
      if (b == a) b = (a + 1) % 11;
      c.sft.push_back({t, a});
      c.pairs.push_back({t, a, b});
      const double old = policy.response_logprob(t, a) + std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
      c.ppo.push_back({t, a, std::uniform_real_distribution<double>(-3.0, 3.0)(rng), std::min(old, 0.0)});
    }
    EXPECT_LT(grad_check(policy, GetParam(), c), 1e-5) << "trial " << trial;
  }
}

INSTANTIATE_TEST_SUITE_P(AllLosses, GradCheck,
                         ::testing::Values(LossKind::sft, LossKind::dpo, LossKind::orpo, LossKind::ppo));

TEST(TrainSft, ReducesDeviationAndIsDeterministic) {
  const int T = 10;
  const auto corpus = gold_corpus(T, 1000, 3);
  const auto init = ToyPolicy::init(T, 5);
  TrainConfig config;
  const auto result = train_sft(init, corpus, config);
  ASSERT_EQ(result.checkpoints.size(), 3u);
  EXPECT_LT(result.epochs.back().loss, result.initial_loss);
  std::vector<int> targets(T);
  std::iota(targets.begin(), targets.end(), 1);
  const double before = mean_expected_abs_deviation(init, targets);
  const double after = mean_expected_abs_deviation(result.final_checkpoint().policy, targets);
  EXPECT_LT(after, 0.5 * before);
  EXPECT_EQ(result.final_checkpoint().stage, Stage::sft);
  EXPECT_EQ(result.final_checkpoint().epoch, 3);

  const auto again = train_sft(init, corpus, config);
  EXPECT_TRUE(bitwise_equal(again.final_checkpoint().policy.parameters(),
                            result.final_checkpoint().policy.parameters()));
}

TEST(TrainOrpo, ZeroLambdaEqualsSftOnChosen) {
  const int T = 6;
  const auto init = random_policy(T, 9, 0.3);
  std::vector<PairExample> pairs;
  std::vector<SftExample> chosen;
  Rng rng(4);
  for (int i = 0; i < 200; ++i) {
    const int t = 1 + static_cast<int>(rng() % T);
    pairs.push_back({t, t, static_cast<int>(rng() % (2 * T + 1))});
    chosen.push_back({t, t});
  }
  TrainConfig config;
  config.hyper.lambda = 0.0;
  const auto orpo = train_orpo(init, pairs, config);
  const auto sft = train_sft(init, chosen, config);
  EXPECT_TRUE(bitwise_equal(orpo.final_checkpoint().policy.parameters(), sft.final_checkpoint().policy.parameters()));
}

TEST(TrainDpo, IncreasesChosenMargin) {
  const int T = 5;
  const auto reference = random_policy(T, 12, 0.5);
  const std::vector<PairExample> pairs{{2, 2, 6}, {3, 3, 0}, {5, 5, 9}};
  TrainConfig config;
  config.epochs = 20;
  const auto result = train_dpo(reference, reference, pairs, config);
  EXPECT_NEAR(result.initial_loss, std::numbers::ln2, 1e-12);
  EXPECT_LT(result.epochs.back().loss, result.initial_loss);
}

TEST(TrainPpo, LargeBetaStaysOnReference) {
  const int T = 5;
  const auto reference = random_policy(T, 13, 0.5);
  std::vector<int> prompts;
  for (int i = 0; i < 40; ++i) prompts.push_back(1 + i % T);
  TrainConfig config;
  config.hyper.beta = 1e6;
  const auto result = train_ppo(reference, reference, prompts, config);
  const auto& policy = result.final_checkpoint().policy;
  for (int t = 1; t <= T; ++t) {
    for (int s = 0; s < policy.max_length(); ++s) {
      EXPECT_LE(std::abs(policy.continue_probability(t, s) - reference.continue_probability(t, s)), 0.01);
    }
  }
}

TEST(TrainPpo, SmallBetaImprovesReward) {
  const int T = 5;
  const auto init = ToyPolicy::init(T, 14);
  std::vector<int> prompts;
  for (int i = 0; i < 50; ++i) prompts.push_back(1 + i % T);
  TrainConfig config;
  config.hyper.beta = 0.01;
  config.epochs = 30;
  const auto result = train_ppo(init, init, prompts, config);
  std::vector<int> targets{1, 2, 3, 4, 5};
  EXPECT_LT(mean_expected_abs_deviation(result.final_checkpoint().policy, targets),
            mean_expected_abs_deviation(init, targets));
}

TEST(Training, DivergenceRaisesTrainingErrorWithLastGoodCheckpoint) {
  const auto init = ToyPolicy::init(3, 1);
  const std::vector<PairExample> pairs{{1, 1, 4}, {2, 2, 5}, {3, 3, 0}};
  TrainConfig config;
  config.learning_rate = 1e4;
  config.epochs = 50;
  try {
    train_orpo(init, pairs, config);
    FAIL() << "expected a training error";
  } catch (const TrainingError& e) {
    for (double v : e.last_good().policy.parameters()) EXPECT_TRUE(std::isfinite(v));
    EXPECT_EQ(e.last_good().stage, Stage::orpo);
  }
}

TEST(Training, ConfigValidation) {
  TrainConfig config;
  config.learning_rate = 0.0;
  EXPECT_THROW(config.validate(), ConfigError);
  config = TrainConfig{};
  config.epochs = 0;
  EXPECT_THROW(config.validate(), ConfigError);
  const auto p = ToyPolicy::init(2, 1);
  EXPECT_THROW(train_sft(p, std::vector<SftExample>{}, TrainConfig{}), DomainError);
  EXPECT_THROW(train_sft(p, std::vector<SftExample>{{3, 1}}, TrainConfig{}), DomainError);
  EXPECT_THROW(train_dpo(p, ToyPolicy::init(3, 1), std::vector<PairExample>{{1, 1, 2}}, TrainConfig{}), DomainError);
}

TEST(SelectEpoch, EarliestWithinTolerance) {
  EXPECT_EQ(select_epoch(std::vector<double>{10.0, 5.1, 5.0, 6.0}), 1u);
  EXPECT_EQ(select_epoch(std::vector<double>{10.0, 6.0, 5.0}), 2u);
  EXPECT_EQ(select_epoch(std::vector<double>{0.0, 0.0}), 0u);
  EXPECT_THROW(select_epoch(std::vector<double>{}), DomainError);
}

}  // namespace
}  // namespace lenforge::toy
