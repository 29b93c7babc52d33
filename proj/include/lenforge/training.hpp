// Copyright (c) 2026, The lenforge Authors
// SPDX-License-Identifier: Apache-2.0

// Trainers for the toy policy: SFT, DPO, ORPO and PPO. Each batch loss comes
// with an analytic gradient; all trainers update with Adam at a fixed
// learning rate and emit one checkpoint per epoch.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lenforge/error.hpp"
#include "lenforge/objectives.hpp"
#include "lenforge/toy_policy.hpp"

namespace lenforge::toy {

struct SftExample {
  int target = 1;
  int length = 0;
};

struct PairExample {
  int target = 1;
  int chosen = 0;
  int rejected = 0;
};

/// One sampled response in a PPO batch.
struct PpoSample {
  int target = 1;
  int length = 0;
  double advantage = 0.0;
  double old_logprob = 0.0;  // log pi_old(length | target)
};

struct TrainConfig {
  double learning_rate = 0.1;
  int epochs = 3;
  std::size_t batch_size = 50;  // 0: full batch
  objectives::HyperParams hyper;
  std::uint64_t seed = 1;
  objectives::Reduction sft_reduction = objectives::Reduction::mean;
  objectives::KlOrder kl_order = objectives::KlOrder::reference_first;
  int ppo_samples = 4;      // responses drawn per prompt and iteration
  int ppo_inner_steps = 4;  // optimizer steps per PPO batch

  /// Throws ConfigError.
  void validate() const;
};

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;  // full training-set loss after the epoch (PPO: -objective)
};

struct TrainResult {
  double initial_loss = 0.0;
  std::vector<Checkpoint> checkpoints;  // one per epoch
  std::vector<EpochMetrics> epochs;
  std::vector<double> ppo_objectives;  // per PPO iteration, before its update

  const Checkpoint& final_checkpoint() const { return checkpoints.back(); }
};

/// Raised when a loss turns non-finite; carries the last finite checkpoint.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, Checkpoint last_good) : Error(what), last_good_(std::move(last_good)) {}
  const Checkpoint& last_good() const { return last_good_; }

 private:
  Checkpoint last_good_;
};

// -- batch losses ------------------------------------------------------------
// Each returns the mean loss over `batch`. If `grad` is non-empty it must have
// num_parameters() entries and receives d loss / d logits (overwritten).

double sft_batch_loss(const ToyPolicy& policy, std::span<const SftExample> batch, objectives::Reduction reduction,
                      std::span<double> grad = {});

double dpo_batch_loss(const ToyPolicy& policy, const ToyPolicy& reference, std::span<const PairExample> batch,
                      double beta, std::span<double> grad = {});

/// SFT term on the chosen length plus lambda times the odds-ratio term.
double orpo_batch_loss(const ToyPolicy& policy, std::span<const PairExample> batch, double lambda,
                       objectives::Reduction reduction, std::span<double> grad = {});

/// -mean clipped surrogate + beta * mean trajectory KL.
double ppo_batch_loss(const ToyPolicy& policy, const ToyPolicy& reference, std::span<const PpoSample> batch,
                      const objectives::HyperParams& hyper, objectives::KlOrder order, std::span<double> grad = {});

/// Exact KL between the two-way action distributions at one state.
double state_kl(const ToyPolicy& policy, const ToyPolicy& reference, int target, int length,
                objectives::KlOrder order);

/// Sum of state_kl over the decision states a response of `length` visits.
double trajectory_kl(const ToyPolicy& policy, const ToyPolicy& reference, int target, int length,
                     objectives::KlOrder order);

// -- trainers ----------------------------------------------------------------

TrainResult train_sft(ToyPolicy policy, std::span<const SftExample> corpus, const TrainConfig& config);

/// `reference` is only read.
TrainResult train_dpo(ToyPolicy policy, const ToyPolicy& reference, std::span<const PairExample> pairs,
                      const TrainConfig& config);

TrainResult train_orpo(ToyPolicy policy, std::span<const PairExample> pairs, const TrainConfig& config);

TrainResult train_ppo(ToyPolicy policy, const ToyPolicy& reference, std::span<const int> prompts,
                      const TrainConfig& config);

/// Earliest epoch whose eval deviation is within `tolerance` (relative) of
/// the best epoch. Returns a 0-based index.
std::size_t select_epoch(std::span<const double> eval_deviations, double tolerance = 0.05);

// -- gradient verification ---------------------------------------------------

enum class LossKind { sft, dpo, orpo, ppo };

struct GradCheckCase {
  std::vector<SftExample> sft;
  std::vector<PairExample> pairs;
  std::vector<PpoSample> ppo;
  const ToyPolicy* reference = nullptr;  // dpo, ppo
  objectives::HyperParams hyper;
  objectives::Reduction reduction = objectives::Reduction::mean;
  objectives::KlOrder kl_order = objectives::KlOrder::reference_first;
};

/// Max relative discrepancy |a - n| / max(|a|, |n|, f) between analytic and
/// central-difference (step h) partials over every parameter the case
/// touches. The floor f = 1e-4 * max(1, |loss|) sits above the difference
/// quotient's rounding noise, which matters for partials that cancel to ~0.
double grad_check(const ToyPolicy& policy, LossKind kind, const GradCheckCase& sample, double h = 1e-6);

}  // namespace lenforge::toy
