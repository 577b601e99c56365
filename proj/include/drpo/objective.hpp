// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "drpo/advantage.hpp"
#include "drpo/batch.hpp"

namespace drpo {

struct ObjectiveConfig {
  /// Ratio clip range: ratios are clipped to [1 - clip, 1 + clip].
  double clip = 0.2;
  /// KL penalty coefficient (beta).
  double kl_coef = 1e-4;

  void validate() const;
  bool operator==(const ObjectiveConfig&) const = default;
};

/// exp(logp_current[k] - logp_old[k]).
double token_ratio(const TokenSequence& tokens, std::size_t k);

/// min(ratio * A, clip(ratio, 1 - clip, 1 + clip) * A).
double clipped_term(double ratio, double advantage, double clip);

/// Single-token KL estimate exp(lc) * (lc - lr) on the realized token.
double token_kl(double logp_current, double logp_ref);

struct ObjectiveValue {
  double value = 0.0;
  /// Per question, in canonical batch order.
  std::vector<std::string> question_ids;
  std::vector<double> per_group;
  /// Token-averaged KL estimate per question.
  std::vector<double> per_group_kl;
};

/// Mean over questions of [ mean_i (1/n_i) sum_k clipped_term - beta * KL ],
/// where KL is the per-rollout token average of token_kl, averaged over the
/// group. Greedy rollouts are ignored. Throws when a rollout has no advantage.
ObjectiveValue surrogate_objective(const IterationBatch& batch, const AdvantageTensor& advantages,
                                   const ObjectiveConfig& config);

/// A policy whose per-token log-probabilities are differentiable in a flat
/// parameter vector.
class TokenPolicy {
 public:
  virtual ~TokenPolicy() = default;
  virtual std::size_t parameter_count() const = 0;
  /// Log-probability of token k of `rollout` under the current parameters.
  virtual double token_logp(const Rollout& rollout, std::size_t k) const = 0;
  /// Adds scale * d token_logp / d theta into `grad`.
  virtual void accumulate_logp_gradient(const Rollout& rollout, std::size_t k, double scale,
                                        std::span<double> grad) const = 0;
};

/// surrogate_objective with logp_current recomputed from `policy`.
ObjectiveValue policy_objective(const TokenPolicy& policy, const IterationBatch& batch,
                                const AdvantageTensor& advantages, const ObjectiveConfig& config);

/// Analytic gradient of policy_objective. The clipped branch of the min
/// contributes zero gradient.
std::vector<double> objective_gradient(const TokenPolicy& policy, const IterationBatch& batch,
                                       const AdvantageTensor& advantages, const ObjectiveConfig& config);

}  // namespace drpo
