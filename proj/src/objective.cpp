// Copyright (c) 2026, The DRPO Toolkit Authors
// SPDX-License-Identifier: Apache-2.0

#include "drpo/objective.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "drpo/error.hpp"

namespace drpo {

namespace {

double advantage_for(const AdvantageTensor& advantages, const Rollout& r) {
  const AdvantageEntry* e = advantages.find(r.rollout_id);
  if (e == nullptr) throw ValidationError(fmt::format("no advantage for rollout '{}'", r.rollout_id));
  return e->advantage;
}

using LogpFn = std::function<double(const Rollout&, std::size_t)>;

ObjectiveValue evaluate(const IterationBatch& batch, const AdvantageTensor& advantages, const ObjectiveConfig& config,
                        const LogpFn& logp_current) {
  config.validate();
  ObjectiveValue out;
  double total = 0.0;
  for (const auto& [_, domain] : batch.domains) {
    for (const auto& group : domain.groups) {
      double surrogate = 0.0;
      double kl = 0.0;
      for (const auto& r : group.rollouts) {
        if (r.is_greedy) continue;
        r.tokens.validate();
        const double adv = advantage_for(advantages, r);
        const auto n = static_cast<double>(r.tokens.size());
        double s = 0.0;
        double k_sum = 0.0;
        for (std::size_t k = 0; k < r.tokens.size(); ++k) {
          const double lc = logp_current(r, k);
          s += clipped_term(std::exp(lc - r.tokens.logp_old[k]), adv, config.clip);
          k_sum += token_kl(lc, r.tokens.logp_ref[k]);
        }
        surrogate += s / n;
        kl += k_sum / n;
      }
      const auto g = static_cast<double>(group.size());
      const double term = surrogate / g - config.kl_coef * (kl / g);
      out.question_ids.push_back(group.question_id);
      out.per_group.push_back(term);
      out.per_group_kl.push_back(kl / g);
      total += term;
    }
  }
  out.value = out.per_group.empty() ? 0.0 : total / static_cast<double>(out.per_group.size());
  return out;
}

}  // namespace

void ObjectiveConfig::validate() const {
  if (!(clip > 0.0 && clip < 1.0)) throw ValidationError(fmt::format("clip must lie in (0, 1), got {}", clip));
  if (!(kl_coef >= 0.0) || !std::isfinite(kl_coef)) {
    throw ValidationError(fmt::format("kl_coef must be finite and >= 0, got {}", kl_coef));
  }
}

double token_ratio(const TokenSequence& tokens, std::size_t k) {
  if (k >= tokens.size() || k >= tokens.logp_old.size()) {
    throw ValidationError(fmt::format("token index {} out of range for {} tokens", k, tokens.size()));
  }
  return std::exp(tokens.logp_current[k] - tokens.logp_old[k]);
}

double clipped_term(double ratio, double advantage, double clip) {
  const double clipped = std::clamp(ratio, 1.0 - clip, 1.0 + clip);
  return std::min(ratio * advantage, clipped * advantage);
}

double token_kl(double logp_current, double logp_ref) { return std::exp(logp_current) * (logp_current - logp_ref); }

ObjectiveValue surrogate_objective(const IterationBatch& batch, const AdvantageTensor& advantages,
                                   const ObjectiveConfig& config) {
  return evaluate(batch, advantages, config,
                  [](const Rollout& r, std::size_t k) { return r.tokens.logp_current[k]; });
}

ObjectiveValue policy_objective(const TokenPolicy& policy, const IterationBatch& batch,
                                const AdvantageTensor& advantages, const ObjectiveConfig& config) {
  return evaluate(batch, advantages, config,
                  [&](const Rollout& r, std::size_t k) { return policy.token_logp(r, k); });
}

std::vector<double> objective_gradient(const TokenPolicy& policy, const IterationBatch& batch,
                                       const AdvantageTensor& advantages, const ObjectiveConfig& config) {
  config.validate();
  std::vector<double> grad(policy.parameter_count(), 0.0);
  const std::size_t questions = batch.question_count();
  if (questions == 0) return grad;
  const double per_question = 1.0 / static_cast<double>(questions);

  for (const auto& [_, domain] : batch.domains) {
    for (const auto& group : domain.groups) {
      const double per_rollout = per_question / static_cast<double>(group.size());
      for (const auto& r : group.rollouts) {
        if (r.is_greedy) continue;
        r.tokens.validate();
        const double adv = advantage_for(advantages, r);
        const double per_token = per_rollout / static_cast<double>(r.tokens.size());
        for (std::size_t k = 0; k < r.tokens.size(); ++k) {
          const double lc = policy.token_logp(r, k);
          const double ratio = std::exp(lc - r.tokens.logp_old[k]);
          const double clipped = std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip);
          // d(ratio)/d(logp) = ratio; the clipped branch is flat.
          const double surrogate = ratio * adv <= clipped * adv ? adv * ratio : 0.0;
          const double kl = std::exp(lc) * (lc - r.tokens.logp_ref[k] + 1.0);
          const double scale = per_token * (surrogate - config.kl_coef * kl);
          if (scale != 0.0) policy.accumulate_logp_gradient(r, k, scale, grad);
        }
      }
    }
  }
  return grad;
}

}  // namespace drpo
