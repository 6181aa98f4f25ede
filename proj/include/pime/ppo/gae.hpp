#pragma once

#include <span>
#include <vector>

#include "pime/ppo/types.hpp"

namespace pime::ppo {

struct GaeResult {
    std::vector<double> advantages;
    std::vector<double> returns; // A_t + V_t, the value targets
};

/// Generalized advantage estimation over one episode.
/// delta_t = r_t + gamma*V_{t+1} - V_t, A_t = sum_k (gamma*lambda)^k delta_{t+k},
/// with V_T = bootstrap (0 on true terminals).
inline GaeResult compute_gae(std::span<const double> rewards, std::span<const double> values,
                             double bootstrap, double gamma, double lambda) {
    if (rewards.size() != values.size())
        throw StructuralError("compute_gae: rewards/values length mismatch");
    const std::size_t n = rewards.size();
    GaeResult r;
    r.advantages.resize(n);
    r.returns.resize(n);
    double acc = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double v_next = (i + 1 < n) ? values[i + 1] : bootstrap;
        const double delta = rewards[i] + gamma * v_next - values[i];
        acc = delta + gamma * lambda * acc;
        r.advantages[i] = acc;
        r.returns[i] = acc + values[i];
    }
    return r;
}

/// G = sum_k gamma^k r_k over an episode.
inline double discounted_return(std::span<const double> rewards, double gamma) {
    double g = 0.0;
    for (std::size_t i = rewards.size(); i-- > 0;) g = rewards[i] + gamma * g;
    return g;
}

/// Run GAE per episode (boundaries respected) and flatten in episode-index
/// order, before any shuffling.
inline void finalize_batch(RolloutBatch& batch, double gamma, double lambda) {
    batch.flat.clear();
    batch.advantages.clear();
    batch.returns.clear();
    std::vector<double> rewards, values;
    for (std::size_t e = 0; e < batch.episodes.size(); ++e) {
        const auto& ep = batch.episodes[e];
        rewards.resize(ep.steps.size());
        values.resize(ep.steps.size());
        for (std::size_t s = 0; s < ep.steps.size(); ++s) {
            rewards[s] = ep.steps[s].reward;
            values[s] = ep.steps[s].value_pred;
        }
        const GaeResult g = compute_gae(rewards, values, ep.bootstrap_value, gamma, lambda);
        for (std::size_t s = 0; s < ep.steps.size(); ++s) {
            batch.flat.emplace_back(e, s);
            batch.advantages.push_back(g.advantages[s]);
            batch.returns.push_back(g.returns[s]);
        }
    }
    batch.finalized = true;
}

} // namespace pime::ppo
