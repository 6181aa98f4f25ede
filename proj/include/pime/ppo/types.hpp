#pragma once

#include <cstddef>
#include <vector>

#include "pime/common.hpp"
#include "pime/control/control.hpp"

namespace pime::ppo {

/// One step of experience as stored by the rollout. prior_u caches the
/// (parameter-free) prior action at the visited state so the policy mean can
/// be recomputed exactly during updates.
struct TransitionRecord {
    control::ExtendedState x_ext;
    double y_ref = 0.0;
    double u = 0.0; // raw sampled action, before saturation
    double prior_u = 0.0;
    double log_prob_old = 0.0;
    double reward = 0.0;
    double value_pred = 0.0;
    bool done = false;
};

struct EpisodeData {
    std::vector<TransitionRecord> steps;
    double bootstrap_value = 0.0; // V(s_T); episodes end by horizon
};

/// Transitions grouped by episode plus, after finalize_batch(), flat
/// advantage/return arrays in episode-index order.
struct RolloutBatch {
    std::vector<EpisodeData> episodes;

    // filled by finalize_batch(); index pairs address (episode, step)
    std::vector<std::pair<std::size_t, std::size_t>> flat;
    std::vector<double> advantages;
    std::vector<double> returns;
    bool finalized = false;

    std::size_t size() const { return flat.size(); }
    const TransitionRecord& at(std::size_t i) const {
        const auto& [e, s] = flat[i];
        return episodes[e].steps[s];
    }
};

struct PpoHyper {
    double clip_eps = 0.2;
    double gamma = 0.99;
    double lambda = 0.97;
    double c1 = 1.0;   // value-loss weight
    double c2 = 0.02;  // entropy-bonus weight
    int epochs = 10;
    int minibatch = 256;
    double stepsize = 3e-4; // Adam
};

inline void validate(const PpoHyper& h) {
    if (!(h.clip_eps > 0.0 && h.clip_eps < 1.0))
        throw std::invalid_argument("PpoHyper: clip_eps must be in (0,1)");
    if (!(h.gamma >= 0.0 && h.gamma <= 1.0))
        throw std::invalid_argument("PpoHyper: gamma must be in [0,1]");
    if (!(h.lambda >= 0.0 && h.lambda <= 1.0))
        throw std::invalid_argument("PpoHyper: lambda must be in [0,1]");
    if (h.epochs < 1 || h.minibatch < 1)
        throw std::invalid_argument("PpoHyper: epochs and minibatch must be >= 1");
    if (!(h.stepsize > 0.0))
        throw std::invalid_argument("PpoHyper: stepsize must be > 0");
}

} // namespace pime::ppo
