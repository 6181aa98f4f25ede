#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pime/control/control.hpp"
#include "pime/envsim/plant.hpp"
#include "pime/harness/config.hpp"
#include "pime/harness/csv.hpp"
#include "pime/nn/gaussian.hpp"
#include "pime/nn/value.hpp"
#include "pime/ppo/types.hpp"

namespace pime::harness {

/// What acts in an episode: the prior anchors the mean, the network adds the
/// learned residual. Either part can be absent. `custom` (tests only)
/// replaces the whole composition.
struct Agent {
    nn::GaussianPolicy* policy = nullptr; // g_theta; null = 0
    nn::ValueNet* value = nullptr;        // optional value predictions
    control::PriorController prior;
    bool use_prior = true;
    bool deterministic = false; // act with the mean, no sampling noise
    std::function<double(const control::ExtendedState&, double)> custom;
};

struct StepRow {
    int t;
    double y;       // output after this step
    double y_ref;
    double u;       // saturated input applied at this step
    double z;       // integrator after its update
    double reward;
};

struct EpisodeResult {
    std::vector<StepRow> trace;
    ppo::EpisodeData data;
    double return_sum = 0.0; // undiscounted episodic return
    double y_initial = 0.0;  // output at the initial state, before any step
    int model_id = 0;
};

/// Core stepping loop over an explicit per-step set-point schedule:
/// extend -> compose u ~ pi(kappa + g_theta, sigma^2) -> saturate -> step ->
/// reward -> integrator update. The rng drives, in order: the initial state,
/// then per step the action noise (only when sampling) and process noise
/// (only when noise_std > 0). State and integrator persist across set-point
/// changes within the schedule.
inline EpisodeResult run_schedule(const envsim::PlantModel& model, const Agent& agent,
                                  const std::vector<double>& yref_schedule,
                                  const ExperimentConfig& config, Rng rng) {
    const Range u_range = envsim::input_range(model);
    std::vector<double> x = envsim::sample_initial_state(model, config.reset_ranges, rng);
    control::IntegratorState integ{0.0, config.integrator_bounds};
    const int steps = static_cast<int>(yref_schedule.size());

    EpisodeResult out;
    out.model_id = model.model_id;
    out.y_initial = envsim::observe(model, x);
    out.trace.reserve(steps);
    out.data.steps.reserve(steps);

    const int n = envsim::state_dim(model.kind);
    std::vector<double> noise(n, 0.0);
    bool with_noise = false;
    for (double s : model.noise_std) with_noise = with_noise || s > 0.0;

    for (int t = 0; t < steps; ++t) {
        const double y_ref = yref_schedule[t];
        const double y = envsim::observe(model, x);
        const double eps = y_ref - y;
        control::ExtendedState xt = control::extend(envsim::policy_state(model, x), integ.z);

        double u_raw, log_prob = 0.0, kappa = 0.0, g = 0.0;
        if (agent.custom) {
            u_raw = agent.custom(xt, y_ref);
        } else {
            if (agent.use_prior) kappa = control::prior_action(agent.prior, eps, integ.z);
            if (agent.policy) g = agent.policy->mean_g(xt, y_ref);
            const double mean = kappa + g;
            if (agent.deterministic || !agent.policy) {
                u_raw = mean;
                if (agent.policy) log_prob = nn::log_prob(*agent.policy, mean, u_raw);
            } else {
                const nn::SampledAction a = nn::sample_action(*agent.policy, mean, rng);
                u_raw = a.u;
                log_prob = a.log_prob;
            }
        }
        const double u = control::saturate(u_raw, u_range);

        const double* noise_ptr = nullptr;
        if (with_noise) {
            for (int i = 0; i < n; ++i) noise[i] = model.noise_std[i] * rng.gaussian();
            noise_ptr = noise.data();
        }
        std::vector<double> x_next;
        try {
            x_next = envsim::step(model, x, u, noise_ptr);
        } catch (const SimulationFault& f) {
            throw SimulationFault("episode step " + std::to_string(t) + ": " + f.what());
        }
        const double y_next = envsim::observe(model, x_next);
        const double r = envsim::reward(y_next, y_ref);
        integ = control::update_integrator(integ, y_ref - y_next);

        ppo::TransitionRecord rec;
        rec.x_ext = std::move(xt);
        rec.y_ref = y_ref;
        rec.u = u_raw;
        rec.prior_u = kappa;
        rec.log_prob_old = log_prob;
        rec.reward = r;
        rec.value_pred = agent.value ? agent.value->value(rec.x_ext, y_ref) : 0.0;
        rec.done = (t + 1 == steps);
        out.data.steps.push_back(std::move(rec));

        out.trace.push_back({t, y_next, y_ref, u, integ.z, r});
        out.return_sum += r;
        x = std::move(x_next);
    }
    if (agent.value && steps > 0) {
        const control::ExtendedState xT =
            control::extend(envsim::policy_state(model, x), integ.z);
        out.data.bootstrap_value = agent.value->value(xT, yref_schedule.back());
    }
    return out;
}

/// One training episode: constant set-point for config.horizon steps.
inline EpisodeResult run_episode(const envsim::PlantModel& model, const Agent& agent,
                                 double y_ref, const ExperimentConfig& config, Rng rng) {
    return run_schedule(model, agent, std::vector<double>(config.horizon, y_ref), config,
                        std::move(rng));
}

inline void write_trajectory_header(std::ostream& os) {
    os << "t,y,y_ref,u,z,reward,model_id,seed\n";
}

inline void write_trajectory_rows(std::ostream& os, const std::vector<StepRow>& trace,
                                  int model_id, std::uint64_t seed) {
    for (const auto& r : trace)
        os << r.t << ',' << fmt9(r.y) << ',' << fmt9(r.y_ref) << ',' << fmt9(r.u) << ','
           << fmt9(r.z) << ',' << fmt9(r.reward) << ',' << model_id << ',' << seed << "\n";
}

} // namespace pime::harness
