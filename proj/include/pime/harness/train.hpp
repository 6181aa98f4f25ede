#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "pime/harness/config.hpp"
#include "pime/harness/csv.hpp"
#include "pime/harness/episode.hpp"
#include "pime/nn/adam.hpp"
#include "pime/nn/serialize.hpp"
#include "pime/ppo/update.hpp"

namespace pime::harness {

// Substream labels; keep stable so results are reproducible across versions.
namespace stream {
inline constexpr std::uint64_t kPolicyInit = 1;
inline constexpr std::uint64_t kValueInit = 2;
inline constexpr std::uint64_t kFixedModel = 3;
inline constexpr std::uint64_t kEpisode = 4;
inline constexpr std::uint64_t kUpdate = 5;
inline constexpr std::uint64_t kEval = 6;
} // namespace stream

inline nn::GaussianPolicy build_policy(const ExperimentConfig& c) {
    const int n_x = envsim::state_dim(c.kind);
    nn::ModularNet net(n_x + 1, {64, 64}, {16, 16}, {64, 64}, 1);
    const double log_std_init = std::log(0.05 * action_range(c).width());
    const double action_scale = 0.5 * action_range(c).width();
    return nn::GaussianPolicy(std::move(net), make_normalizer(c), log_std_init, action_scale);
}

inline nn::ValueNet build_value(const ExperimentConfig& c) {
    // expected return magnitude: a mid-size squared tracking error over the
    // effective horizon min(T, 1/(1-gamma))
    const double horizon_eff =
        c.ppo.gamma < 1.0 ? std::min(static_cast<double>(c.horizon), 1.0 / (1.0 - c.ppo.gamma))
                          : static_cast<double>(c.horizon);
    const double err = 0.25 * (c.setpoints.y_hi - c.setpoints.y_lo);
    const double scale = std::max(1.0, horizon_eff * err * err);
    return nn::ValueNet(envsim::state_dim(c.kind), {64, 64}, make_normalizer(c), scale);
}

/// Initialize policy/value weights from the config seed. The trunk output
/// layer is zero, so the composed mean starts exactly at the prior.
inline void init_agent_weights(nn::GaussianPolicy& policy, nn::ValueNet& value,
                               const ExperimentConfig& c) {
    Rng root(c.seed);
    Rng pr = root.substream({stream::kPolicyInit});
    policy.init_weights(pr);
    Rng vr = root.substream({stream::kValueInit});
    value.init_weights(vr);
}

inline void apply_sim_options(envsim::PlantModel& m, const ExperimentConfig& c) {
    m.noise_std.assign(envsim::state_dim(m.kind), c.noise_std);
    m.substeps = c.substeps;
}

struct IterationDiag {
    int iteration = 0;
    long env_steps = 0;
    double mean_return = 0.0;
    double std_return = 0.0;
    ppo::UpdateDiag update;
    double sigma = 0.0;
};

struct TrainResult {
    nn::GaussianPolicy policy;
    nn::ValueNet value;
    std::vector<IterationDiag> diagnostics;
};

inline std::string checkpoint_path(const std::string& out_dir, int iteration) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "policy_iter_%06d.txt", iteration);
    return out_dir + "/" + buf;
}

/// The training loop: per iteration, M episodes with freshly sampled
/// (set-point, model) pairs — or one fixed model under the ablation flag —
/// followed by one PPO update. Episodes draw from substreams keyed by
/// (seed, iteration, episode), so results do not depend on collection order.
inline TrainResult train(const ExperimentConfig& config) {
    validate_config(config);
    std::filesystem::create_directories(config.out_dir);

    TrainResult res{build_policy(config), build_value(config), {}};
    init_agent_weights(res.policy, res.value, config);

    Rng root(config.seed);
    envsim::PlantModel fixed_model;
    if (config.fix_single_model) {
        Rng fr = root.substream({stream::kFixedModel});
        fixed_model = envsim::sample_model(config.ensemble, fr);
        fixed_model.model_id = 0;
        apply_sim_options(fixed_model, config);
    }

    nn::AdamState policy_opt(res.policy.param_count(), config.ppo.stepsize);
    nn::AdamState value_opt(res.value.param_count(), config.ppo.stepsize);

    const int M = config.episodes_per_iter;
    const long steps_per_iter = static_cast<long>(M) * config.horizon;
    const int iterations = static_cast<int>(config.total_steps / steps_per_iter);

    const std::string diag_path = config.out_dir + "/diagnostics.csv";
    std::ofstream diag = open_csv(diag_path);
    diag << "iteration,env_steps,mean_return,std_return,policy_loss,value_loss,entropy,"
            "clip_frac,approx_kl,sigma\n";

    Agent agent;
    agent.policy = &res.policy;
    agent.value = &res.value;
    agent.prior = config.prior;
    agent.use_prior = !config.disable_prior;

    for (int it = 0; it < iterations; ++it) {
        ppo::RolloutBatch batch;
        batch.episodes.reserve(M);
        std::vector<double> returns(M);
        for (int m = 0; m < M; ++m) {
            Rng ep_rng = root.substream({stream::kEpisode,
                                         static_cast<std::uint64_t>(it),
                                         static_cast<std::uint64_t>(m)});
            const double y_ref = envsim::sample_setpoint(config.setpoints, ep_rng);
            envsim::PlantModel model;
            if (config.fix_single_model) {
                model = fixed_model;
            } else {
                model = envsim::sample_model(config.ensemble, ep_rng);
                model.model_id = it * M + m + 1;
                apply_sim_options(model, config);
            }
            EpisodeResult ep = run_episode(model, agent, y_ref, config, std::move(ep_rng));
            returns[m] = ep.return_sum;
            batch.episodes.push_back(std::move(ep.data));
        }
        ppo::finalize_batch(batch, config.ppo.gamma, config.ppo.lambda);

        Rng up_rng = root.substream({stream::kUpdate, static_cast<std::uint64_t>(it)});
        const ppo::UpdateDiag ud =
            ppo::update(res.policy, res.value, batch, config.ppo, policy_opt, value_opt, up_rng);

        IterationDiag d;
        d.iteration = it;
        d.env_steps = static_cast<long>(it + 1) * steps_per_iter;
        double mean = 0.0;
        for (double r : returns) mean += r;
        mean /= M;
        double ss = 0.0;
        for (double r : returns) ss += (r - mean) * (r - mean);
        d.mean_return = mean;
        d.std_return = std::sqrt(ss / M);
        d.update = ud;
        d.sigma = res.policy.sigma();
        res.diagnostics.push_back(d);

        diag << d.iteration << ',' << d.env_steps << ',' << fmt9(d.mean_return) << ','
             << fmt9(d.std_return) << ',' << fmt9(ud.policy_loss) << ',' << fmt9(ud.value_loss)
             << ',' << fmt9(ud.entropy) << ',' << fmt9(ud.clip_frac) << ','
             << fmt9(ud.approx_kl) << ',' << fmt9(d.sigma) << "\n";
        if (!diag) throw IoError("failed writing " + diag_path);

        if ((it + 1) % config.checkpoint_every == 0)
            nn::save_policy(res.policy, checkpoint_path(config.out_dir, it + 1));
    }
    nn::save_policy(res.policy, config.out_dir + "/policy_final.txt");
    nn::save_value(res.value, config.out_dir + "/value_final.txt");
    return res;
}

} // namespace pime::harness
