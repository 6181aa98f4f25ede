#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "pime/nn/adam.hpp"
#include "pime/nn/gaussian.hpp"
#include "pime/nn/value.hpp"
#include "pime/ppo/gae.hpp"
#include "pime/ppo/types.hpp"
#include "pime/rng.hpp"

namespace pime::ppo {

struct LossDiag {
    double total = 0.0;
    double policy_loss = 0.0; // -surrogate
    double value_loss = 0.0;  // unweighted MSE
    double entropy = 0.0;
    double clip_frac = 0.0;
    double approx_kl = 0.0;
};

/// Clipped-surrogate PPO loss over the given batch indices:
///   loss = -mean(min(rho*A, clip(rho)*A)) + c1*mean((V-target)^2) - c2*mean(H)
/// with rho = exp(logp_new - logp_old). `advantages` must be aligned with the
/// batch's flat order (normalized by the caller). When grad outputs are
/// non-null, gradients are accumulated into them (averaged over the slice).
inline LossDiag ppo_loss(const RolloutBatch& batch, std::span<const std::size_t> indices,
                         std::span<const double> advantages, nn::GaussianPolicy& policy,
                         nn::ValueNet& value_net, const PpoHyper& hp,
                         std::vector<double>* grad_policy = nullptr,
                         std::vector<double>* grad_value = nullptr) {
    if (!batch.finalized) throw StructuralError("ppo_loss: batch not finalized");
    if (advantages.size() != batch.size())
        throw StructuralError("ppo_loss: advantage array does not match batch");
    if (indices.empty()) throw StructuralError("ppo_loss: empty index slice");
    if (grad_policy) grad_policy->assign(policy.param_count(), 0.0);
    if (grad_value) grad_value->assign(value_net.param_count(), 0.0);

    const double inv_n = 1.0 / static_cast<double>(indices.size());
    const double sigma = policy.sigma();
    const double inv_sig2 = 1.0 / (sigma * sigma);
    const bool std_interior = policy.log_std_interior();

    LossDiag d;
    double surrogate = 0.0, vloss = 0.0, kl = 0.0;
    std::size_t clipped = 0;
    double dlog_std = 0.0;

    for (std::size_t idx : indices) {
        const TransitionRecord& tr = batch.at(idx);
        const double adv = advantages[idx];

        const double g = policy.mean_g(tr.x_ext, tr.y_ref);
        const double mean = tr.prior_u + g;
        const double logp = nn::gaussian_log_prob(mean, sigma, tr.u);
        const double rho = std::exp(logp - tr.log_prob_old);
        const double rho_clip = std::clamp(rho, 1.0 - hp.clip_eps, 1.0 + hp.clip_eps);
        const double s_un = rho * adv;
        const double s_cl = rho_clip * adv;
        surrogate += std::min(s_un, s_cl);
        kl += tr.log_prob_old - logp;
        if (rho < 1.0 - hp.clip_eps || rho > 1.0 + hp.clip_eps) ++clipped;

        const double v = value_net.value(tr.x_ext, tr.y_ref);
        const double verr = v - batch.returns[idx];
        vloss += verr * verr;

        if (grad_policy) {
            // min() routes the gradient to the unclipped branch only when it
            // is the active one; the clipped branch has zero rho-derivative.
            if (s_un <= s_cl) {
                const double dl_drho = -adv * inv_n;
                const double dl_dlogp = dl_drho * rho;
                const double dl_dmean = dl_dlogp * (tr.u - mean) * inv_sig2;
                policy.backward_mean(dl_dmean, *grad_policy);
                if (std_interior) {
                    const double dd = (tr.u - mean) * (tr.u - mean) * inv_sig2;
                    dlog_std += dl_dlogp * (dd - 1.0);
                }
            }
        }
        if (grad_value) value_net.backward(2.0 * hp.c1 * verr * inv_n, *grad_value);
    }

    if (grad_policy && std_interior) dlog_std += -hp.c2; // entropy bonus, dH/dlog_std = 1
    if (grad_policy) (*grad_policy)[policy.param_count() - 1] = dlog_std;

    d.policy_loss = -surrogate * inv_n;
    d.value_loss = vloss * inv_n;
    d.entropy = policy.entropy();
    d.clip_frac = static_cast<double>(clipped) * inv_n;
    d.approx_kl = kl * inv_n;
    d.total = d.policy_loss + hp.c1 * d.value_loss - hp.c2 * d.entropy;
    if (!finite(d.policy_loss))
        throw NumericError("ppo_loss: non-finite policy surrogate");
    if (!finite(d.value_loss)) throw NumericError("ppo_loss: non-finite value loss");
    if (!finite(d.total)) throw NumericError("ppo_loss: non-finite total loss");
    return d;
}

/// Normalize advantages to mean 0, std 1 over the whole update batch.
inline std::vector<double> normalized_advantages(const RolloutBatch& batch) {
    std::vector<double> adv(batch.advantages);
    const std::size_t n = adv.size();
    if (n == 0) throw StructuralError("normalized_advantages: empty batch");
    if (n == 1) return adv;
    double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(n);
    double ss = 0.0;
    for (double& a : adv) {
        a -= mean;
        ss += a * a;
    }
    double sd = std::sqrt(ss / static_cast<double>(n));
    if (sd < 1e-12) sd = 1e-12;
    for (double& a : adv) a /= sd;
    return adv;
}

struct UpdateDiag {
    double policy_loss = 0.0;
    double value_loss = 0.0;
    double entropy = 0.0;
    double clip_frac = 0.0;
    double approx_kl = 0.0;
    int minibatches = 0;
};

/// The PPO update driver: `epochs` passes over the batch in shuffled
/// minibatches, one Adam step per minibatch. Deterministic under a fixed
/// shuffle stream. On a numeric fault the parameters are restored to their
/// pre-update values before rethrowing.
inline UpdateDiag update(nn::GaussianPolicy& policy, nn::ValueNet& value_net,
                         const RolloutBatch& batch, const PpoHyper& hp,
                         nn::AdamState& policy_opt, nn::AdamState& value_opt, Rng& shuffle_rng) {
    validate(hp);
    if (!batch.finalized) throw StructuralError("update: batch not finalized");
    const std::vector<double> adv = normalized_advantages(batch);

    const std::vector<double> policy_backup(policy.params().begin(), policy.params().end());
    const std::vector<double> value_backup(value_net.params().begin(), value_net.params().end());

    UpdateDiag out;
    std::vector<std::size_t> order(batch.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<double> gp, gv;
    try {
        for (int epoch = 0; epoch < hp.epochs; ++epoch) {
            shuffle(order, shuffle_rng);
            for (std::size_t start = 0; start < order.size();
                 start += static_cast<std::size_t>(hp.minibatch)) {
                const std::size_t end =
                    std::min(order.size(), start + static_cast<std::size_t>(hp.minibatch));
                std::span<const std::size_t> slice(order.data() + start, end - start);
                const LossDiag d = ppo_loss(batch, slice, adv, policy, value_net, hp, &gp, &gv);
                nn::adam_step(policy_opt, policy.params(), gp);
                nn::adam_step(value_opt, value_net.params(), gv);
                out.policy_loss += d.policy_loss;
                out.value_loss += d.value_loss;
                out.entropy += d.entropy;
                out.clip_frac += d.clip_frac;
                out.approx_kl += d.approx_kl;
                out.minibatches += 1;
            }
        }
    } catch (const NumericError&) {
        std::copy(policy_backup.begin(), policy_backup.end(), policy.params().begin());
        std::copy(value_backup.begin(), value_backup.end(), value_net.params().begin());
        throw;
    }
    if (out.minibatches > 0) {
        const double inv = 1.0 / out.minibatches;
        out.policy_loss *= inv;
        out.value_loss *= inv;
        out.entropy *= inv;
        out.clip_frac *= inv;
        out.approx_kl *= inv;
    }
    return out;
}

} // namespace pime::ppo
