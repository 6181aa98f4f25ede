#include <catch_amalgamated.hpp>

#include "pime/nn/gaussian.hpp"
#include "pime/nn/value.hpp"
#include "pime/ppo/update.hpp"

using namespace pime;
using namespace pime::ppo;
using namespace pime::nn;

namespace {

Normalizer unit_norm(int n_x) {
    Normalizer n;
    n.x_ranges.assign(n_x, Range{-1.0, 1.0});
    n.yref_range = {-1.0, 1.0};
    n.z_bound = 1.0;
    return n;
}

GaussianPolicy make_policy(std::uint64_t seed, double log_std = -0.5) {
    ModularNet net(2, {8, 8}, {4, 4}, {8, 8}, 1);
    GaussianPolicy p(std::move(net), unit_norm(1), log_std);
    Rng rng(seed);
    p.init_weights(rng);
    // non-zero trunk output layer so the mean depends on the state
    auto params = p.params();
    Rng r2(seed + 1);
    for (std::size_t i = params.size() - 10; i + 1 < params.size(); ++i)
        params[i] = 0.1 * r2.gaussian();
    return p;
}

ValueNet make_value(std::uint64_t seed) {
    ValueNet v(1, {8, 8}, unit_norm(1));
    Rng rng(seed);
    v.init_weights(rng);
    return v;
}

/// Batch collected "on-policy": log_prob_old comes from the same parameters,
/// so the ratio at unchanged parameters is exactly one.
RolloutBatch onpolicy_batch(GaussianPolicy& policy, ValueNet& value, int episodes, int steps,
                            std::uint64_t seed) {
    RolloutBatch batch;
    Rng rng(seed);
    for (int e = 0; e < episodes; ++e) {
        EpisodeData ep;
        for (int t = 0; t < steps; ++t) {
            TransitionRecord tr;
            tr.x_ext = control::extend({rng.uniform(-1.0, 1.0)}, rng.uniform(-1.0, 1.0));
            tr.y_ref = rng.uniform(-1.0, 1.0);
            tr.prior_u = 0.3;
            const double mean = tr.prior_u + policy.mean_g(tr.x_ext, tr.y_ref);
            const SampledAction a = sample_action(policy, mean, rng);
            tr.u = a.u;
            tr.log_prob_old = a.log_prob;
            tr.reward = rng.uniform(-2.0, 0.0);
            tr.value_pred = value.value(tr.x_ext, tr.y_ref);
            tr.done = (t + 1 == steps);
            ep.steps.push_back(std::move(tr));
        }
        ep.bootstrap_value = rng.uniform(-1.0, 1.0);
        batch.episodes.push_back(std::move(ep));
    }
    finalize_batch(batch, 0.99, 0.97);
    return batch;
}

std::vector<std::size_t> all_indices(const RolloutBatch& b) {
    std::vector<std::size_t> idx(b.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    return idx;
}

} // namespace

TEST_CASE("ratio is exactly one at unchanged parameters; surrogate = -mean(A)") {
    GaussianPolicy policy = make_policy(61);
    ValueNet value = make_value(62);
    RolloutBatch batch = onpolicy_batch(policy, value, 2, 16, 63);
    const std::vector<double> adv = normalized_advantages(batch);
    PpoHyper hp;
    const auto idx = all_indices(batch);
    const LossDiag d = ppo_loss(batch, idx, adv, policy, value, hp);
    double mean_adv = 0.0;
    for (double a : adv) mean_adv += a;
    mean_adv /= static_cast<double>(adv.size());
    REQUIRE(d.policy_loss == Catch::Approx(-mean_adv).margin(1e-12));
    REQUIRE(d.clip_frac == 0.0);
    REQUIRE(d.approx_kl == Catch::Approx(0.0).margin(1e-12));
}

TEST_CASE("clip arithmetic: rho = 1.5, A = 1, eps = 0.2 contributes 1.2") {
    GaussianPolicy policy = make_policy(64);
    ValueNet value = make_value(65);
    RolloutBatch batch = onpolicy_batch(policy, value, 1, 1, 66);
    // rebias the stored log-prob so the recomputed ratio is exactly 1.5
    batch.episodes[0].steps[0].log_prob_old -= std::log(1.5);
    std::vector<double> adv{1.0};
    PpoHyper hp;
    const auto idx = all_indices(batch);
    const LossDiag d = ppo_loss(batch, idx, adv, policy, value, hp);
    REQUIRE(d.policy_loss == Catch::Approx(-1.2).margin(1e-9));
    REQUIRE(d.clip_frac == 1.0);
}

TEST_CASE("three-sample hand batch matches an independent evaluation") {
    GaussianPolicy policy = make_policy(67, std::log(0.8));
    ValueNet value = make_value(68);
    RolloutBatch batch = onpolicy_batch(policy, value, 1, 3, 69);

    const double rho[3] = {0.9, 1.4, 1.0};
    const double adv_in[3] = {-0.7, 1.3, 0.4};
    const double targets[3] = {-1.0, 0.5, 2.0};
    std::vector<double> adv(3);
    for (int i = 0; i < 3; ++i) {
        batch.episodes[0].steps[i].log_prob_old -= std::log(rho[i]);
        adv[i] = adv_in[i];
        batch.returns[i] = targets[i];
    }
    PpoHyper hp; // eps=0.2, c1=1, c2=0.02
    const auto idx = all_indices(batch);
    const LossDiag d = ppo_loss(batch, idx, adv, policy, value, hp);

    // spreadsheet-style evaluation of the same formulas
    double surr = 0.0, vloss = 0.0;
    for (int i = 0; i < 3; ++i) {
        const double clipped = std::clamp(rho[i], 0.8, 1.2);
        surr += std::min(rho[i] * adv_in[i], clipped * adv_in[i]);
        const auto& tr = batch.episodes[0].steps[i];
        control::ExtendedState s = tr.x_ext;
        const double v = value.value(s, tr.y_ref);
        vloss += (v - targets[i]) * (v - targets[i]);
    }
    const double entropy = 0.5 * std::log(2.0 * 3.14159265358979323846) + 0.5 + std::log(0.8);
    const double expected = -surr / 3.0 + hp.c1 * vloss / 3.0 - hp.c2 * entropy;
    REQUIRE(d.total == Catch::Approx(expected).margin(1e-12));
}

TEST_CASE("surrogate depends on (rho, A) only") {
    PpoHyper hp;
    const double rho[4] = {0.85, 1.1, 1.35, 1.0};
    const double adv_arr[4] = {0.4, -1.2, 0.9, -0.1};
    double losses[2];
    for (int variant = 0; variant < 2; ++variant) {
        GaussianPolicy policy = make_policy(70 + variant * 10, variant ? -1.5 : -0.2);
        ValueNet value = make_value(71 + variant * 10);
        RolloutBatch batch = onpolicy_batch(policy, value, 1, 4, 72 + variant * 10);
        std::vector<double> adv(4);
        for (int i = 0; i < 4; ++i) {
            batch.episodes[0].steps[i].log_prob_old -= std::log(rho[i]);
            adv[i] = adv_arr[i];
        }
        const auto idx = all_indices(batch);
        losses[variant] = ppo_loss(batch, idx, adv, policy, value, hp).policy_loss;
    }
    REQUIRE(losses[0] == Catch::Approx(losses[1]).margin(1e-12));
}

TEST_CASE("advantage normalization: mean zero, std one") {
    GaussianPolicy policy = make_policy(73);
    ValueNet value = make_value(74);
    RolloutBatch batch = onpolicy_batch(policy, value, 3, 20, 75);
    const std::vector<double> adv = normalized_advantages(batch);
    double mean = 0.0;
    for (double a : adv) mean += a;
    mean /= static_cast<double>(adv.size());
    double ss = 0.0;
    for (double a : adv) ss += (a - mean) * (a - mean);
    const double sd = std::sqrt(ss / static_cast<double>(adv.size()));
    REQUIRE(std::abs(mean) <= 1e-10);
    REQUIRE(std::abs(sd - 1.0) <= 1e-6);
}

TEST_CASE("zero advantages and perfect values: only the entropy term moves parameters") {
    GaussianPolicy policy = make_policy(76);
    ValueNet value = make_value(77);
    RolloutBatch batch = onpolicy_batch(policy, value, 2, 10, 78);
    // zero advantage everywhere, targets equal to current predictions
    for (std::size_t i = 0; i < batch.size(); ++i) {
        batch.advantages[i] = 0.0;
        TransitionRecord& tr = batch.episodes[batch.flat[i].first].steps[batch.flat[i].second];
        batch.returns[i] = value.value(tr.x_ext, tr.y_ref);
    }
    PpoHyper hp;
    hp.epochs = 1;
    hp.minibatch = 64;

    SECTION("with c2 = 0 parameters are unchanged") {
        hp.c2 = 0.0;
        const std::vector<double> before(policy.params().begin(), policy.params().end());
        const std::vector<double> vbefore(value.params().begin(), value.params().end());
        AdamState po(policy.param_count(), hp.stepsize), vo(value.param_count(), hp.stepsize);
        Rng rng(79);
        update(policy, value, batch, hp, po, vo, rng);
        for (std::size_t i = 0; i < before.size(); ++i) REQUIRE(policy.params()[i] == before[i]);
        for (std::size_t i = 0; i < vbefore.size(); ++i) REQUIRE(value.params()[i] == vbefore[i]);
    }
    SECTION("with c2 > 0 only log_std moves") {
        hp.c2 = 0.02;
        const std::vector<double> before(policy.params().begin(), policy.params().end());
        AdamState po(policy.param_count(), hp.stepsize), vo(value.param_count(), hp.stepsize);
        Rng rng(80);
        update(policy, value, batch, hp, po, vo, rng);
        for (std::size_t i = 0; i + 1 < before.size(); ++i)
            REQUIRE(policy.params()[i] == before[i]);
        REQUIRE(policy.params().back() > before.back()); // entropy bonus grows sigma
    }
}

TEST_CASE("updates are deterministic under identical seeds") {
    for (int run = 0; run < 1; ++run) {
        GaussianPolicy p1 = make_policy(81), p2 = make_policy(81);
        ValueNet v1 = make_value(82), v2 = make_value(82);
        RolloutBatch b1 = onpolicy_batch(p1, v1, 2, 16, 83);
        RolloutBatch b2 = onpolicy_batch(p2, v2, 2, 16, 83);
        PpoHyper hp;
        hp.epochs = 3;
        hp.minibatch = 8;
        AdamState po1(p1.param_count(), hp.stepsize), vo1(v1.param_count(), hp.stepsize);
        AdamState po2(p2.param_count(), hp.stepsize), vo2(v2.param_count(), hp.stepsize);
        Rng r1(84), r2(84);
        update(p1, v1, b1, hp, po1, vo1, r1);
        update(p2, v2, b2, hp, po2, vo2, r2);
        for (std::size_t i = 0; i < p1.param_count(); ++i)
            REQUIRE(p1.params()[i] == p2.params()[i]);
        for (std::size_t i = 0; i < v1.param_count(); ++i)
            REQUIRE(v1.params()[i] == v2.params()[i]);
    }
}

TEST_CASE("one small-step update decreases the batch loss") {
    GaussianPolicy policy = make_policy(85);
    ValueNet value = make_value(86);
    RolloutBatch batch = onpolicy_batch(policy, value, 2, 24, 87);
    PpoHyper hp;
    hp.epochs = 1;
    hp.minibatch = 1024; // one minibatch = one gradient step
    hp.stepsize = 1e-5;
    const std::vector<double> adv = normalized_advantages(batch);
    const auto idx = all_indices(batch);
    const double before = ppo_loss(batch, idx, adv, policy, value, hp).total;
    AdamState po(policy.param_count(), hp.stepsize), vo(value.param_count(), hp.stepsize);
    Rng rng(88);
    update(policy, value, batch, hp, po, vo, rng);
    const double after = ppo_loss(batch, idx, adv, policy, value, hp).total;
    REQUIRE(after < before);
}

TEST_CASE("non-finite rewards surface as numeric errors") {
    GaussianPolicy policy = make_policy(89);
    ValueNet value = make_value(90);
    RolloutBatch batch = onpolicy_batch(policy, value, 1, 4, 91);
    batch.episodes[0].steps[2].reward = std::nan("");
    finalize_batch(batch, 0.99, 0.97);
    const std::vector<double> adv = normalized_advantages(batch);
    PpoHyper hp;
    const auto idx = all_indices(batch);
    REQUIRE_THROWS_AS(ppo_loss(batch, idx, adv, policy, value, hp), NumericError);
}

TEST_CASE("update restores parameters when a numeric fault aborts the iteration") {
    GaussianPolicy policy = make_policy(92);
    ValueNet value = make_value(93);
    RolloutBatch batch = onpolicy_batch(policy, value, 1, 8, 94);
    batch.episodes[0].steps[5].reward = std::nan("");
    finalize_batch(batch, 0.99, 0.97);
    const std::vector<double> before(policy.params().begin(), policy.params().end());
    PpoHyper hp;
    hp.epochs = 2;
    hp.minibatch = 4;
    AdamState po(policy.param_count(), hp.stepsize), vo(value.param_count(), hp.stepsize);
    Rng rng(95);
    REQUIRE_THROWS_AS(update(policy, value, batch, hp, po, vo, rng), NumericError);
    for (std::size_t i = 0; i < before.size(); ++i) REQUIRE(policy.params()[i] == before[i]);
}
