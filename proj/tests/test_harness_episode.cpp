#include <catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "pime/harness/episode.hpp"
#include "pime/harness/train.hpp"

using namespace pime;
using namespace pime::harness;
using pime::envsim::PlantKind;

namespace {

ExperimentConfig small_tank_config() {
    ExperimentConfig c = default_config(PlantKind::CascadedTanks);
    c.horizon = 40;
    c.episodes_per_iter = 2;
    c.total_steps = 160; // 2 iterations
    c.seed = 5;
    return c;
}

envsim::PlantModel fixed_tank() {
    envsim::PlantModel m;
    m.kind = PlantKind::CascadedTanks;
    m.tank.p1 = 0.002;
    m.tank.p2 = 0.002;
    m.tank.p3 = 0.1;
    m.dt = 2.0;
    m.noise_std = {0.0, 0.0};
    return m;
}

} // namespace

TEST_CASE("zero-initialized policy reproduces the prior controller exactly") {
    const ExperimentConfig c = small_tank_config();
    nn::GaussianPolicy policy = build_policy(c);
    nn::ValueNet value = build_value(c);
    init_agent_weights(policy, value, c);

    Agent with_policy;
    with_policy.policy = &policy;
    with_policy.prior = c.prior;
    with_policy.deterministic = true;

    Agent prior_only;
    prior_only.prior = c.prior;

    const envsim::PlantModel m = fixed_tank();
    Rng rng(99);
    const EpisodeResult a = run_episode(m, with_policy, 7.0, c, rng.substream({1}));
    const EpisodeResult b = run_episode(m, prior_only, 7.0, c, rng.substream({1}));
    REQUIRE(a.trace.size() == b.trace.size());
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        REQUIRE(std::abs(a.trace[i].y - b.trace[i].y) <= 1e-9);
        REQUIRE(std::abs(a.trace[i].u - b.trace[i].u) <= 1e-9);
        REQUIRE(std::abs(a.trace[i].z - b.trace[i].z) <= 1e-9);
    }
    REQUIRE(a.return_sum == Catch::Approx(b.return_sum).margin(1e-9));
}

TEST_CASE("disable_prior with a zero net gives a constant zero action") {
    ExperimentConfig c = small_tank_config();
    c.disable_prior = true;
    nn::GaussianPolicy policy = build_policy(c);
    nn::ValueNet value = build_value(c);
    init_agent_weights(policy, value, c);

    Agent agent;
    agent.policy = &policy;
    agent.prior = c.prior;
    agent.use_prior = false;
    agent.deterministic = true;

    const EpisodeResult r = run_episode(fixed_tank(), agent, 7.0, c, Rng(3));
    for (const auto& row : r.trace) REQUIRE(row.u == 0.0);
}

TEST_CASE("episodes are bitwise reproducible under a fixed stream") {
    const ExperimentConfig c = small_tank_config();
    nn::GaussianPolicy policy = build_policy(c);
    nn::ValueNet value = build_value(c);
    init_agent_weights(policy, value, c);
    Agent agent;
    agent.policy = &policy;
    agent.value = &value;
    agent.prior = c.prior;

    const envsim::PlantModel m = fixed_tank();
    const EpisodeResult a = run_episode(m, agent, 9.0, c, Rng(123));
    const EpisodeResult b = run_episode(m, agent, 9.0, c, Rng(123));
    REQUIRE(a.return_sum == b.return_sum);
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        REQUIRE(a.trace[i].y == b.trace[i].y);
        REQUIRE(a.trace[i].u == b.trace[i].u);
    }
    for (std::size_t i = 0; i < a.data.steps.size(); ++i) {
        REQUIRE(a.data.steps[i].u == b.data.steps[i].u);
        REQUIRE(a.data.steps[i].log_prob_old == b.data.steps[i].log_prob_old);
        REQUIRE(a.data.steps[i].value_pred == b.data.steps[i].value_pred);
    }
    REQUIRE(a.data.bootstrap_value == b.data.bootstrap_value);
}

TEST_CASE("at initialization the composed mean equals the prior on every visited state") {
    const ExperimentConfig c = small_tank_config();
    nn::GaussianPolicy policy = build_policy(c);
    nn::ValueNet value = build_value(c);
    init_agent_weights(policy, value, c);
    Agent agent;
    agent.policy = &policy;
    agent.prior = c.prior;

    const EpisodeResult r = run_episode(fixed_tank(), agent, 6.0, c, Rng(7));
    for (const auto& tr : r.data.steps) {
        // the net part must recompute to exactly zero
        REQUIRE(policy.mean_g(tr.x_ext, tr.y_ref) == 0.0);
    }
}

TEST_CASE("integrator column stays within bounds along the trace") {
    const ExperimentConfig c = small_tank_config();
    Agent agent;
    agent.prior = c.prior;
    const EpisodeResult r = run_episode(fixed_tank(), agent, 12.0, c, Rng(8));
    for (const auto& row : r.trace) {
        REQUIRE(row.z >= c.integrator_bounds.lo);
        REQUIRE(row.z <= c.integrator_bounds.hi);
    }
}

TEST_CASE("process noise consumes the stream but keeps states in the box") {
    ExperimentConfig c = small_tank_config();
    c.noise_std = 0.3;
    envsim::PlantModel m = fixed_tank();
    apply_sim_options(m, c);
    Agent agent;
    agent.prior = c.prior;
    const EpisodeResult a = run_episode(m, agent, 7.0, c, Rng(4));
    const EpisodeResult b = run_episode(m, agent, 7.0, c, Rng(4));
    bool any_diff_from_noiseless = false;
    for (const auto& row : a.trace) {
        REQUIRE(row.y >= 0.0);
        REQUIRE(row.y <= m.tank.l_max);
    }
    envsim::PlantModel quiet = fixed_tank();
    const EpisodeResult q = run_episode(quiet, agent, 7.0, c, Rng(4));
    for (std::size_t i = 0; i < a.trace.size(); ++i) {
        REQUIRE(a.trace[i].y == b.trace[i].y);
        any_diff_from_noiseless = any_diff_from_noiseless || a.trace[i].y != q.trace[i].y;
    }
    REQUIRE(any_diff_from_noiseless);
}

TEST_CASE("train: iteration accounting, checkpoints, and byte-identical reruns") {
    namespace fs = std::filesystem;
    ExperimentConfig c = small_tank_config();
    c.checkpoint_every = 1;
    const fs::path dir1 = fs::temp_directory_path() / "pime_train_t1";
    const fs::path dir2 = fs::temp_directory_path() / "pime_train_t2";
    fs::remove_all(dir1);
    fs::remove_all(dir2);

    c.out_dir = dir1.string();
    const TrainResult r1 = train(c);
    REQUIRE(r1.diagnostics.size() == 2);
    REQUIRE(r1.diagnostics[0].env_steps == 80);
    REQUIRE(r1.diagnostics[1].env_steps == 160);
    REQUIRE(fs::exists(dir1 / "policy_iter_000001.txt"));
    REQUIRE(fs::exists(dir1 / "policy_iter_000002.txt"));
    REQUIRE(fs::exists(dir1 / "policy_final.txt"));
    REQUIRE(fs::exists(dir1 / "value_final.txt"));

    c.out_dir = dir2.string();
    const TrainResult r2 = train(c);
    std::ifstream f1(dir1 / "diagnostics.csv"), f2(dir2 / "diagnostics.csv");
    std::stringstream s1, s2;
    s1 << f1.rdbuf();
    s2 << f2.rdbuf();
    REQUIRE(s1.str() == s2.str());
    REQUIRE_FALSE(s1.str().empty());
    for (std::size_t i = 0; i < r1.policy.param_count(); ++i)
        REQUIRE(r1.policy.params()[i] == r2.policy.params()[i]);
    fs::remove_all(dir1);
    fs::remove_all(dir2);
}

TEST_CASE("train honors the fixed-model ablation flag") {
    ExperimentConfig c = small_tank_config();
    c.fix_single_model = true;
    c.out_dir = (std::filesystem::temp_directory_path() / "pime_train_fix").string();
    const TrainResult r = train(c);
    REQUIRE(r.diagnostics.size() == 2);
    std::filesystem::remove_all(c.out_dir);
}
