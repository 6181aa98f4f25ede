#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "pime/harness/evaluate.hpp"

using namespace pime;
using namespace pime::harness;
using pime::envsim::PlantKind;

namespace {

ExperimentConfig tank_cfg() {
    ExperimentConfig c = default_config(PlantKind::CascadedTanks);
    c.seed = 11;
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

TEST_CASE("a plant-inverting controller from the equilibrium start has zero steady-state error") {
    ExperimentConfig c = tank_cfg();
    c.reset_ranges = {{4.0, 4.0}, {4.0, 4.0}}; // start exactly at the target equilibrium
    envsim::SetpointSpec trace;
    trace.y_lo = 1.0;
    trace.y_hi = 12.0;
    trace.eval_levels = {4.0};
    trace.segment_len = 60;

    const envsim::PlantModel m = fixed_tank();
    const double u_star = m.tank.p1 * std::sqrt(2.0 * m.tank.g * 4.0) / m.tank.p3;
    Agent oracle;
    oracle.custom = [&](const control::ExtendedState&, double) { return u_star; };

    const EvalReport r = evaluate_on_model(oracle, c, m, trace, Rng(1));
    REQUIRE(r.rows.size() == 1);
    REQUIRE(r.rows[0].sse <= 1e-9);
    REQUIRE(r.rows[0].overshoot <= 1e-9);
    REQUIRE(r.rows[0].settling_steps == 0);
}

TEST_CASE("the pure P prior keeps a strictly positive steady-state error") {
    ExperimentConfig c = tank_cfg();
    Agent prior;
    prior.prior = c.prior; // kp = 0.5, no integral action
    envsim::SetpointSpec trace = c.setpoints;
    const EvalReport r = evaluate_on_model(prior, c, fixed_tank(), trace, Rng(2));
    REQUIRE(r.rows.size() == trace.eval_levels.size());
    double max_sse = 0.0;
    for (const auto& m : r.rows) max_sse = std::max(max_sse, m.sse);
    REQUIRE(max_sse > 0.5); // the static error of an untuned P law is visible
}

TEST_CASE("evaluate: n_models = 1 equals the single trajectory's metrics") {
    ExperimentConfig c = tank_cfg();
    Agent prior;
    prior.prior = c.prior;
    const EvalReport r = evaluate(prior, c, 1, c.setpoints);
    REQUIRE(r.episode_returns.size() == 1);
    REQUIRE(r.rows.size() == c.setpoints.eval_levels.size());
    const Aggregate agg = aggregate(r.episode_returns);
    REQUIRE(agg.mean == r.episode_returns[0]);
    REQUIRE(agg.stddev == 0.0);
    double sum_seg = 0.0;
    for (const auto& m : r.rows) sum_seg += m.segment_return;
    REQUIRE(sum_seg == Catch::Approx(r.episode_returns[0]).margin(1e-9));
}

TEST_CASE("evaluate is deterministic and writes trajectory files on request") {
    namespace fs = std::filesystem;
    ExperimentConfig c = tank_cfg();
    Agent prior;
    prior.prior = c.prior;
    const fs::path dir = fs::temp_directory_path() / "pime_eval_out";
    fs::remove_all(dir);
    const EvalReport a = evaluate(prior, c, 3, c.setpoints, dir.string());
    const EvalReport b = evaluate(prior, c, 3, c.setpoints);
    REQUIRE(a.episode_returns == b.episode_returns);
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        REQUIRE(a.rows[i].sse == b.rows[i].sse);
        REQUIRE(a.rows[i].overshoot == b.rows[i].overshoot);
    }
    REQUIRE(fs::exists(dir / "traj_model_0000.csv"));
    REQUIRE(fs::exists(dir / "traj_model_0002.csv"));
    std::ifstream tf(dir / "traj_model_0000.csv");
    std::string header;
    std::getline(tf, header);
    REQUIRE(header == "t,y,y_ref,u,z,reward,model_id,seed");
    fs::remove_all(dir);
}

TEST_CASE("report save/load round trip") {
    namespace fs = std::filesystem;
    ExperimentConfig c = tank_cfg();
    Agent prior;
    prior.prior = c.prior;
    const EvalReport r = evaluate(prior, c, 2, c.setpoints);
    const fs::path path = fs::temp_directory_path() / "pime_report.csv";
    save_report(r, path.string());
    const EvalReport l = load_report(path.string());
    REQUIRE(l.levels == r.levels);
    REQUIRE(l.segment_len == r.segment_len);
    REQUIRE(l.rows.size() == r.rows.size());
    for (std::size_t i = 0; i < r.rows.size(); ++i) {
        REQUIRE(l.rows[i].model_id == r.rows[i].model_id);
        REQUIRE(l.rows[i].segment == r.rows[i].segment);
        REQUIRE(l.rows[i].sse == Catch::Approx(r.rows[i].sse).epsilon(1e-8));
    }
    fs::remove_all(path);
}

TEST_CASE("compare: identical reports show zero differences, seeds populate the std columns") {
    ExperimentConfig c = tank_cfg();
    Agent prior;
    prior.prior = c.prior;
    const EvalReport r1 = evaluate(prior, c, 2, c.setpoints);
    c.seed = 12;
    const EvalReport r2 = evaluate(prior, c, 2, c.setpoints);

    SECTION("identical") {
        std::ostringstream os;
        compare({{"a", r1}, {"b", r1}}, os);
        std::istringstream is(os.str());
        std::string header, row;
        std::getline(is, header);
        REQUIRE(header.find("a_sse_mean") != std::string::npos);
        REQUIRE(header.find("b_sse_mean") != std::string::npos);
        std::getline(is, row);
        // a and b columns must be identical: compare the two halves
        std::vector<std::string> fields;
        std::string f;
        std::istringstream rs(row);
        while (std::getline(rs, f, ',')) fields.push_back(f);
        REQUIRE(fields.size() == 2 + 16);
        for (int k = 0; k < 8; ++k) REQUIRE(fields[2 + k] == fields[10 + k]);
    }
    SECTION("two seeds under one label produce a positive std") {
        std::ostringstream os;
        compare({{"prior", r1}, {"prior", r2}}, os);
        std::istringstream is(os.str());
        std::string line;
        std::getline(is, line); // header
        std::getline(is, line); // first segment
        std::vector<std::string> fields;
        std::string f;
        std::istringstream rs(line);
        while (std::getline(rs, f, ',')) fields.push_back(f);
        // return_std column (index 3) over 4 models with different draws
        REQUIRE(std::stod(fields[3]) > 0.0);
    }
    SECTION("mismatched traces are rejected") {
        ExperimentConfig c2 = tank_cfg();
        c2.setpoints.eval_levels = {2.0, 3.0};
        const EvalReport bad = evaluate(prior, c2, 1, c2.setpoints);
        std::ostringstream os;
        REQUIRE_THROWS_AS(compare({{"a", r1}, {"b", bad}}, os), StructuralError);
    }
}

TEST_CASE("segment metrics: overshoot and settling behave sensibly") {
    ExperimentConfig c = tank_cfg();
    c.reset_ranges = {{0.0, 0.0}, {0.0, 0.0}};
    // an aggressive custom law that overshoots: strong P with feedforward
    const envsim::PlantModel m = fixed_tank();
    Agent strong;
    strong.custom = [&](const control::ExtendedState& s, double yref) {
        const double uff = m.tank.p2 * std::sqrt(2.0 * m.tank.g * yref) / m.tank.p3;
        return uff + 3.0 * (yref - s.x[1]);
    };
    envsim::SetpointSpec trace;
    trace.y_lo = 1.0;
    trace.y_hi = 12.0;
    trace.eval_levels = {6.0};
    trace.segment_len = 120;
    const EvalReport r = evaluate_on_model(strong, c, m, trace, Rng(5));
    REQUIRE(r.rows[0].overshoot >= 0.0);
    REQUIRE(r.rows[0].settling_steps < 120);
    REQUIRE(r.rows[0].sse < 0.5);
}
