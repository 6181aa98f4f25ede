#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "pime/common.hpp"
#include "pime/control/control.hpp"
#include "pime/envsim/plant.hpp"
#include "pime/nn/gaussian.hpp"
#include "pime/ppo/types.hpp"

namespace pime::harness {

/// Everything one experiment needs; defaults follow the published
/// hyperparameter table for each plant.
struct ExperimentConfig {
    envsim::PlantKind kind = envsim::PlantKind::CascadedTanks;
    envsim::EnsembleSpec ensemble;
    envsim::SetpointSpec setpoints;
    control::PriorController prior;
    ppo::PpoHyper ppo;
    int horizon = 200;           // T
    int episodes_per_iter = 5;   // M
    long total_steps = 400000;
    std::uint64_t seed = 0;
    Range integrator_bounds{-25.0, 25.0};
    std::vector<Range> reset_ranges;
    std::vector<Range> norm_ranges; // per state dim; input scaling for the nets
    double noise_std = 0.0;
    int substeps = 1;
    std::string out_dir = "out";
    int checkpoint_every = 10;
    double settle_tol = 0.3;
    bool disable_prior = false;
    bool fix_single_model = false;
};

inline ExperimentConfig default_config(envsim::PlantKind kind) {
    ExperimentConfig c;
    c.kind = kind;
    if (kind == envsim::PlantKind::CascadedTanks) {
        c.ensemble = envsim::default_tank_ensemble();
        c.horizon = 200;
        c.ppo.gamma = 0.995;
        c.ppo.epochs = 10;
        c.ppo.minibatch = 256;
        c.prior = {0.5, 0.0, control::PriorController::Kind::P};
        c.norm_ranges = {{0.0, 25.0}, {0.0, 25.0}};
    } else {
        c.ensemble = envsim::default_ph_ensemble();
        c.horizon = 50;
        c.ppo.gamma = 0.98;
        c.ppo.epochs = 40;
        c.ppo.minibatch = 128;
        c.prior = {-0.001, -5e-5, control::PriorController::Kind::PI};
        c.norm_ranges = {{1.0, 13.0}}; // the policy state is the measured pH
    }
    c.ppo.lambda = 0.97;
    c.ppo.clip_eps = 0.2;
    c.ppo.c1 = 1.0;
    c.ppo.c2 = 0.02;
    c.ppo.stepsize = 3e-4;
    c.setpoints = envsim::default_setpoints(kind);
    c.reset_ranges = envsim::default_reset_ranges(kind);
    return c;
}

/// Ensemble member with every randomized parameter at its interval midpoint.
inline envsim::PlantModel nominal_model(const ExperimentConfig& c) {
    std::map<std::string, double> v(c.ensemble.fixed.begin(), c.ensemble.fixed.end());
    for (const auto& r : c.ensemble.ranges) v[r.name] = 0.5 * (r.lo + r.hi);
    envsim::PlantModel m;
    m.kind = c.ensemble.kind;
    m.dt = v.at("dt");
    if (m.kind == envsim::PlantKind::CascadedTanks) {
        m.tank.p1 = v.at("p1");
        m.tank.p2 = v.at("p2");
        m.tank.p3 = v.at("p3");
        m.tank.g = v.at("g");
        m.tank.l_max = v.at("l_max");
        m.tank.u_range = {v.at("u_lo"), v.at("u_hi")};
    } else {
        m.ph.p1 = v.at("p1");
        m.ph.p2 = v.at("p2");
        m.ph.nh3 = v.at("nh3");
        m.ph.naoh = v.at("naoh");
        m.ph.k_eq = v.at("k_eq");
        m.ph.kw = v.at("kw");
        m.ph.u_range = {v.at("u_lo"), v.at("u_hi")};
        m.ph.hcl_max = v.at("hcl_max");
    }
    m.substeps = c.substeps;
    envsim::validate(m);
    return m;
}

inline Range action_range(const ExperimentConfig& c) {
    double lo = c.ensemble.fixed.at("u_lo");
    double hi = c.ensemble.fixed.at("u_hi");
    return {lo, hi};
}

inline nn::Normalizer make_normalizer(const ExperimentConfig& c) {
    nn::Normalizer n;
    n.x_ranges = c.norm_ranges;
    n.yref_range = {c.setpoints.y_lo, c.setpoints.y_hi};
    n.z_bound = std::max(std::abs(c.integrator_bounds.lo), std::abs(c.integrator_bounds.hi));
    if (n.z_bound == 0.0) n.z_bound = 1.0;
    return n;
}

inline void validate_config(const ExperimentConfig& c) {
    envsim::validate(c.ensemble);
    envsim::validate(c.setpoints);
    control::validate(c.prior);
    ppo::validate(c.ppo);
    if (c.horizon < 1) throw ConfigError("config: horizon must be >= 1");
    if (c.episodes_per_iter < 1) throw ConfigError("config: episodes_per_iter must be >= 1");
    const long chunk = static_cast<long>(c.horizon) * c.episodes_per_iter;
    if (c.total_steps < chunk || c.total_steps % chunk != 0)
        throw ConfigError("config: total_steps must be a positive multiple of horizon*episodes_per_iter (" +
                          std::to_string(chunk) + ")");
    if (!c.integrator_bounds.valid() || c.integrator_bounds.lo > 0.0 || c.integrator_bounds.hi < 0.0)
        throw ConfigError("config: integrator bounds must contain 0");
    const int n = envsim::state_dim(c.kind);
    if (static_cast<int>(c.reset_ranges.size()) != n ||
        static_cast<int>(c.norm_ranges.size()) != n)
        throw ConfigError("config: reset/norm range count must match the state dimension");
    for (const auto& r : c.reset_ranges)
        if (!r.valid()) throw ConfigError("config: invalid reset range");
    for (const auto& r : c.norm_ranges)
        if (!r.valid() || r.width() <= 0.0) throw ConfigError("config: invalid norm range");
    if (c.noise_std < 0.0) throw ConfigError("config: noise_std must be >= 0");
    if (c.substeps < 1) throw ConfigError("config: substeps must be >= 1");
    if (c.checkpoint_every < 1) throw ConfigError("config: checkpoint_every must be >= 1");
    if (!(c.settle_tol > 0.0)) throw ConfigError("config: settle_tol must be > 0");
}

// ---------------------------------------------------------------------------
// Flat key = value config file format
// ---------------------------------------------------------------------------

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

inline std::vector<double> parse_numbers(const std::string& key, const std::string& value) {
    std::vector<double> out;
    std::string item;
    std::istringstream is(value);
    while (std::getline(is, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("config: empty number in '" + key + "'");
        char* end = nullptr;
        const double v = std::strtod(item.c_str(), &end);
        if (end == item.c_str() || *end != '\0')
            throw ConfigError("config: cannot parse number '" + item + "' for '" + key + "'");
        out.push_back(v);
    }
    if (out.empty()) throw ConfigError("config: no value for '" + key + "'");
    return out;
}

inline double parse_one(const std::string& key, const std::string& value) {
    auto v = parse_numbers(key, value);
    if (v.size() != 1) throw ConfigError("config: '" + key + "' expects a single number");
    return v[0];
}

inline Range parse_range(const std::string& key, const std::string& value) {
    auto v = parse_numbers(key, value);
    if (v.size() != 2) throw ConfigError("config: '" + key + "' expects 'lo, hi'");
    return {v[0], v[1]};
}

inline bool parse_bool(const std::string& key, const std::string& value) {
    if (value == "true" || value == "1") return true;
    if (value == "false" || value == "0") return false;
    throw ConfigError("config: '" + key + "' expects true/false");
}

// shortest representation that round-trips exactly
inline std::string fmt_num(double v) {
    char buf[32];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, v);
        if (std::strtod(buf, nullptr) == v) break;
    }
    return buf;
}

} // namespace detail

/// Parse the flat `key = value` format. Lines starting with '#' and blank
/// lines are skipped. The `plant` key selects the defaults; every other key
/// overrides one field. Unknown keys are an error, listed by name.
inline ExperimentConfig parse_config(std::istream& is, const std::string& origin) {
    std::map<std::string, std::string> kv;
    std::vector<std::string> order;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = detail::trim(t.substr(0, eq));
        const std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key or value");
        if (kv.count(key))
            throw ConfigError(origin + ": duplicate key '" + key + "'");
        kv[key] = value;
        order.push_back(key);
    }

    const auto it = kv.find("plant");
    if (it == kv.end()) throw ConfigError(origin + ": missing required key 'plant'");
    envsim::PlantKind kind;
    if (it->second == "tanks") kind = envsim::PlantKind::CascadedTanks;
    else if (it->second == "ph") kind = envsim::PlantKind::PhNeutralization;
    else throw ConfigError(origin + ": plant must be 'tanks' or 'ph'");

    ExperimentConfig c = default_config(kind);
    const int n_state = envsim::state_dim(kind);

    std::vector<std::string> unknown;
    for (const std::string& key : order) {
        const std::string& value = kv[key];
        using detail::parse_bool;
        using detail::parse_numbers;
        using detail::parse_one;
        using detail::parse_range;
        if (key == "plant") continue;
        else if (key == "seed") c.seed = static_cast<std::uint64_t>(parse_one(key, value));
        else if (key == "out") c.out_dir = value;
        else if (key == "total_steps") c.total_steps = static_cast<long>(parse_one(key, value));
        else if (key == "horizon") c.horizon = static_cast<int>(parse_one(key, value));
        else if (key == "episodes_per_iter") c.episodes_per_iter = static_cast<int>(parse_one(key, value));
        else if (key == "checkpoint_every") c.checkpoint_every = static_cast<int>(parse_one(key, value));
        else if (key == "disable_prior") c.disable_prior = parse_bool(key, value);
        else if (key == "fix_single_model") c.fix_single_model = parse_bool(key, value);
        else if (key == "noise_std") c.noise_std = parse_one(key, value);
        else if (key == "substeps") c.substeps = static_cast<int>(parse_one(key, value));
        else if (key == "prior.kind") {
            if (value == "P") c.prior.kind = control::PriorController::Kind::P;
            else if (value == "PI") c.prior.kind = control::PriorController::Kind::PI;
            else throw ConfigError("config: prior.kind must be 'P' or 'PI'");
        } else if (key == "prior.kp") c.prior.kp = parse_one(key, value);
        else if (key == "prior.ki") c.prior.ki = parse_one(key, value);
        else if (key == "integrator.bounds") c.integrator_bounds = parse_range(key, value);
        else if (key == "ppo.gamma") c.ppo.gamma = parse_one(key, value);
        else if (key == "ppo.lambda") c.ppo.lambda = parse_one(key, value);
        else if (key == "ppo.clip") c.ppo.clip_eps = parse_one(key, value);
        else if (key == "ppo.c1") c.ppo.c1 = parse_one(key, value);
        else if (key == "ppo.c2") c.ppo.c2 = parse_one(key, value);
        else if (key == "ppo.epochs") c.ppo.epochs = static_cast<int>(parse_one(key, value));
        else if (key == "ppo.minibatch") c.ppo.minibatch = static_cast<int>(parse_one(key, value));
        else if (key == "ppo.stepsize") c.ppo.stepsize = parse_one(key, value);
        else if (key == "setpoint.range") {
            const Range r = parse_range(key, value);
            c.setpoints.y_lo = r.lo;
            c.setpoints.y_hi = r.hi;
        } else if (key == "setpoint.eval_levels") c.setpoints.eval_levels = parse_numbers(key, value);
        else if (key == "setpoint.segment_len") c.setpoints.segment_len = static_cast<int>(parse_one(key, value));
        else if (key == "eval.settle_tol") c.settle_tol = parse_one(key, value);
        else if (key.rfind("ensemble.", 0) == 0) {
            const std::string name = key.substr(9);
            bool known = false;
            for (auto& r : c.ensemble.ranges) known = known || r.name == name;
            known = known || c.ensemble.fixed.count(name) > 0;
            if (!known) {
                unknown.push_back(key);
                continue;
            }
            // move the parameter out of both groups, then re-add
            std::erase_if(c.ensemble.ranges, [&](const auto& r) { return r.name == name; });
            c.ensemble.fixed.erase(name);
            const auto vals = parse_numbers(key, value);
            if (vals.size() == 1) c.ensemble.fixed[name] = vals[0];
            else if (vals.size() == 2) c.ensemble.ranges.push_back({name, vals[0], vals[1]});
            else throw ConfigError("config: '" + key + "' expects one value (fixed) or 'lo, hi'");
        } else if (key.rfind("reset.state", 0) == 0 || key.rfind("norm.state", 0) == 0) {
            const bool is_reset = key[0] == 'r';
            const std::string idx_s = key.substr(is_reset ? 11 : 10);
            char* end = nullptr;
            const long idx = std::strtol(idx_s.c_str(), &end, 10);
            if (end == idx_s.c_str() || *end != '\0' || idx < 0 || idx >= n_state) {
                unknown.push_back(key);
                continue;
            }
            (is_reset ? c.reset_ranges : c.norm_ranges)[static_cast<std::size_t>(idx)] =
                parse_range(key, value);
        } else unknown.push_back(key);
    }
    if (!unknown.empty()) {
        std::string msg = origin + ": unknown configuration keys:";
        for (const auto& k : unknown) msg += " '" + k + "'";
        throw ConfigError(msg);
    }
    validate_config(c);
    return c;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file: " + path);
    return parse_config(is, path);
}

/// Serialize in the same format load_config reads; export-config prints this.
inline void write_config(const ExperimentConfig& c, std::ostream& os) {
    using detail::fmt_num;
    os << "plant = " << envsim::to_string(c.kind) << "\n";
    os << "seed = " << c.seed << "\n";
    os << "out = " << c.out_dir << "\n";
    os << "total_steps = " << c.total_steps << "\n";
    os << "horizon = " << c.horizon << "\n";
    os << "episodes_per_iter = " << c.episodes_per_iter << "\n";
    os << "checkpoint_every = " << c.checkpoint_every << "\n";
    os << "disable_prior = " << (c.disable_prior ? "true" : "false") << "\n";
    os << "fix_single_model = " << (c.fix_single_model ? "true" : "false") << "\n";
    os << "noise_std = " << fmt_num(c.noise_std) << "\n";
    os << "substeps = " << c.substeps << "\n";
    os << "prior.kind = "
       << (c.prior.kind == control::PriorController::Kind::P ? "P" : "PI") << "\n";
    os << "prior.kp = " << fmt_num(c.prior.kp) << "\n";
    os << "prior.ki = " << fmt_num(c.prior.ki) << "\n";
    os << "integrator.bounds = " << fmt_num(c.integrator_bounds.lo) << ", "
       << fmt_num(c.integrator_bounds.hi) << "\n";
    os << "ppo.gamma = " << fmt_num(c.ppo.gamma) << "\n";
    os << "ppo.lambda = " << fmt_num(c.ppo.lambda) << "\n";
    os << "ppo.clip = " << fmt_num(c.ppo.clip_eps) << "\n";
    os << "ppo.c1 = " << fmt_num(c.ppo.c1) << "\n";
    os << "ppo.c2 = " << fmt_num(c.ppo.c2) << "\n";
    os << "ppo.epochs = " << c.ppo.epochs << "\n";
    os << "ppo.minibatch = " << c.ppo.minibatch << "\n";
    os << "ppo.stepsize = " << fmt_num(c.ppo.stepsize) << "\n";
    os << "setpoint.range = " << fmt_num(c.setpoints.y_lo) << ", " << fmt_num(c.setpoints.y_hi)
       << "\n";
    os << "setpoint.eval_levels = ";
    for (std::size_t i = 0; i < c.setpoints.eval_levels.size(); ++i)
        os << (i ? ", " : "") << fmt_num(c.setpoints.eval_levels[i]);
    os << "\n";
    os << "setpoint.segment_len = " << c.setpoints.segment_len << "\n";
    os << "eval.settle_tol = " << fmt_num(c.settle_tol) << "\n";
    for (const auto& r : c.ensemble.ranges)
        os << "ensemble." << r.name << " = " << fmt_num(r.lo) << ", " << fmt_num(r.hi) << "\n";
    for (const auto& [name, value] : c.ensemble.fixed)
        os << "ensemble." << name << " = " << fmt_num(value) << "\n";
    for (std::size_t i = 0; i < c.reset_ranges.size(); ++i)
        os << "reset.state" << i << " = " << fmt_num(c.reset_ranges[i].lo) << ", "
           << fmt_num(c.reset_ranges[i].hi) << "\n";
    for (std::size_t i = 0; i < c.norm_ranges.size(); ++i)
        os << "norm.state" << i << " = " << fmt_num(c.norm_ranges[i].lo) << ", "
           << fmt_num(c.norm_ranges[i].hi) << "\n";
}

} // namespace pime::harness
