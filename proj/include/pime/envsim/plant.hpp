#pragma once

#include <algorithm>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pime/common.hpp"
#include "pime/envsim/ph.hpp"
#include "pime/envsim/tank.hpp"
#include "pime/rng.hpp"

namespace pime::envsim {

enum class PlantKind { CascadedTanks, PhNeutralization };

inline int state_dim(PlantKind kind) {
    return kind == PlantKind::CascadedTanks ? 2 : 1;
}

inline std::string to_string(PlantKind kind) {
    return kind == PlantKind::CascadedTanks ? "tanks" : "ph";
}

/// One ensemble member: sampled parameters plus the discretization settings
/// shared by the whole ensemble.
struct PlantModel {
    PlantKind kind = PlantKind::CascadedTanks;
    TankParams tank;
    PhParams ph;
    double dt = 2.0;
    std::vector<double> noise_std; // per-state, empty or zeros = noiseless
    int substeps = 1;              // Euler substeps per sampling period
    int model_id = 0;
};

inline void validate(const PlantModel& m) {
    if (!(m.dt > 0.0)) throw std::invalid_argument("PlantModel: dt must be > 0");
    if (m.substeps < 1) throw std::invalid_argument("PlantModel: substeps must be >= 1");
    for (double s : m.noise_std)
        if (s < 0.0) throw std::invalid_argument("PlantModel: noise_std must be >= 0");
    if (m.kind == PlantKind::CascadedTanks) validate(m.tank); else validate(m.ph);
}

inline Range input_range(const PlantModel& m) {
    return m.kind == PlantKind::CascadedTanks ? m.tank.u_range : m.ph.u_range;
}

inline Range state_box(const PlantModel& m, int dim) {
    if (m.kind == PlantKind::CascadedTanks) return {0.0, m.tank.l_max};
    (void)dim;
    return {0.0, m.ph.hcl_max};
}

namespace detail {

inline void check_finite_state(const std::vector<double>& x, const char* where) {
    for (double v : x)
        if (!pime::finite(v)) {
            std::ostringstream os;
            os << where << ": non-finite state (";
            for (std::size_t i = 0; i < x.size(); ++i) os << (i ? ", " : "") << x[i];
            os << ")";
            throw SimulationFault(os.str());
        }
}

} // namespace detail

/// One sampling period of forward Euler for the tanks, then clamp to
/// [0, l_max]^2. `noise` is the additive disturbance for this period
/// (already scaled), or nullptr.
inline std::vector<double> step_tank(const std::vector<double>& state, double u,
                                     const PlantModel& m, const double* noise = nullptr) {
    if (state.size() != 2) throw StructuralError("step_tank: state must have 2 entries");
    const TankParams& p = m.tank;
    const double uc = p.u_range.clamp(u);
    double l1 = state[0], l2 = state[1];
    const double h = m.dt / m.substeps;
    for (int s = 0; s < m.substeps; ++s) {
        const TankDeriv d = tank_derivative(std::max(l1, 0.0), std::max(l2, 0.0), uc, p);
        l1 += h * d.dl1;
        l2 += h * d.dl2;
        l1 = std::max(l1, 0.0);
        l2 = std::max(l2, 0.0);
    }
    if (noise) {
        l1 += noise[0];
        l2 += noise[1];
    }
    std::vector<double> next{std::clamp(l1, 0.0, p.l_max), std::clamp(l2, 0.0, p.l_max)};
    detail::check_finite_state(next, "step_tank");
    return next;
}

/// One sampling period of forward Euler for the acid concentration, then
/// clamp to [0, hcl_max].
inline std::vector<double> step_ph(const std::vector<double>& state, double u,
                                   const PlantModel& m, const double* noise = nullptr) {
    if (state.size() != 1) throw StructuralError("step_ph: state must have 1 entry");
    const PhParams& p = m.ph;
    if (state[0] < 0.0) throw std::invalid_argument("step_ph: hcl must be >= 0");
    const double uc = p.u_range.clamp(u);
    double hcl = state[0];
    const double h = m.dt / m.substeps;
    for (int s = 0; s < m.substeps; ++s)
        hcl += h * (-p.p2 * hcl + p.p1 * uc);
    if (noise) hcl += noise[0];
    std::vector<double> next{std::clamp(hcl, 0.0, p.hcl_max)};
    detail::check_finite_state(next, "step_ph");
    return next;
}

inline std::vector<double> step(const PlantModel& m, const std::vector<double>& state, double u,
                                const double* noise = nullptr) {
    return m.kind == PlantKind::CascadedTanks ? step_tank(state, u, m, noise)
                                              : step_ph(state, u, m, noise);
}

/// Output map h_p: lower-tank level for the tanks, pH for the neutralization
/// process.
inline double observe(const PlantModel& m, const std::vector<double>& state) {
    if (m.kind == PlantKind::CascadedTanks) {
        if (state.size() != 2) throw StructuralError("observe: state must have 2 entries");
        return state[1];
    }
    if (state.size() != 1) throw StructuralError("observe: state must have 1 entry");
    return observe_ph(state[0], m.ph);
}

/// The measured state the controller works on. For the tanks both levels are
/// measured directly; for the neutralization process the measured quantity
/// is the pH value itself, which also linearizes the steep titration map for
/// the policy inputs.
inline std::vector<double> policy_state(const PlantModel& m, const std::vector<double>& state) {
    if (m.kind == PlantKind::CascadedTanks) return state;
    if (state.size() != 1) throw StructuralError("policy_state: state must have 1 entry");
    return {observe_ph(state[0], m.ph)};
}

/// Quadratic tracking reward; always <= 0.
inline double reward(double y, double y_ref) {
    const double e = y - y_ref;
    return -(e * e);
}

// ---------------------------------------------------------------------------
// Ensemble and set-point sampling
// ---------------------------------------------------------------------------

struct ParamRange {
    std::string name;
    double lo;
    double hi;
};

/// Which parameters are randomized (uniform intervals) and which are fixed.
/// Every dynamics parameter of the plant kind must appear in exactly one of
/// the two groups.
struct EnsembleSpec {
    PlantKind kind = PlantKind::CascadedTanks;
    std::vector<ParamRange> ranges;
    std::map<std::string, double> fixed;
};

namespace detail {

inline const std::vector<std::string>& required_params(PlantKind kind) {
    static const std::vector<std::string> tank_keys{"p1", "p2", "p3", "g", "l_max",
                                                    "u_lo", "u_hi", "dt"};
    static const std::vector<std::string> ph_keys{"p1", "p2", "nh3", "naoh", "k_eq", "kw",
                                                  "u_lo", "u_hi", "hcl_max", "dt"};
    return kind == PlantKind::CascadedTanks ? tank_keys : ph_keys;
}

} // namespace detail

inline void validate(const EnsembleSpec& spec) {
    std::set<std::string> seen;
    for (const auto& r : spec.ranges) {
        if (!(r.lo < r.hi))
            throw std::invalid_argument("EnsembleSpec: range for '" + r.name +
                                        "' needs lo < hi");
        if (!seen.insert(r.name).second)
            throw std::invalid_argument("EnsembleSpec: duplicate parameter '" + r.name + "'");
    }
    for (const auto& [name, value] : spec.fixed) {
        (void)value;
        if (!seen.insert(name).second)
            throw std::invalid_argument("EnsembleSpec: parameter '" + name +
                                        "' appears in both ranges and fixed");
    }
    for (const auto& key : detail::required_params(spec.kind))
        if (!seen.count(key))
            throw std::invalid_argument("EnsembleSpec: missing parameter '" + key + "'");
}

inline EnsembleSpec default_tank_ensemble() {
    EnsembleSpec s;
    s.kind = PlantKind::CascadedTanks;
    s.ranges = {{"p1", 0.0015, 0.0024}, {"p2", 0.0015, 0.0024}, {"p3", 0.07, 0.17}};
    s.fixed = {{"g", 981.0}, {"l_max", 25.0}, {"u_lo", 0.0}, {"u_hi", 10.0}, {"dt", 2.0}};
    return s;
}

inline EnsembleSpec default_ph_ensemble() {
    EnsembleSpec s;
    s.kind = PlantKind::PhNeutralization;
    s.ranges = {{"p1", 0.005, 0.015}, {"p2", 0.0015, 0.0025}};
    s.fixed = {{"nh3", 0.01}, {"naoh", 0.01},   {"k_eq", 5.62e-10}, {"kw", 1e-14},
               {"u_lo", 0.0}, {"u_hi", 0.01},   {"hcl_max", 0.05},  {"dt", 20.0}};
    return s;
}

/// Draw one ensemble member. Randomized parameters are sampled independently
/// and uniformly, in the order they appear in `ranges`; fixed parameters are
/// copied verbatim.
inline PlantModel sample_model(const EnsembleSpec& spec, Rng& rng) {
    validate(spec);
    std::map<std::string, double> v(spec.fixed.begin(), spec.fixed.end());
    for (const auto& r : spec.ranges) v[r.name] = rng.uniform(r.lo, r.hi);

    PlantModel m;
    m.kind = spec.kind;
    m.dt = v.at("dt");
    if (spec.kind == PlantKind::CascadedTanks) {
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
    validate(m);
    return m;
}

/// Set-point distribution plus the piecewise-constant evaluation trace.
struct SetpointSpec {
    double y_lo = 0.0;
    double y_hi = 1.0;
    std::vector<double> eval_levels;
    int segment_len = 100;
};

inline void validate(const SetpointSpec& s) {
    if (!(s.y_lo <= s.y_hi))
        throw std::invalid_argument("SetpointSpec: need y_lo <= y_hi");
    if (s.segment_len < 1)
        throw std::invalid_argument("SetpointSpec: segment_len must be >= 1");
    for (double lvl : s.eval_levels)
        if (lvl < s.y_lo || lvl > s.y_hi)
            throw std::invalid_argument("SetpointSpec: eval level outside [y_lo, y_hi]");
}

inline std::vector<double> evenly_spaced_levels(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i)
        v[i] = (n == 1) ? 0.5 * (lo + hi) : lo + (hi - lo) * i / (n - 1);
    return v;
}

inline SetpointSpec default_setpoints(PlantKind kind) {
    SetpointSpec s;
    if (kind == PlantKind::CascadedTanks) {
        s.y_lo = 1.0;
        s.y_hi = 12.0;
        s.segment_len = 100;
    } else {
        s.y_lo = 4.0;
        s.y_hi = 10.0;
        s.segment_len = 50;
    }
    s.eval_levels = evenly_spaced_levels(s.y_lo, s.y_hi, 5);
    return s;
}

inline double sample_setpoint(const SetpointSpec& spec, Rng& rng) {
    validate(spec);
    return rng.uniform(spec.y_lo, spec.y_hi);
}

/// Default reset distribution for the episode initial state.
inline std::vector<Range> default_reset_ranges(PlantKind kind) {
    if (kind == PlantKind::CascadedTanks) return {{0.0, 15.0}, {0.0, 15.0}};
    return {{0.0, 0.04}};
}

inline std::vector<double> sample_initial_state(const PlantModel& m,
                                                const std::vector<Range>& reset_ranges,
                                                Rng& rng) {
    const int n = state_dim(m.kind);
    if (static_cast<int>(reset_ranges.size()) != n)
        throw StructuralError("sample_initial_state: reset range count mismatch");
    std::vector<double> x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.uniform(reset_ranges[i].lo, reset_ranges[i].hi);
    return x;
}

} // namespace pime::envsim
