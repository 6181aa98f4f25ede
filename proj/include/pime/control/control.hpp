#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "pime/common.hpp"

namespace pime::control {

/// Clamped accumulator of the control error. The clamp is the anti-windup
/// mechanism: saturation of the actuator cannot grow z without bound.
struct IntegratorState {
    double z = 0.0;
    Range bounds{-25.0, 25.0};
};

/// z' = clamp(z + eps). The error enters unweighted (no dt scaling); the
/// integrator is a discrete-time sum.
inline IntegratorState update_integrator(IntegratorState s, double eps) {
    if (!finite(eps))
        throw std::domain_error("update_integrator: non-finite error");
    s.z = s.bounds.clamp(s.z + eps);
    return s;
}

/// Plant state extended with the integrated error, [x..., z].
struct ExtendedState {
    std::vector<double> x;
    double z = 0.0;

    std::vector<double> as_vector() const {
        std::vector<double> v(x);
        v.push_back(z);
        return v;
    }
    std::size_t dim() const { return x.size() + 1; }
};

inline ExtendedState extend(std::vector<double> x, double z) {
    for (double v : x)
        if (!finite(v)) throw std::domain_error("extend: non-finite state");
    return ExtendedState{std::move(x), z};
}

/// Fixed, untuned P or PI law. Its output anchors the stochastic policy's
/// mean; the gains are never trained.
struct PriorController {
    enum class Kind { P, PI };
    double kp = 0.0;
    double ki = 0.0;
    Kind kind = Kind::P;
};

inline void validate(const PriorController& c) {
    if (!finite(c.kp) || !finite(c.ki))
        throw std::invalid_argument("PriorController: gains must be finite");
    if (c.kind == PriorController::Kind::P && c.ki != 0.0)
        throw std::invalid_argument("PriorController: P controller requires ki = 0");
}

/// u_prior = kp*eps + ki*z with eps = y_ref - y. No saturation here;
/// saturation is applied after the policy composition.
inline double prior_action(const PriorController& c, double eps, double z) {
    return c.kp * eps + c.ki * z;
}

inline double saturate(double u, Range range) {
    if (!range.valid()) throw std::invalid_argument("saturate: invalid range");
    return range.clamp(u);
}

} // namespace pime::control
