#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

#include "pime/common.hpp"

namespace pime::envsim {

/// Cascaded two-tank parameters. p1 and p2 are the outflow ratios of the
/// upper and lower tank (hole area over cross section), p3 the pump gain
/// over the upper cross section. Lengths in cm, g in cm/s^2, u in volts.
struct TankParams {
    double p1 = 0.002;
    double p2 = 0.002;
    double p3 = 0.12;
    double g = 981.0;
    double l_max = 25.0;
    Range u_range{0.0, 10.0};
};

inline void validate(const TankParams& p) {
    if (!(p.g > 0.0)) throw std::invalid_argument("TankParams: g must be > 0");
    if (!(p.l_max > 0.0)) throw std::invalid_argument("TankParams: l_max must be > 0");
    if (!p.u_range.valid() || p.u_range.lo < 0.0)
        throw std::invalid_argument("TankParams: u_range must be valid with lower bound >= 0");
}

struct TankDeriv {
    double dl1;
    double dl2;
};

/// Continuous-time level derivatives. Levels must be non-negative; the
/// caller clamps before evaluating.
inline TankDeriv tank_derivative(double l1, double l2, double u, const TankParams& p) {
    if (l1 < 0.0 || l2 < 0.0)
        throw std::invalid_argument("tank_derivative: negative level (l1=" + std::to_string(l1) +
                                    ", l2=" + std::to_string(l2) + ")");
    const double out1 = p.p1 * std::sqrt(2.0 * p.g * l1);
    const double out2 = p.p2 * std::sqrt(2.0 * p.g * l2);
    return {-out1 + p.p3 * u, out1 - out2};
}

} // namespace pime::envsim
