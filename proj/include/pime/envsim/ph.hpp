#pragma once

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "pime/common.hpp"

namespace pime::envsim {

/// pH neutralization parameters. p1 is the control-acid gain
/// [HCl,C]*q_{HCl,C}/V, p2 the dilution rate q_ww/V. Concentrations in
/// mol/dm^3; u is a relative control flow.
struct PhParams {
    double p1 = 0.01;
    double p2 = 0.002;
    double nh3 = 0.01;
    double naoh = 0.01;
    double k_eq = 5.62e-10; // ammonium dissociation constant (pKa 9.25)
    double kw = 1e-14;      // water ion product
    Range u_range{0.0, 0.01};
    double hcl_max = 0.05;
};

inline void validate(const PhParams& p) {
    if (!(p.k_eq > 0.0)) throw std::invalid_argument("PhParams: k_eq must be > 0");
    if (!(p.kw > 0.0)) throw std::invalid_argument("PhParams: kw must be > 0");
    if (p.nh3 < 0.0 || p.naoh < 0.0)
        throw std::invalid_argument("PhParams: concentrations must be >= 0");
    if (!p.u_range.valid() || !(p.hcl_max > 0.0))
        throw std::invalid_argument("PhParams: invalid u_range or hcl_max");
}

/// Unique positive root of H^3 + a2*H^2 + a1*H + a0 on [1e-16, 1], by
/// safeguarded Newton with bisection fallback. The root must be bracketed
/// by a sign change over that interval; otherwise (or if the iteration
/// budget runs out) a NumericError is thrown, never a silent value.
inline double solve_cubic_positive_root(double a2, double a1, double a0) {
    const auto poly = [&](double h) { return ((h + a2) * h + a1) * h + a0; };
    const auto dpoly = [&](double h) { return (3.0 * h + 2.0 * a2) * h + a1; };

    double lo = 1e-16, hi = 1.0;
    double flo = poly(lo), fhi = poly(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0.0) == (fhi < 0.0))
        throw NumericError("solve_cubic_positive_root: no sign change on [1e-16, 1]");
    // orient so that poly(lo) < 0 < poly(hi)
    const bool rising = flo < 0.0;

    double x = 0.5 * (lo + hi);
    for (int it = 0; it < 200; ++it) {
        const double fx = poly(x);
        if (fx == 0.0) return x;
        if ((fx < 0.0) == rising) lo = x; else hi = x;
        if (hi - lo <= 8.0 * std::numeric_limits<double>::epsilon() * lo)
            return 0.5 * (lo + hi);
        const double d = dpoly(x);
        double next = (d != 0.0) ? x - fx / d : lo;
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        x = next;
    }
    throw NumericError("solve_cubic_positive_root: no convergence after 200 iterations");
}

/// [H+] from total concentrations via the charge-balance cubic
///   H^3 + (nh3 + naoh - hcl + k_eq) H^2 + (k_eq*naoh - k_eq*hcl - kw) H - k_eq*kw = 0,
/// i.e. [H+]+[Na+]+[NH4+] = [OH-]+[Cl-] combined with the ammonium and
/// water equilibria. This form always has exactly one positive root.
inline double solve_hplus(double nh3, double naoh, double hcl, double k_eq, double kw) {
    if (nh3 < 0.0 || naoh < 0.0 || hcl < 0.0)
        throw std::invalid_argument("solve_hplus: concentrations must be >= 0");
    if (!(k_eq > 0.0) || !(kw > 0.0))
        throw std::invalid_argument("solve_hplus: k_eq and kw must be > 0");
    const double a2 = nh3 + naoh - hcl + k_eq;
    const double a1 = k_eq * naoh - k_eq * hcl - kw;
    const double a0 = -k_eq * kw;
    return solve_cubic_positive_root(a2, a1, a0);
}

inline double ph_of_hplus(double hplus) {
    if (!(hplus > 0.0))
        throw std::domain_error("ph_of_hplus: hplus must be > 0 (got " + std::to_string(hplus) + ")");
    return -std::log10(hplus);
}

inline double observe_ph(double hcl, const PhParams& p) {
    return ph_of_hplus(solve_hplus(p.nh3, p.naoh, hcl, p.k_eq, p.kw));
}

} // namespace pime::envsim
