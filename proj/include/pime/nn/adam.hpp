#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pime/common.hpp"

namespace pime::nn {

/// Adam with bias correction.
struct AdamState {
    std::vector<double> m, v;
    long step = 0;
    double stepsize = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    explicit AdamState(std::size_t n = 0, double lr = 3e-4)
        : m(n, 0.0), v(n, 0.0), stepsize(lr) {}
};

inline void adam_step(AdamState& s, std::span<double> params, std::span<const double> grads) {
    if (params.size() != grads.size() || params.size() != s.m.size())
        throw StructuralError("adam_step: dimension mismatch");
    s.step += 1;
    const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
    const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i] * grads[i];
        const double mhat = s.m[i] / c1;
        const double vhat = s.v[i] / c2;
        params[i] -= s.stepsize * mhat / (std::sqrt(vhat) + s.eps);
    }
}

} // namespace pime::nn
