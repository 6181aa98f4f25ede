#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pime/common.hpp"
#include "pime/control/control.hpp"
#include "pime/nn/modular.hpp"
#include "pime/rng.hpp"

namespace pime::nn {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178; // 0.5*ln(2*pi)

/// Fixed affine input scaling: each plant-state dimension and the set-point
/// are mapped from their configured range to [-1, 1]; z is divided by its
/// bound.
struct Normalizer {
    std::vector<Range> x_ranges;
    Range yref_range{0.0, 1.0};
    double z_bound = 25.0;

    double norm_in_range(double v, const Range& r) const {
        const double w = r.width();
        return w > 0.0 ? 2.0 * (v - r.lo) / w - 1.0 : 0.0;
    }
    double norm_x(std::size_t i, double v) const { return norm_in_range(v, x_ranges.at(i)); }
    double norm_yref(double v) const { return norm_in_range(v, yref_range); }
    double norm_z(double z) const { return z_bound != 0.0 ? z / z_bound : z; }
};

struct SampledAction {
    double u;
    double log_prob;
};

/// Stochastic Gaussian policy: mean = prior + g_theta(x~, y_ref), a single
/// state-independent learnable log standard deviation. Parameters are one
/// flat vector, the mean network first and log_std last. The network output
/// is multiplied by a fixed `action_scale` so the net itself works in
/// normalized action units.
class GaussianPolicy {
public:
    GaussianPolicy() = default;

    GaussianPolicy(ModularNet net, Normalizer norm, double log_std_init,
                   double action_scale = 1.0, Range log_std_bounds = {-8.0, 1.0})
        : net_(std::move(net)), norm_(std::move(norm)), action_scale_(action_scale),
          log_std_bounds_(log_std_bounds) {
        if (!(action_scale_ > 0.0))
            throw std::invalid_argument("GaussianPolicy: action_scale must be > 0");
        params_.assign(net_.param_count() + 1, 0.0);
        params_.back() = log_std_bounds_.clamp(log_std_init);
    }

    void init_weights(Rng& rng) { net_.init_params(params(), rng); }

    const ModularNet& net() const { return net_; }
    const Normalizer& normalizer() const { return norm_; }
    std::span<double> params() { return {params_.data(), params_.size()}; }
    std::span<const double> params() const { return {params_.data(), params_.size()}; }
    std::size_t param_count() const { return params_.size(); }
    Range log_std_bounds() const { return log_std_bounds_; }

    double log_std() const { return log_std_bounds_.clamp(params_.back()); }
    bool log_std_interior() const {
        return params_.back() > log_std_bounds_.lo && params_.back() < log_std_bounds_.hi;
    }
    double sigma() const { return std::exp(log_std()); }
    void set_log_std(double v) { params_.back() = v; }

    double action_scale() const { return action_scale_; }

    /// g_theta at the (normalized) extended state. Keeps the forward trace
    /// for a following backward() call.
    double mean_g(const control::ExtendedState& s, double y_ref) {
        scratch_in_.resize(s.x.size() + 1);
        for (std::size_t i = 0; i < s.x.size(); ++i) scratch_in_[i] = norm_.norm_x(i, s.x[i]);
        scratch_in_[s.x.size()] = norm_.norm_yref(y_ref);
        return action_scale_ * net_.forward(net_params(), scratch_in_, norm_.norm_z(s.z), trace_);
    }

    /// Accumulate d(loss)/d(net params) for the last mean_g() evaluation.
    /// The log_std slot of `grad` is untouched; the caller owns it.
    void backward_mean(double d_mean, std::span<double> grad) {
        net_.backward(net_params(), trace_, d_mean * action_scale_,
                      grad.subspan(0, net_.param_count()));
    }

    double entropy() const { return kHalfLog2Pi + 0.5 + log_std(); }

    std::span<const double> net_params() const {
        return {params_.data(), net_.param_count()};
    }

private:
    ModularNet net_;
    Normalizer norm_;
    std::vector<double> params_;
    double action_scale_ = 1.0;
    Range log_std_bounds_{-8.0, 1.0};
    ModularTrace trace_;
    std::vector<double> scratch_in_;
};

/// Gaussian log-density of u under (mean, sigma).
inline double gaussian_log_prob(double mean, double sigma, double u) {
    const double d = (u - mean) / sigma;
    return -0.5 * d * d - std::log(sigma) - kHalfLog2Pi;
}

inline double log_prob(const GaussianPolicy& policy, double mean_total, double u) {
    return gaussian_log_prob(mean_total, policy.sigma(), u);
}

/// Draw u ~ N(mean_total, sigma^2); the returned log_prob uses the same
/// density code path as log_prob().
inline SampledAction sample_action(const GaussianPolicy& policy, double mean_total, Rng& rng) {
    const double u = mean_total + policy.sigma() * rng.gaussian();
    return {u, log_prob(policy, mean_total, u)};
}

} // namespace pime::nn
