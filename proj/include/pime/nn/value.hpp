#pragma once

#include <span>
#include <vector>

#include "pime/control/control.hpp"
#include "pime/nn/gaussian.hpp"
#include "pime/nn/stack.hpp"

namespace pime::nn {

/// Plain fully connected state-value head on the normalized (x~, y_ref).
/// The raw head output is multiplied by a fixed `output_scale` sized from
/// the expected return magnitude, so the head works in O(1) units while the
/// predictions span the return range.
class ValueNet {
public:
    ValueNet() = default;

    ValueNet(int n_x, const std::vector<int>& hidden, Normalizer norm, double output_scale = 1.0)
        : stack_(mlp_shapes(n_x + 2, hidden, 1), 0), norm_(std::move(norm)),
          output_scale_(output_scale) {
        if (!(output_scale_ > 0.0))
            throw std::invalid_argument("ValueNet: output_scale must be > 0");
        params_.assign(stack_.param_count(), 0.0);
    }

    void init_weights(Rng& rng) { stack_.init_params(params(), rng, false); }

    const Stack& stack() const { return stack_; }
    const Normalizer& normalizer() const { return norm_; }
    std::span<double> params() { return {params_.data(), params_.size()}; }
    std::span<const double> params() const { return {params_.data(), params_.size()}; }
    std::size_t param_count() const { return params_.size(); }

    double output_scale() const { return output_scale_; }

    double value(const control::ExtendedState& s, double y_ref) {
        scratch_in_.resize(s.x.size() + 2);
        for (std::size_t i = 0; i < s.x.size(); ++i) scratch_in_[i] = norm_.norm_x(i, s.x[i]);
        scratch_in_[s.x.size()] = norm_.norm_z(s.z);
        scratch_in_[s.x.size() + 1] = norm_.norm_yref(y_ref);
        stack_.forward(params(), scratch_in_, trace_);
        const double v = output_scale_ * stack_.output(trace_)[0];
        if (!finite(v)) throw NumericError("ValueNet: non-finite value prediction");
        return v;
    }

    void backward(double d_value, std::span<double> grad) {
        const double dv[1] = {d_value * output_scale_};
        stack_.backward(params(), trace_, std::span<const double>(dv, 1), grad, din_);
    }

private:
    Stack stack_;
    Normalizer norm_;
    std::vector<double> params_;
    double output_scale_ = 1.0;
    StackTrace trace_;
    std::vector<double> din_;
    std::vector<double> scratch_in_;
};

} // namespace pime::nn
