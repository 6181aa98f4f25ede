#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "pime/common.hpp"
#include "pime/rng.hpp"

namespace pime::nn {

struct LayerShape {
    int fan_in;
    int fan_out;
    bool tanh_out; // bounded nonlinearity on the layer output; false = linear
};

/// Per-forward activations kept for reverse mode. act[0] is the input,
/// act[i] the post-activation output of layer i-1. Reused across calls.
struct StackTrace {
    std::vector<std::vector<double>> act;
};

/// Fully connected stack over a slice of a flat parameter vector. Layout per
/// layer: weights row-major [fan_out][fan_in], then bias [fan_out].
class Stack {
public:
    Stack() = default;

    Stack(std::vector<LayerShape> shapes, std::size_t offset)
        : layers_(std::move(shapes)), offset_(offset) {
        if (layers_.empty()) throw StructuralError("Stack: needs at least one layer");
        w_off_.resize(layers_.size());
        b_off_.resize(layers_.size());
        std::size_t o = offset_;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (i > 0 && layers_[i].fan_in != layers_[i - 1].fan_out)
                throw StructuralError("Stack: layer dimension mismatch");
            w_off_[i] = o;
            o += static_cast<std::size_t>(layers_[i].fan_in) * layers_[i].fan_out;
            b_off_[i] = o;
            o += layers_[i].fan_out;
        }
        end_ = o;
    }

    const std::vector<LayerShape>& layers() const { return layers_; }
    std::size_t offset() const { return offset_; }
    std::size_t param_count() const { return end_ - offset_; }
    int in_dim() const { return layers_.front().fan_in; }
    int out_dim() const { return layers_.back().fan_out; }

    /// Hidden layers: rows drawn as unit-norm gaussian directions (scale
    /// 1/sqrt(fan_in) per entry), zero bias. If `zero_last` the final layer
    /// is zeroed entirely.
    void init_params(std::span<double> params, Rng& rng, bool zero_last) const {
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& L = layers_[i];
            double* w = params.data() + w_off_[i];
            double* b = params.data() + b_off_[i];
            const bool zero = zero_last && i + 1 == layers_.size();
            for (int r = 0; r < L.fan_out; ++r) {
                double* row = w + static_cast<std::size_t>(r) * L.fan_in;
                if (zero) {
                    for (int c = 0; c < L.fan_in; ++c) row[c] = 0.0;
                } else {
                    double norm2 = 0.0;
                    for (int c = 0; c < L.fan_in; ++c) {
                        row[c] = rng.gaussian();
                        norm2 += row[c] * row[c];
                    }
                    const double inv = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 1.0;
                    for (int c = 0; c < L.fan_in; ++c) row[c] *= inv;
                }
            }
            for (int r = 0; r < L.fan_out; ++r) b[r] = 0.0;
        }
    }

    void forward(std::span<const double> params, std::span<const double> in,
                 StackTrace& trace) const {
        if (static_cast<int>(in.size()) != in_dim())
            throw StructuralError("Stack::forward: input dimension mismatch");
        trace.act.resize(layers_.size() + 1);
        trace.act[0].assign(in.begin(), in.end());
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& L = layers_[i];
            const double* w = params.data() + w_off_[i];
            const double* b = params.data() + b_off_[i];
            const std::vector<double>& a = trace.act[i];
            std::vector<double>& out = trace.act[i + 1];
            out.resize(L.fan_out);
            for (int r = 0; r < L.fan_out; ++r) {
                const double* row = w + static_cast<std::size_t>(r) * L.fan_in;
                double s = b[r];
                for (int c = 0; c < L.fan_in; ++c) s += row[c] * a[c];
                out[r] = L.tanh_out ? std::tanh(s) : s;
            }
        }
    }

    const std::vector<double>& output(const StackTrace& trace) const {
        return trace.act.back();
    }

    /// Accumulate dL/dparams into `grad` and write dL/d(input) into `din`.
    /// `dout` is dL/d(output). Requires the trace of the matching forward.
    void backward(std::span<const double> params, const StackTrace& trace,
                  std::span<const double> dout, std::span<double> grad,
                  std::vector<double>& din) const {
        if (trace.act.size() != layers_.size() + 1)
            throw StructuralError("Stack::backward: trace does not match forward");
        std::vector<double> d(dout.begin(), dout.end());
        std::vector<double> dprev;
        for (std::size_t ii = layers_.size(); ii-- > 0;) {
            const auto& L = layers_[ii];
            const double* w = params.data() + w_off_[ii];
            double* gw = grad.data() + w_off_[ii];
            double* gb = grad.data() + b_off_[ii];
            const std::vector<double>& a_in = trace.act[ii];
            const std::vector<double>& a_out = trace.act[ii + 1];
            // through the activation
            if (L.tanh_out)
                for (int r = 0; r < L.fan_out; ++r) d[r] *= 1.0 - a_out[r] * a_out[r];
            dprev.assign(L.fan_in, 0.0);
            for (int r = 0; r < L.fan_out; ++r) {
                const double dr = d[r];
                gb[r] += dr;
                const double* row = w + static_cast<std::size_t>(r) * L.fan_in;
                double* grow = gw + static_cast<std::size_t>(r) * L.fan_in;
                for (int c = 0; c < L.fan_in; ++c) {
                    grow[c] += dr * a_in[c];
                    dprev[c] += dr * row[c];
                }
            }
            d.swap(dprev);
        }
        din = std::move(d);
    }

private:
    std::vector<LayerShape> layers_;
    std::size_t offset_ = 0;
    std::size_t end_ = 0;
    std::vector<std::size_t> w_off_, b_off_;
};

/// Convenience: build shapes for in -> hidden... -> out with tanh on hidden
/// layers and a linear output layer.
inline std::vector<LayerShape> mlp_shapes(int in, const std::vector<int>& hidden, int out) {
    std::vector<LayerShape> shapes;
    int prev = in;
    for (int h : hidden) {
        shapes.push_back({prev, h, true});
        prev = h;
    }
    shapes.push_back({prev, out, false});
    return shapes;
}

} // namespace pime::nn
