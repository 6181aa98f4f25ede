#pragma once

#include <algorithm>
#include <span>
#include <vector>

#include "pime/nn/stack.hpp"

namespace pime::nn {

struct ModularTrace {
    StackTrace main, z, trunk;
    std::vector<double> trunk_in;
    std::vector<double> din_trunk, din_main, din_z; // backward scratch
};

/// Policy mean network with two input branches kept separate until the
/// trunk: branch_main sees (x, y_ref), branch_z sees only z. There are no
/// cross connections before the trunk, so the integrated error reaches the
/// output only through its own branch.
class ModularNet {
public:
    ModularNet() = default;

    ModularNet(int main_in, const std::vector<int>& main_hidden, const std::vector<int>& z_hidden,
               const std::vector<int>& trunk_hidden, int out_dim) {
        auto branch_shapes = [](int in, const std::vector<int>& hidden) {
            std::vector<LayerShape> s;
            int prev = in;
            for (int h : hidden) {
                s.push_back({prev, h, true});
                prev = h;
            }
            return s;
        };
        auto main_s = branch_shapes(main_in, main_hidden);
        auto z_s = branch_shapes(1, z_hidden);
        branch_main_ = Stack(main_s, 0);
        branch_z_ = Stack(z_s, branch_main_.param_count());
        const int trunk_in = branch_main_.out_dim() + branch_z_.out_dim();
        trunk_ = Stack(mlp_shapes(trunk_in, trunk_hidden, out_dim),
                       branch_z_.offset() + branch_z_.param_count());
    }

    std::size_t param_count() const { return trunk_.offset() + trunk_.param_count(); }
    int main_in_dim() const { return branch_main_.in_dim(); }
    int out_dim() const { return trunk_.out_dim(); }
    const Stack& branch_main() const { return branch_main_; }
    const Stack& branch_z() const { return branch_z_; }
    const Stack& trunk() const { return trunk_; }

    /// Branches random, final trunk layer zeroed so the initial map is
    /// identically zero and the composed policy mean starts at the prior.
    void init_params(std::span<double> params, Rng& rng) const {
        branch_main_.init_params(params, rng, false);
        branch_z_.init_params(params, rng, false);
        trunk_.init_params(params, rng, true);
    }

    double forward(std::span<const double> params, std::span<const double> main_in, double z_in,
                   ModularTrace& t) const {
        branch_main_.forward(params, main_in, t.main);
        const double zv[1] = {z_in};
        branch_z_.forward(params, std::span<const double>(zv, 1), t.z);
        const auto& om = branch_main_.output(t.main);
        const auto& oz = branch_z_.output(t.z);
        t.trunk_in.resize(om.size() + oz.size());
        std::copy(om.begin(), om.end(), t.trunk_in.begin());
        std::copy(oz.begin(), oz.end(), t.trunk_in.begin() + om.size());
        trunk_.forward(params, t.trunk_in, t.trunk);
        return trunk_.output(t.trunk)[0];
    }

    /// Accumulate dL/dparams given dL/d(output) and the matching trace.
    void backward(std::span<const double> params, ModularTrace& t, double dout,
                  std::span<double> grad) const {
        const double dv[1] = {dout};
        trunk_.backward(params, t.trunk, std::span<const double>(dv, 1), grad, t.din_trunk);
        const int nm = branch_main_.out_dim();
        const int nz = branch_z_.out_dim();
        branch_main_.backward(params,
                              t.main,
                              std::span<const double>(t.din_trunk.data(), nm),
                              grad, t.din_main);
        branch_z_.backward(params,
                           t.z,
                           std::span<const double>(t.din_trunk.data() + nm, nz),
                           grad, t.din_z);
    }

private:
    Stack branch_main_, branch_z_, trunk_;
};

} // namespace pime::nn
