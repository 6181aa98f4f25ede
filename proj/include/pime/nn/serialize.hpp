#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "pime/common.hpp"
#include "pime/nn/gaussian.hpp"
#include "pime/nn/value.hpp"

namespace pime::nn {

namespace detail {

inline std::string fmt17(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void write_stack(std::ostream& os, const std::string& name, const Stack& stack,
                        std::span<const double> params) {
    os << "section " << name << " layers " << stack.layers().size() << "\n";
    std::size_t o = stack.offset();
    for (const auto& L : stack.layers()) {
        os << "layer " << L.fan_in << " " << L.fan_out << " "
           << (L.tanh_out ? "tanh" : "linear") << "\n";
        for (int r = 0; r < L.fan_out; ++r) {
            for (int c = 0; c < L.fan_in; ++c)
                os << (c ? " " : "") << fmt17(params[o + static_cast<std::size_t>(r) * L.fan_in + c]);
            os << "\n";
        }
        o += static_cast<std::size_t>(L.fan_in) * L.fan_out;
        for (int r = 0; r < L.fan_out; ++r) os << (r ? " " : "") << fmt17(params[o + r]);
        os << "\n";
        o += L.fan_out;
    }
}

inline void expect_token(std::istream& is, const std::string& want, const std::string& where) {
    std::string tok;
    if (!(is >> tok) || tok != want)
        throw StructuralError("weight file: expected '" + want + "' " + where + ", got '" + tok + "'");
}

inline void read_stack(std::istream& is, const std::string& name, const Stack& stack,
                       std::span<double> params) {
    expect_token(is, "section", "at section start");
    expect_token(is, name, "as section name");
    expect_token(is, "layers", "after section name");
    std::size_t n_layers = 0;
    is >> n_layers;
    if (n_layers != stack.layers().size())
        throw StructuralError("weight file: section '" + name + "' layer count mismatch");
    std::size_t o = stack.offset();
    for (const auto& L : stack.layers()) {
        expect_token(is, "layer", "at layer header");
        int fi = 0, fo = 0;
        std::string act;
        is >> fi >> fo >> act;
        if (fi != L.fan_in || fo != L.fan_out || act != (L.tanh_out ? "tanh" : "linear"))
            throw StructuralError("weight file: layer shape mismatch in section '" + name + "'");
        const std::size_t n = static_cast<std::size_t>(fi) * fo + fo;
        for (std::size_t i = 0; i < n; ++i) {
            if (!(is >> params[o + i]))
                throw StructuralError("weight file: truncated values in section '" + name + "'");
        }
        o += n;
    }
}

} // namespace detail

inline void save_policy(const GaussianPolicy& policy, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open weight file for writing: " + path);
    os << "PIMENET v1\n";
    const auto p = policy.params();
    detail::write_stack(os, "branch_main", policy.net().branch_main(), p);
    detail::write_stack(os, "branch_z", policy.net().branch_z(), p);
    detail::write_stack(os, "trunk", policy.net().trunk(), p);
    os << "log_std 1\n" << detail::fmt17(p.back()) << "\n";
    os << "total " << p.size() << "\n";
    if (!os) throw IoError("failed writing weight file: " + path);
}

/// Load into a policy constructed with the matching architecture; shapes and
/// the total parameter count are validated.
inline void load_policy(GaussianPolicy& policy, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open weight file: " + path);
    detail::expect_token(is, "PIMENET", "as magic");
    detail::expect_token(is, "v1", "as version");
    auto p = policy.params();
    detail::read_stack(is, "branch_main", policy.net().branch_main(), p);
    detail::read_stack(is, "branch_z", policy.net().branch_z(), p);
    detail::read_stack(is, "trunk", policy.net().trunk(), p);
    detail::expect_token(is, "log_std", "after trunk");
    std::size_t n = 0;
    is >> n;
    if (n != 1) throw StructuralError("weight file: expected a single log_std value");
    if (!(is >> p.back())) throw StructuralError("weight file: missing log_std value");
    detail::expect_token(is, "total", "at end");
    std::size_t total = 0;
    is >> total;
    if (total != p.size())
        throw StructuralError("weight file: parameter count mismatch (file " +
                              std::to_string(total) + ", expected " + std::to_string(p.size()) + ")");
}

inline void save_value(const ValueNet& net, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open weight file for writing: " + path);
    os << "PIMENET v1\n";
    detail::write_stack(os, "value", net.stack(), net.params());
    os << "total " << net.param_count() << "\n";
    if (!os) throw IoError("failed writing weight file: " + path);
}

inline void load_value(ValueNet& net, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open weight file: " + path);
    detail::expect_token(is, "PIMENET", "as magic");
    detail::expect_token(is, "v1", "as version");
    detail::read_stack(is, "value", net.stack(), net.params());
    detail::expect_token(is, "total", "at end");
    std::size_t total = 0;
    is >> total;
    if (total != net.param_count())
        throw StructuralError("weight file: parameter count mismatch");
}

} // namespace pime::nn
