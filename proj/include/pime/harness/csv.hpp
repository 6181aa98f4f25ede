#pragma once

#include <cstdio>
#include <fstream>
#include <string>

#include "pime/common.hpp"

namespace pime::harness {

/// Floating-point CSV field with 9 significant digits.
inline std::string fmt9(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

inline std::ofstream open_csv(const std::string& path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open output file: " + path);
    return os;
}

} // namespace pime::harness
