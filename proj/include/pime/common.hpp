#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace pime {

/// Raised when a configuration file or CLI argument is invalid.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when a simulation produces non-finite state.
class SimulationFault : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when an iterative numeric routine fails to converge or a loss
/// turns non-finite.
class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised on dimension or shape mismatches.
class StructuralError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Raised when writing output files fails.
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Closed interval [lo, hi].
struct Range {
    double lo = 0.0;
    double hi = 0.0;

    bool valid() const { return std::isfinite(lo) && std::isfinite(hi) && lo <= hi; }
    bool contains(double v) const { return v >= lo && v <= hi; }
    double width() const { return hi - lo; }
    double mid() const { return 0.5 * (lo + hi); }
    double clamp(double v) const { return v < lo ? lo : (v > hi ? hi : v); }
};

inline bool finite(double v) { return std::isfinite(v); }

} // namespace pime
