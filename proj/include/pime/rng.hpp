#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <vector>

namespace pime {

namespace detail {

// splitmix64; used to derive stream keys and to seed the generator.
inline std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9e3779b97f4a7c15ULL;
    std::uint64_t x = s;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t s = a ^ (0x9e3779b97f4a7c15ULL + (b << 6) + (b >> 2));
    return splitmix64(s);
}

} // namespace detail

/// Deterministic random stream. Substreams are derived from a root key and a
/// list of integer keys, so results do not depend on evaluation order or
/// scheduling. All mappings from raw bits to doubles are spelled out here
/// (uniform_real_distribution is implementation-defined and is not used).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : key_(seed), gen_(derive_seed(seed)) {}

    /// Derive an independent stream from this stream's key and `keys`.
    Rng substream(std::initializer_list<std::uint64_t> keys) const {
        std::uint64_t k = key_;
        for (std::uint64_t v : keys) k = detail::mix(k, v);
        return Rng(k);
    }

    std::uint64_t next_u64() { return gen_(); }

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + uniform() * (hi - lo); }

    /// Standard normal via Box-Muller; consumes exactly two uniforms.
    double gaussian() {
        double u1 = uniform();
        double u2 = uniform();
        // avoid log(0)
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

    /// Uniform index in [0, n) without modulo bias (Lemire reduction).
    std::uint64_t uniform_index(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    std::uint64_t key() const { return key_; }

private:
    static std::uint64_t derive_seed(std::uint64_t key) {
        std::uint64_t s = key;
        return detail::splitmix64(s);
    }

    std::uint64_t key_;
    std::mt19937_64 gen_;
};

/// Deterministic Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.uniform_index(i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace pime
