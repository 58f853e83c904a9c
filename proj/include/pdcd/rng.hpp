#pragma once
#include <pdcd/core.hpp>
#include <cmath>
#include <cstdint>
#include <random>

namespace pdcd {

/*
 * Seedable pseudo-random stream with a fixed, platform-independent output.
 *
 * The engine is std::mt19937_64, whose output sequence is fixed by the C++
 * standard. The distributions on top of it are implemented here rather than
 * taken from <random>, since the standard leaves their algorithms to the
 * implementation:
 *   - uniform_index: Lemire's multiply-shift with rejection (unbiased),
 *   - uniform:       53 high bits scaled to [0,1),
 *   - normal:        Box-Muller on two uniforms, second value cached.
 * split() derives an independent child stream by passing one draw of the
 * parent through the SplitMix64 finalizer.
 */
class Rng
{
public:
    explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    /* Uniform integer in {0, ..., n-1}; n must be positive. */
    Index uniform_index(Index n)
    {
        const auto range = static_cast<std::uint64_t>(n);
        std::uint64_t x = engine_();
        auto prod = static_cast<unsigned __int128>(x) * range;
        auto low = static_cast<std::uint64_t>(prod);
        if (low < range) {
            const std::uint64_t threshold = (0 - range) % range;
            while (low < threshold) {
                x = engine_();
                prod = static_cast<unsigned __int128>(x) * range;
                low = static_cast<std::uint64_t>(prod);
            }
        }
        return static_cast<Index>(prod >> 64);
    }

    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double normal()
    {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform(); // (0, 1]
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double t = 2.0 * M_PI * u2;
        spare_ = r * std::sin(t);
        has_spare_ = true;
        return r * std::cos(t);
    }

    Vector normal_vector(Index n)
    {
        Vector v(n);
        for (Index i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    Rng split() { return Rng(splitmix64(engine_())); }

    static std::uint64_t splitmix64(std::uint64_t z)
    {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    friend bool operator==(const Rng& a, const Rng& b)
    {
        return a.engine_ == b.engine_ && a.has_spare_ == b.has_spare_
            && (!a.has_spare_ || a.spare_ == b.spare_);
    }

private:
    std::mt19937_64 engine_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

} // namespace pdcd
