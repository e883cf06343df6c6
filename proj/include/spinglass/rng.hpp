#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace spinglass {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based random stream keyed by an arbitrary tuple of integers,
// e.g. (seed, realization index, component).  Draw order within a stream is
// sequential; distinct keys give independent streams regardless of the order
// in which streams are consumed, so results do not depend on scheduling.
class RandomStream {
public:
    RandomStream(std::initializer_list<std::uint64_t> key) {
        key_ = 0x6a09e667f3bcc909ULL;
        for (std::uint64_t k : key) key_ = splitmix64(key_ ^ splitmix64(k));
    }

    std::uint64_t next_u64() { return splitmix64(key_ + 0x9e3779b97f4a7c15ULL * (++counter_)); }

    // uniform in [0,1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // standard normal, Box-Muller; consumes uniforms in pairs
    double next_gauss() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = next_double();
        double u2 = next_double();
        while (u1 <= 0.0) u1 = next_double();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t key_ = 0;
    std::uint64_t counter_ = 0;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

} // namespace spinglass
