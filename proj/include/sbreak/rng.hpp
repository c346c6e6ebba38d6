#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace sbreak {

// Counter-based stream RNG built on the splitmix64 mixer.  A stream is keyed
// by (seed, name, a, b); distinct keys give independent streams, and draws
// depend only on the key and the call count, never on global state.  This is
// what makes Monte Carlo output identical for any worker-thread count: each
// replicate owns a stream derived from its index.
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view name,
              std::uint64_t a = 0, std::uint64_t b = 0)
        : state_(derive_key(seed, name, a, b)) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // Uniform on (0,1]; never returns 0 so log() below is safe.
    double uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Standard normal via Box-Muller; the second draw of each pair is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    static std::uint64_t derive_key(std::uint64_t seed, std::string_view name,
                                    std::uint64_t a, std::uint64_t b) {
        std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a over the stream name
        for (unsigned char ch : name) {
            h ^= ch;
            h *= 0x100000001b3ull;
        }
        std::uint64_t k = mix(seed ^ 0x6a09e667f3bcc909ull);
        k = mix(k ^ h);
        k = mix(k ^ a);
        k = mix(k ^ b);
        return k;
    }

private:
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ull;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}
