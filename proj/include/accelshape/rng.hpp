// Per-tenant random streams. Each tenant draws from its own generator keyed
// by (seed, tenant id), so adding a flow never perturbs the others.
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace accelshape {

constexpr std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// mt19937_64 is fully specified by the standard, so streams match across
/// platforms; the distributions are not, hence `below`.
class TenantRng {
public:
    TenantRng(std::uint64_t seed, std::string_view tenant)
        : gen_(splitmix64(seed ^ splitmix64(fnv1a(tenant)))) {}

    std::uint64_t next() { return gen_(); }
    /// Uniform in [0, n); n must be > 0.
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return x % n;
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace accelshape
