// Seeded RNG with fixed transforms so sampled values depend only on the
// engine stream, not on the standard library's distribution internals.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace rvlm {

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed)
        : engine_(seed), seed_mix_(seed * 0x9e3779b97f4a7c15ull + 0x2545f4914f6cdd1dull) {}

    std::uint64_t next_u64() { return engine_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive bounds
    int uniform_int(int lo, int hi) {
        return lo + static_cast<int>(engine_() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    double normal() {
        // Box-Muller; guard the log argument away from zero.
        double u1 = uniform();
        double u2 = uniform();
        if (u1 < 1e-300) u1 = 1e-300;
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Derived stream for a named substream; independent of draw order elsewhere.
    Rng fork(std::string_view name) const { return Rng(seed_mix_ ^ fnv1a64(name)); }

  private:
    std::mt19937_64 engine_;
    std::uint64_t seed_mix_;
};

}  // namespace rvlm
