#pragma once

#include <cmath>
#include <cstdint>

namespace gapfolio {

// Counter-based per-path random stream: the state is seeded from
// (seed, path_index) alone, so any partition of paths across workers draws
// identical numbers. Box-Muller on top of a splitmix64 stream; the library
// normal_distribution is avoided because its algorithm is
// implementation-defined and would break bit-reproducibility across
// toolchains.
class PathRng {
public:
    PathRng(std::uint64_t seed, std::uint64_t path_index)
        : state_(mix(seed + 0x632BE59BD9B4E019ULL) ^
                 mix(path_index * 0x9E3779B97F4A7C15ULL + 0xD1B54A32D192ED03ULL)) {}

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        const double u1 = 1.0 - uniform();  // (0, 1]: keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586 * u2;
        spare_ = r * std::sin(a);
        have_spare_ = true;
        return r * std::cos(a);
    }

private:
    std::uint64_t next() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix(state_);
    }
    static std::uint64_t mix(std::uint64_t z) {
        z ^= z >> 30;
        z *= 0xBF58476D1CE4E5B9ULL;
        z ^= z >> 27;
        z *= 0x94D049BB133111EBULL;
        z ^= z >> 31;
        return z;
    }
    std::uint64_t state_;
    double spare_ = 0.0;
    bool have_spare_ = false;
};

}  // namespace gapfolio
