#pragma once

#include <cstdint>
#include <random>
#include <stdexcept>

namespace esv::rng {

/// SplitMix64 step; mixes the state and returns the next 64-bit word.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives a well-mixed substream seed from a base seed and a stream index.
inline std::uint64_t substream_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t state = base ^ (0xD1B54A32D192ED03ULL * (index + 1));
    splitmix64(state);
    return splitmix64(state);
}

/// Inverse standard-normal CDF (Acklam's rational approximation with one
/// Halley refinement step). Accurate to full double precision on (0,1).
double inverse_normal_cdf(double p);

/// Deterministic stream of standard normals: mt19937_64 uniforms mapped
/// through the inverse CDF. Identical output for identical seeds on every
/// platform.
class NormalStream {
public:
    explicit NormalStream(std::uint64_t seed) : engine_(seed) {}

    double next() {
        // top 53 bits, offset to the open interval (0,1)
        const double u =
            (static_cast<double>(engine_() >> 11) + 0.5) * 0x1p-53;
        return inverse_normal_cdf(u);
    }

private:
    std::mt19937_64 engine_;
};

} // namespace esv::rng
