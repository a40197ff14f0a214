// Seeded RNG with a platform-independent uniform mapping. mt19937_64 is
// fully specified by the standard; std::uniform_real_distribution is not,
// so the [0,1) mapping is done by hand to keep weight init bit-reproducible
// across toolchains.
#pragma once

#include <cstdint>
#include <random>

namespace s4f {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next_u64() { return gen_(); }

    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    double symmetric(double scale) { return uniform(-scale, scale); }

    std::size_t index(std::size_t n) {
        return static_cast<std::size_t>(gen_() % n);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace s4f
