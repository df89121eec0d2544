#pragma once

#include <cstdint>
#include <random>

namespace ole {

// Seeded generator with portable uniform and normal draws. The standard
// distributions are implementation-defined, so the conversions live here to
// keep outputs identical across standard libraries.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform on [0, 1) with 53 random bits.
    double uniform();

    // Uniform on the open interval (0, 1).
    double uniform_open();

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n);

    double normal();

private:
    std::mt19937_64 engine_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace ole
