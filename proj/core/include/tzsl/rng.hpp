#pragma once

#include <array>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace tzsl {

// xoshiro256++ seeded through splitmix64. Every random draw in the library
// goes through this generator: the <random> distributions are
// implementation-defined, which would break the equal-seed => equal-bytes
// reproducibility contract across compilers.
class Rng {
public:
    explicit Rng(std::uint64_t seed);

    std::uint64_t next_u64();

    // Uniform in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi);

    // Standard normal via Box-Muller; the second variate of each pair is
    // cached and returned on the next call.
    double normal();

    // Uniform integer in [0, n); rejection sampling, no modulo bias.
    std::int64_t uniform_int(std::int64_t n);

    // Fisher-Yates shuffle driven by uniform_int.
    template <typename T>
    void shuffle(std::vector<T>& values) {
        for (std::int64_t i = static_cast<std::int64_t>(values.size()) - 1; i > 0; --i) {
            const std::int64_t j = uniform_int(i + 1);
            std::swap(values[static_cast<std::size_t>(i)], values[static_cast<std::size_t>(j)]);
        }
    }

private:
    std::array<std::uint64_t, 4> state_{};
    bool has_cached_normal_ = false;
    double cached_normal_ = 0.0;
};

// Stable seed for a named sub-stream (one per training stage, generator
// phase, ...). Distinct names give statistically independent streams.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view stream);

}  // namespace tzsl
