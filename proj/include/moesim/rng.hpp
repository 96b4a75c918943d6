// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <random>

#include "moesim/matrix.hpp"

namespace moesim {

// Deterministic RNG. mt19937_64 is fully specified by the standard and
// all derived draws below are computed without std::*_distribution, so
// streams are reproducible across compilers.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // [0, 1)
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased draw from [0, n)
    int uniform_int(int n) {
        const std::uint64_t un = static_cast<std::uint64_t>(n);
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % un;
        std::uint64_t r;
        do {
            r = gen_();
        } while (r >= limit);
        return static_cast<int>(r % un);
    }

  private:
    std::mt19937_64 gen_;
};

// Uniform [-1, 1) entries, rounded to the storage precision.
Matrix random_matrix(int rows, int cols, Rng& rng, Precision prec = Precision::Single);

}  // namespace moesim
