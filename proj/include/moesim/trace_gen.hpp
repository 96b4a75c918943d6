// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

#include "moesim/io.hpp"

namespace moesim {

// Synthetic routing traces standing in for profiled routing data.
//   Uniform        - experts drawn uniformly without replacement
//   Zipf           - expert e weighted (e+1)^-alpha; alpha = 0 is Uniform
//   PlantedBlocks  - experts grouped into num_blocks hidden clusters via
//                    a seed-derived permutation; each pick stays inside
//                    the token's home cluster with probability p_in
struct TraceSpec {
    enum class Dist { Uniform, Zipf, PlantedBlocks };
    Dist dist = Dist::Uniform;
    int num_experts = 0;
    int top_k = 0;
    int num_tokens = 0;
    double alpha = 0.0;
    int num_blocks = 1;
    double p_in = 0.9;
    std::string tag;

    void validate() const;  // UsageError
};

TraceFile gen_trace(const TraceSpec& spec, std::uint64_t seed);

}  // namespace moesim
