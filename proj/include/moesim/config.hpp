// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "moesim/matrix.hpp"

namespace moesim {

enum class Activation { Identity, SiLU, ReLU };

struct MoEConfig {
    int num_experts = 0;
    int top_k = 0;
    int num_devices = 1;
    int embed_dim = 0;
    int hidden_dim = 0;
    Tiles tiles;
    std::uint64_t seed = 0;
    bool renormalize = true;  // renormalize top-k weights to sum 1
    Precision precision = Precision::Single;
    Activation activation = Activation::Identity;

    int experts_per_device() const { return num_experts / num_devices; }

    // Throws ConfigError. num_experts must be divisible by num_devices.
    void validate() const;
};

}  // namespace moesim
