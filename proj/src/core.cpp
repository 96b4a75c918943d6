// SPDX-License-Identifier: Apache-2.0
#include <string>

#include "moesim/config.hpp"
#include "moesim/rng.hpp"
#include "moesim/token.hpp"

namespace moesim {

void MoEConfig::validate() const {
    if (num_experts < 1) throw ConfigError("config: num_experts must be >= 1");
    if (num_devices < 1) throw ConfigError("config: num_devices must be >= 1");
    if (top_k < 1 || top_k > num_experts) {
        throw ConfigError("config: top_k must satisfy 1 <= k <= num_experts (k=" +
                          std::to_string(top_k) + ", experts=" + std::to_string(num_experts) + ")");
    }
    if (num_experts % num_devices != 0) {
        throw ConfigError("config: num_experts (" + std::to_string(num_experts) +
                          ") must be divisible by num_devices (" + std::to_string(num_devices) + ")");
    }
    if (embed_dim < 1 || hidden_dim < 1) throw ConfigError("config: dims must be >= 1");
    if (tiles.m < 1 || tiles.k < 1 || tiles.n < 1) throw ConfigError("config: tile sizes must be >= 1");
}

void ExpertWeights::validate() const {
    if (static_cast<int>(w1.size()) != num_experts || static_cast<int>(w2.size()) != num_experts) {
        throw ShapeError("experts: weight list length != num_experts");
    }
    for (int e = 0; e < num_experts; ++e) {
        if (w1[e].rows != w1[0].rows || w1[e].cols != w1[0].cols || w2[e].rows != w2[0].rows ||
            w2[e].cols != w2[0].cols) {
            throw ShapeError("experts: per-expert matrices must share shapes");
        }
        if (w1[e].cols != w2[e].rows || w1[e].rows != w2[e].cols) {
            throw ShapeError("experts: w2 must be the reversed shape of w1");
        }
    }
}

ExpertWeights ExpertWeights::random(int num_experts, int embed_dim, int hidden_dim, Rng& rng,
                                    Precision prec, Activation act) {
    ExpertWeights w;
    w.num_experts = num_experts;
    w.activation = act;
    w.w1.reserve(num_experts);
    w.w2.reserve(num_experts);
    for (int e = 0; e < num_experts; ++e) {
        w.w1.push_back(random_matrix(embed_dim, hidden_dim, rng, prec));
        w.w2.push_back(random_matrix(hidden_dim, embed_dim, rng, prec));
    }
    return w;
}

Matrix random_matrix(int rows, int cols, Rng& rng, Precision prec) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = quantize(rng.uniform(-1.0, 1.0), prec);
    return m;
}

}  // namespace moesim
