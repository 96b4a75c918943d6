// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "moesim/config.hpp"
#include "moesim/matrix.hpp"
#include "moesim/rng.hpp"

namespace moesim {

// Token tensor states along the expert-parallel data path:
//   Ori - one row per token (layer input/output)
//   Sfd - one row per (token, device) pair, the communication payload
//   Epd - one row per (token, expert) pair, the expert-compute layout
// Row counts obey Ori <= Sfd <= Epd, with Epd = k * Ori for exact-k routing.
enum class TokenState { Ori, Sfd, Epd };

struct TokenMatrix {
    Matrix values;
    TokenState state = TokenState::Ori;

    TokenMatrix() = default;
    TokenMatrix(Matrix m, TokenState s) : values(std::move(m)), state(s) {}

    int rows() const { return values.rows; }
    int cols() const { return values.cols; }
};

// Per-expert two-layer MLP weights: w1[e] is D x H, w2[e] is H x D.
// The activation sits between the two projections and is applied
// identically in the expert-parallel pipeline and the dense oracle.
struct ExpertWeights {
    int num_experts = 0;
    std::vector<Matrix> w1;
    std::vector<Matrix> w2;
    Activation activation = Activation::Identity;

    void validate() const;  // shared shapes across experts, ShapeError otherwise

    static ExpertWeights random(int num_experts, int embed_dim, int hidden_dim, Rng& rng,
                                Precision prec = Precision::Single,
                                Activation act = Activation::Identity);
};

}  // namespace moesim
