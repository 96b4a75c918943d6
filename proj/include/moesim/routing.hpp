// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "moesim/matrix.hpp"
#include "moesim/token.hpp"

namespace moesim {

// Realized routing for a token batch: per token, k expert ids sorted by
// descending routing score (ties -> lower index) with aligned weights.
struct RoutingOutcome {
    int num_tokens = 0;
    int k = 0;
    std::vector<int> ids;         // num_tokens * k
    std::vector<double> weights;  // num_tokens * k

    int id(int t, int j) const { return ids[static_cast<size_t>(t) * k + j]; }
    double weight(int t, int j) const { return weights[static_cast<size_t>(t) * k + j]; }
    std::span<const int> ids_of(int t) const { return {ids.data() + static_cast<size_t>(t) * k, static_cast<size_t>(k)}; }
    std::span<const double> weights_of(int t) const {
        return {weights.data() + static_cast<size_t>(t) * k, static_cast<size_t>(k)};
    }

    // ids distinct, in [0, num_experts), weights positive. RoutingError otherwise.
    void validate(int num_experts) const;
};

// The linear gate g: one row of logits per expert.
struct GateMatrix {
    Matrix weights;  // num_experts x embed_dim
};

// Softmax(g(x)) rows, one distribution per Ori token. Logits are
// x * g^T; softmax uses per-row max subtraction, all in double.
Matrix gate_scores(const TokenMatrix& x, const GateMatrix& gate, Tiles tiles = {});

// Top-k selection from softmax score rows. Ties broken by lower expert
// index. Weights are the selected scores, renormalized to sum 1 iff
// `renormalize`.
RoutingOutcome topk_route(const Matrix& scores, int k, bool renormalize = true);

// Renormalize one assembled weight row in place (sum -> 1).
void renormalize_row(std::span<double> w);

}  // namespace moesim
