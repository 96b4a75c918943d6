// SPDX-License-Identifier: Apache-2.0
#include "moesim/routing.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace moesim {

void RoutingOutcome::validate(int num_experts) const {
    if (static_cast<int>(ids.size()) != num_tokens * k || ids.size() != weights.size()) {
        throw RoutingError("routing: ids/weights length mismatch");
    }
    for (int t = 0; t < num_tokens; ++t) {
        auto row = ids_of(t);
        for (int j = 0; j < k; ++j) {
            if (row[j] < 0 || row[j] >= num_experts) {
                throw RoutingError("routing: expert id out of range at token " + std::to_string(t));
            }
            if (weight(t, j) <= 0.0) {
                throw RoutingError("routing: non-positive weight at token " + std::to_string(t));
            }
            for (int l = 0; l < j; ++l) {
                if (row[l] == row[j]) {
                    throw RoutingError("routing: duplicate expert id at token " + std::to_string(t));
                }
            }
        }
    }
}

Matrix gate_scores(const TokenMatrix& x, const GateMatrix& gate, Tiles tiles) {
    if (x.state != TokenState::Ori) throw ShapeError("gate_scores: expects Ori tokens");
    if (x.cols() != gate.weights.cols) {
        throw ShapeError("gate_scores: token width " + std::to_string(x.cols()) +
                         " != gate width " + std::to_string(gate.weights.cols));
    }
    // Logits and softmax in double; routing metadata is never quantized.
    Matrix logits = tiled_matmul(x.values, transposed(gate.weights), tiles, Precision::Double);
    for (int t = 0; t < logits.rows; ++t) {
        auto row = logits.row(t);
        const double mx = *std::max_element(row.begin(), row.end());
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
    return logits;
}

void renormalize_row(std::span<double> w) {
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    if (sum <= 0.0) throw RoutingError("renormalize: non-positive weight sum");
    for (double& v : w) v /= sum;
}

RoutingOutcome topk_route(const Matrix& scores, int k, bool renormalize) {
    if (k < 1 || k > scores.cols) throw RoutingError("topk_route: k out of range");
    RoutingOutcome out;
    out.num_tokens = scores.rows;
    out.k = k;
    out.ids.resize(static_cast<size_t>(scores.rows) * k);
    out.weights.resize(static_cast<size_t>(scores.rows) * k);
    std::vector<int> order(scores.cols);
    for (int t = 0; t < scores.rows; ++t) {
        std::iota(order.begin(), order.end(), 0);
        auto row = scores.row(t);
        std::partial_sort(order.begin(), order.begin() + k, order.end(), [&](int a, int b) {
            if (row[a] != row[b]) return row[a] > row[b];
            return a < b;
        });
        for (int j = 0; j < k; ++j) {
            out.ids[static_cast<size_t>(t) * k + j] = order[j];
            out.weights[static_cast<size_t>(t) * k + j] = row[order[j]];
        }
        if (renormalize) {
            renormalize_row({out.weights.data() + static_cast<size_t>(t) * k, static_cast<size_t>(k)});
        }
    }
    return out;
}

}  // namespace moesim
