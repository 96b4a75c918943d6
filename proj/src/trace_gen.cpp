// SPDX-License-Identifier: Apache-2.0
#include "moesim/trace_gen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "moesim/rng.hpp"

namespace moesim {

void TraceSpec::validate() const {
    if (num_experts < 1 || top_k < 1 || top_k > num_experts || num_tokens < 0) {
        throw UsageError("trace spec: need 1 <= top_k <= num_experts and num_tokens >= 0");
    }
    if (dist == Dist::Zipf && alpha < 0.0) throw UsageError("trace spec: zipf alpha must be >= 0");
    if (dist == Dist::PlantedBlocks) {
        if (num_blocks < 1 || num_experts % num_blocks != 0) {
            throw UsageError("trace spec: num_experts must be a positive multiple of num_blocks");
        }
        if (p_in < 0.0 || p_in > 1.0) throw UsageError("trace spec: p_in must be in [0, 1]");
    }
}

namespace {

// Weighted draw without replacement: walk experts in index order and
// remove the chosen weight. Exact and deterministic.
int draw_weighted(const std::vector<double>& weight, std::vector<char>& taken, double& total,
                  Rng& rng) {
    const double r = rng.uniform() * total;
    double acc = 0.0;
    int last = -1;
    for (size_t e = 0; e < weight.size(); ++e) {
        if (taken[e]) continue;
        last = static_cast<int>(e);
        acc += weight[e];
        if (r < acc) break;
    }
    taken[last] = 1;
    total -= weight[last];
    return last;
}

std::vector<double> descending_weights(int k, Rng& rng) {
    std::vector<double> w(k);
    for (double& v : w) v = rng.uniform(1e-3, 1.0);
    std::sort(w.begin(), w.end(), std::greater<>());
    const double sum = std::accumulate(w.begin(), w.end(), 0.0);
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

TraceFile gen_trace(const TraceSpec& spec, std::uint64_t seed) {
    spec.validate();
    Rng rng(seed);
    TraceFile trace;
    trace.num_experts = spec.num_experts;
    trace.top_k = spec.top_k;
    trace.tag = spec.tag;
    trace.routing.num_tokens = spec.num_tokens;
    trace.routing.k = spec.top_k;

    const int ne = spec.num_experts;
    std::vector<char> taken(ne, 0);

    if (spec.dist == TraceSpec::Dist::PlantedBlocks) {
        // Hidden clusters from a seeded permutation, deliberately
        // unaligned with the contiguous trivial layout.
        std::vector<int> perm(ne);
        std::iota(perm.begin(), perm.end(), 0);
        for (int i = ne - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
        const int block_size = ne / spec.num_blocks;
        std::vector<int> block_of(ne);
        for (int i = 0; i < ne; ++i) block_of[perm[i]] = i / block_size;

        for (int t = 0; t < spec.num_tokens; ++t) {
            const int home = rng.uniform_int(spec.num_blocks);
            std::fill(taken.begin(), taken.end(), 0);
            std::vector<int> ids;
            for (int j = 0; j < spec.top_k; ++j) {
                const bool want_home = rng.uniform() < spec.p_in;
                std::vector<int> candidates;
                for (int e = 0; e < ne; ++e) {
                    if (!taken[e] && (block_of[e] == home) == want_home) candidates.push_back(e);
                }
                if (candidates.empty()) {
                    for (int e = 0; e < ne; ++e)
                        if (!taken[e]) candidates.push_back(e);
                }
                const int pick = candidates[rng.uniform_int(static_cast<int>(candidates.size()))];
                taken[pick] = 1;
                ids.push_back(pick);
            }
            trace.routing.ids.insert(trace.routing.ids.end(), ids.begin(), ids.end());
            const auto w = descending_weights(spec.top_k, rng);
            trace.routing.weights.insert(trace.routing.weights.end(), w.begin(), w.end());
        }
        return trace;
    }

    // Uniform is Zipf with alpha = 0; one sampling path keeps the two
    // byte-identical under equal seeds.
    std::vector<double> weight(ne, 1.0);
    if (spec.dist == TraceSpec::Dist::Zipf) {
        for (int e = 0; e < ne; ++e) weight[e] = std::pow(static_cast<double>(e + 1), -spec.alpha);
    }
    const double full = std::accumulate(weight.begin(), weight.end(), 0.0);
    for (int t = 0; t < spec.num_tokens; ++t) {
        std::fill(taken.begin(), taken.end(), 0);
        double total = full;
        for (int j = 0; j < spec.top_k; ++j) {
            trace.routing.ids.push_back(draw_weighted(weight, taken, total, rng));
        }
        const auto w = descending_weights(spec.top_k, rng);
        trace.routing.weights.insert(trace.routing.weights.end(), w.begin(), w.end());
    }
    return trace;
}

}  // namespace moesim
