// SPDX-License-Identifier: Apache-2.0
#include "moesim/collab.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace moesim {

void accumulate_collab(CollabGraph& g, const RoutingOutcome& routing) {
    for (int t = 0; t < routing.num_tokens; ++t) {
        auto row = routing.ids_of(t);
        for (size_t a = 0; a < row.size(); ++a) {
            if (row[a] < 0 || row[a] >= g.num_experts) {
                throw RoutingError("collab: expert id " + std::to_string(row[a]) + " out of range");
            }
            for (size_t b = a + 1; b < row.size(); ++b) {
                g.at(row[a], row[b]) += 1;
                g.at(row[b], row[a]) += 1;
            }
        }
    }
}

CollabGraph build_collab_graph(const RoutingOutcome& routing, int num_experts) {
    CollabGraph g(num_experts);
    accumulate_collab(g, routing);
    return g;
}

NormGraph normalize_graph(const CollabGraph& g) {
    NormGraph p(g.num_experts);
    const long long mx = g.counts.empty() ? 0 : *std::max_element(g.counts.begin(), g.counts.end());
    if (mx == 0) return p;  // all-zero graph stays all-zero
    for (size_t i = 0; i < g.counts.size(); ++i) {
        p.values[i] = static_cast<double>(g.counts[i]) / static_cast<double>(mx);
    }
    return p;
}

double mean_token_replicas(const RoutingOutcome& routing, const Placement& placement) {
    if (routing.num_tokens == 0) return 0.0;
    const std::vector<int> dev_of = placement.expert_to_device();
    long long total = 0;
    std::vector<char> seen(placement.num_devices());
    for (int t = 0; t < routing.num_tokens; ++t) {
        std::fill(seen.begin(), seen.end(), 0);
        int span = 0;
        for (int e : routing.ids_of(t)) {
            if (e < 0 || e >= static_cast<int>(dev_of.size())) {
                throw PlacementError("replicas: expert " + std::to_string(e) + " not placed");
            }
            if (!seen[dev_of[e]]) {
                seen[dev_of[e]] = 1;
                ++span;
            }
        }
        total += span;
    }
    return static_cast<double>(total) / routing.num_tokens;
}

ReplicaBounds replica_bounds(int k, int num_experts, int num_devices) {
    if (num_devices < 1 || num_experts < 1 || k < 1 || k > num_experts) {
        throw ConfigError("replica_bounds: invalid (k, N_e, N_d)");
    }
    if (num_experts % num_devices != 0) {
        throw ConfigError("replica_bounds: num_experts must be divisible by num_devices");
    }
    ReplicaBounds b;
    b.lower = static_cast<double>((static_cast<long long>(k) * num_devices + num_experts - 1) / num_experts);
    b.upper = static_cast<double>(std::min(k, num_devices));
    return b;
}

IntraInterMetrics intra_inter_metrics(const NormGraph& p, const Placement& placement) {
    placement.validate(p.num_experts);
    const int nd = placement.num_devices();
    IntraInterMetrics m;
    m.intra.assign(nd, 0.0);
    m.inter = Matrix(nd, nd);
    for (int d = 0; d < nd; ++d) {
        const auto& experts = placement.devices[d];
        const size_t n = experts.size();
        if (n < 2) continue;  // single-expert device: intra defined as 0
        double sum = 0.0;
        for (size_t a = 0; a < n; ++a)
            for (size_t b = 0; b < n; ++b)
                if (a != b) sum += p.at(experts[a], experts[b]);
        m.intra[d] = sum / static_cast<double>(n * (n - 1));
    }
    for (int d1 = 0; d1 < nd; ++d1) {
        for (int d2 = 0; d2 < nd; ++d2) {
            if (d1 == d2) continue;
            double sum = 0.0;
            for (int i : placement.devices[d1])
                for (int j : placement.devices[d2]) sum += p.at(i, j);
            m.inter(d1, d2) =
                sum / static_cast<double>(placement.devices[d1].size() * placement.devices[d2].size());
        }
    }
    return m;
}

std::pair<double, double> collaboration_shares(const RoutingOutcome& routing,
                                               const Placement& placement) {
    const std::vector<int> dev_of = placement.expert_to_device();
    long long intra = 0, inter = 0;
    for (int t = 0; t < routing.num_tokens; ++t) {
        auto row = routing.ids_of(t);
        for (size_t a = 0; a < row.size(); ++a)
            for (size_t b = a + 1; b < row.size(); ++b)
                (dev_of[row[a]] == dev_of[row[b]] ? intra : inter) += 1;
    }
    const long long total = intra + inter;
    if (total == 0) return {0.0, 0.0};
    return {static_cast<double>(intra) / total, static_cast<double>(inter) / total};
}

ComponentTracker::ComponentTracker(int num_experts)
    : num_experts_(num_experts),
      adjacency_(static_cast<size_t>(num_experts) * num_experts, 0),
      points_{{0, 0}} {}

void ComponentTracker::add(const RoutingOutcome& batch) {
    for (int t = 0; t < batch.num_tokens; ++t) {
        auto row = batch.ids_of(t);
        for (size_t a = 0; a < row.size(); ++a) {
            for (size_t b = a + 1; b < row.size(); ++b) {
                adjacency_[static_cast<size_t>(row[a]) * num_experts_ + row[b]] = 1;
                adjacency_[static_cast<size_t>(row[b]) * num_experts_ + row[a]] = 1;
            }
        }
    }
    tokens_seen_ += batch.num_tokens;
    points_.emplace_back(tokens_seen_, largest_component());
}

int ComponentTracker::largest_component() const {
    // Experts with no edges count as isolated vertices of size 1 once
    // they have been touched; we size components over experts that
    // appear in at least one edge, so an empty graph reports 0.
    std::vector<char> has_edge(num_experts_, 0);
    for (int i = 0; i < num_experts_; ++i)
        for (int j = 0; j < num_experts_; ++j)
            if (adjacency_[static_cast<size_t>(i) * num_experts_ + j]) has_edge[i] = 1;
    std::vector<int> comp(num_experts_, -1);
    int best = 0;
    std::vector<int> stack;
    for (int s = 0; s < num_experts_; ++s) {
        if (!has_edge[s] || comp[s] >= 0) continue;
        int size = 0;
        stack.assign(1, s);
        comp[s] = s;
        while (!stack.empty()) {
            const int u = stack.back();
            stack.pop_back();
            ++size;
            for (int v = 0; v < num_experts_; ++v) {
                if (adjacency_[static_cast<size_t>(u) * num_experts_ + v] && comp[v] < 0) {
                    comp[v] = s;
                    stack.push_back(v);
                }
            }
        }
        best = std::max(best, size);
    }
    return best;
}

}  // namespace moesim
