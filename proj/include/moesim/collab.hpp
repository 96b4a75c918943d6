// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "moesim/matrix.hpp"
#include "moesim/placement.hpp"
#include "moesim/routing.hpp"

namespace moesim {

// Symmetric co-activation counts: counts[i][j] = number of tokens that
// activated both experts i and j. Zero diagonal.
struct CollabGraph {
    int num_experts = 0;
    std::vector<long long> counts;  // N_e x N_e row-major

    explicit CollabGraph(int n = 0) : num_experts(n), counts(static_cast<size_t>(n) * n, 0) {}
    long long at(int i, int j) const { return counts[static_cast<size_t>(i) * num_experts + j]; }
    long long& at(int i, int j) { return counts[static_cast<size_t>(i) * num_experts + j]; }
};

// Counts divided by the maximum edge value; all-zero input stays zero.
struct NormGraph {
    int num_experts = 0;
    std::vector<double> values;  // N_e x N_e row-major, entries in [0, 1]

    explicit NormGraph(int n = 0) : num_experts(n), values(static_cast<size_t>(n) * n, 0.0) {}
    double at(int i, int j) const { return values[static_cast<size_t>(i) * num_experts + j]; }
    double& at(int i, int j) { return values[static_cast<size_t>(i) * num_experts + j]; }
};

// Communication accounting for one forward pass.
struct CommReport {
    double mean_replicas = 0.0;  // measured mean per-token device span
    double cap_replicas = 0.0;   // strategy cap (min(k, N_d), or the prune budget)
    double intra_share = 0.0;    // share of co-activated expert pairs kept on one device
    double inter_share = 0.0;
    long long cross_device_bytes = 0;  // dispatch-direction all-to-all volume
    std::vector<long long> per_device_token_counts;  // Sfd rows received per device
};

struct ReplicaBounds {
    double lower = 0.0;
    double upper = 0.0;
};

CollabGraph build_collab_graph(const RoutingOutcome& routing, int num_experts);
void accumulate_collab(CollabGraph& g, const RoutingOutcome& routing);

NormGraph normalize_graph(const CollabGraph& g);

// Mean over tokens of |{devices hosting >=1 of the token's experts}|.
// Empty batch -> 0. Unplaced expert id -> PlacementError.
double mean_token_replicas(const RoutingOutcome& routing, const Placement& placement);

// ceil(k*N_d/N_e) and min(k, N_d); requires N_e divisible by N_d.
ReplicaBounds replica_bounds(int k, int num_experts, int num_devices);

// Mean of P over same-device expert pairs (per device; single-expert
// device -> 0) and over cross-device pairs (per device pair).
struct IntraInterMetrics {
    std::vector<double> intra;  // per device
    Matrix inter;               // N_d x N_d, diagonal 0
};
IntraInterMetrics intra_inter_metrics(const NormGraph& p, const Placement& placement);

// Intra vs inter share over all co-activated expert pairs of all
// tokens. No pairs (k = 1 or empty batch) -> (0, 0).
std::pair<double, double> collaboration_shares(const RoutingOutcome& routing,
                                               const Placement& placement);

// Largest-connected-component growth over a routing stream. Points
// start at (0 tokens, size 0) and are appended once per batch.
class ComponentTracker {
  public:
    explicit ComponentTracker(int num_experts);

    void add(const RoutingOutcome& batch);
    const std::vector<std::pair<long long, int>>& points() const { return points_; }
    int max_component() const { return points_.back().second; }

  private:
    int num_experts_;
    long long tokens_seen_ = 0;
    std::vector<char> adjacency_;  // edge-present = co-activation count > 0
    std::vector<std::pair<long long, int>> points_;

    int largest_component() const;
};

}  // namespace moesim
