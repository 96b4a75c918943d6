// SPDX-License-Identifier: Apache-2.0
#include "moesim/simnet.hpp"

#include <cmath>

namespace moesim {

ForwardResult run_cluster_forward(const TokenMatrix& x, const GateMatrix& gate,
                                  const ExpertWeights& experts, const Placement& placement,
                                  const PruneSpec& prune, const MoEConfig& config,
                                  const ClusterSpec& cluster, SourceMode mode,
                                  ForwardState* save) {
    if (cluster.num_devices != placement.num_devices()) {
        throw ConfigError("cluster: num_devices disagrees with the placement");
    }
    std::vector<int> sources;
    if (mode == SourceMode::SingleSource) {
        sources.assign(x.rows(), 0);
    } else {
        sources = round_robin_sources(x.rows(), cluster.num_devices);
    }
    return forward_expert_parallel(x, gate, experts, placement, prune, config, sources,
                                   cluster.bytes_per_scalar, save);
}

double baseline_replication_ct(const RoutingOutcome& routing, const Placement& placement,
                               ReplicationMode mode) {
    if (mode == ReplicationMode::Dedup) return mean_token_replicas(routing, placement);
    if (routing.num_tokens == 0) return 0.0;
    (void)placement.expert_to_device();  // still requires full coverage
    long long replicas = 0;
    for (int t = 0; t < routing.num_tokens; ++t) replicas += routing.ids_of(t).size();
    return static_cast<double>(replicas) / routing.num_tokens;
}

LatencyFit fit_latency(std::span<const std::pair<double, double>> points) {
    double distinct = 0;
    for (size_t i = 0; i < points.size(); ++i) {
        bool seen = false;
        for (size_t j = 0; j < i; ++j) seen = seen || points[j].first == points[i].first;
        if (!seen) ++distinct;
    }
    if (points.size() < 2 || distinct < 2) {
        throw UsageError("fit: need at least 2 points with distinct x values");
    }
    const double n = static_cast<double>(points.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [px, py] : points) {
        mx += px;
        my += py;
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [px, py] : points) {
        sxx += (px - mx) * (px - mx);
        sxy += (px - mx) * (py - my);
        syy += (py - my) * (py - my);
    }
    LatencyFit fit;
    fit.slope = sxy / sxx;
    fit.intercept = my - fit.slope * mx;
    fit.r_squared = syy == 0.0 ? 1.0 : (sxy * sxy) / (sxx * syy);
    return fit;
}

}  // namespace moesim
