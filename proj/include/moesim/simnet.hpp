// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "moesim/pipeline.hpp"

namespace moesim {

// Simulated cluster. The link model only annotates reports; computed
// values never depend on it.
struct ClusterSpec {
    int num_devices = 1;
    int bytes_per_scalar = 4;
    std::optional<double> seconds_per_byte;
};

enum class SourceMode { RoundRobin, SingleSource };

// Replica accounting for the dispatch stage: ReplicateK counts one
// replica per selected expert (duplicates per device not merged);
// Dedup counts distinct devices per token.
enum class ReplicationMode { ReplicateK, Dedup };

struct LatencyFit {
    double slope = 0.0;      // seconds per replica unit
    double intercept = 0.0;  // seconds
    double r_squared = 0.0;
};

// Runs the expert-parallel pipeline across the simulated cluster with
// the two exchange barriers and full communication accounting.
ForwardResult run_cluster_forward(const TokenMatrix& x, const GateMatrix& gate,
                                  const ExpertWeights& experts, const Placement& placement,
                                  const PruneSpec& prune, const MoEConfig& config,
                                  const ClusterSpec& cluster,
                                  SourceMode mode = SourceMode::RoundRobin,
                                  ForwardState* save = nullptr);

double baseline_replication_ct(const RoutingOutcome& routing, const Placement& placement,
                               ReplicationMode mode);

// Ordinary least squares over (replica factor, seconds) points.
// Fewer than 2 distinct x values -> UsageError.
LatencyFit fit_latency(std::span<const std::pair<double, double>> points);

}  // namespace moesim
