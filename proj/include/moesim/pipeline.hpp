// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "moesim/collab.hpp"
#include "moesim/config.hpp"
#include "moesim/placement.hpp"
#include "moesim/pruning.hpp"
#include "moesim/routing.hpp"
#include "moesim/token.hpp"

namespace moesim {

// clang-format off
// Re-index maps with -1 sentinels drive every state transition. For
// placement [[0,1],[2,3]] and tokens routed {0,1}, {0,2}, {2,3}:
//
//   dispatch index (devices x Ori tokens)     compute index on device 0
//        t0  t1  t2                           (local experts x Sfd rows)
//   d0 [  0   1  -1 ]   Sfd row 0 <- t0             r0  r1
//   d1 [ -1   2   3 ]   Sfd row 1 <- t1      e0  [  0   1 ]
//                       Sfd row 2 <- t1      e1  [  2  -1 ]
//                       Sfd row 3 <- t2
//
// Counters are allocated device-major (dispatch) / expert-major
// (compute), so each device's Sfd slice is contiguous and each local
// expert's Epd slice is contiguous.
// clang-format on

// Devices x Ori tokens; non-negative entries number the Sfd rows.
struct DispatchIndex {
    int num_devices = 0;
    int num_tokens = 0;
    std::vector<int> entries;
    int n_sfd = 0;

    int at(int d, int t) const { return entries[static_cast<size_t>(d) * num_tokens + t]; }
};

// Local experts x Sfd rows; non-negative entries number the Epd rows.
struct ComputeIndex {
    int num_local_experts = 0;
    int num_rows = 0;
    std::vector<int> entries;
    int n_epd = 0;

    int at(int e, int t) const { return entries[static_cast<size_t>(e) * num_rows + t]; }
};

// Dispatch output: Sfd token rows plus the routing metadata replicated
// alongside (full top-k ids and weights per row) and bookkeeping.
struct SfdBatch {
    TokenMatrix x;                // state Sfd
    std::vector<int> ids;         // rows x k, global expert ids
    std::vector<double> weights;  // rows x k
    std::vector<int> token;       // global Ori token per row
    int k = 0;
};

// Rows landed on one device after the first all-to-all.
struct DeviceInbox {
    TokenMatrix x;  // state Sfd
    std::vector<int> ids;
    std::vector<double> weights;
    std::vector<int> token;
    std::vector<int> source;       // source device per row
    std::vector<int> source_slot;  // row index within the source SfdBatch
    int k = 0;
};

struct ExchangeResult {
    std::vector<DeviceInbox> inboxes;
    long long crossing_rows = 0;  // rows whose source != destination
};

// --- index construction -------------------------------------------------

DispatchIndex build_dispatch_index(const RoutingOutcome& routing, const Placement& placement);
// Subset variant for sharded sources; `tokens` lists the Ori rows owned
// by one source device, in ascending order.
DispatchIndex build_dispatch_index(const RoutingOutcome& routing, const Placement& placement,
                                   std::span<const int> tokens);

// `routed_ids_per_row` carries, per Sfd row, the row's global expert
// ids restricted to this device (filtered at the consumer). Foreign ids
// or rows with no local expert -> RoutingError.
ComputeIndex build_compute_index(int num_rows,
                                 const std::vector<std::vector<int>>& routed_ids_per_row,
                                 std::span<const int> local_expert_ids);

// --- data movement ------------------------------------------------------

SfdBatch dispatch(const TokenMatrix& x, const RoutingOutcome& routing, const DispatchIndex& index,
                  std::span<const int> tokens = {});

// Destination d receives, source-major then counter order, every row
// flagged for d. Rows with source == destination cross no link.
ExchangeResult all_to_all_exchange(const std::vector<SfdBatch>& outbound,
                                   const std::vector<DispatchIndex>& index_per_source);

// --- expert compute -----------------------------------------------------

// Epd row index.at(e, t) = Sfd row t times w1[e].
TokenMatrix scatter_matmul(const TokenMatrix& x_sfd, std::span<const Matrix> w1_local,
                           const ComputeIndex& index, Tiles tiles, Precision prec);

TokenMatrix apply_activation(const TokenMatrix& x, Activation act, Precision prec);

// Scales Epd row index.at(e, t) by weight_grid[e * num_rows + t]. NaN
// entries mark missing weights -> RoutingError when referenced.
TokenMatrix weight_modulate(const TokenMatrix& x_epd, const ComputeIndex& index,
                            std::span<const double> weight_grid, Precision prec);

// Sfd row t = sum over local experts e (ascending) of
// Epd row index.at(e, t) times w2[e].
TokenMatrix merge_matmul(const TokenMatrix& x_epd, std::span<const Matrix> w2_local,
                         const ComputeIndex& index, Tiles tiles, Precision prec);

// Ori row i = sum over devices d (ascending) of returned Sfd row
// index.at(d, i).
TokenMatrix combine(const TokenMatrix& y_returned, const DispatchIndex& index, Precision prec);

// Adjoints of the two sparse matmuls (weights held fixed).
Matrix scatter_matmul_adjoint(const Matrix& g_epd, std::span<const Matrix> w1_local,
                              const ComputeIndex& index, Tiles tiles, Precision prec);
Matrix merge_matmul_adjoint(const Matrix& g_sfd, std::span<const Matrix> w2_local,
                            const ComputeIndex& index, Tiles tiles, Precision prec);

// --- end-to-end forward / backward ---------------------------------------

struct ForwardResult {
    TokenMatrix x_out;  // Ori order
    CommReport report;
};

// Saved per-device intermediates for the backward pass.
struct ShardRecord {
    std::vector<int> local_experts;
    ComputeIndex cindex;
    Matrix x_in;       // received Sfd rows
    Matrix epd_pre;    // scatter output, before activation
    Matrix epd_act;    // after activation
    Matrix epd_mod;    // after weight modulation
    std::vector<double> weight_grid;  // local experts x Sfd rows
    std::vector<int> row_token;
    std::vector<int> row_source;
    std::vector<int> row_source_slot;
    std::vector<int> epd_token;  // per Epd row: global token
    std::vector<int> epd_slot;   // per Epd row: slot in the routing row
    Matrix y_out;                // merge output
};

struct ForwardState {
    bool valid = false;
    MoEConfig config;
    ExpertWeights experts;
    Placement placement;
    RoutingOutcome routing;  // effective (post-prune)
    std::vector<int> sources;
    std::vector<std::vector<int>> source_tokens;
    std::vector<DispatchIndex> dindex;
    std::vector<ShardRecord> shards;
};

struct Gradients {
    Matrix x;                // Ori tokens
    std::vector<Matrix> w1;  // per expert (global ids)
    std::vector<Matrix> w2;
    std::vector<double> routing_weights;  // num_tokens x k, aligned with the saved routing
};

// Runs the full indexed data path for a fixed routing: dispatch ->
// exchange -> per-device scatter/activation/modulate/merge -> return
// exchange -> combine. `sources` assigns each Ori token to a source
// device; empty means round-robin.
ForwardResult forward_given_routing(const TokenMatrix& x, const RoutingOutcome& routing,
                                    const ExpertWeights& experts, const Placement& placement,
                                    const MoEConfig& config, std::span<const int> sources = {},
                                    int bytes_per_scalar = 4, double cap_replicas = -1.0,
                                    ForwardState* save = nullptr);

// Route (and optionally prune), then run the indexed data path.
ForwardResult forward_expert_parallel(const TokenMatrix& x, const GateMatrix& gate,
                                      const ExpertWeights& experts, const Placement& placement,
                                      const PruneSpec& prune, const MoEConfig& config,
                                      std::span<const int> sources = {}, int bytes_per_scalar = 4,
                                      ForwardState* save = nullptr);

// Straightforward per-token weighted sum of expert outputs over the
// given routing; the correctness oracle for the indexed path.
TokenMatrix dense_given_routing(const TokenMatrix& x, const RoutingOutcome& routing,
                                const ExpertWeights& experts, Precision prec);

TokenMatrix forward_dense(const TokenMatrix& x, const GateMatrix& gate,
                          const ExpertWeights& experts, int k, bool renormalize = true,
                          Tiles tiles = {}, Precision prec = Precision::Single);

// Exact adjoints through combine, merge, modulation, activation,
// scatter and dispatch. Routing (ids) is treated as fixed; weight
// gradients cover the modulation weights. StateError if `state` was
// not produced by a saving forward call.
Gradients backward_vjps(const Matrix& upstream, const ForwardState& state);

std::vector<int> round_robin_sources(int num_tokens, int num_devices);

}  // namespace moesim
