// SPDX-License-Identifier: Apache-2.0
#include "moesim/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace moesim {

std::vector<int> round_robin_sources(int num_tokens, int num_devices) {
    std::vector<int> s(num_tokens);
    for (int t = 0; t < num_tokens; ++t) s[t] = t % num_devices;
    return s;
}

DispatchIndex build_dispatch_index(const RoutingOutcome& routing, const Placement& placement) {
    std::vector<int> all(routing.num_tokens);
    std::iota(all.begin(), all.end(), 0);
    return build_dispatch_index(routing, placement, all);
}

DispatchIndex build_dispatch_index(const RoutingOutcome& routing, const Placement& placement,
                                   std::span<const int> tokens) {
    const std::vector<int> dev_of = placement.expert_to_device();
    DispatchIndex idx;
    idx.num_devices = placement.num_devices();
    idx.num_tokens = static_cast<int>(tokens.size());
    idx.entries.assign(static_cast<size_t>(idx.num_devices) * idx.num_tokens, -1);
    int ctr = 0;
    for (int d = 0; d < idx.num_devices; ++d) {
        for (int i = 0; i < idx.num_tokens; ++i) {
            bool hit = false;
            for (int e : routing.ids_of(tokens[i])) {
                if (e < 0 || e >= static_cast<int>(dev_of.size())) {
                    throw PlacementError("dispatch index: expert " + std::to_string(e) +
                                         " missing from placement");
                }
                if (dev_of[e] == d) {
                    hit = true;
                    break;
                }
            }
            if (hit) idx.entries[static_cast<size_t>(d) * idx.num_tokens + i] = ctr++;
        }
    }
    idx.n_sfd = ctr;
    return idx;
}

ComputeIndex build_compute_index(int num_rows,
                                 const std::vector<std::vector<int>>& routed_ids_per_row,
                                 std::span<const int> local_expert_ids) {
    if (static_cast<int>(routed_ids_per_row.size()) != num_rows) {
        throw ShapeError("compute index: per-row routing length mismatch");
    }
    const int n_loc = static_cast<int>(local_expert_ids.size());
    ComputeIndex idx;
    idx.num_local_experts = n_loc;
    idx.num_rows = num_rows;
    idx.entries.assign(static_cast<size_t>(n_loc) * num_rows, -1);

    std::vector<char> member(static_cast<size_t>(n_loc) * num_rows, 0);
    for (int t = 0; t < num_rows; ++t) {
        if (routed_ids_per_row[t].empty()) {
            throw RoutingError("compute index: Sfd row " + std::to_string(t) +
                               " activates no local expert");
        }
        for (int id : routed_ids_per_row[t]) {
            const auto it = std::find(local_expert_ids.begin(), local_expert_ids.end(), id);
            if (it == local_expert_ids.end()) {
                throw RoutingError("compute index: expert " + std::to_string(id) +
                                   " is not local to this device");
            }
            member[static_cast<size_t>(it - local_expert_ids.begin()) * num_rows + t] = 1;
        }
    }
    int ctr = 0;
    for (int e = 0; e < n_loc; ++e) {
        for (int t = 0; t < num_rows; ++t) {
            if (member[static_cast<size_t>(e) * num_rows + t]) {
                idx.entries[static_cast<size_t>(e) * num_rows + t] = ctr++;
            }
        }
    }
    idx.n_epd = ctr;
    return idx;
}

SfdBatch dispatch(const TokenMatrix& x, const RoutingOutcome& routing, const DispatchIndex& index,
                  std::span<const int> tokens) {
    if (x.state != TokenState::Ori) throw ShapeError("dispatch: expects Ori tokens");
    std::vector<int> all;
    if (tokens.empty() && index.num_tokens > 0) {
        all.resize(index.num_tokens);
        std::iota(all.begin(), all.end(), 0);
        tokens = all;
    }
    if (static_cast<int>(tokens.size()) != index.num_tokens) {
        throw ShapeError("dispatch: token list does not match the dispatch index");
    }
    SfdBatch out;
    out.k = routing.k;
    out.x = TokenMatrix(Matrix(index.n_sfd, x.cols()), TokenState::Sfd);
    out.ids.resize(static_cast<size_t>(index.n_sfd) * routing.k);
    out.weights.resize(static_cast<size_t>(index.n_sfd) * routing.k);
    out.token.resize(index.n_sfd);
    for (int d = 0; d < index.num_devices; ++d) {
        for (int i = 0; i < index.num_tokens; ++i) {
            const int c = index.at(d, i);
            if (c < 0) continue;
            const int t = tokens[i];
            std::copy_n(x.values.row(t).begin(), x.cols(), out.x.values.row(c).begin());
            std::copy_n(routing.ids_of(t).begin(), routing.k,
                        out.ids.begin() + static_cast<size_t>(c) * routing.k);
            std::copy_n(routing.weights_of(t).begin(), routing.k,
                        out.weights.begin() + static_cast<size_t>(c) * routing.k);
            out.token[c] = t;
        }
    }
    return out;
}

ExchangeResult all_to_all_exchange(const std::vector<SfdBatch>& outbound,
                                   const std::vector<DispatchIndex>& index_per_source) {
    if (outbound.size() != index_per_source.size() || outbound.empty()) {
        throw ShapeError("exchange: one dispatch index per source required");
    }
    const int nd = index_per_source[0].num_devices;
    const int cols = outbound[0].x.cols();
    const int k = outbound[0].k;
    ExchangeResult res;
    res.inboxes.resize(nd);

    // Pre-count so each inbox is allocated once.
    std::vector<int> counts(nd, 0);
    for (const auto& idx : index_per_source) {
        for (int d = 0; d < nd; ++d)
            for (int i = 0; i < idx.num_tokens; ++i)
                if (idx.at(d, i) >= 0) ++counts[d];
    }
    for (int d = 0; d < nd; ++d) {
        auto& in = res.inboxes[d];
        in.k = k;
        in.x = TokenMatrix(Matrix(counts[d], cols), TokenState::Sfd);
        in.ids.resize(static_cast<size_t>(counts[d]) * k);
        in.weights.resize(static_cast<size_t>(counts[d]) * k);
        in.token.resize(counts[d]);
        in.source.resize(counts[d]);
        in.source_slot.resize(counts[d]);
    }
    std::vector<int> fill(nd, 0);
    for (size_t s = 0; s < outbound.size(); ++s) {
        const auto& idx = index_per_source[s];
        const auto& batch = outbound[s];
        for (int d = 0; d < nd; ++d) {
            auto& in = res.inboxes[d];
            for (int i = 0; i < idx.num_tokens; ++i) {
                const int c = idx.at(d, i);
                if (c < 0) continue;
                const int r = fill[d]++;
                std::copy_n(batch.x.values.row(c).begin(), cols, in.x.values.row(r).begin());
                std::copy_n(batch.ids.begin() + static_cast<size_t>(c) * k, k,
                            in.ids.begin() + static_cast<size_t>(r) * k);
                std::copy_n(batch.weights.begin() + static_cast<size_t>(c) * k, k,
                            in.weights.begin() + static_cast<size_t>(r) * k);
                in.token[r] = batch.token[c];
                in.source[r] = static_cast<int>(s);
                in.source_slot[r] = c;
                if (static_cast<int>(s) != d) ++res.crossing_rows;
            }
        }
    }
    return res;
}

TokenMatrix scatter_matmul(const TokenMatrix& x_sfd, std::span<const Matrix> w1_local,
                           const ComputeIndex& index, Tiles tiles, Precision prec) {
    if (x_sfd.state != TokenState::Sfd) throw ShapeError("scatter: expects Sfd tokens");
    if (static_cast<int>(w1_local.size()) != index.num_local_experts) {
        throw ShapeError("scatter: one weight matrix per local expert required");
    }
    if (x_sfd.rows() != index.num_rows) throw ShapeError("scatter: row count mismatch");
    const int din = x_sfd.cols();
    const int dout = w1_local.empty() ? 0 : w1_local[0].cols;
    for (const Matrix& w : w1_local) {
        if (w.rows != din || w.cols != dout) throw ShapeError("scatter: weight shape mismatch");
    }
    TokenMatrix out(Matrix(index.n_epd, dout), TokenState::Epd);
    const Matrix& xv = x_sfd.values;
    for (int e = 0; e < index.num_local_experts; ++e) {
        const Matrix& w = w1_local[e];
        for (int t0 = 0; t0 < index.num_rows; t0 += tiles.m) {
            const int t1 = std::min(t0 + tiles.m, index.num_rows);
            for (int j0 = 0; j0 < dout; j0 += tiles.n) {
                const int j1 = std::min(j0 + tiles.n, dout);
                for (int t = t0; t < t1; ++t) {
                    const int r = index.at(e, t);
                    if (r < 0) continue;
                    for (int j = j0; j < j1; ++j) {
                        double acc = 0.0;
                        for (int k = 0; k < din; ++k) acc += xv(t, k) * w(k, j);
                        out.values(r, j) = quantize(acc, prec);
                    }
                }
            }
        }
    }
    return out;
}

TokenMatrix apply_activation(const TokenMatrix& x, Activation act, Precision prec) {
    TokenMatrix out = x;
    if (act == Activation::Identity) return out;
    for (double& v : out.values.data) {
        if (act == Activation::ReLU) {
            v = v > 0.0 ? v : 0.0;
        } else {  // SiLU
            v = quantize(v / (1.0 + std::exp(-v)), prec);
        }
    }
    return out;
}

TokenMatrix weight_modulate(const TokenMatrix& x_epd, const ComputeIndex& index,
                            std::span<const double> weight_grid, Precision prec) {
    if (x_epd.state != TokenState::Epd) throw ShapeError("modulate: expects Epd tokens");
    if (weight_grid.size() != index.entries.size()) {
        throw ShapeError("modulate: weight grid shape mismatch");
    }
    TokenMatrix out(Matrix(x_epd.rows(), x_epd.cols()), TokenState::Epd);
    for (int e = 0; e < index.num_local_experts; ++e) {
        for (int t = 0; t < index.num_rows; ++t) {
            const int r = index.at(e, t);
            if (r < 0) continue;
            const double w = weight_grid[static_cast<size_t>(e) * index.num_rows + t];
            if (std::isnan(w)) {
                throw RoutingError("modulate: missing routing weight for Sfd row " +
                                   std::to_string(t));
            }
            for (int j = 0; j < x_epd.cols(); ++j) {
                out.values(r, j) = quantize(x_epd.values(r, j) * w, prec);
            }
        }
    }
    return out;
}

TokenMatrix merge_matmul(const TokenMatrix& x_epd, std::span<const Matrix> w2_local,
                         const ComputeIndex& index, Tiles tiles, Precision prec) {
    if (x_epd.state != TokenState::Epd) throw ShapeError("merge: expects Epd tokens");
    if (static_cast<int>(w2_local.size()) != index.num_local_experts) {
        throw ShapeError("merge: one weight matrix per local expert required");
    }
    const int din = x_epd.cols();
    const int dout = w2_local.empty() ? 0 : w2_local[0].cols;
    for (const Matrix& w : w2_local) {
        if (w.rows != din || w.cols != dout) throw ShapeError("merge: weight shape mismatch");
    }
    TokenMatrix out(Matrix(index.num_rows, dout), TokenState::Sfd);
    const Matrix& xv = x_epd.values;
    for (int t0 = 0; t0 < index.num_rows; t0 += tiles.m) {
        const int t1 = std::min(t0 + tiles.m, index.num_rows);
        for (int j0 = 0; j0 < dout; j0 += tiles.n) {
            const int j1 = std::min(j0 + tiles.n, dout);
            for (int t = t0; t < t1; ++t) {
                for (int j = j0; j < j1; ++j) {
                    // Ascending expert order replaces the kernel's atomic adds.
                    double acc = 0.0;
                    for (int e = 0; e < index.num_local_experts; ++e) {
                        const int r = index.at(e, t);
                        if (r < 0) continue;
                        const Matrix& w = w2_local[e];
                        for (int k = 0; k < din; ++k) acc += xv(r, k) * w(k, j);
                    }
                    out.values(t, j) = quantize(acc, prec);
                }
            }
        }
    }
    return out;
}

TokenMatrix combine(const TokenMatrix& y_returned, const DispatchIndex& index, Precision prec) {
    if (y_returned.state != TokenState::Sfd) throw ShapeError("combine: expects Sfd tokens");
    if (y_returned.rows() != index.n_sfd) throw ShapeError("combine: row count mismatch");
    TokenMatrix out(Matrix(index.num_tokens, y_returned.cols()), TokenState::Ori);
    for (int i = 0; i < index.num_tokens; ++i) {
        for (int j = 0; j < y_returned.cols(); ++j) {
            double acc = 0.0;
            for (int d = 0; d < index.num_devices; ++d) {
                const int c = index.at(d, i);
                if (c >= 0) acc += y_returned.values(c, j);
            }
            out.values(i, j) = quantize(acc, prec);
        }
    }
    return out;
}

Matrix scatter_matmul_adjoint(const Matrix& g_epd, std::span<const Matrix> w1_local,
                              const ComputeIndex& index, Tiles tiles, Precision prec) {
    (void)tiles;
    const int dout = g_epd.cols;
    const int din = w1_local.empty() ? 0 : w1_local[0].rows;
    if (g_epd.rows != index.n_epd) throw ShapeError("scatter adjoint: row count mismatch");
    Matrix g_sfd(index.num_rows, din);
    for (int t = 0; t < index.num_rows; ++t) {
        for (int i = 0; i < din; ++i) {
            double acc = 0.0;
            for (int e = 0; e < index.num_local_experts; ++e) {
                const int r = index.at(e, t);
                if (r < 0) continue;
                const Matrix& w = w1_local[e];
                for (int j = 0; j < dout; ++j) acc += g_epd(r, j) * w(i, j);
            }
            g_sfd(t, i) = quantize(acc, prec);
        }
    }
    return g_sfd;
}

Matrix merge_matmul_adjoint(const Matrix& g_sfd, std::span<const Matrix> w2_local,
                            const ComputeIndex& index, Tiles tiles, Precision prec) {
    (void)tiles;
    const int dout = g_sfd.cols;
    const int din = w2_local.empty() ? 0 : w2_local[0].rows;
    if (g_sfd.rows != index.num_rows) throw ShapeError("merge adjoint: row count mismatch");
    Matrix g_epd(index.n_epd, din);
    for (int e = 0; e < index.num_local_experts; ++e) {
        const Matrix& w = w2_local[e];
        for (int t = 0; t < index.num_rows; ++t) {
            const int r = index.at(e, t);
            if (r < 0) continue;
            for (int h = 0; h < din; ++h) {
                double acc = 0.0;
                for (int j = 0; j < dout; ++j) acc += g_sfd(t, j) * w(h, j);
                g_epd(r, h) = quantize(acc, prec);
            }
        }
    }
    return g_epd;
}

namespace {

void gather_local_weights(const ExpertWeights& experts, const std::vector<int>& local,
                          std::vector<Matrix>& w1, std::vector<Matrix>& w2) {
    w1.clear();
    w2.clear();
    for (int e : local) {
        w1.push_back(experts.w1[e]);
        w2.push_back(experts.w2[e]);
    }
}

}  // namespace

ForwardResult forward_given_routing(const TokenMatrix& x, const RoutingOutcome& routing,
                                    const ExpertWeights& experts, const Placement& placement,
                                    const MoEConfig& config, std::span<const int> sources,
                                    int bytes_per_scalar, double cap_replicas, ForwardState* save) {
    config.validate();
    experts.validate();
    if (x.state != TokenState::Ori) throw ShapeError("forward: expects Ori tokens");
    if (x.rows() != routing.num_tokens) throw ShapeError("forward: routing token count mismatch");
    routing.validate(experts.num_experts);
    placement.validate(experts.num_experts);
    if (!experts.w1.empty() && experts.w1[0].rows != x.cols()) {
        throw ShapeError("forward: token width != expert input width");
    }
    const int nd = placement.num_devices();
    const Precision prec = config.precision;

    std::vector<int> src_storage;
    if (sources.empty()) {
        src_storage = round_robin_sources(x.rows(), nd);
        sources = src_storage;
    }
    if (static_cast<int>(sources.size()) != x.rows()) {
        throw ShapeError("forward: one source device per token required");
    }
    std::vector<std::vector<int>> source_tokens(nd);
    for (int t = 0; t < x.rows(); ++t) {
        if (sources[t] < 0 || sources[t] >= nd) throw ShapeError("forward: source device out of range");
        source_tokens[sources[t]].push_back(t);
    }

    // Dispatch per source, then the first all-to-all.
    std::vector<DispatchIndex> dindex(nd);
    std::vector<SfdBatch> outbound(nd);
    for (int s = 0; s < nd; ++s) {
        dindex[s] = build_dispatch_index(routing, placement, source_tokens[s]);
        outbound[s] = dispatch(x, routing, dindex[s], source_tokens[s]);
    }
    ExchangeResult ex = all_to_all_exchange(outbound, dindex);

    // Local expert compute on each device.
    std::vector<ShardRecord> shards(nd);
    std::vector<Matrix> w1_local, w2_local;
    for (int d = 0; d < nd; ++d) {
        const DeviceInbox& in = ex.inboxes[d];
        ShardRecord& sh = shards[d];
        sh.local_experts = placement.devices[d];
        const int n_loc = static_cast<int>(sh.local_experts.size());
        const int rows = in.x.rows();

        std::vector<std::vector<int>> local_ids(rows);
        sh.weight_grid.assign(static_cast<size_t>(n_loc) * rows,
                              std::numeric_limits<double>::quiet_NaN());
        for (int r = 0; r < rows; ++r) {
            for (int j = 0; j < in.k; ++j) {
                const int id = in.ids[static_cast<size_t>(r) * in.k + j];
                const auto it = std::find(sh.local_experts.begin(), sh.local_experts.end(), id);
                if (it == sh.local_experts.end()) continue;
                local_ids[r].push_back(id);
                sh.weight_grid[static_cast<size_t>(it - sh.local_experts.begin()) * rows + r] =
                    in.weights[static_cast<size_t>(r) * in.k + j];
            }
        }
        sh.cindex = build_compute_index(rows, local_ids, sh.local_experts);

        sh.epd_token.assign(sh.cindex.n_epd, -1);
        sh.epd_slot.assign(sh.cindex.n_epd, -1);
        for (int e = 0; e < n_loc; ++e) {
            for (int t = 0; t < rows; ++t) {
                const int r = sh.cindex.at(e, t);
                if (r < 0) continue;
                sh.epd_token[r] = in.token[t];
                for (int j = 0; j < in.k; ++j) {
                    if (in.ids[static_cast<size_t>(t) * in.k + j] == sh.local_experts[e]) {
                        sh.epd_slot[r] = j;
                        break;
                    }
                }
            }
        }

        gather_local_weights(experts, sh.local_experts, w1_local, w2_local);
        sh.x_in = in.x.values;
        sh.row_token = in.token;
        sh.row_source = in.source;
        sh.row_source_slot = in.source_slot;

        TokenMatrix epd = scatter_matmul(in.x, w1_local, sh.cindex, config.tiles, prec);
        sh.epd_pre = epd.values;
        TokenMatrix act = apply_activation(epd, experts.activation, prec);
        sh.epd_act = act.values;
        TokenMatrix mod = weight_modulate(act, sh.cindex, sh.weight_grid, prec);
        sh.epd_mod = mod.values;
        TokenMatrix y = merge_matmul(mod, w2_local, sh.cindex, config.tiles, prec);
        sh.y_out = y.values;
    }

    // Return exchange: every row goes back to its source slot (the
    // recorded layout is the inverse permutation; no re-accounting).
    std::vector<Matrix> y_src(nd);
    for (int s = 0; s < nd; ++s) y_src[s] = Matrix(dindex[s].n_sfd, x.cols());
    for (int d = 0; d < nd; ++d) {
        const ShardRecord& sh = shards[d];
        for (int r = 0; r < sh.y_out.rows; ++r) {
            std::copy_n(sh.y_out.row(r).begin(), x.cols(),
                        y_src[sh.row_source[r]].row(sh.row_source_slot[r]).begin());
        }
    }

    ForwardResult res;
    res.x_out = TokenMatrix(Matrix(x.rows(), x.cols()), TokenState::Ori);
    for (int s = 0; s < nd; ++s) {
        TokenMatrix local_out =
            combine(TokenMatrix(y_src[s], TokenState::Sfd), dindex[s], prec);
        for (size_t i = 0; i < source_tokens[s].size(); ++i) {
            std::copy_n(local_out.values.row(static_cast<int>(i)).begin(), x.cols(),
                        res.x_out.values.row(source_tokens[s][i]).begin());
        }
    }

    CommReport& rep = res.report;
    rep.mean_replicas = mean_token_replicas(routing, placement);
    rep.cap_replicas =
        cap_replicas >= 0.0 ? cap_replicas : static_cast<double>(std::min(routing.k, nd));
    std::tie(rep.intra_share, rep.inter_share) = collaboration_shares(routing, placement);
    rep.cross_device_bytes =
        ex.crossing_rows * static_cast<long long>(x.cols()) * bytes_per_scalar;
    rep.per_device_token_counts.resize(nd);
    for (int d = 0; d < nd; ++d) rep.per_device_token_counts[d] = ex.inboxes[d].x.rows();

    if (save) {
        save->valid = true;
        save->config = config;
        save->experts = experts;
        save->placement = placement;
        save->routing = routing;
        save->sources.assign(sources.begin(), sources.end());
        save->source_tokens = std::move(source_tokens);
        save->dindex = std::move(dindex);
        save->shards = std::move(shards);
    }
    return res;
}

ForwardResult forward_expert_parallel(const TokenMatrix& x, const GateMatrix& gate,
                                      const ExpertWeights& experts, const Placement& placement,
                                      const PruneSpec& prune, const MoEConfig& config,
                                      std::span<const int> sources, int bytes_per_scalar,
                                      ForwardState* save) {
    config.validate();
    const Matrix scores = gate_scores(x, gate, config.tiles);
    const RoutingOutcome unpruned = topk_route(scores, config.top_k, config.renormalize);
    const RoutingOutcome routing =
        prune_routing(scores, unpruned, placement, prune, config.renormalize);
    double cap = static_cast<double>(std::min(config.top_k, placement.num_devices()));
    if (prune.mode != PruneMode::None) cap = std::min(cap, static_cast<double>(prune.device_budget));
    return forward_given_routing(x, routing, experts, placement, config, sources, bytes_per_scalar,
                                 cap, save);
}

namespace {

// One expert applied to one token row, k-ascending double accumulation.
std::vector<double> row_times_matrix(std::span<const double> row, const Matrix& m, Precision prec) {
    std::vector<double> out(m.cols, 0.0);
    for (int j = 0; j < m.cols; ++j) {
        double acc = 0.0;
        for (int k = 0; k < m.rows; ++k) acc += row[k] * m(k, j);
        out[j] = quantize(acc, prec);
    }
    return out;
}

double activated(double v, Activation act) {
    switch (act) {
        case Activation::ReLU: return v > 0.0 ? v : 0.0;
        case Activation::SiLU: return v / (1.0 + std::exp(-v));
        default: return v;
    }
}

}  // namespace

TokenMatrix dense_given_routing(const TokenMatrix& x, const RoutingOutcome& routing,
                                const ExpertWeights& experts, Precision prec) {
    if (x.state != TokenState::Ori) throw ShapeError("dense: expects Ori tokens");
    if (x.rows() != routing.num_tokens) throw ShapeError("dense: routing token count mismatch");
    experts.validate();
    TokenMatrix out(Matrix(x.rows(), x.cols()), TokenState::Ori);
    std::vector<double> acc(x.cols());
    for (int t = 0; t < x.rows(); ++t) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (int j = 0; j < routing.k; ++j) {
            const int e = routing.id(t, j);
            std::vector<double> h = row_times_matrix(x.values.row(t), experts.w1[e], prec);
            for (double& v : h) v = quantize(activated(v, experts.activation), prec);
            const std::vector<double> o = row_times_matrix(h, experts.w2[e], prec);
            const double w = routing.weight(t, j);
            for (int c = 0; c < x.cols(); ++c) acc[c] += w * o[c];
        }
        for (int c = 0; c < x.cols(); ++c) out.values(t, c) = quantize(acc[c], prec);
    }
    return out;
}

TokenMatrix forward_dense(const TokenMatrix& x, const GateMatrix& gate,
                          const ExpertWeights& experts, int k, bool renormalize, Tiles tiles,
                          Precision prec) {
    const Matrix scores = gate_scores(x, gate, tiles);
    const RoutingOutcome routing = topk_route(scores, k, renormalize);
    return dense_given_routing(x, routing, experts, prec);
}

}  // namespace moesim
