// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <vector>

#include "moesim/pipeline.hpp"

namespace moesim {

namespace {

double activation_grad(double pre, Activation act) {
    switch (act) {
        case Activation::ReLU: return pre > 0.0 ? 1.0 : 0.0;
        case Activation::SiLU: {
            const double s = 1.0 / (1.0 + std::exp(-pre));
            return s * (1.0 + pre * (1.0 - s));
        }
        default: return 1.0;
    }
}

}  // namespace

Gradients backward_vjps(const Matrix& upstream, const ForwardState& st) {
    if (!st.valid) throw StateError("backward: forward state was not saved");
    const RoutingOutcome& routing = st.routing;
    if (upstream.rows != routing.num_tokens) throw ShapeError("backward: upstream row mismatch");
    const int dim = upstream.cols;
    const int nd = st.placement.num_devices();

    Gradients g;
    g.x = Matrix(routing.num_tokens, dim);
    g.w1.resize(st.experts.num_experts);
    g.w2.resize(st.experts.num_experts);
    for (int e = 0; e < st.experts.num_experts; ++e) {
        g.w1[e] = Matrix(st.experts.w1[e].rows, st.experts.w1[e].cols);
        g.w2[e] = Matrix(st.experts.w2[e].rows, st.experts.w2[e].cols);
    }
    g.routing_weights.assign(routing.ids.size(), 0.0);

    // Combine adjoint: each returned Sfd row receives its token's
    // upstream row unchanged (combine summed them).
    std::vector<Matrix> g_y_src(nd);
    for (int s = 0; s < nd; ++s) {
        g_y_src[s] = Matrix(st.dindex[s].n_sfd, dim);
        const auto& tokens = st.source_tokens[s];
        for (int d = 0; d < nd; ++d) {
            for (size_t i = 0; i < tokens.size(); ++i) {
                const int c = st.dindex[s].at(d, static_cast<int>(i));
                if (c < 0) continue;
                for (int j = 0; j < dim; ++j) g_y_src[s](c, j) = upstream(tokens[i], j);
            }
        }
    }

    std::vector<Matrix> g_s_src(nd);
    for (int s = 0; s < nd; ++s) g_s_src[s] = Matrix(st.dindex[s].n_sfd, dim);

    std::vector<Matrix> w1_local, w2_local;
    for (int d = 0; d < nd; ++d) {
        const ShardRecord& sh = st.shards[d];
        const int rows = sh.x_in.rows;
        const int n_loc = static_cast<int>(sh.local_experts.size());
        const int hidden = sh.epd_pre.cols;

        w1_local.clear();
        w2_local.clear();
        for (int e : sh.local_experts) {
            w1_local.push_back(st.experts.w1[e]);
            w2_local.push_back(st.experts.w2[e]);
        }

        // Gather this device's share of the return-path gradient.
        Matrix g_y(rows, dim);
        for (int r = 0; r < rows; ++r) {
            const auto src = g_y_src[sh.row_source[r]].row(sh.row_source_slot[r]);
            std::copy(src.begin(), src.end(), g_y.row(r).begin());
        }

        // Merge adjoint: per-Epd-row gradient and w2 accumulation.
        Matrix g_mod =
            merge_matmul_adjoint(g_y, w2_local, sh.cindex, st.config.tiles, Precision::Double);
        for (int e = 0; e < n_loc; ++e) {
            Matrix& gw2 = g.w2[sh.local_experts[e]];
            for (int t = 0; t < rows; ++t) {
                const int r = sh.cindex.at(e, t);
                if (r < 0) continue;
                for (int h = 0; h < hidden; ++h) {
                    const double mv = sh.epd_mod(r, h);
                    for (int j = 0; j < dim; ++j) gw2(h, j) += mv * g_y(t, j);
                }
            }
        }

        // Modulation adjoint: scale by the routing weight, and the
        // per-entry weight gradient is <activated row, upstream row>.
        Matrix g_act(sh.epd_act.rows, hidden);
        for (int e = 0; e < n_loc; ++e) {
            for (int t = 0; t < rows; ++t) {
                const int r = sh.cindex.at(e, t);
                if (r < 0) continue;
                const double w = sh.weight_grid[static_cast<size_t>(e) * rows + t];
                double gw = 0.0;
                for (int h = 0; h < hidden; ++h) {
                    g_act(r, h) = g_mod(r, h) * w;
                    gw += sh.epd_act(r, h) * g_mod(r, h);
                }
                g.routing_weights[static_cast<size_t>(sh.epd_token[r]) * routing.k +
                                  sh.epd_slot[r]] += gw;
            }
        }

        // Activation adjoint.
        for (int r = 0; r < g_act.rows; ++r) {
            for (int h = 0; h < hidden; ++h) {
                g_act(r, h) *= activation_grad(sh.epd_pre(r, h), st.experts.activation);
            }
        }

        // Scatter adjoint: Sfd-row gradient and w1 accumulation.
        Matrix g_sfd =
            scatter_matmul_adjoint(g_act, w1_local, sh.cindex, st.config.tiles, Precision::Double);
        for (int e = 0; e < n_loc; ++e) {
            Matrix& gw1 = g.w1[sh.local_experts[e]];
            for (int t = 0; t < rows; ++t) {
                const int r = sh.cindex.at(e, t);
                if (r < 0) continue;
                for (int i = 0; i < dim; ++i) {
                    const double xv = sh.x_in(t, i);
                    for (int h = 0; h < hidden; ++h) gw1(i, h) += xv * g_act(r, h);
                }
            }
        }

        // Route the Sfd gradient back to the source slots.
        for (int r = 0; r < rows; ++r) {
            auto dst = g_s_src[sh.row_source[r]].row(sh.row_source_slot[r]);
            std::copy(g_sfd.row(r).begin(), g_sfd.row(r).end(), dst.begin());
        }
    }

    // Dispatch adjoint: sum the replicas back onto their Ori rows.
    for (int s = 0; s < nd; ++s) {
        const auto& tokens = st.source_tokens[s];
        for (int d = 0; d < nd; ++d) {
            for (size_t i = 0; i < tokens.size(); ++i) {
                const int c = st.dindex[s].at(d, static_cast<int>(i));
                if (c < 0) continue;
                for (int j = 0; j < dim; ++j) g.x(tokens[i], j) += g_s_src[s](c, j);
            }
        }
    }

    if (st.config.precision == Precision::Single) {
        quantize_inplace(g.x, Precision::Single);
        for (Matrix& m : g.w1) quantize_inplace(m, Precision::Single);
        for (Matrix& m : g.w2) quantize_inplace(m, Precision::Single);
        for (double& v : g.routing_weights) v = quantize(v, Precision::Single);
    }
    return g;
}

}  // namespace moesim
