// SPDX-License-Identifier: Apache-2.0
#include "moesim/cli.hpp"

#include <CLI11.hpp>
#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "moesim/collab.hpp"
#include "moesim/io.hpp"
#include "moesim/pipeline.hpp"
#include "moesim/pruning.hpp"
#include "moesim/simnet.hpp"
#include "moesim/trace_gen.hpp"

namespace moesim::cli {

namespace {

struct GenTraceOpts {
    std::string dist = "uniform";
    int experts = 8;
    int topk = 2;
    int tokens = 0;
    double alpha = 1.0;
    int blocks = 1;
    double p_in = 0.9;
    std::string tag;
    std::uint64_t seed = 0;
    std::string out;
};

struct SimulateOpts {
    std::uint64_t seed = 0;
    int devices = 1;
    int experts = 8;
    int topk = 2;
    int tokens = 64;
    int dim = 32;
    int hidden = 64;
    std::string trace_path;
    std::string placement_path;
    std::string prune = "none";
    int budget = 1;
    std::string table_path;
    std::string weight_policy = "inherit";
    bool check_oracle = false;
    int bytes_per_scalar = 4;
    std::string precision = "single";
    bool renormalize = true;
    std::string activation = "identity";
    std::string source_mode = "roundrobin";
    int tile_m = 32, tile_k = 32, tile_n = 32;
    std::string dump_table_path;
    std::string out;
};

Precision parse_precision(const std::string& s) {
    if (s == "single") return Precision::Single;
    if (s == "double") return Precision::Double;
    throw UsageError("unknown precision '" + s + "'");
}

Activation parse_activation(const std::string& s) {
    if (s == "identity") return Activation::Identity;
    if (s == "silu") return Activation::SiLU;
    if (s == "relu") return Activation::ReLU;
    throw UsageError("unknown activation '" + s + "'");
}

// Normalizes an arbitrary non-negative symmetric matrix by its maximum
// entry; accepts both raw co-activation counts and already-normalized
// graphs.
NormGraph norm_graph_from_matrix(const Matrix& m) {
    if (m.rows != m.cols) throw DataError("graph: matrix must be square");
    NormGraph g(m.rows);
    double mx = 0.0;
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            if (m(i, j) < 0.0) throw DataError("graph: negative edge value");
            if (m(i, j) != m(j, i)) throw DataError("graph: matrix must be symmetric");
            if (i == j && m(i, j) != 0.0) throw DataError("graph: diagonal must be zero");
            mx = std::max(mx, m(i, j));
        }
    }
    if (mx == 0.0) return g;
    for (size_t i = 0; i < g.values.size(); ++i) g.values[i] = m.data[i] / mx;
    return g;
}

int cmd_gen_trace(const GenTraceOpts& o) {
    TraceSpec spec;
    if (o.dist == "uniform") spec.dist = TraceSpec::Dist::Uniform;
    else if (o.dist == "zipf") spec.dist = TraceSpec::Dist::Zipf;
    else if (o.dist == "blocks") spec.dist = TraceSpec::Dist::PlantedBlocks;
    else throw UsageError("unknown distribution '" + o.dist + "'");
    spec.num_experts = o.experts;
    spec.top_k = o.topk;
    spec.num_tokens = o.tokens;
    spec.alpha = o.alpha;
    spec.num_blocks = o.blocks;
    spec.p_in = o.p_in;
    spec.tag = o.tag;
    const TraceFile trace = gen_trace(spec, o.seed);
    std::ostringstream body;
    write_trace(body, trace);
    write_file(o.out, body.str());
    return 0;
}

int cmd_profile(const std::string& trace_path, const std::string& out_prefix, std::ostream& out) {
    std::istringstream in(slurp_file(trace_path));
    const TraceFile trace = read_trace(in);
    const CollabGraph graph = build_collab_graph(trace.routing, trace.num_experts);
    const NormGraph norm = normalize_graph(graph);

    Matrix counts(graph.num_experts, graph.num_experts);
    for (size_t i = 0; i < graph.counts.size(); ++i) {
        counts.data[i] = static_cast<double>(graph.counts[i]);
    }
    Matrix normalized(norm.num_experts, norm.num_experts);
    normalized.data = norm.values;

    std::ostringstream cbody, nbody;
    write_matrix(cbody, counts);
    write_matrix(nbody, normalized);
    write_file(out_prefix + ".collab.mat", cbody.str());
    write_file(out_prefix + ".norm.mat", nbody.str());

    // Component growth over fixed-size batches of the trace.
    ComponentTracker tracker(trace.num_experts);
    const int batch = 256;
    for (int t0 = 0; t0 < trace.routing.num_tokens; t0 += batch) {
        const int t1 = std::min(t0 + batch, trace.routing.num_tokens);
        RoutingOutcome slice;
        slice.k = trace.routing.k;
        slice.num_tokens = t1 - t0;
        slice.ids.assign(trace.routing.ids.begin() + static_cast<size_t>(t0) * slice.k,
                         trace.routing.ids.begin() + static_cast<size_t>(t1) * slice.k);
        slice.weights.assign(trace.routing.weights.begin() + static_cast<size_t>(t0) * slice.k,
                             trace.routing.weights.begin() + static_cast<size_t>(t1) * slice.k);
        tracker.add(slice);
    }

    long long edges = 0, coactivations = 0;
    for (int i = 0; i < graph.num_experts; ++i) {
        for (int j = i + 1; j < graph.num_experts; ++j) {
            if (graph.at(i, j) > 0) ++edges;
            coactivations += graph.at(i, j);
        }
    }
    std::ostringstream rbody;
    ReportWriter rep(rbody);
    rep.kv("command", std::string("profile"));
    rep.kv("trace.experts", trace.num_experts);
    rep.kv("trace.topk", trace.top_k);
    rep.kv("trace.tokens", trace.routing.num_tokens);
    if (!trace.tag.empty()) rep.kv("trace.tag", trace.tag);
    rep.kv("graph.edges", edges);
    rep.kv("graph.coactivations", coactivations);
    rep.kv("graph.max_component", static_cast<long long>(tracker.max_component()));
    const auto& pts = tracker.points();
    for (size_t i = 0; i < pts.size(); ++i) {
        rep.kv("growth." + std::to_string(pts[i].first), pts[i].second);
    }
    write_file(out_prefix + ".profile.txt", rbody.str());
    out << "profile: " << trace.routing.num_tokens << " tokens, " << edges << " edges, max component "
        << tracker.max_component() << "\n";
    return 0;
}

int cmd_reschedule(const std::string& graph_path, int devices, const std::string& out_path) {
    std::istringstream in(slurp_file(graph_path));
    const Matrix m = read_matrix(in);
    if (devices < 1 || m.rows % std::max(devices, 1) != 0) {
        throw UsageError("reschedule: expert count " + std::to_string(m.rows) +
                         " is not divisible by --devices " + std::to_string(devices));
    }
    const NormGraph p = norm_graph_from_matrix(m);
    const Placement placement = reschedule_placement(p, devices);
    std::ostringstream body;
    write_placement(body, placement);
    write_file(out_path, body.str());
    return 0;
}

struct SimulateArtifacts {
    MoEConfig config;
    Placement placement;
    RoutingOutcome routing;  // effective
    ForwardResult result;
    double baseline_k = 0.0;
    double oracle_err = -1.0;
    bool trace_mode = false;
};

SimulateArtifacts run_simulate(const SimulateOpts& o) {
    SimulateArtifacts art;
    MoEConfig& cfg = art.config;
    cfg.num_devices = o.devices;
    cfg.embed_dim = o.dim;
    cfg.hidden_dim = o.hidden;
    cfg.seed = o.seed;
    cfg.renormalize = o.renormalize;
    cfg.precision = parse_precision(o.precision);
    cfg.activation = parse_activation(o.activation);
    cfg.tiles = Tiles{o.tile_m, o.tile_k, o.tile_n};

    PruneSpec prune;
    if (o.prune == "none") prune.mode = PruneMode::None;
    else if (o.prune == "router") prune.mode = PruneMode::RouterScore;
    else if (o.prune == "similarity") prune.mode = PruneMode::Similarity;
    else throw UsageError("unknown prune mode '" + o.prune + "'");
    prune.device_budget = o.budget;
    if (o.weight_policy == "inherit") prune.weight_policy = ReplacementWeightPolicy::Inherit;
    else if (o.weight_policy == "own") prune.weight_policy = ReplacementWeightPolicy::OwnScore;
    else throw UsageError("unknown weight policy '" + o.weight_policy + "'");

    art.trace_mode = !o.trace_path.empty();
    TraceFile trace;
    if (art.trace_mode) {
        if (prune.mode != PruneMode::None) {
            throw UsageError("pruning needs gate scores; drop --trace to simulate from a seed");
        }
        std::istringstream in(slurp_file(o.trace_path));
        trace = read_trace(in);
        cfg.num_experts = trace.num_experts;
        cfg.top_k = trace.top_k;
    } else {
        cfg.num_experts = o.experts;
        cfg.top_k = o.topk;
    }
    try {
        cfg.validate();
    } catch (const ConfigError& e) {
        throw UsageError(e.what());
    }

    if (!o.placement_path.empty()) {
        std::istringstream in(slurp_file(o.placement_path));
        art.placement = read_placement(in);
        art.placement.validate(cfg.num_experts);
    } else {
        art.placement = trivial_placement(cfg.num_experts, cfg.num_devices);
    }

    Rng master(o.seed);
    Rng token_rng(master.next());
    Rng gate_rng(master.next());
    Rng expert_rng(master.next());
    const int n_tokens = art.trace_mode ? trace.routing.num_tokens : o.tokens;
    TokenMatrix x(random_matrix(n_tokens, cfg.embed_dim, token_rng, cfg.precision),
                  TokenState::Ori);
    ExpertWeights experts = ExpertWeights::random(cfg.num_experts, cfg.embed_dim, cfg.hidden_dim,
                                                  expert_rng, cfg.precision, cfg.activation);

    ClusterSpec cluster;
    cluster.num_devices = cfg.num_devices;
    cluster.bytes_per_scalar = o.bytes_per_scalar;
    std::vector<int> sources;
    if (o.source_mode == "single") sources.assign(n_tokens, 0);
    else if (o.source_mode == "roundrobin") sources = round_robin_sources(n_tokens, cfg.num_devices);
    else throw UsageError("unknown source mode '" + o.source_mode + "'");

    if (art.trace_mode) {
        art.routing = trace.routing;
        art.result = forward_given_routing(x, art.routing, experts, art.placement, cfg, sources,
                                           o.bytes_per_scalar);
    } else {
        GateMatrix gate{random_matrix(cfg.num_experts, cfg.embed_dim, gate_rng, cfg.precision)};
        const Matrix scores = gate_scores(x, gate, cfg.tiles);
        const RoutingOutcome unpruned = topk_route(scores, cfg.top_k, cfg.renormalize);
        if (prune.mode == PruneMode::Similarity && prune.table == std::nullopt) {
            if (!o.table_path.empty()) {
                std::istringstream in(slurp_file(o.table_path));
                const Matrix tm = read_matrix(in);
                if (tm.rows != cfg.num_experts || tm.cols != cfg.num_experts) {
                    throw DataError("similarity table shape mismatch");
                }
                SimilarityAccumulator acc(cfg.num_experts);
                SimilarityTable table = acc.finalize();
                table.values = tm.data;
                table.ranking.assign(cfg.num_experts, {});
                for (int i = 0; i < cfg.num_experts; ++i) {
                    for (int j = 0; j < cfg.num_experts; ++j)
                        if (j != i) table.ranking[i].push_back(j);
                    std::stable_sort(table.ranking[i].begin(), table.ranking[i].end(),
                                     [&](int a, int b) {
                                         if (table.at(i, a) != table.at(i, b))
                                             return table.at(i, a) > table.at(i, b);
                                         return a < b;
                                     });
                }
                prune.table = std::move(table);
            } else {
                // Profile the batch's own router logits.
                const Matrix logits =
                    tiled_matmul(x.values, transposed(gate.weights), cfg.tiles, Precision::Double);
                prune.table = build_similarity_table({&logits, 1}, cfg.num_experts);
            }
        }
        if (prune.table && !o.dump_table_path.empty()) {
            Matrix tm(cfg.num_experts, cfg.num_experts);
            tm.data = prune.table->values;
            std::ostringstream tbody;
            write_matrix(tbody, tm);
            write_file(o.dump_table_path, tbody.str());
        }
        art.routing = prune_routing(scores, unpruned, art.placement, prune, cfg.renormalize);
        double cap = static_cast<double>(std::min(cfg.top_k, cfg.num_devices));
        if (prune.mode != PruneMode::None) {
            cap = std::min(cap, static_cast<double>(prune.device_budget));
        }
        art.result = forward_given_routing(x, art.routing, experts, art.placement, cfg, sources,
                                           o.bytes_per_scalar, cap);
    }
    art.baseline_k = baseline_replication_ct(art.routing, art.placement, ReplicationMode::ReplicateK);
    if (o.check_oracle) {
        const TokenMatrix ref = dense_given_routing(x, art.routing, experts, cfg.precision);
        art.oracle_err = max_rel_error(art.result.x_out.values, ref.values);
    }
    return art;
}

void write_simulate_report(const SimulateOpts& o, const SimulateArtifacts& art) {
    const MoEConfig& cfg = art.config;
    std::ostringstream body;
    ReportWriter rep(body);
    rep.kv("command", std::string("simulate"));
    rep.kv("config.devices", cfg.num_devices);
    rep.kv("config.experts", cfg.num_experts);
    rep.kv("config.topk", cfg.top_k);
    rep.kv("config.tokens", art.routing.num_tokens);
    rep.kv("config.dim", cfg.embed_dim);
    rep.kv("config.hidden", cfg.hidden_dim);
    rep.kv("config.seed", static_cast<long long>(cfg.seed));
    rep.kv("config.precision", o.precision);
    rep.kv("config.activation", o.activation);
    rep.kv("config.renormalize", cfg.renormalize ? 1 : 0);
    rep.kv("config.prune.mode", o.prune);
    if (o.prune != "none") rep.kv("config.prune.budget", o.budget);
    rep.kv("config.trace", art.trace_mode ? o.trace_path : std::string("-"));
    rep.kv("config.placement", o.placement_path.empty() ? std::string("trivial") : o.placement_path);

    const CommReport& cr = art.result.report;
    const ReplicaBounds bounds = replica_bounds(cfg.top_k, cfg.num_experts, cfg.num_devices);
    rep.kv("replicas.mean", cr.mean_replicas);
    rep.kv("replicas.cap", cr.cap_replicas);
    rep.kv("replicas.lower_bound", bounds.lower);
    rep.kv("replicas.upper_bound", bounds.upper);
    rep.kv("replicas.baseline_k", art.baseline_k);
    rep.kv("shares.intra", cr.intra_share);
    rep.kv("shares.inter", cr.inter_share);
    rep.kv("bytes.cross_device", cr.cross_device_bytes);
    rep.kv("bytes.per_scalar", o.bytes_per_scalar);
    long long sfd_total = 0;
    for (size_t d = 0; d < cr.per_device_token_counts.size(); ++d) {
        rep.kv("device." + std::to_string(d) + ".received", cr.per_device_token_counts[d]);
        sfd_total += cr.per_device_token_counts[d];
    }
    rep.kv("tokens.sfd_total", sfd_total);

    // Intra/inter collaboration means over the run's own graph.
    const NormGraph p = normalize_graph(build_collab_graph(art.routing, cfg.num_experts));
    const IntraInterMetrics metrics = intra_inter_metrics(p, art.placement);
    for (int d = 0; d < art.placement.num_devices(); ++d) {
        rep.kv("collab.intra." + std::to_string(d), metrics.intra[d]);
    }
    for (int d1 = 0; d1 < art.placement.num_devices(); ++d1) {
        for (int d2 = d1 + 1; d2 < art.placement.num_devices(); ++d2) {
            rep.kv("collab.inter." + std::to_string(d1) + "." + std::to_string(d2),
                   metrics.inter(d1, d2));
        }
    }
    if (art.oracle_err >= 0.0) rep.kv("oracle.max_rel_error", art.oracle_err);
    write_file(o.out, body.str());
}

int cmd_simulate(const SimulateOpts& o, std::ostream& out) {
    const SimulateArtifacts art = run_simulate(o);
    write_simulate_report(o, art);
    out << "simulate: mean replicas " << format_double(art.result.report.mean_replicas) << " (cap "
        << format_double(art.result.report.cap_replicas) << "), cross-device bytes "
        << art.result.report.cross_device_bytes << "\n";
    if (art.oracle_err >= 0.0) {
        out << "oracle max relative error: " << format_double(art.oracle_err) << "\n";
    }
    return 0;
}

int cmd_fit_latency(const std::string& points_path, const std::string& out_path,
                    std::ostream& out) {
    std::istringstream in(slurp_file(points_path));
    std::vector<std::pair<double, double>> points;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string a, b, extra;
        if (!(ss >> a >> b) || (ss >> extra)) {
            throw DataError("line " + std::to_string(line_no) + ": expected 'replicas seconds'");
        }
        points.emplace_back(parse_double(a, line_no), parse_double(b, line_no));
    }
    const LatencyFit fit = fit_latency(points);
    std::ostringstream body;
    ReportWriter rep(body);
    rep.kv("command", std::string("fit-latency"));
    rep.kv("points.count", static_cast<long long>(points.size()));
    rep.kv("fit.slope", fit.slope);
    rep.kv("fit.intercept", fit.intercept);
    rep.kv("fit.r_squared", fit.r_squared);
    write_file(out_path, body.str());
    out << "fit: slope " << format_double(fit.slope) << ", intercept "
        << format_double(fit.intercept) << ", R^2 " << format_double(fit.r_squared) << "\n";
    return 0;
}

int cmd_sweep_prune(SimulateOpts o, const std::string& out_prefix, std::ostream& out) {
    if (!o.trace_path.empty()) {
        throw UsageError("sweep-prune needs gate scores; it does not take --trace");
    }
    const int per_device = o.experts / std::max(o.devices, 1);
    const int d_min = std::max(1, (o.topk + per_device - 1) / per_device);
    for (int d = 1; d < d_min; ++d) {
        out << "budget " << d << ": skipped (" << d << " device(s) host fewer than k=" << o.topk
            << " experts)\n";
    }
    for (int d = d_min; d <= o.devices; ++d) {
        o.budget = d;
        o.out = out_prefix + ".d" + std::to_string(d) + ".txt";
        const SimulateArtifacts art = run_simulate(o);
        write_simulate_report(o, art);
        out << "budget " << d << ": mean replicas "
            << format_double(art.result.report.mean_replicas) << " -> " << o.out << "\n";
    }
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Expert-parallel MoE communication simulator"};
    app.require_subcommand(1);

    GenTraceOpts gen;
    auto* cgen = app.add_subcommand("gen-trace", "Generate a synthetic routing trace");
    cgen->add_option("--dist", gen.dist, "uniform | zipf | blocks");
    cgen->add_option("--experts", gen.experts)->required();
    cgen->add_option("--topk", gen.topk)->required();
    cgen->add_option("--tokens", gen.tokens)->required();
    cgen->add_option("--alpha", gen.alpha, "zipf exponent");
    cgen->add_option("--blocks", gen.blocks, "planted cluster count");
    cgen->add_option("--p-in", gen.p_in, "in-cluster routing probability");
    cgen->add_option("--tag", gen.tag);
    cgen->add_option("--seed", gen.seed)->required();
    cgen->add_option("--out", gen.out)->required();

    std::string profile_trace, profile_prefix;
    auto* cprof = app.add_subcommand("profile", "Build collaboration graphs from a trace");
    cprof->add_option("--trace", profile_trace)->required();
    cprof->add_option("--out-prefix", profile_prefix)->required();

    std::string rs_graph, rs_out;
    int rs_devices = 1;
    auto* cres = app.add_subcommand("reschedule", "Build an expert placement from a graph");
    cres->add_option("--graph", rs_graph)->required();
    cres->add_option("--devices", rs_devices)->required();
    cres->add_option("--out", rs_out)->required();

    SimulateOpts sim;
    auto* csim = app.add_subcommand("simulate", "Run the expert-parallel pipeline");
    csim->add_option("--seed", sim.seed)->required();
    csim->add_option("--devices", sim.devices);
    csim->add_option("--experts", sim.experts);
    csim->add_option("--topk", sim.topk);
    csim->add_option("--tokens", sim.tokens);
    csim->add_option("--dim", sim.dim);
    csim->add_option("--hidden", sim.hidden);
    csim->add_option("--trace", sim.trace_path, "use a trace's routing instead of a gate");
    csim->add_option("--placement", sim.placement_path, "placement file (default: trivial)");
    csim->add_option("--prune", sim.prune, "none | router | similarity");
    csim->add_option("--budget", sim.budget, "device budget for pruning");
    csim->add_option("--table", sim.table_path, "similarity table matrix file");
    csim->add_option("--dump-table", sim.dump_table_path,
                     "write the similarity table used for pruning");
    csim->add_option("--weight-policy", sim.weight_policy, "inherit | own");
    csim->add_flag("--check-oracle", sim.check_oracle, "compare against the dense oracle");
    csim->add_option("--bytes-per-scalar", sim.bytes_per_scalar);
    csim->add_option("--precision", sim.precision, "single | double");
    csim->add_flag("--renormalize,!--no-renormalize", sim.renormalize);
    csim->add_option("--activation", sim.activation, "identity | silu | relu");
    csim->add_option("--source-mode", sim.source_mode, "roundrobin | single");
    csim->add_option("--tile-m", sim.tile_m);
    csim->add_option("--tile-k", sim.tile_k);
    csim->add_option("--tile-n", sim.tile_n);
    csim->add_option("--out", sim.out)->required();

    std::string fit_points, fit_out;
    auto* cfit = app.add_subcommand("fit-latency", "Least-squares fit of latency vs replicas");
    cfit->add_option("--points", fit_points)->required();
    cfit->add_option("--out", fit_out)->required();

    SimulateOpts sweep;
    std::string sweep_prefix;
    auto* csweep = app.add_subcommand("sweep-prune", "Prune-budget sweep, one report per budget");
    csweep->add_option("--seed", sweep.seed)->required();
    csweep->add_option("--devices", sweep.devices);
    csweep->add_option("--experts", sweep.experts);
    csweep->add_option("--topk", sweep.topk);
    csweep->add_option("--tokens", sweep.tokens);
    csweep->add_option("--dim", sweep.dim);
    csweep->add_option("--hidden", sweep.hidden);
    csweep->add_option("--mode", sweep.prune, "router | similarity")->required();
    csweep->add_option("--weight-policy", sweep.weight_policy);
    csweep->add_option("--precision", sweep.precision);
    csweep->add_flag("--renormalize,!--no-renormalize", sweep.renormalize);
    csweep->add_option("--activation", sweep.activation);
    csweep->add_option("--bytes-per-scalar", sweep.bytes_per_scalar);
    csweep->add_option("--out-prefix", sweep_prefix)->required();

    std::vector<const char*> argv;
    argv.push_back("moesim");
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (cgen->parsed()) return cmd_gen_trace(gen);
        if (cprof->parsed()) return cmd_profile(profile_trace, profile_prefix, out);
        if (cres->parsed()) return cmd_reschedule(rs_graph, rs_devices, rs_out);
        if (csim->parsed()) return cmd_simulate(sim, out);
        if (cfit->parsed()) return cmd_fit_latency(fit_points, fit_out, out);
        if (csweep->parsed()) {
            if (sweep.prune == "none") throw UsageError("sweep-prune: --mode must be router or similarity");
            return cmd_sweep_prune(sweep, sweep_prefix, out);
        }
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << "\n";
        return 3;
    } catch (const CapacityError& e) {
        err << "capacity error: " << e.what() << "\n";
        return 4;
    } catch (const PlacementError& e) {
        err << "placement error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}

}  // namespace moesim::cli
