// SPDX-License-Identifier: Apache-2.0
#include "moesim/pruning.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace moesim {

void PruneSpec::validate(int num_devices) const {
    if (mode == PruneMode::None) return;
    if (device_budget < 1 || device_budget > num_devices) {
        throw ConfigError("prune: device budget must be in [1, num_devices]");
    }
    if (mode == PruneMode::Similarity && !table.has_value()) {
        throw ConfigError("prune: similarity mode requires a similarity table");
    }
}

std::vector<int> allowed_devices(std::span<const int> token_ids, const Placement& placement,
                                 int budget) {
    const std::vector<int> dev_of = placement.expert_to_device();
    std::vector<int> devices;  // first-reached order
    for (int e : token_ids) {
        const int d = dev_of[e];
        if (std::find(devices.begin(), devices.end(), d) == devices.end()) {
            if (static_cast<int>(devices.size()) == budget) break;
            devices.push_back(d);
        }
    }
    return devices;
}

RoutedRow prune_router_score(std::span<const double> scores_row, const Placement& placement,
                             int budget, int k, bool renormalize) {
    const int ne = static_cast<int>(scores_row.size());
    std::vector<int> order(ne);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (scores_row[a] != scores_row[b]) return scores_row[a] > scores_row[b];
        return a < b;
    });
    const std::vector<int> allowed =
        allowed_devices({order.data(), static_cast<size_t>(k)}, placement, budget);
    const std::vector<int> dev_of = placement.expert_to_device();
    std::vector<char> in_range(placement.num_devices(), 0);
    for (int d : allowed) in_range[d] = 1;

    RoutedRow row;
    for (int e : order) {
        if (!in_range[dev_of[e]]) continue;
        row.ids.push_back(e);
        row.weights.push_back(scores_row[e]);
        if (static_cast<int>(row.ids.size()) == k) break;
    }
    if (static_cast<int>(row.ids.size()) < k) {
        throw CapacityError("prune: allowed devices host " + std::to_string(row.ids.size()) +
                            " experts < k=" + std::to_string(k) +
                            " (device budget too small for top-k)");
    }
    if (renormalize) renormalize_row(row.weights);
    return row;
}

RoutedRow prune_similarity(std::span<const int> ids, std::span<const double> scores_row,
                           const Placement& placement, int budget, int k,
                           const SimilarityTable& table, ReplacementWeightPolicy policy,
                           bool renormalize) {
    if (static_cast<int>(ids.size()) != k) throw RoutingError("prune: routed row is not length k");
    const std::vector<int> allowed = allowed_devices(ids, placement, budget);
    const std::vector<int> dev_of = placement.expert_to_device();
    std::vector<char> in_range(placement.num_devices(), 0);
    for (int d : allowed) in_range[d] = 1;

    // Experts kept at their own turn are reserved up front so a
    // replacement can never collide with a later kept expert.
    std::vector<char> selected(table.num_experts, 0);
    for (int e : ids)
        if (in_range[dev_of[e]]) selected[e] = 1;

    RoutedRow row;
    std::vector<char> replaced;
    for (int e : ids) {
        if (in_range[dev_of[e]]) {
            row.ids.push_back(e);
            replaced.push_back(0);
            continue;
        }
        int pick = -1;
        for (int cand : table.ranking[e]) {
            if (!in_range[dev_of[cand]] || selected[cand]) continue;
            pick = cand;
            break;
        }
        if (pick < 0) {
            throw CapacityError("prune: no unused replacement expert left on the allowed devices");
        }
        selected[pick] = 1;
        row.ids.push_back(pick);
        replaced.push_back(1);
    }
    std::vector<double> original(ids.size());
    for (size_t j = 0; j < ids.size(); ++j) original[j] = scores_row[ids[j]];
    row.weights = pruned_weight_policy(row.ids, original, replaced, scores_row, policy, renormalize);
    if (policy == ReplacementWeightPolicy::OwnScore) {
        // Slots re-sorted so ids stay in descending realized-score order.
        std::vector<int> order(row.ids.size());
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](int a, int b) {
            if (row.weights[a] != row.weights[b]) return row.weights[a] > row.weights[b];
            return row.ids[a] < row.ids[b];
        });
        RoutedRow sorted;
        for (int j : order) {
            sorted.ids.push_back(row.ids[j]);
            sorted.weights.push_back(row.weights[j]);
        }
        row = std::move(sorted);
    }
    return row;
}

std::vector<double> pruned_weight_policy(std::span<const int> ids,
                                         std::span<const double> original_weights,
                                         std::span<const char> replaced,
                                         std::span<const double> scores_row,
                                         ReplacementWeightPolicy policy, bool renormalize) {
    std::vector<double> w(ids.size());
    for (size_t j = 0; j < ids.size(); ++j) {
        if (policy == ReplacementWeightPolicy::Inherit || !replaced[j]) {
            w[j] = original_weights[j];
        } else {
            w[j] = scores_row[ids[j]];
        }
    }
    if (renormalize) renormalize_row(w);
    return w;
}

RoutingOutcome prune_routing(const Matrix& scores, const RoutingOutcome& unpruned,
                             const Placement& placement, const PruneSpec& spec, bool renormalize) {
    if (spec.mode == PruneMode::None) return unpruned;
    spec.validate(placement.num_devices());
    RoutingOutcome out;
    out.num_tokens = unpruned.num_tokens;
    out.k = unpruned.k;
    out.ids.reserve(unpruned.ids.size());
    out.weights.reserve(unpruned.weights.size());
    for (int t = 0; t < unpruned.num_tokens; ++t) {
        RoutedRow row;
        if (spec.mode == PruneMode::RouterScore) {
            row = prune_router_score(scores.row(t), placement, spec.device_budget, unpruned.k,
                                     renormalize);
        } else {
            row = prune_similarity(unpruned.ids_of(t), scores.row(t), placement, spec.device_budget,
                                   unpruned.k, *spec.table, spec.weight_policy, renormalize);
        }
        out.ids.insert(out.ids.end(), row.ids.begin(), row.ids.end());
        out.weights.insert(out.weights.end(), row.weights.begin(), row.weights.end());
    }
    return out;
}

SimilarityAccumulator::SimilarityAccumulator(int num_experts)
    : num_experts_(num_experts),
      inner_(static_cast<size_t>(num_experts) * num_experts, 0.0),
      sqnorm_(num_experts, 0.0) {}

void SimilarityAccumulator::add(const Matrix& logits) {
    if (logits.cols != num_experts_) throw ShapeError("similarity: batch width != num_experts");
    for (int i = 0; i < num_experts_; ++i) {
        for (int j = i; j < num_experts_; ++j) {
            double dot = 0.0;
            for (int t = 0; t < logits.rows; ++t) dot += logits(t, i) * logits(t, j);
            inner_[static_cast<size_t>(i) * num_experts_ + j] += dot;
            if (i != j) inner_[static_cast<size_t>(j) * num_experts_ + i] += dot;
        }
    }
    for (int i = 0; i < num_experts_; ++i) {
        sqnorm_[i] = inner_[static_cast<size_t>(i) * num_experts_ + i];
    }
    tokens_ += logits.rows;
}

SimilarityTable SimilarityAccumulator::finalize() const {
    SimilarityTable t;
    t.num_experts = num_experts_;
    t.values.assign(static_cast<size_t>(num_experts_) * num_experts_, 0.0);
    const double n = tokens_ > 0 ? static_cast<double>(tokens_) : 1.0;
    for (int i = 0; i < num_experts_; ++i) {
        for (int j = 0; j < num_experts_; ++j) {
            if (sqnorm_[i] <= 0.0 || sqnorm_[j] <= 0.0) continue;  // never-scored experts stay 0
            // Batch-mean numerator over batch-mean denominators; equal to
            // the squared cosine of the full logit columns.
            const double mean_ip = inner_[static_cast<size_t>(i) * num_experts_ + j] / n;
            const double denom = (sqnorm_[i] / n) * (sqnorm_[j] / n);
            t.values[static_cast<size_t>(i) * num_experts_ + j] =
                std::min(1.0, mean_ip * mean_ip / denom);
        }
    }
    t.ranking.resize(num_experts_);
    for (int i = 0; i < num_experts_; ++i) {
        auto& rank = t.ranking[i];
        for (int j = 0; j < num_experts_; ++j)
            if (j != i) rank.push_back(j);
        std::stable_sort(rank.begin(), rank.end(), [&](int a, int b) {
            if (t.at(i, a) != t.at(i, b)) return t.at(i, a) > t.at(i, b);
            return a < b;
        });
    }
    return t;
}

SimilarityTable build_similarity_table(std::span<const Matrix> logit_batches, int num_experts) {
    SimilarityAccumulator acc(num_experts);
    for (const Matrix& b : logit_batches) acc.add(b);
    return acc.finalize();
}

}  // namespace moesim
