// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <optional>
#include <span>
#include <vector>

#include "moesim/matrix.hpp"
#include "moesim/placement.hpp"
#include "moesim/routing.hpp"

namespace moesim {

enum class PruneMode { None, RouterScore, Similarity };

// Weight assigned to a replacement expert: inherit the pruned expert's
// weight, or take the replacement's own softmax score.
enum class ReplacementWeightPolicy { Inherit, OwnScore };

// Squared-cosine affinity between experts' router-logit columns, with a
// precomputed per-expert ranking (descending similarity, ties -> lower
// index). Zero-norm columns score 0 against everything, themselves
// included.
struct SimilarityTable {
    int num_experts = 0;
    std::vector<double> values;             // N_e x N_e, in [0, 1]
    std::vector<std::vector<int>> ranking;  // per expert: the other experts, most similar first

    double at(int i, int j) const { return values[static_cast<size_t>(i) * num_experts + j]; }
};

struct PruneSpec {
    PruneMode mode = PruneMode::None;
    int device_budget = 1;  // max devices a token's experts may span
    std::optional<SimilarityTable> table;
    ReplacementWeightPolicy weight_policy = ReplacementWeightPolicy::Inherit;

    void validate(int num_devices) const;
};

// Per-token routing row produced by the pruning ops.
struct RoutedRow {
    std::vector<int> ids;
    std::vector<double> weights;
};

// First `budget` distinct devices reached while walking `token_ids` in
// descending score order. If the ids span fewer devices, all spanned
// devices are returned (no pruning needed).
std::vector<int> allowed_devices(std::span<const int> token_ids, const Placement& placement,
                                 int budget);

// Restrict to the allowed devices (derived from the unpruned top-k),
// then pick the k highest-scoring experts hosted there. CapacityError
// when the allowed devices host fewer than k experts.
RoutedRow prune_router_score(std::span<const double> scores_row, const Placement& placement,
                             int budget, int k, bool renormalize);

// Keep in-range experts from the unpruned top-k; replace each
// out-of-range expert with its most similar unused expert on an
// allowed device. CapacityError when no legal replacement remains.
RoutedRow prune_similarity(std::span<const int> ids, std::span<const double> scores_row,
                           const Placement& placement, int budget, int k,
                           const SimilarityTable& table, ReplacementWeightPolicy policy,
                           bool renormalize);

// Weight vector for a pruned row. `replaced[j]` marks slots whose
// expert was swapped in; Inherit keeps the original slot weights,
// OwnScore re-reads the softmax score of the expert now in the slot.
std::vector<double> pruned_weight_policy(std::span<const int> ids,
                                         std::span<const double> original_weights,
                                         std::span<const char> replaced,
                                         std::span<const double> scores_row,
                                         ReplacementWeightPolicy policy, bool renormalize);

// Batch helper: applies the configured pruning to every token.
RoutingOutcome prune_routing(const Matrix& scores, const RoutingOutcome& unpruned,
                             const Placement& placement, const PruneSpec& spec, bool renormalize);

// Accumulates router-logit batches into the squared-cosine table
// without materializing the full logit history.
class SimilarityAccumulator {
  public:
    explicit SimilarityAccumulator(int num_experts);

    void add(const Matrix& logits);  // tokens x N_e
    SimilarityTable finalize() const;

  private:
    int num_experts_;
    long long tokens_ = 0;
    std::vector<double> inner_;  // accumulated <H[:,i], H[:,j]>
    std::vector<double> sqnorm_;
};

SimilarityTable build_similarity_table(std::span<const Matrix> logit_batches, int num_experts);

}  // namespace moesim
