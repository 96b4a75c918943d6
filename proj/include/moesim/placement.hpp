// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "moesim/common.hpp"

namespace moesim {

struct NormGraph;

// Partition of expert ids across devices. Every device list has length
// num_experts / num_devices; lists are disjoint and cover [0, N_e).
struct Placement {
    std::vector<std::vector<int>> devices;

    int num_devices() const { return static_cast<int>(devices.size()); }
    int num_experts() const;

    // expert id -> device id. Throws PlacementError if the lists do not
    // form a partition of [0, num_experts()).
    std::vector<int> expert_to_device() const;

    void validate(int expected_experts = -1) const;
};

// Contiguous layout: device d holds [d*N_e/N_d, (d+1)*N_e/N_d).
Placement trivial_placement(int num_experts, int num_devices);

// Collaboration-aware greedy clustering over the normalized graph:
// device 0 is seeded with the most collaborative pair; each later
// device is seeded with the unused expert least collaborative with all
// used ones; devices fill with the unused expert most collaborative
// with their current members. Ties break to the lower expert index.
Placement reschedule_placement(const NormGraph& p, int num_devices);

}  // namespace moesim
