// SPDX-License-Identifier: Apache-2.0
#include "moesim/placement.hpp"

#include <algorithm>
#include <string>

#include "moesim/collab.hpp"

namespace moesim {

int Placement::num_experts() const {
    int n = 0;
    for (const auto& d : devices) n += static_cast<int>(d.size());
    return n;
}

std::vector<int> Placement::expert_to_device() const {
    const int n = num_experts();
    std::vector<int> dev_of(n, -1);
    for (int d = 0; d < num_devices(); ++d) {
        for (int e : devices[d]) {
            if (e < 0 || e >= n || dev_of[e] >= 0) {
                throw PlacementError("placement: device lists are not a partition of [0, " +
                                     std::to_string(n) + ")");
            }
            dev_of[e] = d;
        }
    }
    return dev_of;
}

void Placement::validate(int expected_experts) const {
    if (devices.empty()) throw PlacementError("placement: no devices");
    const int n = num_experts();
    if (expected_experts >= 0 && n != expected_experts) {
        throw PlacementError("placement: covers " + std::to_string(n) + " experts, expected " +
                             std::to_string(expected_experts));
    }
    if (n % num_devices() != 0) throw PlacementError("placement: uneven device lists");
    const size_t per = static_cast<size_t>(n) / num_devices();
    for (const auto& d : devices) {
        if (d.size() != per) throw PlacementError("placement: uneven device lists");
    }
    (void)expert_to_device();  // partition check
}

Placement trivial_placement(int num_experts, int num_devices) {
    if (num_devices < 1 || num_experts < 1 || num_experts % num_devices != 0) {
        throw ConfigError("trivial_placement: num_experts must be a positive multiple of num_devices");
    }
    Placement p;
    const int per = num_experts / num_devices;
    p.devices.resize(num_devices);
    for (int d = 0; d < num_devices; ++d) {
        for (int i = 0; i < per; ++i) p.devices[d].push_back(d * per + i);
    }
    return p;
}

namespace {

// First maximum wins: upper triangle scanned in row-major order.
std::pair<int, int> argmax_pair(const NormGraph& p) {
    int bi = 0, bj = 1;
    double best = -1.0;
    for (int i = 0; i < p.num_experts; ++i) {
        for (int j = i + 1; j < p.num_experts; ++j) {
            if (p.at(i, j) > best) {
                best = p.at(i, j);
                bi = i;
                bj = j;
            }
        }
    }
    return {bi, bj};
}

// Mean collaboration of candidate e against a member list; ties are
// resolved by the caller via ascending candidate order.
double mean_against(const NormGraph& p, const std::vector<int>& members, int e) {
    double sum = 0.0;
    for (int t : members) sum += p.at(t, e);
    return sum / static_cast<double>(members.size());
}

}  // namespace

Placement reschedule_placement(const NormGraph& p, int num_devices) {
    const int ne = p.num_experts;
    if (num_devices < 1 || ne < 1 || ne % num_devices != 0) {
        throw ConfigError("reschedule_placement: num_experts must be a positive multiple of num_devices");
    }
    const int per = ne / num_devices;
    Placement out;
    out.devices.resize(num_devices);
    std::vector<char> used(ne, 0);
    std::vector<int> used_list;
    used_list.reserve(ne);
    auto take = [&](int d, int e) {
        out.devices[d].push_back(e);
        used[e] = 1;
        used_list.push_back(e);
    };

    for (int d = 0; d < num_devices; ++d) {
        auto& local = out.devices[d];
        if (d == 0) {
            if (ne == 1) {
                take(0, 0);
            } else {
                const auto [i, j] = argmax_pair(p);
                take(0, i);
                // per == 1 leaves room for only the pair's first element.
                if (per >= 2) take(0, j);
            }
        } else {
            // Seed with the unused expert least collaborative with every
            // expert already assigned anywhere.
            int pick = -1;
            double best = 0.0;
            for (int e = 0; e < ne; ++e) {
                if (used[e]) continue;
                const double score = mean_against(p, used_list, e);
                if (pick < 0 || score < best) {
                    best = score;
                    pick = e;
                }
            }
            take(d, pick);
        }
        // Fill greedily with the unused expert most collaborative with the
        // device's current members (exactly to capacity).
        while (static_cast<int>(local.size()) < per) {
            int pick = -1;
            double best = 0.0;
            for (int e = 0; e < ne; ++e) {
                if (used[e]) continue;
                const double score = mean_against(p, local, e);
                if (pick < 0 || score > best) {
                    best = score;
                    pick = e;
                }
            }
            take(d, pick);
        }
    }
    return out;
}

}  // namespace moesim
