// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace moesim {

// Error taxonomy. The CLI maps these onto process exit codes
// (usage -> 2, data -> 3, capacity/placement -> 4).
struct ShapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PlacementError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct RoutingError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct CapacityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct StateError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DataError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Storage precision for activations and weights. Dot products always
// accumulate in double; Single rounds values to float at op boundaries.
enum class Precision { Single, Double };

inline double quantize(double v, Precision p) {
    return p == Precision::Single ? static_cast<double>(static_cast<float>(v)) : v;
}

}  // namespace moesim
