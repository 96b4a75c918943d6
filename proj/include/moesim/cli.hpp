// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace moesim::cli {

// Runs one subcommand (gen-trace, profile, reschedule, simulate,
// fit-latency, sweep-prune). Returns the process exit code:
//   0 success, 2 usage, 3 data, 4 capacity/placement.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace moesim::cli
