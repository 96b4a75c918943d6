// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "moesim/matrix.hpp"
#include "moesim/placement.hpp"
#include "moesim/routing.hpp"

namespace moesim {

// Line-delimited text formats with versioned headers. Floats are
// printed with shortest-round-trip formatting, so serialize -> parse is
// bit-exact and repeated runs produce byte-identical files.

// Routed-token trace: header plus one record per token (k expert ids in
// descending score order, then k weights).
struct TraceFile {
    int num_experts = 0;
    int top_k = 0;
    std::string tag;  // optional model tag
    RoutingOutcome routing;
};

std::string format_double(double v);
double parse_double(const std::string& s, int line_no);

void write_trace(std::ostream& os, const TraceFile& trace);
TraceFile read_trace(std::istream& is);

void write_matrix(std::ostream& os, const Matrix& m);
Matrix read_matrix(std::istream& is);

void write_placement(std::ostream& os, const Placement& p);
Placement read_placement(std::istream& is);

// Ordered key=value report body under a versioned header.
class ReportWriter {
  public:
    explicit ReportWriter(std::ostream& os);
    void kv(const std::string& key, const std::string& value);
    void kv(const std::string& key, double value);
    void kv(const std::string& key, long long value);
    void kv(const std::string& key, int value);

  private:
    std::ostream& os_;
};

// File helpers (DataError on unreadable input).
std::string slurp_file(const std::string& path);
void write_file(const std::string& path, const std::string& contents);

}  // namespace moesim
