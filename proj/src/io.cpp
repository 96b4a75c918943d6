// SPDX-License-Identifier: Apache-2.0
#include "moesim/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace moesim {

namespace {

constexpr const char* kTraceHeader = "#moesim-trace v1";
constexpr const char* kMatrixHeader = "#moesim-matrix v1";
constexpr const char* kPlacementHeader = "#moesim-placement v1";
constexpr const char* kReportHeader = "#moesim-report v1";

std::vector<std::string> split_ws(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

[[noreturn]] void bad_line(int line_no, const std::string& what) {
    throw DataError("line " + std::to_string(line_no) + ": " + what);
}

long long parse_int(const std::string& s, int line_no) {
    long long v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        bad_line(line_no, "expected integer, got '" + s + "'");
    }
    return v;
}

// Reads a header of the form "#name v1"; returns the following line's
// key=value fields.
std::string expect_header(std::istream& is, const char* header, int& line_no) {
    std::string line;
    if (!std::getline(is, line)) throw DataError("line 1: empty input");
    ++line_no;
    if (line != header) bad_line(line_no, std::string("expected header '") + header + "'");
    if (!std::getline(is, line)) bad_line(line_no + 1, "missing header fields");
    ++line_no;
    return line;
}

}  // namespace

std::string format_double(double v) {
    if (!std::isfinite(v)) throw DataError("refusing to serialize non-finite value");
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s, int line_no) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        bad_line(line_no, "expected number, got '" + s + "'");
    }
    return v;
}

void write_trace(std::ostream& os, const TraceFile& trace) {
    os << kTraceHeader << "\n";
    os << "experts=" << trace.num_experts << " topk=" << trace.top_k
       << " tokens=" << trace.routing.num_tokens;
    if (!trace.tag.empty()) os << " tag=" << trace.tag;
    os << "\n";
    for (int t = 0; t < trace.routing.num_tokens; ++t) {
        for (int j = 0; j < trace.top_k; ++j) {
            if (j) os << ' ';
            os << trace.routing.id(t, j);
        }
        for (int j = 0; j < trace.top_k; ++j) os << ' ' << format_double(trace.routing.weight(t, j));
        os << "\n";
    }
}

TraceFile read_trace(std::istream& is) {
    int line_no = 0;
    const std::string fields_line = expect_header(is, kTraceHeader, line_no);
    TraceFile trace;
    int tokens = -1;
    for (const std::string& field : split_ws(fields_line)) {
        const auto eq = field.find('=');
        if (eq == std::string::npos) bad_line(line_no, "malformed header field '" + field + "'");
        const std::string key = field.substr(0, eq), val = field.substr(eq + 1);
        if (key == "experts") trace.num_experts = static_cast<int>(parse_int(val, line_no));
        else if (key == "topk") trace.top_k = static_cast<int>(parse_int(val, line_no));
        else if (key == "tokens") tokens = static_cast<int>(parse_int(val, line_no));
        else if (key == "tag") trace.tag = val;
        else bad_line(line_no, "unknown header field '" + key + "'");
    }
    if (trace.num_experts < 1 || trace.top_k < 1 || tokens < 0) {
        bad_line(line_no, "incomplete trace header");
    }
    trace.routing.num_tokens = tokens;
    trace.routing.k = trace.top_k;
    std::string line;
    int seen = 0;
    while (std::getline(is, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto parts = split_ws(line);
        if (static_cast<int>(parts.size()) != 2 * trace.top_k) {
            bad_line(line_no, "record needs " + std::to_string(2 * trace.top_k) + " fields, got " +
                                  std::to_string(parts.size()));
        }
        for (int j = 0; j < trace.top_k; ++j) {
            const long long id = parse_int(parts[j], line_no);
            if (id < 0 || id >= trace.num_experts) bad_line(line_no, "expert id out of range");
            trace.routing.ids.push_back(static_cast<int>(id));
        }
        for (int j = 0; j < trace.top_k; ++j) {
            trace.routing.weights.push_back(parse_double(parts[trace.top_k + j], line_no));
        }
        ++seen;
    }
    if (seen != tokens) {
        throw DataError("trace declares " + std::to_string(tokens) + " tokens but has " +
                        std::to_string(seen) + " records");
    }
    try {
        trace.routing.validate(trace.num_experts);
    } catch (const RoutingError& e) {
        throw DataError(std::string("trace file: ") + e.what());
    }
    return trace;
}

void write_matrix(std::ostream& os, const Matrix& m) {
    os << kMatrixHeader << "\n" << m.rows << ' ' << m.cols << "\n";
    for (int i = 0; i < m.rows; ++i) {
        for (int j = 0; j < m.cols; ++j) {
            if (j) os << ' ';
            os << format_double(m(i, j));
        }
        os << "\n";
    }
}

Matrix read_matrix(std::istream& is) {
    int line_no = 0;
    const std::string shape_line = expect_header(is, kMatrixHeader, line_no);
    const auto shape = split_ws(shape_line);
    if (shape.size() != 2) bad_line(line_no, "expected 'rows cols'");
    Matrix m(static_cast<int>(parse_int(shape[0], line_no)),
             static_cast<int>(parse_int(shape[1], line_no)));
    std::string line;
    for (int i = 0; i < m.rows; ++i) {
        if (!std::getline(is, line)) bad_line(line_no + 1, "missing matrix row");
        ++line_no;
        const auto parts = split_ws(line);
        if (static_cast<int>(parts.size()) != m.cols) bad_line(line_no, "wrong column count");
        for (int j = 0; j < m.cols; ++j) m(i, j) = parse_double(parts[j], line_no);
    }
    return m;
}

void write_placement(std::ostream& os, const Placement& p) {
    os << kPlacementHeader << "\n" << "devices=" << p.num_devices() << "\n";
    for (const auto& device : p.devices) {
        for (size_t i = 0; i < device.size(); ++i) {
            if (i) os << ' ';
            os << device[i];
        }
        os << "\n";
    }
}

Placement read_placement(std::istream& is) {
    int line_no = 0;
    const std::string fields = expect_header(is, kPlacementHeader, line_no);
    const auto parts = split_ws(fields);
    if (parts.size() != 1 || parts[0].rfind("devices=", 0) != 0) {
        bad_line(line_no, "expected 'devices=N'");
    }
    const int nd = static_cast<int>(parse_int(parts[0].substr(8), line_no));
    Placement p;
    std::string line;
    for (int d = 0; d < nd; ++d) {
        if (!std::getline(is, line)) bad_line(line_no + 1, "missing device list");
        ++line_no;
        std::vector<int> experts;
        for (const auto& tok : split_ws(line)) {
            experts.push_back(static_cast<int>(parse_int(tok, line_no)));
        }
        p.devices.push_back(std::move(experts));
    }
    try {
        p.validate();
    } catch (const PlacementError& e) {
        throw DataError(std::string("placement file: ") + e.what());
    }
    return p;
}

ReportWriter::ReportWriter(std::ostream& os) : os_(os) { os_ << kReportHeader << "\n"; }

void ReportWriter::kv(const std::string& key, const std::string& value) {
    os_ << key << '=' << value << "\n";
}
void ReportWriter::kv(const std::string& key, double value) { kv(key, format_double(value)); }
void ReportWriter::kv(const std::string& key, long long value) { kv(key, std::to_string(value)); }
void ReportWriter::kv(const std::string& key, int value) { kv(key, std::to_string(value)); }

std::string slurp_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& contents) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot write '" + path + "'");
    f << contents;
}

}  // namespace moesim
