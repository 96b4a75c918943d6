// SPDX-License-Identifier: Apache-2.0
#include "moesim/matrix.hpp"

#include <algorithm>
#include <cmath>

namespace moesim {

Matrix tiled_matmul(const Matrix& a, const Matrix& b, Tiles tiles, Precision prec) {
    if (a.cols != b.rows) {
        throw ShapeError("tiled_matmul: inner dimensions disagree (" + std::to_string(a.cols) +
                         " vs " + std::to_string(b.rows) + ")");
    }
    if (tiles.m < 1 || tiles.k < 1 || tiles.n < 1) {
        throw ShapeError("tiled_matmul: tile sizes must be >= 1");
    }
    Matrix out(a.rows, b.cols);
    const int kdim = a.cols;
    for (int i0 = 0; i0 < a.rows; i0 += tiles.m) {
        const int i1 = std::min(i0 + tiles.m, a.rows);
        for (int j0 = 0; j0 < b.cols; j0 += tiles.n) {
            const int j1 = std::min(j0 + tiles.n, b.cols);
            for (int i = i0; i < i1; ++i) {
                for (int j = j0; j < j1; ++j) {
                    // K blocks ascending, elements ascending: the add stream per
                    // output element is k = 0..K-1 for any tile_k.
                    double acc = 0.0;
                    for (int k0 = 0; k0 < kdim; k0 += tiles.k) {
                        const int k1 = std::min(k0 + tiles.k, kdim);
                        for (int k = k0; k < k1; ++k) acc += a(i, k) * b(k, j);
                    }
                    out(i, j) = quantize(acc, prec);
                }
            }
        }
    }
    return out;
}

Matrix transposed(const Matrix& m) {
    Matrix out(m.cols, m.rows);
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) out(j, i) = m(i, j);
    return out;
}

void quantize_inplace(Matrix& m, Precision prec) {
    if (prec == Precision::Double) return;
    for (double& v : m.data) v = quantize(v, Precision::Single);
}

double max_rel_error(const Matrix& a, const Matrix& b) {
    if (a.rows != b.rows || a.cols != b.cols) throw ShapeError("max_rel_error: shape mismatch");
    double diff = 0.0, ref = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        diff = std::max(diff, std::fabs(a.data[i] - b.data[i]));
        ref = std::max(ref, std::fabs(b.data[i]));
    }
    return diff / std::max(ref, 1e-300);
}

}  // namespace moesim
