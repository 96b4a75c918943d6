// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "moesim/common.hpp"

namespace moesim {

// Row-major dense matrix. Values are stored as double; under
// Precision::Single every stored value is exactly representable in
// float, so the pair (Matrix, Precision) emulates float storage with
// double accumulation.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {}

    double& operator()(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double operator()(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    std::span<double> row(int r) { return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)}; }
    std::span<const double> row(int r) const {
        return {data.data() + static_cast<size_t>(r) * cols, static_cast<size_t>(cols)};
    }

    bool empty() const { return rows == 0 || cols == 0; }
};

// Tiling block sizes (M, K, N) for the matmul traversal.
struct Tiles {
    int m = 32;
    int k = 32;
    int n = 32;
};

// Dense matmul with tiled traversal. Per output element, the K
// dimension is accumulated in ascending order into a double
// accumulator, so the result is bit-identical for every tile choice.
Matrix tiled_matmul(const Matrix& a, const Matrix& b, Tiles tiles, Precision prec = Precision::Double);

Matrix transposed(const Matrix& m);

// Rounds every entry through float. Identity under Precision::Double.
void quantize_inplace(Matrix& m, Precision prec);

// max |a-b| / max(max |b|, floor). Shape mismatch -> ShapeError.
double max_rel_error(const Matrix& a, const Matrix& b);

}  // namespace moesim
