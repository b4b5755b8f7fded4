#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace xdiff {

using Vec = std::vector<double>;

/// Dense row-major matrix of doubles. The only tensor type in the project:
/// network weights are (fan_out x fan_in), action chunks are (horizon x action_dim),
/// minibatches are (batch x width).
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(int r, int c, double fill = 0.0)
        : rows(r), cols(c), data(static_cast<size_t>(r) * static_cast<size_t>(c), fill) {
        if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative shape");
    }

    double& at(int r, int c) { return data[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return data[static_cast<size_t>(r) * cols + c]; }

    double* row(int r) { return data.data() + static_cast<size_t>(r) * cols; }
    const double* row(int r) const { return data.data() + static_cast<size_t>(r) * cols; }

    long size() const { return static_cast<long>(rows) * cols; }
    bool empty() const { return size() == 0; }
    bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

    void fill(double v) { std::fill(data.begin(), data.end(), v); }
};

/// Action chunk: S consecutive actions (rows) of width d_a (cols).
using ActionChunk = Matrix;

inline void require_shape(const Matrix& m, int rows, int cols, const char* what) {
    if (m.rows != rows || m.cols != cols)
        throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(rows) +
                                    "x" + std::to_string(cols) + ", got " +
                                    std::to_string(m.rows) + "x" + std::to_string(m.cols));
}

inline Vec flatten(const Matrix& m) { return m.data.empty() ? Vec{} : Vec(m.data.begin(), m.data.end()); }

inline Matrix unflatten(const Vec& v, int rows, int cols) {
    if (static_cast<long>(v.size()) != static_cast<long>(rows) * cols)
        throw std::invalid_argument("unflatten: size mismatch");
    Matrix m(rows, cols);
    m.data.assign(v.begin(), v.end());
    return m;
}

inline double squared_norm(const Vec& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return s;
}

inline double squared_norm(const Matrix& m) {
    double s = 0.0;
    for (double x : m.data) s += x * x;
    return s;
}

inline bool all_finite(const Vec& v) {
    for (double x : v)
        if (!std::isfinite(x)) return false;
    return true;
}

inline bool all_finite(const Matrix& m) {
    for (double x : m.data)
        if (!std::isfinite(x)) return false;
    return true;
}

inline double mean_of(const Vec& v) {
    if (v.empty()) return 0.0;
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline double variance_of(const Vec& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean_of(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return s / static_cast<double>(v.size() - 1);
}

}  // namespace xdiff
