#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "kk/dual.hpp"

namespace kk {

// Dense containers over a generic jet scalar. Chart dimensions here are
// tiny (2..4), so everything is row-major std::vector storage.

template <class T>
struct Mat {
    int rows = 0, cols = 0;
    std::vector<T> d;

    Mat() = default;
    Mat(int r, int c) : rows(r), cols(c), d(static_cast<size_t>(r) * c) {}
    T& operator()(int i, int j) { return d[static_cast<size_t>(i) * cols + j]; }
    const T& operator()(int i, int j) const { return d[static_cast<size_t>(i) * cols + j]; }
};

template <class T>
struct Ten3 {
    int n0 = 0, n1 = 0, n2 = 0;
    std::vector<T> d;

    Ten3() = default;
    Ten3(int a, int b, int c) : n0(a), n1(b), n2(c), d(static_cast<size_t>(a) * b * c) {}
    T& operator()(int i, int j, int k) {
        return d[(static_cast<size_t>(i) * n1 + j) * n2 + k];
    }
    const T& operator()(int i, int j, int k) const {
        return d[(static_cast<size_t>(i) * n1 + j) * n2 + k];
    }
};

template <class T>
struct Ten4 {
    int n0 = 0, n1 = 0, n2 = 0, n3 = 0;
    std::vector<T> d;

    Ten4() = default;
    Ten4(int a, int b, int c, int e)
        : n0(a), n1(b), n2(c), n3(e), d(static_cast<size_t>(a) * b * c * e) {}
    T& operator()(int i, int j, int k, int l) {
        return d[((static_cast<size_t>(i) * n1 + j) * n2 + k) * n3 + l];
    }
    const T& operator()(int i, int j, int k, int l) const {
        return d[((static_cast<size_t>(i) * n1 + j) * n2 + k) * n3 + l];
    }
};

// Gauss-Jordan inverse with pivoting on primal magnitude; works for any
// jet level. Throws SingularMetricError on a vanishing pivot.
template <class T>
Mat<T> inverse(Mat<T> m) {
    const int n = m.rows;
    Mat<T> inv(n, n);
    for (int i = 0; i < n; ++i) inv(i, i) = T(1.0);

    for (int col = 0; col < n; ++col) {
        int piv = col;
        double best = std::abs(primal(m(col, col)));
        for (int rr = col + 1; rr < n; ++rr) {
            double mag = std::abs(primal(m(rr, col)));
            if (mag > best) {
                best = mag;
                piv = rr;
            }
        }
        if (best < 1e-14) throw SingularMetricError("matrix numerically singular in inverse()");
        if (piv != col) {
            for (int j = 0; j < n; ++j) {
                std::swap(m(col, j), m(piv, j));
                std::swap(inv(col, j), inv(piv, j));
            }
        }
        T diag = m(col, col);
        for (int j = 0; j < n; ++j) {
            m(col, j) = m(col, j) / diag;
            inv(col, j) = inv(col, j) / diag;
        }
        for (int rr = 0; rr < n; ++rr) {
            if (rr == col) continue;
            // note: even entries with zero value must be eliminated, their
            // derivative parts feed the derivative of the inverse
            T f = m(rr, col);
            for (int j = 0; j < n; ++j) {
                m(rr, j) = m(rr, j) - f * m(col, j);
                inv(rr, j) = inv(rr, j) - f * inv(col, j);
            }
        }
    }
    return inv;
}

template <class T>
std::vector<T> matvec(const Mat<T>& m, std::span<const T> v) {
    std::vector<T> out(m.rows);
    for (int i = 0; i < m.rows; ++i) {
        T acc{};
        for (int j = 0; j < m.cols; ++j) acc = acc + m(i, j) * v[j];
        out[i] = acc;
    }
    return out;
}

// g(u, w) for a bilinear form given as a matrix.
template <class T>
T pair(const Mat<T>& g, std::span<const T> u, std::span<const T> w) {
    T acc{};
    for (int i = 0; i < g.rows; ++i)
        for (int j = 0; j < g.cols; ++j) acc = acc + g(i, j) * u[i] * w[j];
    return acc;
}

}  // namespace kk
