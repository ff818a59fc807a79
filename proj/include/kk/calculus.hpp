#pragma once

#include <span>
#include <vector>

#include "kk/field.hpp"

namespace kk {

// value-and-derivative bundles ------------------------------------------

template <class T>
struct JetScalar {
    T v;
    std::vector<T> d;  // d[j] = ∂_j
};

template <class T>
struct JetVec {
    std::vector<T> v;
    Mat<T> d;  // d(i, j) = ∂_j v[i]
};

template <class T>
struct JetMat {
    Mat<T> v;
    Ten3<T> d;  // d(j, ·, ·) = ∂_j of the matrix
};

template <class T>
JetScalar<T> value_and_grad(const ScalarField& f, std::span<const T> x) {
    static_assert(jet_level_v<T> < max_jet_level, "gradient exceeds jet depth");
    const int n = static_cast<int>(x.size());
    JetScalar<T> out;
    out.d.resize(n);
    for (int dir = 0; dir < n; ++dir) {
        std::vector<Dual<T>> xs = lifted(x, dir);
        Dual<T> r = f.eval(std::span<const Dual<T>>(xs));
        if (dir == 0) out.v = r.a;
        out.d[dir] = r.b;
    }
    return out;
}

template <class T>
JetVec<T> value_and_jac(const detail::VecFieldBase& f, std::span<const T> x) {
    static_assert(jet_level_v<T> < max_jet_level, "jacobian exceeds jet depth");
    const int n = static_cast<int>(x.size());
    const int m = f.size();
    JetVec<T> out;
    out.v.resize(m);
    out.d = Mat<T>(m, n);
    for (int dir = 0; dir < n; ++dir) {
        std::vector<Dual<T>> xs = lifted(x, dir);
        std::vector<Dual<T>> r = f.eval(std::span<const Dual<T>>(xs));
        for (int i = 0; i < m; ++i) {
            if (dir == 0) out.v[i] = r[i].a;
            out.d(i, dir) = r[i].b;
        }
    }
    return out;
}

template <class T>
JetMat<T> value_and_grad_mat(const detail::MatFieldBase& f, std::span<const T> x) {
    static_assert(jet_level_v<T> < max_jet_level, "gradient exceeds jet depth");
    const int n = static_cast<int>(x.size());
    JetMat<T> out;
    out.d = Ten3<T>(n, f.rows(), f.cols());
    for (int dir = 0; dir < n; ++dir) {
        std::vector<Dual<T>> xs = lifted(x, dir);
        Mat<Dual<T>> r = f.eval(std::span<const Dual<T>>(xs));
        if (dir == 0) {
            out.v = Mat<T>(f.rows(), f.cols());
            for (int i = 0; i < f.rows(); ++i)
                for (int j = 0; j < f.cols(); ++j) out.v(i, j) = r(i, j).a;
        }
        for (int i = 0; i < f.rows(); ++i)
            for (int j = 0; j < f.cols(); ++j) out.d(dir, i, j) = r(i, j).b;
    }
    return out;
}

// partial ----------------------------------------------------------------

// Exact mixed partial along the listed directions (|dirs| <= 3).
inline double partial(const ScalarField& f, const Point& p, std::span<const int> dirs) {
    const int order = static_cast<int>(dirs.size());
    if (order > f.max_order())
        throw OrderError("partial of order " + std::to_string(order) +
                         " exceeds supported order " + std::to_string(f.max_order()));
    std::span<const double> x = p.coords();
    switch (order) {
        case 0:
            return f.eval(x);
        case 1: {
            std::vector<D1> xs = lifted(x, dirs[0]);
            return f.eval(std::span<const D1>(xs)).b;
        }
        case 2: {
            std::vector<D1> x1 = lifted(x, dirs[0]);
            std::vector<D2> x2 = lifted(std::span<const D1>(x1), dirs[1]);
            return f.eval(std::span<const D2>(x2)).b.b;
        }
        case 3: {
            std::vector<D1> x1 = lifted(x, dirs[0]);
            std::vector<D2> x2 = lifted(std::span<const D1>(x1), dirs[1]);
            std::vector<D3> x3 = lifted(std::span<const D2>(x2), dirs[2]);
            return f.eval(std::span<const D3>(x3)).b.b.b;
        }
        default:
            throw OrderError("partial of order > 3 unsupported");
    }
}

inline double partial(const ScalarField& f, const Point& p, std::initializer_list<int> dirs) {
    std::vector<int> v(dirs);
    return partial(f, p, std::span<const int>(v));
}

// Lie bracket [X, Y]^k = X^j ∂_j Y^k − Y^j ∂_j X^k.
inline VectorField lie_bracket(const VectorField& X, const VectorField& Y) {
    const int n = X.arity();
    const int order = std::min(X.max_order(), Y.max_order()) - 1;
    return VectorField(n, order, [X, Y, n](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        using R = std::vector<T>;
        if constexpr (jet_level_v<T> >= max_jet_level) {
            throw OrderError("lie_bracket: jet depth exhausted");
            return R{};
        } else {
            JetVec<T> jx = value_and_jac(X, x);
            JetVec<T> jy = value_and_jac(Y, x);
            R out(n);
            for (int k = 0; k < n; ++k) {
                T acc{};
                for (int j = 0; j < n; ++j)
                    acc = acc + jx.v[j] * jy.d(k, j) - jy.v[j] * jx.d(k, j);
                out[k] = acc;
            }
            return out;
        }
    });
}

// exterior derivative -----------------------------------------------------

// (da)_{ij} = ∂_i a_j − ∂_j a_i  (no 1/2 factor convention)
inline TwoForm exterior_derivative(const OneForm& a) {
    const int n = a.arity();
    return TwoForm(n, a.max_order() - 1, [a, n](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        using R = Mat<T>;
        if constexpr (jet_level_v<T> >= max_jet_level) {
            throw OrderError("exterior_derivative: jet depth exhausted");
            return R{};
        } else {
            JetVec<T> ja = value_and_jac(a, x);
            R out(n, n);
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) out(i, j) = ja.d(j, i) - ja.d(i, j);
            return out;
        }
    });
}

// (dω)_{ijk} = ∂_i ω_{jk} − ∂_j ω_{ik} + ∂_k ω_{ij}
template <class T>
Ten3<T> exterior_derivative_at(const TwoForm& w, std::span<const T> x) {
    static_assert(jet_level_v<T> < max_jet_level);
    const int n = w.rows();
    JetMat<T> jw = value_and_grad_mat(w, x);
    Ten3<T> out(n, n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            for (int k = 0; k < n; ++k)
                out(i, j, k) = jw.d(i, j, k) - jw.d(j, i, k) + jw.d(k, i, j);
    return out;
}

// interior products --------------------------------------------------------

inline ScalarField interior_product(const OneForm& a, const VectorField& X) {
    return ScalarField(a.arity(), std::min(a.max_order(), X.max_order()), [a, X](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        std::vector<T> av = a.eval(x);
        std::vector<T> xv = X.eval(x);
        T acc{};
        for (size_t i = 0; i < av.size(); ++i) acc = acc + av[i] * xv[i];
        return acc;
    });
}

inline OneForm interior_product(const TwoForm& w, const VectorField& X) {
    const int n = w.rows();
    return OneForm(n, std::min(w.max_order(), X.max_order()), [w, X, n](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        Mat<T> wv = w.eval(x);
        std::vector<T> xv = X.eval(x);
        std::vector<T> out(n);
        for (int j = 0; j < n; ++j) {
            T acc{};
            for (int i = 0; i < n; ++i) acc = acc + wv(i, j) * xv[i];
            out[j] = acc;
        }
        return out;
    });
}

// Lie derivatives -----------------------------------------------------------

inline ScalarField lie_derivative(const ScalarField& f, const VectorField& X) {
    const int n = X.arity();
    return ScalarField(n, std::min(f.max_order() - 1, X.max_order()), [f, X, n](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        if constexpr (jet_level_v<T> >= max_jet_level) {
            throw OrderError("lie_derivative: jet depth exhausted");
            return T{};
        } else {
            JetScalar<T> jf = value_and_grad(f, x);
            std::vector<T> xv = X.eval(x);
            T acc{};
            for (int i = 0; i < n; ++i) acc = acc + xv[i] * jf.d[i];
            return acc;
        }
    });
}

inline VectorField lie_derivative(const VectorField& Y, const VectorField& X) {
    return lie_bracket(X, Y);
}

// (L_X a)_j = X^i ∂_i a_j + a_i ∂_j X^i
inline OneForm lie_derivative(const OneForm& a, const VectorField& X) {
    const int n = X.arity();
    const int order = std::min(a.max_order(), X.max_order()) - 1;
    return OneForm(n, order, [a, X, n](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        using R = std::vector<T>;
        if constexpr (jet_level_v<T> >= max_jet_level) {
            throw OrderError("lie_derivative: jet depth exhausted");
            return R{};
        } else {
            JetVec<T> ja = value_and_jac(a, x);
            JetVec<T> jx = value_and_jac(X, x);
            R out(n);
            for (int j = 0; j < n; ++j) {
                T acc{};
                for (int i = 0; i < n; ++i)
                    acc = acc + jx.v[i] * ja.d(j, i) + ja.v[i] * jx.d(i, j);
                out[j] = acc;
            }
            return out;
        }
    });
}

// covariant 2-tensor: (L_X S)_{jk} = X^i ∂_i S_{jk} + S_{ik} ∂_j X^i + S_{ji} ∂_k X^i
template <class Cov2>
Mat<double> lie_derivative_cov2_at(const Cov2& S, const VectorField& X, const Point& p) {
    std::span<const double> x = p.coords();
    const int n = X.arity();
    JetMat<double> js = value_and_grad_mat(S, x);
    JetVec<double> jx = value_and_jac(X, x);
    Mat<double> out(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                acc += jx.v[i] * js.d(i, j, k) + js.v(i, k) * jx.d(i, j) +
                       js.v(j, i) * jx.d(i, k);
            out(j, k) = acc;
        }
    return out;
}

// (1,1) tensor: (L_X Φ)^i_j = X^k ∂_k Φ^i_j − Φ^k_j ∂_k X^i + Φ^i_k ∂_j X^k
inline Mat<double> lie_derivative_endo_at(const EndomorphismField& phi, const VectorField& X,
                                          const Point& p) {
    std::span<const double> x = p.coords();
    const int n = X.arity();
    JetMat<double> jp = value_and_grad_mat(phi, x);
    JetVec<double> jx = value_and_jac(X, x);
    Mat<double> out(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double acc = 0.0;
            for (int k = 0; k < n; ++k)
                acc += jx.v[k] * jp.d(k, i, j) - jp.v(k, j) * jx.d(i, k) +
                       jp.v(i, k) * jx.d(k, j);
            out(i, j) = acc;
        }
    return out;
}

// Cartan formula L_X a = d(ι_X a) + ι_X(da), used as an independent route
// for cross-checking the direct Lie derivative of 1-forms.
inline OneForm lie_derivative_cartan(const OneForm& a, const VectorField& X) {
    ScalarField iXa = interior_product(a, X);
    OneForm da_x = interior_product(exterior_derivative(a), X);
    const int n = X.arity();
    return OneForm(n, std::min(iXa.max_order(), da_x.max_order()) - 1, [iXa, da_x, n](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        using R = std::vector<T>;
        if constexpr (jet_level_v<T> >= max_jet_level) {
            throw OrderError("lie_derivative_cartan: jet depth exhausted");
            return R{};
        } else {
            JetScalar<T> jf = value_and_grad(iXa, x);
            std::vector<T> tail = da_x.eval(x);
            R out(n);
            for (int j = 0; j < n; ++j) out[j] = jf.d[j] + tail[j];
            return out;
        }
    });
}

// field combinators ----------------------------------------------------------

inline VectorField operator+(const VectorField& A, const VectorField& B) {
    return VectorField(A.arity(), std::min(A.max_order(), B.max_order()), [A, B](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        std::vector<T> a = A.eval(x), b = B.eval(x);
        for (size_t i = 0; i < a.size(); ++i) a[i] = a[i] + b[i];
        return a;
    });
}

inline VectorField operator-(const VectorField& A, const VectorField& B) {
    return VectorField(A.arity(), std::min(A.max_order(), B.max_order()), [A, B](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        std::vector<T> a = A.eval(x), b = B.eval(x);
        for (size_t i = 0; i < a.size(); ++i) a[i] = a[i] - b[i];
        return a;
    });
}

inline VectorField operator*(double s, const VectorField& A) {
    return VectorField(A.arity(), A.max_order(), [A, s](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        std::vector<T> a = A.eval(x);
        for (auto& c : a) c = c * s;
        return a;
    });
}

inline VectorField operator*(const ScalarField& f, const VectorField& A) {
    return VectorField(A.arity(), std::min(f.max_order(), A.max_order()), [A, f](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        std::vector<T> a = A.eval(x);
        T fv = f.eval(x);
        for (auto& c : a) c = fv * c;
        return a;
    });
}

inline VectorField apply(const EndomorphismField& phi, const VectorField& X) {
    return VectorField(X.arity(), std::min(phi.max_order(), X.max_order()), [phi, X](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        Mat<T> m = phi.eval(x);
        std::vector<T> v = X.eval(x);
        return matvec(m, std::span<const T>(v));
    });
}

// g(X, Y) as a scalar field
inline ScalarField metric_pair(const MetricField& g, const VectorField& X,
                               const VectorField& Y) {
    int order = std::min({g.max_order(), X.max_order(), Y.max_order()});
    return ScalarField(g.arity(), order, [g, X, Y](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        Mat<T> gv = g.eval(x);
        std::vector<T> xv = X.eval(x), yv = Y.eval(x);
        return pair(gv, std::span<const T>(xv), std::span<const T>(yv));
    });
}

// ω(X, Y) as a scalar field
inline ScalarField form_pair(const TwoForm& w, const VectorField& X, const VectorField& Y) {
    int order = std::min({w.max_order(), X.max_order(), Y.max_order()});
    return ScalarField(w.arity(), order, [w, X, Y](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        Mat<T> wv = w.eval(x);
        std::vector<T> xv = X.eval(x), yv = Y.eval(x);
        return pair(wv, std::span<const T>(xv), std::span<const T>(yv));
    });
}

// a(X) as a scalar field
inline ScalarField form_apply(const OneForm& a, const VectorField& X) {
    return interior_product(a, X);
}

}  // namespace kk
