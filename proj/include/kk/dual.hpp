#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace kk {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct OrderError : Error {
    using Error::Error;
};
struct NonFiniteError : Error {
    using Error::Error;
};
struct SingularMetricError : Error {
    using Error::Error;
};
struct ConvergenceError : Error {
    ConvergenceError(const std::string& msg, double achieved_)
        : Error(msg), achieved(achieved_) {}
    double achieved = 0.0;
};
struct SectionError : Error {
    SectionError(const std::string& msg, double violation_)
        : Error(msg), violation(violation_) {}
    double violation = 0.0;
};
struct PreconditionError : Error {
    PreconditionError(const std::string& which_, double value_, const std::string& msg)
        : Error(msg), which(which_), value(value_) {}
    std::string which;
    double value = 0.0;
};
struct ConfigError : Error {
    using Error::Error;
};

// Forward-mode jet: value plus one directional derivative. Nesting Dual
// types yields exact higher-order mixed partials; every field evaluation
// below is generic in the scalar so the same component function serves
// orders 0 through 3.
template <class T>
struct Dual {
    T a{};  // value
    T b{};  // derivative

    constexpr Dual() = default;
    constexpr Dual(double s) : a(s), b() {}
    constexpr Dual(T value, T deriv) : a(std::move(value)), b(std::move(deriv)) {}
};

template <class T>
inline constexpr int jet_level_v = -1;
template <>
inline constexpr int jet_level_v<double> = 0;
template <class T>
inline constexpr int jet_level_v<Dual<T>> = jet_level_v<T> + 1;

using D0 = double;
using D1 = Dual<D0>;
using D2 = Dual<D1>;
using D3 = Dual<D2>;

inline constexpr int max_jet_level = 3;

inline double primal(double x) { return x; }
template <class T>
double primal(const Dual<T>& x) {
    return primal(x.a);
}

// arithmetic -----------------------------------------------------------

template <class T>
Dual<T> operator+(const Dual<T>& x, const Dual<T>& y) {
    return {x.a + y.a, x.b + y.b};
}
template <class T>
Dual<T> operator-(const Dual<T>& x, const Dual<T>& y) {
    return {x.a - y.a, x.b - y.b};
}
template <class T>
Dual<T> operator*(const Dual<T>& x, const Dual<T>& y) {
    return {x.a * y.a, x.a * y.b + x.b * y.a};
}
template <class T>
Dual<T> operator/(const Dual<T>& x, const Dual<T>& y) {
    T q = x.a / y.a;
    return {q, (x.b - q * y.b) / y.a};
}
template <class T>
Dual<T> operator-(const Dual<T>& x) {
    return {-x.a, -x.b};
}
template <class T>
Dual<T> operator+(const Dual<T>& x) {
    return x;
}

template <class T>
Dual<T> operator+(const Dual<T>& x, double s) {
    return {x.a + s, x.b};
}
template <class T>
Dual<T> operator+(double s, const Dual<T>& x) {
    return {s + x.a, x.b};
}
template <class T>
Dual<T> operator-(const Dual<T>& x, double s) {
    return {x.a - s, x.b};
}
template <class T>
Dual<T> operator-(double s, const Dual<T>& x) {
    return {s - x.a, -x.b};
}
template <class T>
Dual<T> operator*(const Dual<T>& x, double s) {
    return {x.a * s, x.b * s};
}
template <class T>
Dual<T> operator*(double s, const Dual<T>& x) {
    return {s * x.a, s * x.b};
}
template <class T>
Dual<T> operator/(const Dual<T>& x, double s) {
    return {x.a / s, x.b / s};
}
template <class T>
Dual<T> operator/(double s, const Dual<T>& x) {
    T q = s / x.a;
    return {q, -(q / x.a) * x.b};
}

// elementary functions --------------------------------------------------

using std::cos;
using std::exp;
using std::log;
using std::pow;
using std::sin;
using std::sqrt;

template <class T>
Dual<T> sin(const Dual<T>& x) {
    return {sin(x.a), cos(x.a) * x.b};
}
template <class T>
Dual<T> cos(const Dual<T>& x) {
    return {cos(x.a), T(0.0) - sin(x.a) * x.b};
}
template <class T>
Dual<T> exp(const Dual<T>& x) {
    T e = exp(x.a);
    return {e, e * x.b};
}
template <class T>
Dual<T> log(const Dual<T>& x) {
    return {log(x.a), x.b / x.a};
}
template <class T>
Dual<T> sqrt(const Dual<T>& x) {
    T r = sqrt(x.a);
    return {r, x.b / (2.0 * r)};
}
template <class T>
Dual<T> pow(const Dual<T>& x, double p) {
    T pm1 = pow(x.a, p - 1.0);
    return {pm1 * x.a, p * pm1 * x.b};
}

template <class T>
T sq(const T& x) {
    return x * x;
}

}  // namespace kk
