#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "kk/dual.hpp"
#include "kk/smallmat.hpp"

namespace kk {

// A point of one chart; coordinates are chart-local and dimensionless.
class Point {
public:
    Point() = default;
    explicit Point(std::vector<double> coords) : x_(std::move(coords)) {
        for (size_t i = 0; i < x_.size(); ++i)
            if (!std::isfinite(x_[i]))
                throw NonFiniteError("non-finite coordinate " + std::to_string(i) +
                                     " in Point");
    }
    Point(std::initializer_list<double> coords) : Point(std::vector<double>(coords)) {}

    int dim() const { return static_cast<int>(x_.size()); }
    double operator[](int i) const { return x_[static_cast<size_t>(i)]; }
    std::span<const double> coords() const { return x_; }

    bool operator==(const Point&) const = default;

private:
    std::vector<double> x_;
};

namespace detail {

template <class Span>
using scalar_of = typename std::remove_cvref_t<Span>::value_type;

template <class T>
void check_level(int max_order, const char* what) {
    if (jet_level_v<T> > max_order)
        throw OrderError(std::string(what) + ": derivative order " +
                         std::to_string(jet_level_v<T>) + " exceeds supported order " +
                         std::to_string(max_order));
}

// Type-erased evaluation at every jet level 0..3. The kernel passed to the
// constructor must be a generic callable span<const T> -> V<T>; levels it
// cannot serve must throw OrderError from a discarded-branch guard.
template <template <class> class V>
class FieldCore {
public:
    FieldCore() = default;

    template <class K>
    FieldCore(int arity, int max_order, K kernel)
        : arity_(arity), max_order_(max_order), f0_(kernel), f1_(kernel), f2_(kernel), f3_(kernel) {}

    int arity() const { return arity_; }
    int max_order() const { return max_order_; }

    template <class T>
    V<T> eval(std::span<const T> x) const {
        if (static_cast<int>(x.size()) != arity_)
            throw DimensionError("field of arity " + std::to_string(arity_) +
                                 " evaluated on " + std::to_string(x.size()) +
                                 " coordinates");
        constexpr int L = jet_level_v<T>;
        check_level<T>(max_order_, "field evaluation");
        if constexpr (L == 0)
            return f0_(x);
        else if constexpr (L == 1)
            return f1_(x);
        else if constexpr (L == 2)
            return f2_(x);
        else if constexpr (L == 3)
            return f3_(x);
        else
            throw OrderError("jet level beyond supported depth");
    }

private:
    int arity_ = 0;
    int max_order_ = 0;
    std::function<V<D0>(std::span<const D0>)> f0_;
    std::function<V<D1>(std::span<const D1>)> f1_;
    std::function<V<D2>(std::span<const D2>)> f2_;
    std::function<V<D3>(std::span<const D3>)> f3_;
};

template <class T>
using ScalarV = T;
template <class T>
using VecV = std::vector<T>;
template <class T>
using MatV = Mat<T>;

}  // namespace detail

// Lift coordinates to the next jet level, seeding direction `dir`.
template <class T>
std::vector<Dual<T>> lifted(std::span<const T> x, int dir) {
    std::vector<Dual<T>> y(x.size());
    for (size_t i = 0; i < x.size(); ++i) {
        y[i].a = x[i];
        y[i].b = T(static_cast<int>(i) == dir ? 1.0 : 0.0);
    }
    return y;
}

class ScalarField {
public:
    ScalarField() = default;
    template <class K>
    ScalarField(int arity, int max_order, K kernel)
        : core_(std::make_shared<detail::FieldCore<detail::ScalarV>>(arity, max_order,
                                                                     std::move(kernel))) {}

    int arity() const { return core_->arity(); }
    int max_order() const { return core_->max_order(); }

    template <class T>
    T eval(std::span<const T> x) const {
        return core_->eval(x);
    }

    double operator()(const Point& p) const {
        double v = eval<double>(p.coords());
        if (!std::isfinite(v)) throw NonFiniteError("scalar field non-finite at point");
        return v;
    }

private:
    std::shared_ptr<const detail::FieldCore<detail::ScalarV>> core_;
};

namespace detail {

// shared plumbing for vector-valued component families
class VecFieldBase {
public:
    VecFieldBase() = default;
    template <class K>
    VecFieldBase(int arity, int max_order, int size, K kernel)
        : size_(size),
          core_(std::make_shared<FieldCore<VecV>>(arity, max_order, std::move(kernel))) {}

    int arity() const { return core_->arity(); }
    int max_order() const { return core_->max_order(); }
    int size() const { return size_; }

    template <class T>
    std::vector<T> eval(std::span<const T> x) const {
        return core_->eval(x);
    }

    std::vector<double> at(const Point& p) const {
        std::vector<double> v = eval<double>(p.coords());
        for (size_t i = 0; i < v.size(); ++i)
            if (!std::isfinite(v[i]))
                throw NonFiniteError("component " + std::to_string(i) +
                                     " non-finite at point");
        return v;
    }

private:
    int size_ = 0;
    std::shared_ptr<const FieldCore<VecV>> core_;
};

class MatFieldBase {
public:
    MatFieldBase() = default;
    template <class K>
    MatFieldBase(int arity, int max_order, int rows, int cols, K kernel)
        : rows_(rows), cols_(cols),
          core_(std::make_shared<FieldCore<MatV>>(arity, max_order, std::move(kernel))) {}

    int arity() const { return core_->arity(); }
    int max_order() const { return core_->max_order(); }
    int rows() const { return rows_; }
    int cols() const { return cols_; }

    template <class T>
    Mat<T> eval(std::span<const T> x) const {
        return core_->eval(x);
    }

    Mat<double> at(const Point& p) const {
        Mat<double> m = eval<double>(p.coords());
        for (size_t i = 0; i < m.d.size(); ++i)
            if (!std::isfinite(m.d[i]))
                throw NonFiniteError("component " + std::to_string(i) +
                                     " non-finite at point");
        return m;
    }

private:
    int rows_ = 0, cols_ = 0;
    std::shared_ptr<const FieldCore<MatV>> core_;
};

}  // namespace detail

class VectorField : public detail::VecFieldBase {
public:
    VectorField() = default;
    template <class K>
    VectorField(int arity, int max_order, K kernel)
        : VecFieldBase(arity, max_order, arity, std::move(kernel)) {}

    static VectorField from_components(std::vector<ScalarField> comps);
    static VectorField coordinate(int arity, int dir);
    static VectorField zero(int arity);
};

class OneForm : public detail::VecFieldBase {
public:
    OneForm() = default;
    template <class K>
    OneForm(int arity, int max_order, K kernel)
        : VecFieldBase(arity, max_order, arity, std::move(kernel)) {}

    static OneForm from_components(std::vector<ScalarField> comps);
    static OneForm zero(int arity);
};

class TwoForm : public detail::MatFieldBase {
public:
    TwoForm() = default;
    template <class K>
    TwoForm(int arity, int max_order, K kernel)
        : MatFieldBase(arity, max_order, arity, arity, std::move(kernel)) {}
};

class EndomorphismField : public detail::MatFieldBase {
public:
    EndomorphismField() = default;
    template <class K>
    EndomorphismField(int arity, int max_order, K kernel)
        : MatFieldBase(arity, max_order, arity, arity, std::move(kernel)) {}

    static EndomorphismField zero(int arity);
};

struct Signature {
    int neg = 0;  // count of negative directions
    int pos = 0;  // count of positive directions
    bool operator==(const Signature&) const = default;
};

class MetricField : public detail::MatFieldBase {
public:
    MetricField() = default;
    template <class K>
    MetricField(int arity, int max_order, Signature sig, K kernel)
        : MatFieldBase(arity, max_order, arity, arity, std::move(kernel)), sig_(sig) {}

    Signature signature() const { return sig_; }

private:
    Signature sig_;
};

inline VectorField VectorField::from_components(std::vector<ScalarField> comps) {
    const int arity = comps[0].arity();
    int order = comps[0].max_order();
    for (const auto& c : comps) order = std::min(order, c.max_order());
    return VectorField(arity, order, [comps](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        std::vector<T> out(comps.size());
        for (size_t i = 0; i < comps.size(); ++i) out[i] = comps[i].eval(x);
        return out;
    });
}

inline VectorField VectorField::coordinate(int arity, int dir) {
    return VectorField(arity, max_jet_level, [arity, dir](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        (void)x;
        std::vector<T> out(arity, T(0.0));
        out[dir] = T(1.0);
        return out;
    });
}

inline VectorField VectorField::zero(int arity) {
    return VectorField(arity, max_jet_level, [arity](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        (void)x;
        return std::vector<T>(arity, T(0.0));
    });
}

inline OneForm OneForm::from_components(std::vector<ScalarField> comps) {
    const int arity = comps[0].arity();
    int order = comps[0].max_order();
    for (const auto& c : comps) order = std::min(order, c.max_order());
    return OneForm(arity, order, [comps](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        std::vector<T> out(comps.size());
        for (size_t i = 0; i < comps.size(); ++i) out[i] = comps[i].eval(x);
        return out;
    });
}

inline OneForm OneForm::zero(int arity) {
    return OneForm(arity, max_jet_level, [arity](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        (void)x;
        return std::vector<T>(arity, T(0.0));
    });
}

inline EndomorphismField EndomorphismField::zero(int arity) {
    return EndomorphismField(arity, max_jet_level, [arity](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        (void)x;
        return Mat<T>(arity, arity);
    });
}

// convenience scalar fields
inline ScalarField coordinate_field(int arity, int dir) {
    return ScalarField(arity, max_jet_level,
                       [dir](auto x) { return x[static_cast<size_t>(dir)]; });
}

inline ScalarField constant_field(int arity, double c) {
    return ScalarField(arity, max_jet_level, [c](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        (void)x;
        return T(c);
    });
}

}  // namespace kk
