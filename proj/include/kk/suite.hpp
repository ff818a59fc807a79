#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "kk/field.hpp"

namespace kk {

struct IdentityResult {
    std::string name;     // stable identity id, also used as report anchor
    double residual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct SuiteReport {
    std::string suite;
    std::vector<IdentityResult> rows;
    bool pass = true;

    void add(const std::string& name, double residual, double tolerance) {
        bool ok = residual <= tolerance;
        rows.push_back({name, residual, tolerance, ok});
        pass = pass && ok;
    }
    double max_residual() const {
        double worst = 0.0;
        for (const auto& r : rows) worst = std::max(worst, r.residual);
        return worst;
    }
};

// Midpoint tensor grid over the first lo.size() coordinates; remaining
// coordinates are pinned to `fixed`. Deterministic by construction.
struct GridSpec {
    std::vector<double> lo, hi;   // gridded dims
    std::vector<double> fixed;    // trailing fixed coordinates
    int n = 16;                   // points per gridded dim
};

inline std::vector<Point> make_grid(const GridSpec& spec, int n_override = 0) {
    const int n = n_override > 0 ? n_override : spec.n;
    const int gdims = static_cast<int>(spec.lo.size());
    std::vector<Point> points;
    std::vector<int> idx(gdims, 0);
    const int total = static_cast<int>(std::pow(n, gdims));
    points.reserve(static_cast<size_t>(total));
    for (int flat = 0; flat < total; ++flat) {
        int rest = flat;
        std::vector<double> c;
        c.reserve(spec.lo.size() + spec.fixed.size());
        for (int d = 0; d < gdims; ++d) {
            int i = rest % n;
            rest /= n;
            c.push_back(spec.lo[d] + (i + 0.5) * (spec.hi[d] - spec.lo[d]) / n);
        }
        for (double f : spec.fixed) c.push_back(f);
        points.push_back(Point(c));
    }
    return points;
}

inline Point truncate_point(const Point& p, int m) {
    return Point(std::vector<double>(p.coords().begin(), p.coords().begin() + m));
}

// max abs-component residual over a grid; F: Point -> vector<double>
template <class F>
double max_residual(std::span<const Point> grid, F&& defect) {
    double worst = 0.0;
    for (const Point& p : grid) {
        auto v = defect(p);
        for (double c : v) worst = std::max(worst, std::abs(c));
    }
    return worst;
}

template <class F>
double max_residual_scalar(std::span<const Point> grid, F&& defect) {
    double worst = 0.0;
    for (const Point& p : grid) worst = std::max(worst, std::abs(defect(p)));
    return worst;
}

inline double max_field_residual(const detail::VecFieldBase& f, std::span<const Point> grid) {
    double worst = 0.0;
    for (const Point& p : grid) {
        std::vector<double> v = f.eval<double>(p.coords());
        for (double c : v) worst = std::max(worst, std::abs(c));
    }
    return worst;
}

inline double max_field_residual(const detail::MatFieldBase& f, std::span<const Point> grid) {
    double worst = 0.0;
    for (const Point& p : grid) {
        Mat<double> m = f.eval<double>(p.coords());
        for (double c : m.d) worst = std::max(worst, std::abs(c));
    }
    return worst;
}

}  // namespace kk
