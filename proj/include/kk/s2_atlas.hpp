#pragma once

#include <cmath>
#include <numbers>
#include <utility>

#include "kk/calculus.hpp"
#include "kk/circle_bundle.hpp"
#include "kk/suite.hpp"

namespace kk {

// Two stereographic charts on the round sphere of radius R. Both charts
// carry the same component formulas; the transition is the involution
// (x, y) ↦ R² (x, −y) / ρ², which is orientation-preserving on the sphere.
class S2Atlas {
public:
    explicit S2Atlas(double radius) : radius_(radius) {}

    double radius() const { return radius_; }

    // g = 4R⁴ / (R² + ρ²)² δ_ij
    MetricField metric() const {
        double R2 = radius_ * radius_;
        return MetricField(2, max_jet_level, Signature{0, 2}, [R2](auto x) {
            using T = detail::scalar_of<decltype(x)>;
            T rho2 = sq(x[0]) + sq(x[1]);
            T lam = 4.0 * R2 * R2 / sq(R2 + rho2);
            Mat<T> out(2, 2);
            out(0, 0) = lam;
            out(1, 1) = lam;
            return out;
        });
    }

    // a = k (x dy − y dx) / (R² + ρ²); then da = 2kR²/(R²+ρ²)² dx∧dy and
    // the total integral over the sphere is 2πk.
    OneForm monopole(double charge) const {
        double R2 = radius_ * radius_;
        return OneForm(2, max_jet_level, [R2, charge](auto x) {
            using T = detail::scalar_of<decltype(x)>;
            T den = R2 + sq(x[0]) + sq(x[1]);
            std::vector<T> out(2);
            out[0] = (0.0 - charge) * x[1] / den;
            out[1] = charge * x[0] / den;
            return out;
        });
    }

    // globally exact potential a = d(height); integral zero
    std::pair<OneForm, OneForm> exact_potential() const {
        double R = radius_;
        auto make = [R](double sign) {
            return OneForm(2, max_jet_level, [R, sign](auto x) {
                using T = detail::scalar_of<decltype(x)>;
                // d of sign·R(ρ² − R²)/(ρ² + R²)
                T den = sq(x[0]) + sq(x[1]) + R * R;
                T coef = sign * 4.0 * R * R * R / sq(den);
                std::vector<T> out(2);
                out[0] = coef * x[0];
                out[1] = coef * x[1];
                return out;
            });
        };
        return {make(1.0), make(-1.0)};
    }

    // transition between the charts (an involution)
    VectorField transition_map() const {
        double R2 = radius_ * radius_;
        return VectorField(2, max_jet_level, [R2](auto x) {
            using T = detail::scalar_of<decltype(x)>;
            T rho2 = sq(x[0]) + sq(x[1]);
            std::vector<T> out(2);
            out[0] = R2 * x[0] / rho2;
            out[1] = (0.0 - R2) * x[1] / rho2;
            return out;
        });
    }

    // half-width of the square integration window per chart
    double window() const { return 2.0 * radius_; }

private:
    double radius_ = 1.0;
};

namespace detail {

inline double bump(double t) { return t > 0.0 ? std::exp(-1.0 / t) : 0.0; }

// radial cutoff: 1 for ρ ≤ R/2, 0 for ρ ≥ 2R, with χ(ρ) + χ(R²/ρ) = 1
inline double atlas_cutoff(double rho, double R) {
    if (rho <= 0.5 * R) return 1.0;
    if (rho >= 2.0 * R) return 0.0;
    double u = std::log(rho / R) / std::log(2.0);  // in (−1, 1)
    double t = 0.5 * (u + 1.0);
    double f1 = bump(t), f2 = bump(1.0 - t);
    return f2 / (f1 + f2);
}

}  // namespace detail

struct IntegralityResult {
    double value = 0.0;  // (1/2π) ∫ da over the closed surface
    double nearest_integer = 0.0;
    double deviation = 0.0;
    bool integral = false;
    double quadrature_error = 0.0;
};

// (1/2π) ∫ da over the sphere, by quadrature over both charts against the
// smooth partition of unity. Flags the class integral iff the result is
// within `tol` of an integer.
inline IntegralityResult integrality_check(const S2Atlas& atlas, const OneForm& a_north,
                                           const OneForm& a_south, double tol = 1e-4) {
    const double R = atlas.radius();
    const double W = atlas.window();
    TwoForm da_n = curvature_form(a_north);
    TwoForm da_s = curvature_form(a_south);

    auto chart_integral = [&](const TwoForm& da, int n) {
        std::vector<double> nodes, weights;
        gauss_legendre(n, nodes, weights);
        double acc = 0.0;
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) {
                double x = W * nodes[static_cast<size_t>(i)];
                double y = W * nodes[static_cast<size_t>(j)];
                double rho = std::hypot(x, y);
                double chi = detail::atlas_cutoff(rho, R);
                if (chi == 0.0) continue;
                std::vector<double> c = {x, y};
                Mat<double> m = da.eval<double>(std::span<const double>(c));
                acc += weights[static_cast<size_t>(i)] * weights[static_cast<size_t>(j)] *
                       chi * m(0, 1) * W * W;
            }
        return acc;
    };

    double prev = 0.0;
    bool have_prev = false;
    IntegralityResult res;
    for (int n : {32, 48, 64, 96, 128}) {
        double total = chart_integral(da_n, n) + chart_integral(da_s, n);
        double value = total / (2.0 * std::numbers::pi);
        if (have_prev && std::abs(value - prev) < 1e-6 * std::max(1.0, std::abs(value))) {
            res.value = value;
            res.quadrature_error = std::abs(value - prev);
            res.nearest_integer = std::round(value);
            res.deviation = std::abs(value - res.nearest_integer);
            res.integral = res.deviation <= tol;
            return res;
        }
        prev = value;
        have_prev = true;
    }
    throw ConvergenceError("integrality quadrature did not converge", std::abs(prev));
}

// Validates the two-chart atlas: the metric transforms as a pullback under
// the transition, the monopole potentials differ by a closed gauge term,
// and that gauge term is the expected integer multiple of the angular form.
inline SuiteReport s2_transition_check(const S2Atlas& atlas, double charge = 1.0,
                                       double tol = 1e-9) {
    SuiteReport rep{"transition", {}, true};
    const double R = atlas.radius();
    MetricField g = atlas.metric();
    OneForm a = atlas.monopole(charge);
    VectorField T = atlas.transition_map();

    // annulus sample points around |ρ| = R
    std::vector<Point> pts;
    for (int i = 0; i < 16; ++i) {
        double ang = (i + 0.5) * std::numbers::pi / 8.0;
        for (double rho : {0.72 * R, R, 1.31 * R})
            pts.push_back(Point{rho * std::cos(ang), rho * std::sin(ang)});
    }

    double worst_metric = 0.0, worst_gauge_closed = 0.0, worst_gauge_term = 0.0;

    // pullback of the north potential through the transition
    OneForm a_pulled(2, a.max_order() - 1, [a, T](auto x) {
        using Tj = detail::scalar_of<decltype(x)>;
        using Rv = std::vector<Tj>;
        if constexpr (jet_level_v<Tj> >= max_jet_level) {
            throw OrderError("transition pullback: jet depth exhausted");
            return Rv{};
        } else {
            JetVec<Tj> jt = value_and_jac(T, x);
            std::vector<Tj> av = a.eval(std::span<const Tj>(jt.v));
            Rv out(2);
            for (int i = 0; i < 2; ++i) {
                Tj acc{};
                for (int j = 0; j < 2; ++j) acc = acc + av[j] * jt.d(j, i);
                out[i] = acc;
            }
            return out;
        }
    });

    for (const Point& p : pts) {
        std::span<const double> x = p.coords();
        JetVec<double> jt = value_and_jac(T, x);
        Mat<double> g_here = g.eval<double>(x);
        std::vector<double> image = jt.v;
        Mat<double> g_image = g.eval<double>(std::span<const double>(image));
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                double acc = 0.0;
                for (int k = 0; k < 2; ++k)
                    for (int l = 0; l < 2; ++l)
                        acc += jt.d(k, i) * g_image(k, l) * jt.d(l, j);
                worst_metric = std::max(worst_metric, std::abs(acc - g_here(i, j)));
            }

        // gauge term: T*a − a = −charge · (x dy − y dx)/ρ²
        std::vector<double> ap = a_pulled.eval<double>(x);
        std::vector<double> av = a.eval<double>(x);
        double rho2 = p[0] * p[0] + p[1] * p[1];
        double dphi0 = -p[1] / rho2, dphi1 = p[0] / rho2;
        worst_gauge_term =
            std::max(worst_gauge_term, std::abs(ap[0] - av[0] + charge * dphi0));
        worst_gauge_term =
            std::max(worst_gauge_term, std::abs(ap[1] - av[1] + charge * dphi1));
    }

    // d(T*a − a) = 0 on the annulus
    OneForm diff(2, a_pulled.max_order(), [a_pulled, a](auto x) {
        using Tj = detail::scalar_of<decltype(x)>;
        std::vector<Tj> u = a_pulled.eval(x);
        std::vector<Tj> w = a.eval(x);
        for (size_t i = 0; i < u.size(); ++i) u[i] = u[i] - w[i];
        return u;
    });
    TwoForm ddiff = exterior_derivative(diff);
    for (const Point& p : pts) {
        Mat<double> m = ddiff.eval<double>(p.coords());
        for (double c : m.d) worst_gauge_closed = std::max(worst_gauge_closed, std::abs(c));
    }

    rep.add("transition/metric-pullback", worst_metric, tol);
    rep.add("transition/gauge-closed", worst_gauge_closed, tol);
    rep.add("transition/gauge-angular-form", worst_gauge_term, tol);

    IntegralityResult integ = integrality_check(atlas, a, a, 1e-4);
    rep.add("transition/integrality",
            std::abs(integ.value - charge), 1e-4);
    return rep;
}

}  // namespace kk
