#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "kk/calculus.hpp"
#include "kk/levi_civita.hpp"
#include "kk/suite.hpp"

namespace kk {

// Local model of a principal circle bundle over an m-dimensional chart:
// coordinates (x^0..x^{m-1}, θ) with θ the fiber angle. The connection is
// kept as its real potential a, a 1-form on the base; the fiber component
// of the connection form is the constant 1 in front of dθ.
struct BundleChart {
    int base_dim = 0;
    OneForm potential;  // arity base_dim

    int total_dim() const { return base_dim + 1; }
    int fiber_index() const { return base_dim; }
};

// X̄ = X − a(X) ∂_θ, the unique lift with vanishing connection form that
// projects onto X.
inline VectorField horizontal_lift(const BundleChart& bc, const VectorField& X) {
    const int m = bc.base_dim;
    OneForm a = bc.potential;
    return VectorField(m + 1, std::min(X.max_order(), a.max_order()), [a, X, m](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        auto base = x.first(static_cast<size_t>(m));
        std::vector<T> xv = X.eval(base);
        std::vector<T> av = a.eval(base);
        T aX{};
        for (int i = 0; i < m; ++i) aX = aX + av[i] * xv[i];
        std::vector<T> out(m + 1);
        for (int i = 0; i < m; ++i) out[i] = xv[i];
        out[m] = T(0.0) - aX;
        return out;
    });
}

inline VectorField fundamental_field(const BundleChart& bc) {
    return VectorField::coordinate(bc.total_dim(), bc.fiber_index());
}

// (dθ + a) as a 1-form on the total space; pairing the connection form
// against a field amounts to pairing this.
inline OneForm connection_form(const BundleChart& bc) {
    const int m = bc.base_dim;
    OneForm a = bc.potential;
    return OneForm(m + 1, a.max_order(), [a, m](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        std::vector<T> av = a.eval(x.first(static_cast<size_t>(m)));
        std::vector<T> out(m + 1);
        for (int i = 0; i < m; ++i) out[i] = av[i];
        out[m] = T(1.0);
        return out;
    });
}

// curvature 2-form of the connection in its real representation: da
inline TwoForm curvature_form(const OneForm& a) { return exterior_derivative(a); }

// g̃ = π*g − σ (dθ+a)⊗(dθ+a); the fiber direction has squared length −σ.
inline MetricField kk_metric(const MetricField& g, const OneForm& a, int sigma) {
    const int m = g.rows();
    Signature sig = g.signature();
    if (sigma > 0)
        sig.neg += 1;
    else
        sig.pos += 1;
    double s = sigma;
    return MetricField(m + 1, std::min(g.max_order(), a.max_order()), sig,
                       [g, a, s, m](auto x) {
                           using T = detail::scalar_of<decltype(x)>;
                           auto base = x.first(static_cast<size_t>(m));
                           Mat<T> gb = g.eval(base);
                           std::vector<T> av = a.eval(base);
                           Mat<T> out(m + 1, m + 1);
                           for (int i = 0; i < m; ++i)
                               for (int j = 0; j < m; ++j)
                                   out(i, j) = gb(i, j) - s * av[i] * av[j];
                           for (int i = 0; i < m; ++i) {
                               out(i, m) = T(0.0) - s * av[i];
                               out(m, i) = out(i, m);
                           }
                           out(m, m) = T(-s);
                           return out;
                       });
}

// φ with g(φX, Y) = −(σ/2) da(X, Y); in components φ^i_j = −(σ/2) g^{ik} da_{jk}.
inline EndomorphismField phi_from_potential(const MetricField& g, const OneForm& a,
                                            int sigma) {
    const int m = g.rows();
    TwoForm da = curvature_form(a);
    double s = sigma;
    return EndomorphismField(m, da.max_order(), [g, da, s, m](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        Mat<T> gv = g.eval(x);
        Mat<T> dav = da.eval(x);
        Mat<T> ginv = inverse(gv);
        Mat<T> out(m, m);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < m; ++j) {
                T acc{};
                for (int k = 0; k < m; ++k) acc = acc + ginv(i, k) * dav(j, k);
                out(i, j) = (-0.5 * s) * acc;
            }
        return out;
    });
}

// Pull a base scalar field up to the total space.
inline ScalarField pullback_scalar(const ScalarField& f, int total_dim) {
    const int m = f.arity();
    return ScalarField(total_dim, f.max_order(), [f, m](auto x) {
        return f.eval(x.first(static_cast<size_t>(m)));
    });
}

// one fully assembled circle-bundle stage
struct KKStage {
    BundleChart chart;
    MetricField base_g;   // arity m
    int sigma = 1;
    MetricField total_g;  // arity m+1
    LeviCivita base_conn;
    LeviCivita total_conn;
    EndomorphismField phi;  // on base

    static KKStage assemble(MetricField g, OneForm a, int sigma) {
        KKStage st;
        st.chart = BundleChart{g.rows(), a};
        st.base_g = g;
        st.sigma = sigma;
        st.total_g = kk_metric(g, a, sigma);
        st.base_conn = LeviCivita(g);
        st.total_conn = LeviCivita(st.total_g);
        st.phi = phi_from_potential(g, a, sigma);
        return st;
    }
};

// bracket identities: [X̄, v] = 0 and [X̄, Ȳ] = [X,Y]‾ − da(X,Y) v
inline SuiteReport verify_bracket_identities(const KKStage& st, std::span<const Point> grid,
                                             double tol = 1e-9) {
    SuiteReport rep{"brackets", {}, true};
    const int m = st.chart.base_dim;
    VectorField v = fundamental_field(st.chart);
    TwoForm da = curvature_form(st.chart.potential);

    double worst_v = 0.0, worst_lift = 0.0;
    for (int i = 0; i < m; ++i) {
        VectorField Xi = VectorField::coordinate(m, i);
        VectorField Xl = horizontal_lift(st.chart, Xi);
        worst_v = std::max(worst_v, max_field_residual(lie_bracket(Xl, v), grid));
        for (int j = 0; j < m; ++j) {
            if (i == j) continue;
            VectorField Yj = VectorField::coordinate(m, j);
            VectorField Yl = horizontal_lift(st.chart, Yj);
            VectorField lhs = lie_bracket(Xl, Yl);
            VectorField bracket_lift =
                horizontal_lift(st.chart, lie_bracket(Xi, Yj));
            ScalarField daXY =
                pullback_scalar(form_pair(da, Xi, Yj), st.chart.total_dim());
            VectorField defect = lhs - bracket_lift + daXY * v;
            worst_lift = std::max(worst_lift, max_field_residual(defect, grid));
        }
    }
    rep.add("brackets/lift-vertical-commute", worst_v, tol);
    rep.add("brackets/lift-bracket-curvature", worst_lift, tol);
    return rep;
}

// Derivative table of the Kaluza-Klein metric:
//   D_v v = 0,   D_v X̄ = D_{X̄} v = (φX)̄,
//   D_{X̄} Ȳ = (∇_X Y)̄ − ½ da(X,Y) v
// plus the fundamental-field facts g̃(v,v) = −σ and L_v g̃ = 0, and the
// transverse-connection table D^D_v Ȳ = 0, D^D_{X̄} Ȳ = (∇_X Y)̄.
inline SuiteReport verify_kk_derivative_table(const KKStage& st, std::span<const Point> grid,
                                              double tol = 1e-8, double tol_lemma = 1e-10) {
    SuiteReport rep{"kk-table", {}, true};
    const int m = st.chart.base_dim;
    VectorField v = fundamental_field(st.chart);
    TwoForm da = curvature_form(st.chart.potential);

    std::vector<VectorField> base_frame, lifted_frame;
    for (int i = 0; i < m; ++i) {
        base_frame.push_back(VectorField::coordinate(m, i));
        lifted_frame.push_back(horizontal_lift(st.chart, base_frame.back()));
    }

    double worst_dvv = max_field_residual(covariant_derivative(st.total_conn, v, v), grid);
    rep.add("kk-table/D_v_v", worst_dvv, tol);

    double worst_dvx = 0.0;
    for (int i = 0; i < m; ++i) {
        VectorField phiX =
            horizontal_lift(st.chart, apply(st.phi, base_frame[static_cast<size_t>(i)]));
        VectorField d1 =
            covariant_derivative(st.total_conn, v, lifted_frame[static_cast<size_t>(i)]) -
            phiX;
        VectorField d2 =
            covariant_derivative(st.total_conn, lifted_frame[static_cast<size_t>(i)], v) -
            phiX;
        worst_dvx = std::max(worst_dvx, max_field_residual(d1, grid));
        worst_dvx = std::max(worst_dvx, max_field_residual(d2, grid));
    }
    rep.add("kk-table/D_v_lift", worst_dvx, tol);

    double worst_dxy = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) {
            VectorField rhs = horizontal_lift(
                st.chart, covariant_derivative(st.base_conn, base_frame[static_cast<size_t>(i)],
                                               base_frame[static_cast<size_t>(j)]));
            ScalarField daXY = pullback_scalar(
                form_pair(da, base_frame[static_cast<size_t>(i)],
                          base_frame[static_cast<size_t>(j)]),
                st.chart.total_dim());
            VectorField defect =
                covariant_derivative(st.total_conn, lifted_frame[static_cast<size_t>(i)],
                                     lifted_frame[static_cast<size_t>(j)]) -
                rhs + 0.5 * (daXY * v);
            worst_dxy = std::max(worst_dxy, max_field_residual(defect, grid));
        }
    rep.add("kk-table/D_lift_lift", worst_dxy, tol);

    double worst_vv = 0.0;
    for (const Point& p : grid) {
        Mat<double> gm = st.total_g.at(p);
        std::vector<double> vv = v.at(p);
        double val = 0.0;
        for (int i = 0; i <= m; ++i)
            for (int j = 0; j <= m; ++j) val += gm(i, j) * vv[i] * vv[j];
        worst_vv = std::max(worst_vv, std::abs(val + st.sigma));
    }
    rep.add("kk-table/fiber-norm", worst_vv, tol_lemma);

    double worst_killing = 0.0;
    for (const Point& p : grid) {
        Mat<double> lie = lie_derivative_cov2_at(st.total_g, v, p);
        for (double c : lie.d) worst_killing = std::max(worst_killing, std::abs(c));
    }
    rep.add("kk-table/fiber-killing", worst_killing, tol_lemma);

    // transverse table on the total space with respect to v
    TransverseConnection tc(st.total_conn, v, -st.sigma);
    double worst_tv = 0.0, worst_tx = 0.0;
    for (int j = 0; j < m; ++j) {
        VectorField Yl = lifted_frame[static_cast<size_t>(j)];
        worst_tv = std::max(worst_tv, max_field_residual(tc.derivative(v, Yl), grid));
        for (int i = 0; i < m; ++i) {
            VectorField rhs = horizontal_lift(
                st.chart, covariant_derivative(st.base_conn, base_frame[static_cast<size_t>(i)],
                                               base_frame[static_cast<size_t>(j)]));
            VectorField defect =
                tc.derivative(lifted_frame[static_cast<size_t>(i)], Yl) - rhs;
            worst_tx = std::max(worst_tx, max_field_residual(defect, grid));
        }
    }
    rep.add("kk-table/transverse-fiber", worst_tv, tol);
    rep.add("kk-table/transverse-lift", worst_tx, tol);

    return rep;
}

// link between the covariant derivatives of the curvature form and of φ:
// −(σ/2) (∇_X da)(Y, Z) = g((∇_X φ)Y, Z)
inline SuiteReport verify_phi_curvature_link(const KKStage& st, std::span<const Point> grid,
                                             double tol = 1e-8) {
    SuiteReport rep{"phi-link", {}, true};
    const int m = st.chart.base_dim;
    TwoForm da = curvature_form(st.chart.potential);
    double worst = 0.0;
    for (const Point& p : grid) {
        Mat<double> gv = st.base_g.at(p);
        for (int i = 0; i < m; ++i) {
            std::vector<double> xv(m, 0.0);
            xv[static_cast<size_t>(i)] = 1.0;
            Mat<double> nabla_da =
                covariant_derivative_cov2_at(st.base_conn, da, xv, p.coords());
            EndomorphismField nabla_phi = covariant_derivative_endo(
                st.base_conn, st.phi, VectorField::coordinate(m, i));
            Mat<double> np = nabla_phi.at(p);
            for (int j = 0; j < m; ++j)
                for (int k = 0; k < m; ++k) {
                    double lhs = -0.5 * st.sigma * nabla_da(j, k);
                    double rhs = 0.0;
                    for (int l = 0; l < m; ++l) rhs += gv(l, k) * np(l, j);
                    worst = std::max(worst, std::abs(lhs - rhs));
                }
        }
    }
    rep.add("phi-link/nabla-curvature-vs-nabla-phi", worst, tol);
    return rep;
}

// quadrature -------------------------------------------------------------

// Gauss-Legendre nodes and weights on [-1, 1] via Newton iteration.
inline void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
    nodes.resize(static_cast<size_t>(n));
    weights.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
        double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            double dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-15) break;
        }
        double p0 = 1.0, p1 = x;
        for (int k = 2; k <= n; ++k) {
            double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
            p0 = p1;
            p1 = p2;
        }
        double dp = n * (x * p1 - p0) / (x * x - 1.0);
        nodes[static_cast<size_t>(i)] = x;
        weights[static_cast<size_t>(i)] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
}

}  // namespace kk
