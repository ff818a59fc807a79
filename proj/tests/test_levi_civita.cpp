#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kk/catalog.hpp"
#include "kk/levi_civita.hpp"

using namespace kk;

namespace {

// closed-form symbols of a conformal metric g = λ δ in two dimensions:
// Γ^k_{ij} = ½ (δ_{ki} ∂_j μ + δ_{kj} ∂_i μ − δ_{ij} ∂_k μ), μ = ln λ
Ten3<double> conformal_symbols(const ScalarField& mu, const Point& p) {
    Ten3<double> out(2, 2, 2);
    std::array<double, 2> dmu = {partial(mu, p, {0}), partial(mu, p, {1})};
    for (int k = 0; k < 2; ++k)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
                double acc = 0.0;
                if (k == i) acc += dmu[static_cast<size_t>(j)];
                if (k == j) acc += dmu[static_cast<size_t>(i)];
                if (i == j) acc -= dmu[static_cast<size_t>(k)];
                out(k, i, j) = 0.5 * acc;
            }
    return out;
}

double riemannian_area(const MetricField& g, const Point& o, int i, int j, double h) {
    std::vector<double> nodes, weights;
    gauss_legendre(8, nodes, weights);
    double acc = 0.0;
    for (size_t a = 0; a < nodes.size(); ++a)
        for (size_t b = 0; b < nodes.size(); ++b) {
            std::vector<double> c(o.coords().begin(), o.coords().end());
            c[static_cast<size_t>(i)] += 0.5 * h * (nodes[a] + 1.0);
            c[static_cast<size_t>(j)] += 0.5 * h * (nodes[b] + 1.0);
            Mat<double> gv = g.at(Point(c));
            double det = gv(0, 0) * gv(1, 1) - gv(0, 1) * gv(1, 0);
            acc += weights[a] * weights[b] * std::sqrt(det) * 0.25 * h * h;
        }
    return acc;
}

}  // namespace

TEST_CASE("christoffel symbols vanish in flat coordinates") {
    std::vector<Point> pts = {Point{0.3, 1.2}, Point{-0.5, 2.0}};
    for (const MetricField& g : {flat_metric(2), minkowski_metric(2)}) {
        LeviCivita conn(g);
        for (const Point& p : pts) {
            Ten3<double> gamma = conn.christoffel(p.coords());
            for (double v : gamma.d) CHECK(std::abs(v) < 1e-14);
        }
    }
}

TEST_CASE("christoffel symbols match the conformal closed form on the sphere") {
    S2Atlas atlas(1.0);
    MetricField g = atlas.metric();
    LeviCivita conn(g);
    ScalarField mu(2, max_jet_level, [](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        T rho2 = sq(x[0]) + sq(x[1]);
        return log(4.0 / sq(1.0 + rho2));
    });
    for (Point p : {Point{0.4, -0.3}, Point{0.1, 0.6}, Point{-0.7, -0.2}}) {
        Ten3<double> got = conn.christoffel(p.coords());
        Ten3<double> expect = conformal_symbols(mu, p);
        for (size_t i = 0; i < got.d.size(); ++i)
            CHECK(std::abs(got.d[i] - expect.d[i]) < 1e-9);
    }
}

TEST_CASE("levi-civita is symmetric, metric-compatible, torsion-free") {
    S2Atlas atlas(1.0);
    MetricField g = atlas.metric();
    LeviCivita conn(g);
    std::vector<Point> grid = make_grid(GridSpec{{-0.7, -0.7}, {0.7, 0.7}, {}, 6});

    double worst_sym = 0.0, worst_comp = 0.0;
    for (const Point& p : grid) {
        Ten3<double> gamma = conn.christoffel(p.coords());
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    worst_sym =
                        std::max(worst_sym, std::abs(gamma(k, i, j) - gamma(k, j, i)));
        for (int i = 0; i < 2; ++i) {
            std::vector<double> e(2, 0.0);
            e[static_cast<size_t>(i)] = 1.0;
            Mat<double> ng = covariant_derivative_cov2_at(conn, g, e, p.coords());
            for (double v : ng.d) worst_comp = std::max(worst_comp, std::abs(v));
        }
    }
    CHECK(worst_sym < 1e-12);
    CHECK(worst_comp < 1e-9);

    // torsion: ∇_X Y − ∇_Y X − [X, Y] = 0 on non-coordinate fields
    VectorField X(2, max_jet_level, [](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        return std::vector<T>{sin(x[1]), x[0]};
    });
    VectorField Y(2, max_jet_level, [](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        return std::vector<T>{x[1] * x[0], cos(x[0])};
    });
    VectorField torsion = covariant_derivative(conn, X, Y) -
                          covariant_derivative(conn, Y, X) - lie_bracket(X, Y);
    CHECK(max_field_residual(torsion, grid) < 1e-9);
}

TEST_CASE("covariant derivative of a constant field vanishes in flat space") {
    LeviCivita conn(flat_metric(2));
    VectorField c(2, max_jet_level, [](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        (void)x;
        return std::vector<T>{T(1.7), T(-0.3)};
    });
    std::vector<Point> grid = make_grid(GridSpec{{0.0, 0.0}, {1.0, 1.0}, {}, 4});
    CHECK(max_field_residual(covariant_derivative(conn, VectorField::coordinate(2, 0), c),
                             grid) < 1e-15);
}

TEST_CASE("riemann tensor: flat torus, sphere sectional curvature, symmetries") {
    LeviCivita flat(flat_metric(2));
    Ten4<double> Rflat = flat.riemann(Point{0.4, 0.9}.coords());
    for (double v : Rflat.d) CHECK(std::abs(v) < 1e-14);

    S2Atlas atlas(1.0);
    MetricField g = atlas.metric();
    LeviCivita conn(g);
    for (Point p : {Point{0.2, 0.1}, Point{-0.5, 0.4}}) {
        Ten4<double> R = conn.riemann(p.coords());
        Mat<double> gv = g.at(p);
        // K = g(R(e1,e2)e2, e1) / (g11 g22 − g12²)
        double num = 0.0;
        for (int l = 0; l < 2; ++l) num += gv(l, 0) * R(l, 1, 0, 1);
        double den = gv(0, 0) * gv(1, 1) - gv(0, 1) * gv(1, 0);
        CHECK(num / den == doctest::Approx(1.0).epsilon(1e-7));

        // first Bianchi identity on coordinate triples
        for (int l = 0; l < 2; ++l)
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j)
                    for (int kk = 0; kk < 2; ++kk) {
                        double cyc = R(l, kk, i, j) + R(l, i, j, kk) + R(l, j, kk, i);
                        CHECK(std::abs(cyc) < 1e-8);
                    }

        // pair symmetries of the lowered tensor
        Ten4<double> low(2, 2, 2, 2);
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) {
                        double acc = 0.0;
                        for (int l = 0; l < 2; ++l) acc += gv(a, l) * R(l, b, i, j);
                        low(a, b, i, j) = acc;
                    }
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                for (int i = 0; i < 2; ++i)
                    for (int j = 0; j < 2; ++j) {
                        CHECK(std::abs(low(a, b, i, j) + low(b, a, i, j)) < 1e-8);
                        CHECK(std::abs(low(a, b, i, j) - low(i, j, a, b)) < 1e-8);
                    }
    }
}

TEST_CASE("parallel transport: flat loops, isometry, reversibility") {
    LeviCivita flat(flat_metric(2));
    Point o{0.2, 0.4};
    Eigen::MatrixXd P =
        parallel_transport_frame(flat, rectangle_loop(o, 0, 1, 0.5, 0.3));
    CHECK((P - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-12);

    S2Atlas atlas(1.0);
    MetricField g = atlas.metric();
    LeviCivita conn(g);

    // transport preserves the metric pairing
    Point a{0.1, -0.2}, b{0.5, 0.4};
    Eigen::MatrixXd T = parallel_transport_frame(conn, {a, b});
    Mat<double> ga = g.at(a), gb = g.at(b);
    for (int u = 0; u < 2; ++u)
        for (int w = 0; w < 2; ++w) {
            double before = ga(u, w);
            double after = 0.0;
            for (int i = 0; i < 2; ++i)
                for (int j = 0; j < 2; ++j) after += gb(i, j) * T(i, u) * T(j, w);
            CHECK(std::abs(after - before) < 1e-8);
        }

    // loop followed by its reverse is the identity
    std::vector<Point> loop = rectangle_loop(a, 0, 1, 0.4, 0.3);
    std::vector<Point> back(loop.rbegin(), loop.rend());
    std::vector<Point> both = loop;
    both.insert(both.end(), back.begin() + 1, back.end());
    Eigen::MatrixXd PR = parallel_transport_frame(conn, both);
    CHECK((PR - Eigen::MatrixXd::Identity(2, 2)).norm() < 1e-9);
}

TEST_CASE("small-loop rotation angle matches the enclosed area on the unit sphere") {
    S2Atlas atlas(1.0);
    MetricField g = atlas.metric();
    LeviCivita conn(g);
    Point o{0.15, -0.1};
    for (double h : {0.05, 0.035}) {
        Eigen::MatrixXd P = parallel_transport_frame(conn, rectangle_loop(o, 0, 1, h, h));
        // conformal chart: the coordinate matrix of the transport is itself the
        // rotation matrix
        double angle = std::atan2(P(1, 0), P(0, 0));
        double area = riemannian_area(g, o, 0, 1, h);
        CHECK(area <= 1.1e-2);
        CHECK(std::abs(std::abs(angle) - area) <= 0.02 * area);
    }
}

TEST_CASE("transport reports non-convergence with the achieved tolerance") {
    S2Atlas atlas(1.0);
    LeviCivita conn(atlas.metric());
    TransportOptions opt;
    opt.initial_steps = 1;
    opt.max_doublings = 1;
    opt.tolerance = 1e-16;
    CHECK_THROWS_AS(
        parallel_transport_frame(conn, rectangle_loop(Point{0.1, 0.1}, 0, 1, 0.4, 0.4), opt),
        ConvergenceError);
}

TEST_CASE("singular metric is rejected") {
    MetricField bad(2, max_jet_level, Signature{0, 2}, [](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        Mat<T> out(2, 2);
        out(0, 0) = x[0];
        out(1, 1) = T(1.0);
        return out;
    });
    LeviCivita conn(bad);
    CHECK_THROWS_AS(conn.christoffel(Point{0.0, 0.5}.coords()), SingularMetricError);
}

TEST_CASE("transverse connection: orthogonality, torsion, metricity") {
    S2Atlas atlas(hopf_base_radius);
    KKStage st = KKStage::assemble(atlas.metric(), atlas.monopole(1.0), -1);
    VectorField v = fundamental_field(st.chart);
    TransverseConnection tc(st.total_conn, v, -st.sigma);

    GridSpec gs{{-0.4, -0.4}, {0.4, 0.4}, {0.35}, 5};
    std::vector<Point> grid = make_grid(gs);
    Point center{0.05, -0.04, 0.35};
    std::vector<VectorField> E = tc.frame(center, false);
    MetricField gt = st.total_g;

    std::vector<VectorField> dirs;
    dirs.push_back(v);
    for (const auto& e : E) dirs.push_back(e);

    double worst_orth = 0.0, worst_torsion = 0.0, worst_metric = 0.0;
    for (const auto& X : dirs)
        for (size_t b = 0; b < E.size(); ++b) {
            VectorField dXY = tc.derivative(X, E[b]);
            ScalarField pairing = metric_pair(gt, dXY, v);
            worst_orth = std::max(worst_orth, max_residual_scalar(grid, [&](const Point& p) {
                                      return pairing(p);
                                  }));
        }
    CHECK(worst_orth < 1e-10);

    EndomorphismField proj = tc.projector();
    for (size_t a = 0; a < E.size(); ++a)
        for (size_t b = 0; b < E.size(); ++b) {
            VectorField defect = tc.derivative(E[a], E[b]) - tc.derivative(E[b], E[a]) -
                                 apply(proj, lie_bracket(E[a], E[b]));
            worst_torsion = std::max(worst_torsion, max_field_residual(defect, grid));
        }
    CHECK(worst_torsion < 1e-9);

    for (const auto& X : dirs)
        for (size_t b = 0; b < E.size(); ++b)
            for (size_t c = 0; c < E.size(); ++c) {
                ScalarField gYZ = metric_pair(gt, E[b], E[c]);
                ScalarField t1 = lie_derivative(gYZ, X);
                ScalarField t2 = metric_pair(gt, tc.derivative(X, E[b]), E[c]);
                ScalarField t3 = metric_pair(gt, E[b], tc.derivative(X, E[c]));
                worst_metric =
                    std::max(worst_metric, max_residual_scalar(grid, [&](const Point& p) {
                                 return t1(p) - t2(p) - t3(p);
                             }));
            }
    CHECK(worst_metric < 1e-9);

    // projector is idempotent and annihilates the fiber field
    double worst_proj = 0.0;
    for (const Point& p : grid) {
        Mat<double> P = proj.at(p);
        std::vector<double> vv = v.at(p);
        for (int i = 0; i < 3; ++i) {
            double pv = 0.0;
            for (int j = 0; j < 3; ++j) pv += P(i, j) * vv[static_cast<size_t>(j)];
            worst_proj = std::max(worst_proj, std::abs(pv));
            for (int j = 0; j < 3; ++j) {
                double pp = 0.0;
                for (int kk = 0; kk < 3; ++kk) pp += P(i, kk) * P(kk, j);
                worst_proj = std::max(worst_proj, std::abs(pp - P(i, j)));
            }
        }
    }
    CHECK(worst_proj < 1e-12);

    // non-sections are rejected with the measured violation
    CHECK_THROWS_AS(max_field_residual(tc.derivative(E[0], v), grid), SectionError);
}

TEST_CASE("killing residual separates isometries from the broken field") {
    std::vector<Point> grid = make_grid(GridSpec{{0.3, 0.3}, {5.9, 5.9}, {}, 8});
    MetricField flat = flat_metric(2);
    CHECK(killing_residual(flat, VectorField::coordinate(2, 0), grid) < 1e-15);
    CHECK(killing_residual(flat, broken_unit_field(), grid) > 1e-3);
}
