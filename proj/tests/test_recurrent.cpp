#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "kk/catalog.hpp"

using namespace kk;

namespace {

struct TorusSetup {
    std::vector<Point> base, total;
    RecurrentBundle rb;
};

TorusSetup torus_setup(int eps, int n = 6) {
    GridSpec base{{0.3, 0.3}, {5.9, 5.9}, {}, n};
    GridSpec total{{0.3, 0.3}, {5.9, 5.9}, {0.35}, n};
    std::vector<Point> bp = make_grid(base), tp = make_grid(total);
    RecurrentBundle rb =
        build_recurrent_bundle(flat_metric(2), VectorField::coordinate(2, 0), 1, eps,
                               OneForm::zero(2), std::span<const Point>(bp));
    return {bp, tp, rb};
}

struct HopfSetup {
    std::vector<Point> base, total;
    KKStage stage1;
    RecurrentBundle rb;
};

HopfSetup hopf_setup(int eps, int n = 6) {
    S2Atlas atlas(hopf_base_radius);
    KKStage st1 = KKStage::assemble(atlas.metric(), atlas.monopole(1.0), -1);
    GridSpec base{{-0.4, -0.4}, {0.4, 0.4}, {0.35}, n};
    GridSpec total{{-0.4, -0.4}, {0.4, 0.4}, {0.35, 1.2}, n};
    std::vector<Point> bp = make_grid(base), tp = make_grid(total);
    RecurrentBundle rb =
        build_recurrent_bundle(st1.total_g, VectorField::coordinate(3, 2), 1, eps,
                               OneForm::zero(3), std::span<const Point>(bp));
    rb.sasakian = true;
    return {bp, tp, st1, rb};
}

}  // namespace

TEST_CASE("twisted flat torus carries a parallel null field for both signs") {
    for (int eps : {1, -1}) {
        TorusSetup s = torus_setup(eps);
        CHECK(parallel_defect(s.rb, s.total) < 1e-9);
        SuiteReport rep = verify_recurrent_structure(s.rb, s.total);
        for (const auto& row : rep.rows) {
            INFO(row.name << " residual " << row.residual);
            CHECK(row.pass);
        }
    }
}

TEST_CASE("twisted bundle over the normalized contact stage is parallel for both signs") {
    double defects[2] = {0.0, 0.0};
    int idx = 0;
    for (int eps : {1, -1}) {
        HopfSetup s = hopf_setup(eps);
        double d = parallel_defect(s.rb, s.total);
        defects[idx++] = std::max(d, 1e-14);
        CHECK(d < 1e-8);
        SuiteReport rep = verify_recurrent_structure(s.rb, s.total);
        for (const auto& row : rep.rows) {
            INFO(row.name << " residual " << row.residual);
            CHECK(row.pass);
        }
    }
    // sign-flip symmetry: comparable defect for both twists
    double ratio = defects[0] / defects[1];
    CHECK(ratio < 10.0);
    CHECK(ratio > 0.1);
}

TEST_CASE("flat tower over the torus is parallel as well") {
    GridSpec base{{0.3, 0.3}, {5.9, 5.9}, {0.35}, 5};
    GridSpec total{{0.3, 0.3}, {5.9, 5.9}, {0.35, 1.2}, 5};
    std::vector<Point> bp = make_grid(base), tp = make_grid(total);
    KKStage st1 = KKStage::assemble(flat_metric(2), OneForm::zero(2), 1);
    RecurrentBundle rb = assemble_double_bundle(st1, 1, std::span<const Point>(bp));
    CHECK(parallel_defect(rb, tp) < 1e-12);
}

TEST_CASE("non-Killing and non-unit fields and curved reference potentials are rejected") {
    GridSpec base{{0.3, 0.3}, {5.9, 5.9}, {}, 6};
    std::vector<Point> bp = make_grid(base);
    MetricField g = flat_metric(2);

    try {
        build_recurrent_bundle(g, broken_unit_field(), 1, 1, OneForm::zero(2),
                               std::span<const Point>(bp));
        FAIL("broken field accepted");
    } catch (const PreconditionError& e) {
        CHECK(e.which == "killing-field");
        CHECK(e.value > 1e-3);
    }

    try {
        VectorField doubled(2, max_jet_level, [](auto x) {
            using T = detail::scalar_of<decltype(x)>;
            (void)x;
            return std::vector<T>{T(2.0), T(0.0)};
        });
        build_recurrent_bundle(g, doubled, 1, 1, OneForm::zero(2),
                               std::span<const Point>(bp));
        FAIL("non-unit field accepted");
    } catch (const PreconditionError& e) {
        CHECK(e.which == "unit-norm");
    }

    try {
        OneForm curved(2, max_jet_level, [](auto x) {
            using T = detail::scalar_of<decltype(x)>;
            return std::vector<T>{T(0.0), sin(x[0])};
        });
        build_recurrent_bundle(g, VectorField::coordinate(2, 0), 1, 1, curved,
                               std::span<const Point>(bp));
        FAIL("curved reference potential accepted");
    } catch (const PreconditionError& e) {
        CHECK(e.which == "flat-connection");
    }
}

TEST_CASE("recurrence scaling: constant, exponential, and random positive factors") {
    TorusSetup s = torus_setup(1);
    const int n = s.rb.total_dim();

    RecurrenceResult unit = verify_recurrence(s.rb, constant_field(n, 1.0), s.total);
    CHECK(unit.residual < 1e-12);
    CHECK(max_field_residual(unit.omega, s.total) < 1e-14);

    ScalarField expx(n, max_jet_level, [](auto x) { return exp(x[0]); });
    RecurrenceResult ex = verify_recurrence(s.rb, expx, s.total);
    CHECK(ex.residual < 1e-9);
    for (const Point& p : s.total) {
        std::vector<double> w = ex.omega.at(p);
        CHECK(std::abs(w[0] - 1.0) < 1e-12);
        for (int i = 1; i < n; ++i) CHECK(std::abs(w[static_cast<size_t>(i)]) < 1e-12);
    }

    std::mt19937 rng(20240817);
    std::uniform_real_distribution<double> u(-0.4, 0.4);
    for (int trial = 0; trial < 3; ++trial) {
        double c1 = u(rng), c2 = u(rng), c3 = u(rng);
        ScalarField f(n, max_jet_level, [c1, c2, c3](auto x) {
            return exp(c1 * sin(x[0]) + c2 * cos(x[1]) + c3 * sin(x[1]));
        });
        RecurrenceResult r = verify_recurrence(s.rb, f, s.total);
        CHECK(r.residual < 1e-8);
    }

    HopfSetup h = hopf_setup(1);
    ScalarField expx4(h.rb.total_dim(), max_jet_level, [](auto x) { return exp(x[0]); });
    RecurrenceResult hex = verify_recurrence(h.rb, expx4, h.total);
    CHECK(hex.residual < 1e-8);

    CHECK_THROWS_AS(verify_recurrence(s.rb, constant_field(n, 0.0), s.total),
                    NonFiniteError);
}

TEST_CASE("structure-tensor identities forced by the parallel field") {
    TorusSetup s = torus_setup(1);
    SuiteReport trep = verify_prop_identities(s.rb, s.base);
    for (const auto& row : trep.rows) {
        INFO(row.name << " residual " << row.residual);
        CHECK(row.pass);
    }
    // the flat scenario is degenerate: phi and the twist both vanish
    CHECK(max_field_residual(s.rb.stage.phi, s.base) < 1e-14);

    for (int eps : {1, -1}) {
        HopfSetup h = hopf_setup(eps);
        SuiteReport rep = verify_prop_identities(h.rb, h.base);
        for (const auto& row : rep.rows) {
            INFO(row.name << " residual " << row.residual);
            CHECK(row.pass);
        }
        // non-degenerate here: phi is a unimodular rotation of the screen plane
        double scale = 0.0;
        for (const Point& p : h.base) {
            Mat<double> ph = h.rb.stage.phi.at(p);
            for (double c : ph.d) scale = std::max(scale, std::abs(c));
        }
        CHECK(scale > 0.5);
    }
}

TEST_CASE("derivative table of the twisted bundle") {
    TorusSetup s = torus_setup(1);
    SuiteReport trep = verify_D_table(s.rb, s.total, Point{2.9, 3.3, 0.35});
    for (const auto& row : trep.rows) {
        INFO(row.name << " residual " << row.residual);
        CHECK(row.residual < 1e-12);
    }

    for (int eps : {1, -1}) {
        HopfSetup h = hopf_setup(eps);
        SuiteReport rep = verify_D_table(h.rb, h.total, Point{0.05, -0.04, 0.35, 1.2});
        for (const auto& row : rep.rows) {
            INFO(row.name << " residual " << row.residual);
            CHECK(row.pass);
        }
    }
}

TEST_CASE("curvature table of the twisted bundle, with contact degeneration") {
    TorusSetup s = torus_setup(1, 5);
    SuiteReport trep = verify_curvature_table(s.rb, s.total, Point{2.9, 3.3, 0.35});
    for (const auto& row : trep.rows) {
        INFO(row.name << " residual " << row.residual);
        CHECK(row.residual < 1e-10);
    }

    for (int eps : {1, -1}) {
        HopfSetup h = hopf_setup(eps, 5);
        SuiteReport rep =
            verify_curvature_table(h.rb, h.total, Point{0.05, -0.04, 0.35, 1.2});
        REQUIRE(rep.rows.size() == 11);  // eight table rows + three degeneration rows
        for (const auto& row : rep.rows) {
            INFO(row.name << " residual " << row.residual);
            CHECK(row.pass);
        }
    }
}

TEST_CASE("screen derivative: lift-independent and conjugate to the transverse one") {
    TorusSetup s = torus_setup(1, 5);
    SuiteReport trep = verify_screen_derivative(s.rb, s.total, Point{2.9, 3.3, 0.35});
    for (const auto& row : trep.rows) {
        INFO(row.name << " residual " << row.residual);
        CHECK(row.pass);
    }

    HopfSetup h = hopf_setup(1, 5);
    SuiteReport rep =
        verify_screen_derivative(h.rb, h.total, Point{0.05, -0.04, 0.35, 1.2});
    for (const auto& row : rep.rows) {
        INFO(row.name << " residual " << row.residual);
        CHECK(row.pass);
    }
}

TEST_CASE("contact axioms hold on the normalized stage and fail off-normalization") {
    HopfSetup h = hopf_setup(1);
    ContactStructure cs = contact_structure_of_stage(h.stage1);
    SuiteReport rep = verify_contact_axioms(cs, h.base, true);
    for (const auto& row : rep.rows) {
        INFO(row.name << " residual " << row.residual);
        CHECK(row.pass);
    }

    // unit-radius sphere with unit charge is a squashed stage: the same
    // tensors violate the almost-contact normalization
    S2Atlas unit(1.0);
    KKStage squashed = KKStage::assemble(unit.metric(), unit.monopole(1.0), -1);
    GridSpec gs{{-0.4, -0.4}, {0.4, 0.4}, {0.35}, 5};
    std::vector<Point> grid = make_grid(gs);
    ContactStructure bad = contact_structure_of_stage(squashed);
    SuiteReport brep = verify_contact_axioms(bad, grid, false);
    bool phi_square_fails = false;
    for (const auto& row : brep.rows)
        if (row.name == "contact/phi-square" && !row.pass) phi_square_fails = true;
    CHECK(phi_square_fails);
}
