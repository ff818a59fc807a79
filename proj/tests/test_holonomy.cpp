#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kk/catalog.hpp"

using namespace kk;

namespace {

Eigen::MatrixXd rotation2(double angle) {
    Eigen::MatrixXd R(2, 2);
    R << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
    return R;
}

}  // namespace

TEST_CASE("matrix log recovers rotation angles, including through square roots") {
    for (double angle : {0.05, 0.4, 1.2, 2.4}) {
        Eigen::MatrixXd L = matrix_log(rotation2(angle));
        CHECK(L(1, 0) == doctest::Approx(angle).epsilon(1e-12));
        CHECK(L(0, 1) == doctest::Approx(-angle).epsilon(1e-12));
        CHECK(std::abs(L(0, 0)) < 1e-12);
    }
    Eigen::MatrixXd Z = matrix_log(Eigen::MatrixXd::Identity(3, 3));
    CHECK(Z.norm() < 1e-15);
}

TEST_CASE("flat scenarios have trivial holonomy under both estimators") {
    Scenario sc = make_scenario("flat-torus", 8);
    const LeviCivita& conn = sc.primary_stage().total_conn;
    HolonomyOptions opt;
    opt.samples = 16;
    HolonomyEstimate as = ambrose_singer_generators(conn, sc.grid_total, sc.holonomy_base, opt);
    CHECK(as.dimension == 0);
    CHECK(as.status == HolonomyStatus::ok);
    HolonomyEstimate lp = loop_holonomy(conn, sc.holonomy_base, opt);
    CHECK(lp.dimension == 0);
}

TEST_CASE("round sphere: one-dimensional holonomy spanned by the rotation") {
    Scenario sc = make_scenario("s2", 8);
    LeviCivita conn(sc.root_metric);
    HolonomyOptions opt;
    opt.samples = 16;
    HolonomyEstimate as =
        ambrose_singer_generators(conn, sc.grid_root, sc.holonomy_base, opt);
    CHECK(as.dimension == 1);
    CHECK(as.status == HolonomyStatus::ok);
    CHECK(as.gap > 1e3);

    // generators are g-skew
    Mat<double> gv = sc.root_metric.at(sc.holonomy_base);
    Eigen::MatrixXd G(2, 2);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) G(i, j) = gv(i, j);
    for (const auto& M : as.basis)
        CHECK((M.transpose() * G + G * M).norm() < 1e-7);

    // small-loop logs reproduce the curvature operator to two percent
    Point o = sc.holonomy_base;
    Ten4<double> R = conn.riemann(o.coords());
    Eigen::MatrixXd Rop(2, 2);
    for (int l = 0; l < 2; ++l)
        for (int k = 0; k < 2; ++k) Rop(l, k) = R(l, k, 0, 1);
    double h = 0.04;
    Eigen::MatrixXd P = parallel_transport_frame(conn, rectangle_loop(o, 0, 1, h, h));
    Eigen::MatrixXd L = matrix_log(P) / (h * h);
    CHECK((L + Rop).norm() <= 0.02 * Rop.norm());

    HolonomyEstimate lp = loop_holonomy(conn, o, opt);
    CHECK(lp.dimension == 1);
    std::vector<double> angles = principal_angles(as.basis, lp.basis);
    for (double a : angles) CHECK(a < 1e-2);
}

TEST_CASE("double bundle over the sphere: three-dimensional algebra, adapted block shape") {
    Scenario sc = make_scenario("hopf-double", 8);
    const RecurrentBundle& rb = *sc.rb;
    HolonomyOptions opt;
    opt.samples = 25;
    HolonomyEstimate as = ambrose_singer_generators(rb.stage.total_conn, sc.grid_total,
                                                    sc.holonomy_base, opt);
    CHECK(as.dimension == 3);
    CHECK(as.status == HolonomyStatus::ok);
    CHECK(as.gap >= 1e3);
    CHECK(as.generations <= 2);

    HolonomyEstimate lp = loop_holonomy(rb.stage.total_conn, sc.holonomy_base, opt);
    CHECK(lp.dimension == 3);
    std::vector<double> angles = principal_angles(as.basis, lp.basis);
    for (double a : angles) CHECK(a < 1e-2);

    AdaptedFrameData af = adapted_frame(rb, sc.holonomy_base);
    BlockReport br = classify_block_structure(as, af, true);
    CHECK(br.col_r < 1e-6);
    CHECK(br.row_rtilde < 1e-6);
    CHECK(br.screen_skew < 1e-6);
    CHECK(br.phi_commute < 1e-6);
    CHECK(br.metric_skew < 1e-7);
    CHECK(br.pass);

    // stability: more samples and smaller loops give the same dimension
    HolonomyOptions denser = opt;
    denser.samples = 49;
    CHECK(ambrose_singer_generators(rb.stage.total_conn, sc.grid_total, sc.holonomy_base,
                                    denser)
              .dimension == 3);
    HolonomyOptions smaller = opt;
    smaller.loop_size = opt.loop_size / 2.0;
    CHECK(loop_holonomy(rb.stage.total_conn, sc.holonomy_base, smaller).dimension == 3);

    // determinism: identical reruns bit for bit
    HolonomyEstimate again = ambrose_singer_generators(rb.stage.total_conn, sc.grid_total,
                                                       sc.holonomy_base, opt);
    REQUIRE(again.singular_values.size() == as.singular_values.size());
    for (size_t i = 0; i < as.singular_values.size(); ++i)
        CHECK(again.singular_values[i] == as.singular_values[i]);
}

TEST_CASE("rank rule reports an indeterminate spectrum instead of rounding") {
    auto diag = [](double a, double b, double c) {
        Eigen::MatrixXd D = Eigen::MatrixXd::Zero(3, 3);
        D(0, 0) = a;
        D(1, 1) = b;
        D(2, 2) = c;
        return D;
    };
    HolonomyEstimate est;
    est.o = Point{0.0, 0.0, 0.0};
    Eigen::MatrixXd A = diag(1, -1, 0), B = diag(0, 1, -1), C = diag(1, 1, 1);
    est.generators = {A, A + 5e-5 * B, A + 5e-5 * B + 1e-6 * C};
    HolonomyOptions opt;
    detail::finish_estimate(est, opt);
    CHECK(est.status == HolonomyStatus::indeterminate);
}

TEST_CASE("transverse holonomy is the pullback of the base holonomy") {
    Scenario hopf = make_scenario("hopf", 6);
    SuiteReport rep =
        verify_transverse_holonomy_pullback(*hopf.stage1, hopf.holonomy_base);
    for (const auto& row : rep.rows) {
        INFO(row.name << " residual " << row.residual);
        CHECK(row.pass);
    }

    // flat stage: both transports are the identity
    Scenario torus = make_scenario("flat-torus", 6);
    SuiteReport trep =
        verify_transverse_holonomy_pullback(*torus.stage1, torus.holonomy_base);
    for (const auto& row : trep.rows) CHECK(row.residual < 1e-9);
}

TEST_CASE("screen holonomy matches the root-base holonomy on the towers") {
    Scenario flat = make_scenario("torus-double", 6);
    SuiteReport frep = verify_screen_holonomy(*flat.rb, *flat.stage1, flat.holonomy_base);
    // flat tower: both sides empty
    CHECK(frep.pass);

    Scenario sc = make_scenario("hopf-double", 6);
    SuiteReport rep = verify_screen_holonomy(*sc.rb, *sc.stage1, sc.holonomy_base);
    for (const auto& row : rep.rows) {
        INFO(row.name << " residual " << row.residual);
        CHECK(row.pass);
    }
}
