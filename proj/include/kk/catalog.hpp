#pragma once

#include <map>
#include <numbers>
#include <optional>
#include <string>

#include "kk/holonomy.hpp"
#include "kk/recurrent.hpp"
#include "kk/s2_atlas.hpp"

namespace kk {

inline MetricField flat_metric(int n) {
    return MetricField(n, max_jet_level, Signature{0, n}, [n](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        (void)x;
        Mat<T> out(n, n);
        for (int i = 0; i < n; ++i) out(i, i) = T(1.0);
        return out;
    });
}

inline MetricField minkowski_metric(int n) {
    return MetricField(n, max_jet_level, Signature{1, n - 1}, [n](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        (void)x;
        Mat<T> out(n, n);
        out(0, 0) = T(-1.0);
        for (int i = 1; i < n; ++i) out(i, i) = T(1.0);
        return out;
    });
}

// rotation about the pole axis in stereographic coordinates; a Killing
// field of the round metric (not of unit length)
inline VectorField rotation_field() {
    return VectorField(2, max_jet_level, [](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        std::vector<T> out(2);
        out[0] = T(0.0) - x[1];
        out[1] = x[0];
        return out;
    });
}

// unit-length but non-Killing field on the flat torus (negative control)
inline VectorField broken_unit_field() {
    return VectorField(2, max_jet_level, [](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        T ang = 0.3 * sin(x[1]);
        std::vector<T> out(2);
        out[0] = cos(ang);
        out[1] = sin(ang);
        return out;
    });
}

struct ExpectedValue {
    double value = 0.0;
    std::string basis;  // how the value was pinned: structural | closed-form | cross-checked
};

struct NegativeIngredients {
    MetricField g;
    VectorField xi;
    int sigma = 1;
    int eps = 1;
    OneForm a0;
};

struct Scenario {
    std::string name;
    std::string kind;  // base | bundle | recurrent | double | negative
    int total_dim = 0;
    GridSpec grid_total, grid_base, grid_root;
    Point frame_center;
    Point holonomy_base;
    std::optional<KKStage> stage1;
    std::optional<RecurrentBundle> rb;
    std::optional<ContactStructure> contact;
    std::optional<S2Atlas> atlas;
    double monopole_charge = 0.0;
    MetricField root_metric;
    std::optional<NegativeIngredients> negative;
    std::map<std::string, ExpectedValue> expected;

    const KKStage& primary_stage() const { return rb ? rb->stage : *stage1; }
    bool has_stage() const { return rb.has_value() || stage1.has_value(); }
};

inline const std::vector<std::string>& catalog_names() {
    static const std::vector<std::string> names = {
        "flat-torus",       "torus-recurrent", "torus-recurrent-em", "torus-double",
        "s2",               "hopf",            "hopf-double",        "hopf-double-em",
        "broken-killing",
    };
    return names;
}

namespace detail {

inline GridSpec torus_box(int n) {
    GridSpec gs;
    gs.lo = {0.3, 0.3};
    gs.hi = {5.9, 5.9};
    gs.n = n;
    return gs;
}

inline GridSpec square_box(double half, int n) {
    GridSpec gs;
    gs.lo = {-half, -half};
    gs.hi = {half, half};
    gs.n = n;
    return gs;
}

}  // namespace detail

// The catalog radius for the twisted-bundle tower: the circle bundle over
// the sphere of radius 1/2 with unit monopole charge carries the normalized
// contact structure needed by the degeneration rows of the curvature table.
inline constexpr double hopf_base_radius = 0.5;

inline Scenario make_scenario(const std::string& name, int grid_n = 16) {
    Scenario sc;
    sc.name = name;

    auto with_fixed = [](GridSpec gs, std::vector<double> fixed) {
        gs.fixed = std::move(fixed);
        return gs;
    };

    if (name == "flat-torus") {
        sc.kind = "bundle";
        sc.total_dim = 3;
        sc.root_metric = flat_metric(2);
        sc.stage1 = KKStage::assemble(sc.root_metric, OneForm::zero(2), 1);
        sc.grid_root = detail::torus_box(grid_n);
        sc.grid_base = sc.grid_root;
        sc.grid_total = with_fixed(detail::torus_box(grid_n), {0.35});
        sc.frame_center = Point{2.9, 3.3, 0.35};
        sc.holonomy_base = Point{2.7, 3.1, 0.35};
        sc.expected["holonomy-dimension"] = {0.0, "structural"};
        sc.expected["signature-neg"] = {1.0, "structural"};
        sc.expected["signature-pos"] = {2.0, "structural"};
    } else if (name == "torus-recurrent" || name == "torus-recurrent-em") {
        sc.kind = "recurrent";
        sc.total_dim = 3;
        int eps = name == "torus-recurrent" ? 1 : -1;
        sc.root_metric = flat_metric(2);
        sc.grid_root = detail::torus_box(grid_n);
        sc.grid_base = sc.grid_root;
        sc.grid_total = with_fixed(detail::torus_box(grid_n), {0.35});
        std::vector<Point> base_pts = make_grid(sc.grid_base);
        sc.rb = build_recurrent_bundle(sc.root_metric, VectorField::coordinate(2, 0), 1,
                                       eps, OneForm::zero(2),
                                       std::span<const Point>(base_pts));
        sc.frame_center = Point{2.9, 3.3, 0.35};
        sc.holonomy_base = Point{2.7, 3.1, 0.35};
        sc.expected["holonomy-dimension"] = {0.0, "structural"};
        sc.expected["signature-neg"] = {1.0, "structural"};
        sc.expected["signature-pos"] = {2.0, "structural"};
    } else if (name == "torus-double") {
        sc.kind = "double";
        sc.total_dim = 4;
        sc.root_metric = flat_metric(2);
        sc.stage1 = KKStage::assemble(sc.root_metric, OneForm::zero(2), 1);
        sc.grid_root = detail::torus_box(grid_n);
        sc.grid_base = with_fixed(detail::torus_box(grid_n), {0.35});
        sc.grid_total = with_fixed(detail::torus_box(grid_n), {0.35, 1.2});
        std::vector<Point> base_pts = make_grid(sc.grid_base);
        sc.rb = build_recurrent_bundle(sc.stage1->total_g, VectorField::coordinate(3, 2),
                                       -1, 1, OneForm::zero(3),
                                       std::span<const Point>(base_pts));
        sc.frame_center = Point{2.9, 3.3, 0.35, 1.2};
        sc.holonomy_base = Point{2.7, 3.1, 0.35, 1.2};
        sc.expected["holonomy-dimension"] = {0.0, "structural"};
        sc.expected["signature-neg"] = {1.0, "structural"};
        sc.expected["signature-pos"] = {3.0, "structural"};
    } else if (name == "s2") {
        sc.kind = "base";
        sc.total_dim = 2;
        sc.atlas = S2Atlas(1.0);
        sc.root_metric = sc.atlas->metric();
        sc.monopole_charge = 1.0;
        sc.grid_root = detail::square_box(0.8, grid_n);
        sc.grid_base = sc.grid_root;
        sc.grid_total = sc.grid_root;
        sc.frame_center = Point{0.05, -0.04};
        sc.holonomy_base = Point{0.11, -0.07};
        sc.expected["holonomy-dimension"] = {1.0, "closed-form"};
        sc.expected["signature-neg"] = {0.0, "structural"};
        sc.expected["signature-pos"] = {2.0, "structural"};
    } else if (name == "hopf") {
        sc.kind = "bundle";
        sc.total_dim = 3;
        sc.atlas = S2Atlas(hopf_base_radius);
        sc.root_metric = sc.atlas->metric();
        sc.monopole_charge = 1.0;
        sc.stage1 = KKStage::assemble(sc.root_metric, sc.atlas->monopole(1.0), -1);
        sc.contact = contact_structure_of_stage(*sc.stage1);
        sc.grid_root = detail::square_box(0.45, grid_n);
        sc.grid_base = sc.grid_root;
        sc.grid_total = with_fixed(detail::square_box(0.45, grid_n), {0.35});
        sc.frame_center = Point{0.05, -0.04, 0.35};
        sc.holonomy_base = Point{0.11, -0.07, 0.35};
        sc.expected["signature-neg"] = {0.0, "structural"};
        sc.expected["signature-pos"] = {3.0, "structural"};
    } else if (name == "hopf-double" || name == "hopf-double-em") {
        sc.kind = "double";
        sc.total_dim = 4;
        int eps = name == "hopf-double" ? 1 : -1;
        sc.atlas = S2Atlas(hopf_base_radius);
        sc.root_metric = sc.atlas->metric();
        sc.monopole_charge = 1.0;
        sc.stage1 = KKStage::assemble(sc.root_metric, sc.atlas->monopole(1.0), -1);
        sc.contact = contact_structure_of_stage(*sc.stage1);
        sc.grid_root = detail::square_box(0.45, grid_n);
        sc.grid_base = with_fixed(detail::square_box(0.45, grid_n), {0.35});
        sc.grid_total = with_fixed(detail::square_box(0.45, grid_n), {0.35, 1.2});
        std::vector<Point> base_pts = make_grid(sc.grid_base);
        sc.rb = build_recurrent_bundle(sc.stage1->total_g, VectorField::coordinate(3, 2),
                                       1, eps, OneForm::zero(3),
                                       std::span<const Point>(base_pts));
        sc.rb->sasakian = true;
        sc.frame_center = Point{0.05, -0.04, 0.35, 1.2};
        sc.holonomy_base = Point{0.11, -0.07, 0.35, 1.2};
        sc.expected["holonomy-dimension"] = {3.0, "cross-checked"};
        sc.expected["screen-holonomy-dimension"] = {1.0, "closed-form"};
        sc.expected["signature-neg"] = {1.0, "structural"};
        sc.expected["signature-pos"] = {3.0, "structural"};
    } else if (name == "broken-killing") {
        sc.kind = "negative";
        sc.total_dim = 3;
        sc.root_metric = flat_metric(2);
        sc.grid_root = detail::torus_box(grid_n);
        sc.grid_base = sc.grid_root;
        sc.grid_total = with_fixed(detail::torus_box(grid_n), {0.35});
        sc.frame_center = Point{2.9, 3.3, 0.35};
        sc.holonomy_base = Point{2.7, 3.1, 0.35};
        sc.negative = NegativeIngredients{sc.root_metric, broken_unit_field(), 1, 1,
                                          OneForm::zero(2)};
        sc.expected["killing-residual-floor"] = {1e-3, "structural"};
    } else {
        throw ConfigError("unknown scenario: " + name);
    }
    return sc;
}

// stage-two assembly over an existing stage: the fundamental field of the
// first stage becomes the unit Killing field of the second; the sign of the
// fiber square flips.
inline RecurrentBundle assemble_double_bundle(const KKStage& stage1, int eps2,
                                              std::span<const Point> base_grid) {
    int sigma2 = -stage1.sigma;
    VectorField xi = fundamental_field(stage1.chart);
    return build_recurrent_bundle(stage1.total_g, xi, sigma2, eps2,
                                  OneForm::zero(stage1.chart.total_dim()), base_grid);
}

}  // namespace kk
