#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "kk/recurrent.hpp"

namespace kk {

// matrix square root by the Denman-Beavers iteration
inline Eigen::MatrixXd matrix_sqrt(const Eigen::MatrixXd& A, int max_iter = 60) {
    Eigen::MatrixXd X = A;
    Eigen::MatrixXd Y = Eigen::MatrixXd::Identity(A.rows(), A.cols());
    for (int it = 0; it < max_iter; ++it) {
        Eigen::MatrixXd Xn = 0.5 * (X + Y.inverse());
        Eigen::MatrixXd Yn = 0.5 * (Y + X.inverse());
        double step = (Xn - X).norm();
        X = Xn;
        Y = Yn;
        if (step < 1e-15) return X;
    }
    throw ConvergenceError("matrix square root did not converge", (X * X - A).norm());
}

// principal logarithm via inverse scaling-and-squaring: take square roots
// until ‖G − I‖ < 0.5, then sum the alternating series.
inline Eigen::MatrixXd matrix_log(Eigen::MatrixXd G, int max_sqrts = 24) {
    const int n = static_cast<int>(G.rows());
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    int k = 0;
    while ((G - I).norm() >= 0.5) {
        if (++k > max_sqrts)
            throw ConvergenceError("matrix log: argument too far from identity",
                                   (G - I).norm());
        G = matrix_sqrt(G);
    }
    Eigen::MatrixXd X = G - I;
    Eigen::MatrixXd term = X;
    Eigen::MatrixXd S = Eigen::MatrixXd::Zero(n, n);
    for (int m = 1; m <= 80; ++m) {
        S += (m % 2 == 1 ? 1.0 : -1.0) / m * term;
        term = term * X;
        if (term.norm() < 1e-17) break;
    }
    return std::ldexp(1.0, k) * S;
}

enum class HolonomyStatus { ok, indeterminate, closure_cap };

struct HolonomyOptions {
    int samples = 64;          // lattice sample count for curvature conjugation
    double loop_size = 0.06;   // rectangle side for loop-transport logs
    double rank_rel = 1e-6;    // singular values below rel·max are discarded
    double gap_min = 1e3;      // required retained/discarded spectral gap
    int max_generations = 6;
    TransportOptions transport{};
};

struct HolonomyEstimate {
    Point o;
    std::vector<Eigen::MatrixXd> generators;  // normalized collected family
    std::vector<Eigen::MatrixXd> basis;       // orthonormal span basis after closure
    std::vector<double> singular_values;
    int dimension = 0;
    int generations = 0;
    double gap = std::numeric_limits<double>::infinity();
    HolonomyStatus status = HolonomyStatus::ok;
};

namespace detail {

inline Eigen::VectorXd vec_of(const Eigen::MatrixXd& M) {
    return Eigen::Map<const Eigen::VectorXd>(M.data(), M.size());
}

inline Eigen::MatrixXd stack_rows(const std::vector<Eigen::MatrixXd>& mats) {
    const int n2 = static_cast<int>(mats[0].size());
    Eigen::MatrixXd S(static_cast<int>(mats.size()), n2);
    for (size_t i = 0; i < mats.size(); ++i) S.row(static_cast<int>(i)) = vec_of(mats[i]);
    return S;
}

// orthonormal basis (as matrices) of the span of a family
inline std::vector<Eigen::MatrixXd> span_basis(const std::vector<Eigen::MatrixXd>& mats,
                                               double rel, std::vector<double>* svs_out,
                                               int* rank_out) {
    std::vector<Eigen::MatrixXd> basis;
    if (mats.empty()) {
        if (rank_out) *rank_out = 0;
        return basis;
    }
    const int n = static_cast<int>(mats[0].rows());
    Eigen::MatrixXd S = stack_rows(mats);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(S, Eigen::ComputeThinV);
    Eigen::VectorXd sv = svd.singularValues();
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv(i) >= rel * sv(0) && sv(0) > 0.0) ++rank;
    if (svs_out) svs_out->assign(sv.data(), sv.data() + sv.size());
    if (rank_out) *rank_out = rank;
    for (int i = 0; i < rank; ++i) {
        Eigen::VectorXd col = svd.matrixV().col(i);
        basis.push_back(Eigen::Map<const Eigen::MatrixXd>(col.data(), n, n));
    }
    return basis;
}

// Lie closure and numerical rank; fills everything downstream of the raw
// generator family.
inline void finish_estimate(HolonomyEstimate& est, const HolonomyOptions& opt) {
    std::vector<Eigen::MatrixXd> family;
    for (const auto& g : est.generators) {
        double nrm = g.norm();
        if (nrm < 1e-12) continue;  // absolute floor: flat contributions
        family.push_back(g / nrm);
    }
    est.generators = family;
    if (family.empty()) {
        est.dimension = 0;
        est.status = HolonomyStatus::ok;
        est.singular_values.clear();
        return;
    }

    int rank_prev = -1;
    std::vector<Eigen::MatrixXd> basis;
    for (int gen = 0;; ++gen) {
        int rank = 0;
        basis = span_basis(family, opt.rank_rel, &est.singular_values, &rank);
        est.generations = gen;
        if (rank == rank_prev) break;
        if (gen >= opt.max_generations) {
            est.status = HolonomyStatus::closure_cap;
            break;
        }
        rank_prev = rank;
        for (size_t i = 0; i < basis.size(); ++i)
            for (size_t j = i + 1; j < basis.size(); ++j) {
                Eigen::MatrixXd br = basis[i] * basis[j] - basis[j] * basis[i];
                double nrm = br.norm();
                if (nrm > 1e-12) family.push_back(br / nrm);
            }
    }
    est.basis = basis;
    est.dimension = static_cast<int>(basis.size());

    // spectral gap between the retained and discarded singular values
    const auto& sv = est.singular_values;
    if (est.dimension > 0 && est.dimension < static_cast<int>(sv.size()) &&
        sv[static_cast<size_t>(est.dimension)] > 0.0) {
        est.gap = sv[static_cast<size_t>(est.dimension) - 1] /
                  sv[static_cast<size_t>(est.dimension)];
        if (est.gap < opt.gap_min) est.status = HolonomyStatus::indeterminate;
    }
}

}  // namespace detail

// Holonomy generators from parallel-transported curvature: for each sample
// point s reached from o, P⁻¹ R_s(P e_i, P e_j) P over the coordinate frame
// pairs at o. Samples are a deterministic lattice over the grid window.
inline HolonomyEstimate ambrose_singer_generators(const LeviCivita& conn,
                                                  const GridSpec& window, const Point& o,
                                                  const HolonomyOptions& opt = {}) {
    HolonomyEstimate est;
    est.o = o;
    const int n = conn.dim();
    int per_side = std::max(2, static_cast<int>(std::llround(std::sqrt(
                                    static_cast<double>(opt.samples)))));
    std::vector<Point> samples = make_grid(window, per_side);

    for (const Point& s : samples) {
        Eigen::MatrixXd P =
            parallel_transport_frame(conn, {o, s}, opt.transport, nullptr);
        Eigen::MatrixXd Pinv = P.inverse();
        Ten4<double> R = conn.riemann(s.coords());
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                Eigen::VectorXd u = P.col(i), w = P.col(j);
                Eigen::MatrixXd M(n, n);
                for (int l = 0; l < n; ++l)
                    for (int kk = 0; kk < n; ++kk) {
                        double acc = 0.0;
                        for (int a = 0; a < n; ++a)
                            for (int b = 0; b < n; ++b)
                                acc += R(l, kk, a, b) * u(a) * w(b);
                        M(l, kk) = acc;
                    }
                est.generators.push_back(Pinv * M * P);
            }
    }
    detail::finish_estimate(est, opt);
    return est;
}

// Independent estimator: logarithms of small-rectangle loop transports,
// scaled by the coordinate area. Shrinks the loop and retries when the
// transport is too far from the identity for the logarithm.
inline HolonomyEstimate loop_holonomy(const LeviCivita& conn, const Point& o,
                                      const HolonomyOptions& opt = {}) {
    HolonomyEstimate est;
    est.o = o;
    const int n = conn.dim();
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double h = opt.loop_size;
            for (int attempt = 0;; ++attempt) {
                try {
                    Eigen::MatrixXd P = parallel_transport_frame(
                        conn, rectangle_loop(o, i, j, h, h), opt.transport, nullptr);
                    est.generators.push_back(matrix_log(P) / (h * h));
                    break;
                } catch (const ConvergenceError&) {
                    if (attempt >= 3) throw;
                    h *= 0.5;
                }
            }
        }
    detail::finish_estimate(est, opt);
    return est;
}

// principal angles between the spans of two matrix families
inline std::vector<double> principal_angles(const std::vector<Eigen::MatrixXd>& A,
                                            const std::vector<Eigen::MatrixXd>& B) {
    if (A.empty() || B.empty()) return {};
    Eigen::MatrixXd SA = detail::stack_rows(A).transpose();  // n² x a
    Eigen::MatrixXd SB = detail::stack_rows(B).transpose();
    Eigen::HouseholderQR<Eigen::MatrixXd> qa(SA), qb(SB);
    Eigen::MatrixXd QA = qa.householderQ() * Eigen::MatrixXd::Identity(
                                                 SA.rows(), std::min(SA.rows(), SA.cols()));
    Eigen::MatrixXd QB = qb.householderQ() * Eigen::MatrixXd::Identity(
                                                 SB.rows(), std::min(SB.rows(), SB.cols()));
    QA = QA.leftCols(static_cast<int>(A.size()));
    QB = QB.leftCols(static_cast<int>(B.size()));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(QA.transpose() * QB);
    std::vector<double> angles;
    Eigen::VectorXd sv = svd.singularValues();
    for (int i = 0; i < sv.size(); ++i)
        angles.push_back(std::acos(std::clamp(sv(i), -1.0, 1.0)));
    return angles;
}

// adapted frame (r, s_1..s_k, r̃) at a point of a recurrent bundle, with the
// screen metric and the φ matrix expressed on the screen part
struct AdaptedFrameData {
    Eigen::MatrixXd basis;       // columns r, s_a, r̃
    Eigen::MatrixXd gtilde;      // ambient metric at o
    Eigen::MatrixXd screen_phi;  // k x k
    int k = 0;
};

inline AdaptedFrameData adapted_frame(const RecurrentBundle& rb, const Point& o) {
    const int n = rb.total_dim();
    const int m = rb.base_dim();
    std::vector<VectorField> E =
        rb.transverse.frame(truncate_point(o, rb.base_dim()), true);
    const int k = static_cast<int>(E.size());

    AdaptedFrameData af;
    af.k = k;
    af.basis = Eigen::MatrixXd(n, n);
    std::span<const double> x = o.coords();
    std::vector<double> rv = rb.r.eval<double>(x);
    std::vector<double> rt = rb.r_tilde.eval<double>(x);
    for (int i = 0; i < n; ++i) {
        af.basis(i, 0) = rv[static_cast<size_t>(i)];
        af.basis(i, n - 1) = rt[static_cast<size_t>(i)];
    }
    for (int a = 0; a < k; ++a) {
        std::vector<double> sv = rb.lift(E[static_cast<size_t>(a)]).eval<double>(x);
        for (int i = 0; i < n; ++i) af.basis(i, 1 + a) = sv[static_cast<size_t>(i)];
    }
    Mat<double> g = rb.stage.total_g.eval<double>(x);
    af.gtilde = Eigen::MatrixXd(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) af.gtilde(i, j) = g(i, j);

    auto base = x.first(static_cast<size_t>(m));
    Mat<double> gb = rb.base_g.eval<double>(base);
    af.screen_phi = Eigen::MatrixXd(k, k);
    for (int a = 0; a < k; ++a) {
        std::vector<double> pe =
            apply(rb.stage.phi, E[static_cast<size_t>(a)]).eval<double>(base);
        for (int b = 0; b < k; ++b) {
            std::vector<double> eb = E[static_cast<size_t>(b)].eval<double>(base);
            double acc = 0.0;
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j)
                    acc += gb(i, j) * pe[static_cast<size_t>(i)] * eb[static_cast<size_t>(j)];
            af.screen_phi(b, a) = acc;
        }
    }
    return af;
}

struct BlockReport {
    double col_r = 0.0;        // generators must annihilate r
    double row_rtilde = 0.0;   // no output along r̃
    double screen_skew = 0.0;  // screen block skew wrt screen metric
    double phi_commute = 0.0;  // screen block commutes with φ
    double metric_skew = 0.0;  // ambient g̃-skewness
    bool pass = true;
};

inline BlockReport classify_block_structure(const HolonomyEstimate& est,
                                            const AdaptedFrameData& af, bool check_phi,
                                            double tol = 1e-6, double skew_tol = 1e-7) {
    BlockReport rep;
    const int n = static_cast<int>(af.basis.rows());
    Eigen::MatrixXd Binv = af.basis.inverse();
    for (const Eigen::MatrixXd& G : est.basis) {
        Eigen::MatrixXd A = Binv * G * af.basis;
        for (int i = 0; i < n; ++i) rep.col_r = std::max(rep.col_r, std::abs(A(i, 0)));
        for (int j = 0; j < n; ++j)
            rep.row_rtilde = std::max(rep.row_rtilde, std::abs(A(n - 1, j)));
        Eigen::MatrixXd S = A.block(1, 1, af.k, af.k);
        rep.screen_skew =
            std::max(rep.screen_skew, (S + S.transpose()).lpNorm<Eigen::Infinity>());
        if (check_phi)
            rep.phi_commute = std::max(
                rep.phi_commute,
                (S * af.screen_phi - af.screen_phi * S).lpNorm<Eigen::Infinity>());
        rep.metric_skew = std::max(rep.metric_skew,
                                   (G.transpose() * af.gtilde + af.gtilde * G)
                                       .lpNorm<Eigen::Infinity>());
    }
    rep.pass = rep.col_r <= tol && rep.row_rtilde <= tol && rep.screen_skew <= tol &&
               (!check_phi || rep.phi_commute <= tol) && rep.metric_skew <= skew_tol;
    return rep;
}

// The transverse holonomy of a bundle stage is the pullback of the base
// holonomy: transporting the transverse bundle along a horizontal lift of a
// base loop agrees with the conjugated base transport, and fiber loops act
// trivially.
inline SuiteReport verify_transverse_holonomy_pullback(const KKStage& st, const Point& o,
                                                       double loop_size = 0.08,
                                                       double tol_conj = 1e-7,
                                                       double tol_fiber = 1e-9) {
    SuiteReport rep{"transverse", {}, true};
    const int m = st.chart.base_dim;
    const int n = m + 1;
    VectorField v = fundamental_field(st.chart);
    TransverseConnection tc(st.total_conn, v, -st.sigma);
    std::vector<VectorField> frame = tc.frame(o, false);
    const int k = static_cast<int>(frame.size());

    // base point and base loop below o
    std::vector<double> base_coords(o.coords().begin(), o.coords().end() - 1);
    Point ob(base_coords);

    double worst_conj = 0.0;
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
            std::vector<Point> base_loop = rectangle_loop(ob, i, j, loop_size, loop_size);
            std::vector<Point> lifted_loop;
            for (const Point& p : base_loop) {
                std::vector<double> c(p.coords().begin(), p.coords().end());
                c.push_back(o[n - 1]);
                lifted_loop.push_back(Point(c));
            }
            OneForm a = st.chart.potential;
            Eigen::MatrixXd TD = tc.transport(lifted_loop, frame, &a);

            Eigen::MatrixXd PB =
                parallel_transport_frame(st.base_conn, base_loop, TransportOptions{});

            // ι in frame coordinates at o
            Eigen::MatrixXd Embed(n, k + 1);
            for (int a_i = 0; a_i < k; ++a_i) {
                std::vector<double> ev = frame[static_cast<size_t>(a_i)].eval<double>(o.coords());
                for (int r = 0; r < n; ++r) Embed(r, a_i) = ev[static_cast<size_t>(r)];
            }
            std::vector<double> xiv = v.eval<double>(o.coords());
            for (int r = 0; r < n; ++r) Embed(r, k) = xiv[static_cast<size_t>(r)];
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(Embed);

            std::vector<double> av = st.chart.potential.eval<double>(ob.coords());
            auto iota_coords = [&](const Eigen::VectorXd& u) {
                Eigen::VectorXd w(n);
                double au = 0.0;
                for (int r = 0; r < m; ++r) {
                    w(r) = u(r);
                    au += av[static_cast<size_t>(r)] * u(r);
                }
                w(m) = -au;
                Eigen::VectorXd c = lu.solve(w);
                return Eigen::VectorXd(c.head(k));
            };

            // φ_o : base coords -> frame coords, then TD ?= φ_o PB φ_o⁻¹
            Eigen::MatrixXd Phi(k, m);
            for (int c = 0; c < m; ++c) {
                Eigen::VectorXd e = Eigen::VectorXd::Zero(m);
                e(c) = 1.0;
                Phi.col(c) = iota_coords(e);
            }
            Eigen::MatrixXd conj = Phi * PB * Phi.inverse();
            worst_conj = std::max(worst_conj, (TD - conj).lpNorm<Eigen::Infinity>());
        }
    rep.add("transverse/base-loop-conjugation", worst_conj, tol_conj);

    // full fiber loop
    {
        std::vector<double> top(o.coords().begin(), o.coords().end());
        std::vector<Point> fiber_loop;
        for (int s = 0; s <= 4; ++s) {
            std::vector<double> c = top;
            c[static_cast<size_t>(n - 1)] += s * (2.0 * std::numbers::pi / 4.0);
            fiber_loop.push_back(Point(c));
        }
        Eigen::MatrixXd TD = tc.transport(fiber_loop, frame, nullptr);
        double res = (TD - Eigen::MatrixXd::Identity(k, k)).lpNorm<Eigen::Infinity>();
        rep.add("transverse/fiber-loop-trivial", res, tol_fiber);
    }
    return rep;
}

// Screen holonomy of the double bundle against the holonomy of the root
// base: leaf-tangent loop transports, projected to the screen, must span a
// conjugate of the base algebra.
inline SuiteReport verify_screen_holonomy(const RecurrentBundle& rb2, const KKStage& stage1,
                                          const Point& o, const HolonomyOptions& opt = {},
                                          double angle_tol = 1e-2) {
    SuiteReport rep{"screen-holonomy", {}, true};
    const int n = rb2.total_dim();   // 4
    const int m = rb2.base_dim();    // 3
    const int mb = stage1.chart.base_dim;  // 2
    std::vector<VectorField> E =
        rb2.transverse.frame(truncate_point(o, rb2.base_dim()), true);
    const int k = static_cast<int>(E.size());

    // leaf-tangent rectangles: coordinate planes not involving the top fiber
    std::vector<Eigen::MatrixXd> screen_logs;
    for (int i = 0; i < m; ++i)
        for (int j = i + 1; j < m; ++j) {
            double h = opt.loop_size;
            std::vector<Point> loop = rectangle_loop(o, i, j, h, h);
            Eigen::MatrixXd P =
                parallel_transport_frame(rb2.stage.total_conn, loop, opt.transport);
            ScreenFrame sf = screen_frame_at(rb2, E, o);
            Eigen::MatrixXd Q(k, k);
            for (int a = 0; a < k; ++a) {
                std::vector<double> sv =
                    rb2.lift_flat(E[static_cast<size_t>(a)]).eval<double>(o.coords());
                Eigen::VectorXd w(n);
                for (int r = 0; r < n; ++r) w(r) = sv[static_cast<size_t>(r)];
                Eigen::VectorXd transported = P * w;
                std::vector<double> tv(transported.data(), transported.data() + n);
                Q.col(a) = sf.screen(tv);
            }
            Eigen::MatrixXd lg = matrix_log(Q) / (h * h);
            if (lg.norm() > 1e-12) screen_logs.push_back(lg);
        }

    // base holonomy of the root metric
    std::vector<double> bc(o.coords().begin(), o.coords().begin() + mb);
    Point ob(bc);
    std::vector<Eigen::MatrixXd> base_logs;
    for (int i = 0; i < mb; ++i)
        for (int j = i + 1; j < mb; ++j) {
            double h = opt.loop_size;
            Eigen::MatrixXd P = parallel_transport_frame(
                stage1.base_conn, rectangle_loop(ob, i, j, h, h), opt.transport);
            Eigen::MatrixXd lg = matrix_log(P) / (h * h);
            if (lg.norm() > 1e-12) base_logs.push_back(lg);
        }

    // conjugation map L = q ∘ ι₂ ∘ ι₁ : root tangent -> screen
    ScreenFrame sf = screen_frame_at(rb2, E, o);
    std::vector<double> a1v = stage1.chart.potential.eval<double>(ob.coords());
    Eigen::MatrixXd L(k, mb);
    for (int c = 0; c < mb; ++c) {
        std::vector<double> w(static_cast<size_t>(n), 0.0);
        w[static_cast<size_t>(c)] = 1.0;
        double au = a1v[static_cast<size_t>(c)];
        w[static_cast<size_t>(mb)] = -au;  // ι₁ fiber component
        // ι₂ adds nothing: the flat stage-two potential vanishes on the chart
        L.col(c) = sf.screen(w);
    }

    std::vector<Eigen::MatrixXd> conjugated;
    for (const auto& M : base_logs) conjugated.push_back(L * M * L.inverse());

    HolonomyOptions ro = opt;
    HolonomyEstimate screen_est;
    screen_est.o = o;
    screen_est.generators = screen_logs;
    detail::finish_estimate(screen_est, ro);
    HolonomyEstimate base_est;
    base_est.o = ob;
    base_est.generators = conjugated;
    detail::finish_estimate(base_est, ro);

    rep.add("screen-holonomy/dimension-match",
            std::abs(screen_est.dimension - base_est.dimension), 0.0);
    double worst_angle = 0.0;
    if (screen_est.dimension > 0 && screen_est.dimension == base_est.dimension) {
        for (double a : principal_angles(screen_est.basis, base_est.basis))
            worst_angle = std::max(worst_angle, a);
    }
    rep.add("screen-holonomy/span-angle", worst_angle, angle_tol);
    return rep;
}

}  // namespace kk
