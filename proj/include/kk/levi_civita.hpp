#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <optional>
#include <span>
#include <vector>

#include "kk/calculus.hpp"
#include "kk/field.hpp"

namespace kk {

// Γ^k_{ij} = ½ g^{kl}(∂_i g_{jl} + ∂_j g_{il} − ∂_l g_{ij}); symmetric in
// (i, j) and metric-compatible by construction, both re-checked in tests.
template <class T>
Ten3<T> christoffel_at(const MetricField& g, std::span<const T> x) {
    static_assert(jet_level_v<T> < max_jet_level, "christoffel exceeds jet depth");
    const int n = g.rows();
    JetMat<T> jg = value_and_grad_mat(g, x);
    Mat<T> ginv = inverse(jg.v);
    Ten3<T> gamma(n, n, n);
    for (int k = 0; k < n; ++k)
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) {
                T acc{};
                for (int l = 0; l < n; ++l)
                    acc = acc + ginv(k, l) * (jg.d(i, j, l) + jg.d(j, i, l) - jg.d(l, i, j));
                acc = 0.5 * acc;
                gamma(k, i, j) = acc;
                gamma(k, j, i) = acc;
            }
    return gamma;
}

// R(e_i, e_j) e_k = R^l_{kij} e_l with
// R^l_{kij} = ∂_i Γ^l_{jk} − ∂_j Γ^l_{ik} + Γ^l_{iμ} Γ^μ_{jk} − Γ^l_{jμ} Γ^μ_{ik}
template <class T>
Ten4<T> riemann_at(const MetricField& g, std::span<const T> x) {
    static_assert(jet_level_v<T> + 1 < max_jet_level, "riemann exceeds jet depth");
    const int n = g.rows();
    Ten3<T> gamma(n, n, n);
    std::vector<Ten3<T>> dgamma(n);  // dgamma[d] = ∂_d Γ
    for (int dir = 0; dir < n; ++dir) {
        std::vector<Dual<T>> xs = lifted(x, dir);
        Ten3<Dual<T>> gd = christoffel_at(g, std::span<const Dual<T>>(xs));
        dgamma[dir] = Ten3<T>(n, n, n);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c) {
                    if (dir == 0) gamma(a, b, c) = gd(a, b, c).a;
                    dgamma[dir](a, b, c) = gd(a, b, c).b;
                }
    }
    Ten4<T> R(n, n, n, n);  // (l, k, i, j)
    for (int l = 0; l < n; ++l)
        for (int k = 0; k < n; ++k)
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) {
                    T acc = dgamma[i](l, j, k) - dgamma[j](l, i, k);
                    for (int m = 0; m < n; ++m)
                        acc = acc + gamma(l, i, m) * gamma(m, j, k) -
                              gamma(l, j, m) * gamma(m, i, k);
                    R(l, k, i, j) = acc;
                }
    return R;
}

// R(u, w) as a matrix acting on tangent vectors at p.
inline Mat<double> riemann_operator(const Ten4<double>& R, std::span<const double> u,
                                    std::span<const double> w) {
    const int n = R.n0;
    Mat<double> M(n, n);
    for (int l = 0; l < n; ++l)
        for (int k = 0; k < n; ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) acc += R(l, k, i, j) * u[i] * w[j];
            M(l, k) = acc;
        }
    return M;
}

class LeviCivita {
public:
    LeviCivita() = default;
    explicit LeviCivita(MetricField g) : g_(std::move(g)) {}

    const MetricField& metric() const { return g_; }
    int dim() const { return g_.rows(); }

    template <class T>
    Ten3<T> christoffel(std::span<const T> x) const {
        return christoffel_at(g_, x);
    }

    // single symbol as a scalar field, for callers that want Γ^k_{ij}
    ScalarField christoffel_component(int k, int i, int j) const {
        MetricField g = g_;
        return ScalarField(g.arity(), g.max_order() - 1, [g, k, i, j](auto x) {
            using T = detail::scalar_of<decltype(x)>;
            if constexpr (jet_level_v<T> >= max_jet_level) {
                throw OrderError("christoffel_component: jet depth exhausted");
                return T{};
            } else {
                return christoffel_at(g, x)(k, i, j);
            }
        });
    }

    template <class T>
    Ten4<T> riemann(std::span<const T> x) const {
        return riemann_at(g_, x);
    }

private:
    MetricField g_;
};

// (∇_dir arg)^k = dir^i (∂_i arg^k + Γ^k_{ij} arg^j); tensorial in `dir`.
inline VectorField covariant_derivative(const LeviCivita& conn, const VectorField& dir,
                                        const VectorField& arg) {
    const int n = dir.arity();
    MetricField g = conn.metric();
    int order = std::min({g.max_order() - 1, arg.max_order() - 1, dir.max_order()});
    return VectorField(n, order, [g, dir, arg, n](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        using R = std::vector<T>;
        if constexpr (jet_level_v<T> >= max_jet_level) {
            throw OrderError("covariant_derivative: jet depth exhausted");
            return R{};
        } else {
            Ten3<T> gamma = christoffel_at(g, x);
            JetVec<T> ja = value_and_jac(arg, x);
            std::vector<T> dv = dir.eval(x);
            R out(n);
            for (int k = 0; k < n; ++k) {
                T acc{};
                for (int i = 0; i < n; ++i) {
                    T term = ja.d(k, i);
                    for (int j = 0; j < n; ++j) term = term + gamma(k, i, j) * ja.v[j];
                    acc = acc + dv[i] * term;
                }
                out[k] = acc;
            }
            return out;
        }
    });
}

// (∇_X S)_{jk} for a covariant 2-tensor S, evaluated pointwise.
template <class Cov2>
Mat<double> covariant_derivative_cov2_at(const LeviCivita& conn, const Cov2& S,
                                         std::span<const double> xv,
                                         std::span<const double> x) {
    const int n = conn.dim();
    Ten3<double> gamma = conn.christoffel(x);
    JetMat<double> js = value_and_grad_mat(S, x);
    Mat<double> out(n, n);
    for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) {
            double acc = 0.0;
            for (int i = 0; i < n; ++i) {
                double term = js.d(i, j, k);
                for (int m = 0; m < n; ++m)
                    term -= gamma(m, i, j) * js.v(m, k) + gamma(m, i, k) * js.v(j, m);
                acc += xv[i] * term;
            }
            out(j, k) = acc;
        }
    return out;
}

// (∇_X Φ)^k_j for a (1,1) tensor, as a field in the last slot.
inline EndomorphismField covariant_derivative_endo(const LeviCivita& conn,
                                                   const EndomorphismField& phi,
                                                   const VectorField& dir) {
    const int n = conn.dim();
    MetricField g = conn.metric();
    int order = std::min({g.max_order() - 1, phi.max_order() - 1, dir.max_order()});
    return EndomorphismField(n, order, [g, phi, dir, n](auto x) {
        using T = detail::scalar_of<decltype(x)>;
        using R = Mat<T>;
        if constexpr (jet_level_v<T> >= max_jet_level) {
            throw OrderError("covariant_derivative_endo: jet depth exhausted");
            return R{};
        } else {
            Ten3<T> gamma = christoffel_at(g, x);
            JetMat<T> jp = value_and_grad_mat(phi, x);
            std::vector<T> dv = dir.eval(x);
            R out(n, n);
            for (int k = 0; k < n; ++k)
                for (int j = 0; j < n; ++j) {
                    T acc{};
                    for (int i = 0; i < n; ++i) {
                        T term = jp.d(i, k, j);
                        for (int m = 0; m < n; ++m)
                            term = term + gamma(k, i, m) * jp.v(m, j) -
                                   gamma(m, i, j) * jp.v(k, m);
                        acc = acc + dv[i] * term;
                    }
                    out(k, j) = acc;
                }
            return out;
        }
    });
}

// parallel transport ---------------------------------------------------------

struct TransportOptions {
    int initial_steps = 32;       // RK4 steps per polyline segment
    double tolerance = 1e-9;      // step-halving convergence target
    int max_doublings = 9;
};

namespace detail {

// one RK4 pass of V' = −M(x(t)) V over a polyline, V is dim x m
inline Eigen::MatrixXd transport_rk4(const LeviCivita& conn,
                                     const std::vector<Point>& waypoints,
                                     Eigen::MatrixXd V, int steps_per_segment) {
    const int n = conn.dim();
    auto M_at = [&](const std::vector<double>& x, const std::vector<double>& vel) {
        Ten3<double> gamma = conn.christoffel(std::span<const double>(x));
        Eigen::MatrixXd M(n, n);
        for (int k = 0; k < n; ++k)
            for (int j = 0; j < n; ++j) {
                double acc = 0.0;
                for (int i = 0; i < n; ++i) acc += gamma(k, i, j) * vel[i];
                M(k, j) = acc;
            }
        return M;
    };
    for (size_t s = 0; s + 1 < waypoints.size(); ++s) {
        const Point& a = waypoints[s];
        const Point& b = waypoints[s + 1];
        std::vector<double> vel(n);
        bool moving = false;
        for (int i = 0; i < n; ++i) {
            vel[i] = b[i] - a[i];
            if (vel[i] != 0.0) moving = true;
        }
        if (!moving) continue;
        const double h = 1.0 / steps_per_segment;
        for (int step = 0; step < steps_per_segment; ++step) {
            double t0 = step * h;
            auto pos = [&](double t) {
                std::vector<double> x(n);
                for (int i = 0; i < n; ++i) x[i] = a[i] + t * vel[i];
                return x;
            };
            Eigen::MatrixXd k1 = -M_at(pos(t0), vel) * V;
            Eigen::MatrixXd k2 = -M_at(pos(t0 + 0.5 * h), vel) * (V + 0.5 * h * k1);
            Eigen::MatrixXd k3 = -M_at(pos(t0 + 0.5 * h), vel) * (V + 0.5 * h * k2);
            Eigen::MatrixXd k4 = -M_at(pos(t0 + h), vel) * (V + h * k3);
            V += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        }
    }
    return V;
}

}  // namespace detail

// Transport the full coordinate frame along the polyline; columns of the
// result are the transported basis vectors. Step count doubles until two
// successive refinements agree to the requested tolerance.
inline Eigen::MatrixXd parallel_transport_frame(const LeviCivita& conn,
                                                const std::vector<Point>& waypoints,
                                                const TransportOptions& opt = {},
                                                double* achieved = nullptr) {
    const int n = conn.dim();
    Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
    int steps = opt.initial_steps;
    Eigen::MatrixXd prev = detail::transport_rk4(conn, waypoints, I, steps);
    for (int it = 0; it < opt.max_doublings; ++it) {
        steps *= 2;
        Eigen::MatrixXd next = detail::transport_rk4(conn, waypoints, I, steps);
        double diff = (next - prev).norm();
        if (diff < opt.tolerance) {
            if (achieved) *achieved = diff;
            return next;
        }
        prev = next;
    }
    double diff = -1.0;
    {
        Eigen::MatrixXd next = detail::transport_rk4(conn, waypoints, I, steps * 2);
        diff = (next - prev).norm();
    }
    throw ConvergenceError("parallel transport did not converge; achieved " +
                               std::to_string(diff),
                           diff);
}

inline std::vector<double> parallel_transport(const LeviCivita& conn,
                                              const std::vector<Point>& waypoints,
                                              std::span<const double> v0,
                                              const TransportOptions& opt = {},
                                              double* achieved = nullptr) {
    Eigen::MatrixXd P = parallel_transport_frame(conn, waypoints, opt, achieved);
    const int n = conn.dim();
    std::vector<double> out(n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) out[i] += P(i, j) * v0[j];
    return out;
}

// small coordinate rectangle in the (i, j) plane based at o
inline std::vector<Point> rectangle_loop(const Point& o, int i, int j, double hi, double hj) {
    auto shift = [&](double di, double dj) {
        std::vector<double> c(o.coords().begin(), o.coords().end());
        c[static_cast<size_t>(i)] += di;
        c[static_cast<size_t>(j)] += dj;
        return Point(c);
    };
    return {o, shift(hi, 0), shift(hi, hj), shift(0, hj), o};
}

// transverse connection ------------------------------------------------------

// Covariant derivative on ξ^⊥ for a unit field g(ξ,ξ) = σ: along ξ the
// derivative is p([ξ, ·]), in ξ^⊥-directions it is p(∇ ·).
class TransverseConnection {
public:
    TransverseConnection() = default;
    TransverseConnection(LeviCivita conn, VectorField xi, int sigma)
        : conn_(std::move(conn)), xi_(std::move(xi)), sigma_(sigma) {}

    const LeviCivita& ambient() const { return conn_; }
    const VectorField& xi() const { return xi_; }
    int sigma() const { return sigma_; }

    // orthogonal projection of a tangent value onto ξ^⊥ at x
    template <class T>
    std::vector<T> project(std::span<const T> x, std::vector<T> vec) const {
        Mat<T> gv = conn_.metric().eval(x);
        std::vector<T> xiv = xi_.eval(x);
        T coef = pair(gv, std::span<const T>(vec), std::span<const T>(xiv)) *
                 static_cast<double>(sigma_);
        for (size_t i = 0; i < vec.size(); ++i) vec[i] = vec[i] - coef * xiv[i];
        return vec;
    }

    EndomorphismField projector() const {
        MetricField g = conn_.metric();
        VectorField xi = xi_;
        double sigma = sigma_;
        const int n = g.rows();
        return EndomorphismField(n, std::min(g.max_order(), xi.max_order()),
                                 [g, xi, sigma, n](auto x) {
                                     using T = detail::scalar_of<decltype(x)>;
                                     Mat<T> gv = g.eval(x);
                                     std::vector<T> xiv = xi.eval(x);
                                     Mat<T> out(n, n);
                                     for (int i = 0; i < n; ++i) {
                                         out(i, i) = T(1.0);
                                         for (int j = 0; j < n; ++j) {
                                             T eta_j{};
                                             for (int k = 0; k < n; ++k)
                                                 eta_j = eta_j + gv(j, k) * xiv[k];
                                             out(i, j) = out(i, j) - sigma * xiv[i] * eta_j;
                                         }
                                     }
                                     return out;
                                 });
    }

    // ∇^D_dir arg with the direction decomposed as α ξ + p(dir), α = σ g(dir, ξ).
    // `arg` must be a section of ξ^⊥; the violation is checked pointwise.
    VectorField derivative(const VectorField& dir, const VectorField& arg,
                           double section_tol = 1e-10) const {
        const int n = conn_.dim();
        MetricField g = conn_.metric();
        VectorField xi = xi_;
        double sigma = sigma_;
        int order =
            std::min({g.max_order() - 1, arg.max_order() - 1, xi.max_order() - 1,
                      dir.max_order()});
        return VectorField(n, order, [g, xi, sigma, dir, arg, n, section_tol](auto x) {
            using T = detail::scalar_of<decltype(x)>;
            using R = std::vector<T>;
            if constexpr (jet_level_v<T> >= max_jet_level) {
                throw OrderError("transverse derivative: jet depth exhausted");
                return R{};
            } else {
                Mat<T> gv = g.eval(x);
                std::vector<T> xiv = xi.eval(x);
                JetVec<T> ja = value_and_jac(arg, x);
                JetVec<T> jxi = value_and_jac(xi, x);
                std::vector<T> dv = dir.eval(x);

                T viol = pair(gv, std::span<const T>(ja.v), std::span<const T>(xiv));
                if (std::abs(primal(viol)) > section_tol)
                    throw SectionError("transverse derivative: argument is not a "
                                       "section of the transverse bundle",
                                       std::abs(primal(viol)));

                T alpha = pair(gv, std::span<const T>(dv), std::span<const T>(xiv)) * sigma;
                // p(dir)
                std::vector<T> w(n);
                for (int i = 0; i < n; ++i) w[i] = dv[i] - alpha * xiv[i];

                // [ξ, arg]
                std::vector<T> br(n);
                for (int k = 0; k < n; ++k) {
                    T acc{};
                    for (int j = 0; j < n; ++j)
                        acc = acc + xiv[j] * ja.d(k, j) - ja.v[j] * jxi.d(k, j);
                    br[k] = acc;
                }
                // ∇_w arg
                Ten3<T> gamma = christoffel_at(g, x);
                std::vector<T> cov(n);
                for (int k = 0; k < n; ++k) {
                    T acc{};
                    for (int i = 0; i < n; ++i) {
                        T term = ja.d(k, i);
                        for (int j = 0; j < n; ++j) term = term + gamma(k, i, j) * ja.v[j];
                        acc = acc + w[i] * term;
                    }
                    cov[k] = acc;
                }
                // project both pieces
                auto project = [&](std::vector<T> vec) {
                    T coef =
                        pair(gv, std::span<const T>(vec), std::span<const T>(xiv)) * sigma;
                    for (int i = 0; i < n; ++i) vec[i] = vec[i] - coef * xiv[i];
                    return vec;
                };
                std::vector<T> pb = project(br);
                std::vector<T> pc = project(cov);
                R out(n);
                for (int i = 0; i < n; ++i) out[i] = alpha * pb[i] + pc[i];
                return out;
            }
        });
    }

    // R^D(X, Y)Z = ∇^D_X ∇^D_Y Z − ∇^D_Y ∇^D_X Z − ∇^D_{[X,Y]} Z
    VectorField curvature(const VectorField& X, const VectorField& Y,
                          const VectorField& Z) const {
        VectorField dYZ = derivative(Y, Z);
        VectorField dXZ = derivative(X, Z);
        return derivative(X, dYZ) - derivative(Y, dXZ) - derivative(lie_bracket(X, Y), Z);
    }

    // A frame of ξ^⊥ from projected coordinate fields, optionally
    // Gram-Schmidt normalized (the restriction of g to ξ^⊥ must be
    // positive definite for the normalized variant).
    std::vector<VectorField> frame(const Point& center, bool orthonormal = false) const {
        const int n = conn_.dim();
        MetricField g = conn_.metric();
        VectorField xi = xi_;
        double sigma = sigma_;

        // deterministic choice: keep the n−1 projected coordinate fields of
        // largest norm at the chart center
        std::vector<std::pair<double, int>> ranked;
        Mat<double> gv = g.at(center);
        std::vector<double> xiv = xi.at(center);
        for (int c = 0; c < n; ++c) {
            std::vector<double> e(n, 0.0);
            e[c] = 1.0;
            double coef = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) coef += gv(i, j) * e[i] * xiv[j];
            coef *= sigma;
            for (int i = 0; i < n; ++i) e[i] -= coef * xiv[i];
            double norm2 = 0.0;
            for (int i = 0; i < n; ++i)
                for (int j = 0; j < n; ++j) norm2 += gv(i, j) * e[i] * e[j];
            ranked.push_back({-std::abs(norm2), c});
        }
        std::stable_sort(ranked.begin(), ranked.end());

        std::vector<VectorField> fields;
        for (int r = 0; r < n - 1; ++r) {
            int c = ranked[static_cast<size_t>(r)].second;
            VectorField pe(n, std::min(g.max_order(), xi.max_order()),
                           [g, xi, sigma, c, n](auto x) {
                               using T = detail::scalar_of<decltype(x)>;
                               Mat<T> gm = g.eval(x);
                               std::vector<T> xv = xi.eval(x);
                               std::vector<T> e(n, T(0.0));
                               e[c] = T(1.0);
                               T coef{};
                               for (int j = 0; j < n; ++j) coef = coef + gm(c, j) * xv[j];
                               coef = coef * sigma;
                               for (int i = 0; i < n; ++i) e[i] = e[i] - coef * xv[i];
                               return e;
                           });
            fields.push_back(pe);
        }
        if (!orthonormal) return fields;

        std::vector<VectorField> onb;
        for (size_t k = 0; k < fields.size(); ++k) {
            VectorField f = fields[k];
            for (size_t l = 0; l < onb.size(); ++l) {
                VectorField prev = onb[l];
                f = f - metric_pair(g, f, prev) * prev;
            }
            VectorField normalized(n, f.max_order(), [g, f](auto x) {
                using T = detail::scalar_of<decltype(x)>;
                std::vector<T> fv = f.eval(x);
                Mat<T> gm = g.eval(x);
                T nrm = sqrt(pair(gm, std::span<const T>(fv), std::span<const T>(fv)));
                for (auto& c : fv) c = c / nrm;
                return fv;
            });
            onb.push_back(normalized);
        }
        return onb;
    }

    // ∇^D-transport of the frame along a path; `bundle_drop` is the
    // per-point direction. Returns the transport matrix in frame
    // coordinates (components of transported E_a over E_b at the end).
    Eigen::MatrixXd transport(const std::vector<Point>& waypoints,
                              const std::vector<VectorField>& frame_fields,
                              const OneForm* horizontal_potential = nullptr,
                              const TransportOptions& opt = {}) const {
        const int n = conn_.dim();
        const int m = static_cast<int>(frame_fields.size());

        // coefficient matrix C^b_a(x, vel): ∇^D_vel E_a = C^b_a E_b (+ ξ comp ~ 0)
        auto coeffs = [&](const std::vector<double>& x) {
            std::span<const double> xs(x);
            Eigen::MatrixXd E(n, m + 1);
            for (int a = 0; a < m; ++a) {
                std::vector<double> ev = frame_fields[static_cast<size_t>(a)].eval(xs);
                for (int i = 0; i < n; ++i) E(i, a) = ev[i];
            }
            std::vector<double> xiv = xi_.eval(xs);
            for (int i = 0; i < n; ++i) E(i, m) = xiv[i];
            return E;
        };

        auto M_at = [&](const std::vector<double>& x, std::vector<double> vel) {
            std::span<const double> xs(x);
            if (horizontal_potential) {
                // horizontal lift direction: subtract a(vel) along the fiber
                std::vector<double> av =
                    horizontal_potential->eval(std::span<const double>(xs.first(
                        static_cast<size_t>(horizontal_potential->arity()))));
                double a_of_vel = 0.0;
                for (size_t i = 0; i < av.size(); ++i) a_of_vel += av[i] * vel[i];
                vel[static_cast<size_t>(n - 1)] -= a_of_vel;
            }
            VectorField dir = VectorField(n, max_jet_level, [vel, n](auto xx) {
                using T = detail::scalar_of<decltype(xx)>;
                (void)xx;
                std::vector<T> out(n);
                for (int i = 0; i < n; ++i) out[i] = T(vel[static_cast<size_t>(i)]);
                return out;
            });
            Eigen::MatrixXd C(m, m);
            Eigen::MatrixXd E = coeffs(x);
            Eigen::PartialPivLU<Eigen::MatrixXd> lu(E);
            for (int a = 0; a < m; ++a) {
                VectorField deriv = derivative(dir, frame_fields[static_cast<size_t>(a)]);
                std::vector<double> dv = deriv.eval(xs);
                Eigen::VectorXd rhs(n);
                for (int i = 0; i < n; ++i) rhs(i) = dv[i];
                Eigen::VectorXd sol = lu.solve(rhs);
                for (int b = 0; b < m; ++b) C(b, a) = sol(b);
            }
            return C;
        };

        auto run = [&](int steps_per_segment) {
            Eigen::MatrixXd V = Eigen::MatrixXd::Identity(m, m);
            for (size_t s = 0; s + 1 < waypoints.size(); ++s) {
                const Point& a = waypoints[s];
                const Point& b = waypoints[s + 1];
                std::vector<double> vel(n);
                bool moving = false;
                for (int i = 0; i < n; ++i) {
                    vel[i] = b[i] - a[i];
                    if (vel[i] != 0.0) moving = true;
                }
                if (!moving) continue;
                const double h = 1.0 / steps_per_segment;
                for (int step = 0; step < steps_per_segment; ++step) {
                    double t0 = step * h;
                    auto pos = [&](double t) {
                        std::vector<double> x(n);
                        for (int i = 0; i < n; ++i) x[i] = a[i] + t * vel[i];
                        return x;
                    };
                    Eigen::MatrixXd k1 = -M_at(pos(t0), vel) * V;
                    Eigen::MatrixXd k2 = -M_at(pos(t0 + 0.5 * h), vel) * (V + 0.5 * h * k1);
                    Eigen::MatrixXd k3 = -M_at(pos(t0 + 0.5 * h), vel) * (V + 0.5 * h * k2);
                    Eigen::MatrixXd k4 = -M_at(pos(t0 + h), vel) * (V + h * k3);
                    V += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                }
            }
            return V;
        };

        int steps = opt.initial_steps;
        Eigen::MatrixXd prev = run(steps);
        for (int it = 0; it < opt.max_doublings; ++it) {
            steps *= 2;
            Eigen::MatrixXd next = run(steps);
            if ((next - prev).norm() < opt.tolerance) return next;
            prev = next;
        }
        throw ConvergenceError("transverse transport did not converge", -1.0);
    }

private:
    LeviCivita conn_;
    VectorField xi_;
    int sigma_ = 1;
};

// max |(L_ξ g)_{ij}| over the sample points
inline double killing_residual(const MetricField& g, const VectorField& xi,
                               std::span<const Point> grid) {
    double worst = 0.0;
    for (const Point& p : grid) {
        Mat<double> lie = lie_derivative_cov2_at(g, xi, p);
        for (double v : lie.d) worst = std::max(worst, std::abs(v));
    }
    return worst;
}

}  // namespace kk
