#pragma once

#include <vector>

#include "vnls/lax.hpp"
#include "vnls/types.hpp"

namespace vnls {

/// Sampled complex vector field on a rectangular space-time grid.
/// Stored row-major in time: values[it*nx + ix] is u(x0+ix*dx, t0+it*dt).
struct FieldGrid {
    double x0 = 0.0, dx = 0.0;
    double t0 = 0.0, dt = 0.0;
    int nx = 0, nt = 0, ncomp = 0;
    std::vector<CVector> values;

    FieldGrid() = default;
    FieldGrid(double x0_, double dx_, int nx_, double t0_, double dt_, int nt_, int ncomp_)
        : x0(x0_), dx(dx_), t0(t0_), dt(dt_), nx(nx_), nt(nt_), ncomp(ncomp_) {
        if (nx < 5 || nt < 3) throw std::invalid_argument("FieldGrid: need nx >= 5 and nt >= 3");
        if (dx <= 0.0 || dt <= 0.0) throw std::invalid_argument("FieldGrid: need dx, dt > 0");
        values.assign(static_cast<size_t>(nx) * nt, CVector::Zero(ncomp));
    }

    double x(int ix) const { return x0 + ix * dx; }
    double t(int it) const { return t0 + it * dt; }
    const CVector& at(int it, int ix) const { return values[static_cast<size_t>(it) * nx + ix]; }
    CVector& at(int it, int ix) { return values[static_cast<size_t>(it) * nx + ix]; }

    bool congruent(const FieldGrid& o) const {
        return x0 == o.x0 && dx == o.dx && nx == o.nx && t0 == o.t0 && dt == o.dt && nt == o.nt &&
               ncomp == o.ncomp;
    }
};

inline FieldGrid sample_closure(const FieldClosure& u, int ncomp, double x0, double dx, int nx,
                                double t0, double dt, int nt) {
    FieldGrid g(x0, dx, nx, t0, dt, nt, ncomp);
    for (int it = 0; it < nt; ++it)
        for (int ix = 0; ix < nx; ++ix) g.at(it, ix) = u.eval(g.x(ix), g.t(it));
    return g;
}

namespace stencil {

/// Fourth-order second derivative in x at interior index ix in [2, nx-2).
inline CVector d2x(const FieldGrid& g, int it, int ix) {
    return (-g.at(it, ix - 2) + 16.0 * g.at(it, ix - 1) - 30.0 * g.at(it, ix) +
            16.0 * g.at(it, ix + 1) - g.at(it, ix + 2)) /
           (12.0 * g.dx * g.dx);
}

/// Fourth-order first derivative in x.
inline CVector d1x(const FieldGrid& g, int it, int ix) {
    return (8.0 * (g.at(it, ix + 1) - g.at(it, ix - 1)) - (g.at(it, ix + 2) - g.at(it, ix - 2))) /
           (12.0 * g.dx);
}

/// Second-order first derivative in t at interior index it in [1, nt-1).
inline CVector d1t(const FieldGrid& g, int it, int ix) {
    return (g.at(it + 1, ix) - g.at(it - 1, ix)) / (2.0 * g.dt);
}

}  // namespace stencil

/// Pointwise |i u_t + u_xx - 2 kappa |u|^2 u| over the interior,
/// fourth order in x and second order in t. Result is (nt-2) x (nx-4).
inline RMatrix vnls_residual(const FieldGrid& g, int kappa) {
    if (g.nx < 5 || g.nt < 3) throw std::invalid_argument("vnls_residual: grid too small");
    RMatrix r(g.nt - 2, g.nx - 4);
    for (int it = 1; it + 1 < g.nt; ++it) {
        for (int ix = 2; ix + 2 < g.nx; ++ix) {
            const CVector& u = g.at(it, ix);
            const CVector res = kI * stencil::d1t(g, it, ix) + stencil::d2x(g, it, ix) -
                                2.0 * static_cast<double>(kappa) * u.squaredNorm() * u;
            r(it - 1, ix - 2) = res.norm();
        }
    }
    return r;
}

/// Max over the interior of || U_t - V_x + [U,V] ||_F with matrix entries
/// differenced on the grid (x margin widened so V's u_x stencil stays interior).
inline double zero_curvature_residual(const FieldGrid& g, const LaxParams& p, Complex lambda) {
    if (g.nx < 9 || g.nt < 3) throw std::invalid_argument("zero_curvature_residual: grid too small");
    auto u_mat = [&](int it, int ix) { return build_U(p, g.at(it, ix), lambda); };
    auto v_mat = [&](int it, int ix) {
        return build_V(p, g.at(it, ix), stencil::d1x(g, it, ix), lambda);
    };
    double worst = 0.0;
    for (int it = 1; it + 1 < g.nt; ++it) {
        for (int ix = 4; ix + 4 < g.nx; ++ix) {
            const CMatrix ut = (u_mat(it + 1, ix) - u_mat(it - 1, ix)) / (2.0 * g.dt);
            const CMatrix vx = (8.0 * (v_mat(it, ix + 1) - v_mat(it, ix - 1)) -
                                (v_mat(it, ix + 2) - v_mat(it, ix - 2))) /
                               (12.0 * g.dx);
            const CMatrix u = u_mat(it, ix);
            const CMatrix v = v_mat(it, ix);
            worst = std::max(worst, (ut - vx + u * v - v * u).norm());
        }
    }
    return worst;
}

}  // namespace vnls
