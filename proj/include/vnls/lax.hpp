#pragma once

#include <cmath>
#include <functional>
#include <utility>

#include "vnls/types.hpp"

namespace vnls {

/// Fixed constants of the continuous zero-curvature pair for an
/// N x N auxiliary problem with N-1 field components.
struct LaxParams {
    int n = 2;           // matrix size
    int kappa = -1;      // nonlinearity sign (+1 defocusing, -1 focusing)
    double rho = 1.0;    // 1/(n-1)
    double a = -0.5;     // -(rho+1)^{-1} = (1-n)/n
    Complex alpha;       // i*a
    Complex beta;        // sqrt(kappa), principal branch

    int ncomp() const { return n - 1; }

    /// Signature matrix diag(1,...,1,-kappa).
    CMatrix Q() const {
        CMatrix q = CMatrix::Identity(n, n);
        q(n - 1, n - 1) = -static_cast<double>(kappa);
        return q;
    }
};

inline LaxParams make_params(int n, int kappa) {
    if (n < 2) throw std::invalid_argument("make_params: need n >= 2");
    if (kappa != 1 && kappa != -1) throw std::invalid_argument("make_params: kappa must be +1 or -1");
    LaxParams p;
    p.n = n;
    p.kappa = kappa;
    p.rho = 1.0 / (n - 1);
    p.a = (1.0 - n) / n;
    p.alpha = kI * p.a;
    p.beta = (kappa == 1) ? Complex(1.0, 0.0) : kI;
    return p;
}

/// lambda-linear part: alpha * diag(rho,...,rho,-1). Traceless by the choice of rho.
inline CMatrix u1_matrix(const LaxParams& p) {
    CMatrix m = CMatrix::Zero(p.n, p.n);
    for (int k = 0; k + 1 < p.n; ++k) m(k, k) = p.alpha * p.rho;
    m(p.n - 1, p.n - 1) = -p.alpha;
    return m;
}

/// Field-dependent part: beta * (|u*> in the last column, <u| in the last row).
inline CMatrix u0_matrix(const LaxParams& p, const CVector& u) {
    CMatrix m = CMatrix::Zero(p.n, p.n);
    for (int k = 0; k + 1 < p.n; ++k) {
        m(k, p.n - 1) = p.beta * std::conj(u(k));
        m(p.n - 1, k) = p.beta * u(k);
    }
    return m;
}

inline CMatrix build_U(const LaxParams& p, const CVector& u, Complex lambda) {
    return lambda * u1_matrix(p) + u0_matrix(p, u);
}

inline CMatrix v0_matrix(const LaxParams& p, const CVector& u, const CVector& ux) {
    const int m = p.ncomp();
    const Complex ik = kI * static_cast<double>(p.kappa);
    CMatrix v = CMatrix::Zero(p.n, p.n);
    for (int r = 0; r < m; ++r)
        for (int c = 0; c < m; ++c) v(r, c) = ik * std::conj(u(r)) * u(c);
    for (int k = 0; k < m; ++k) {
        v(k, m) = -kI * p.beta * std::conj(ux(k));
        v(m, k) = kI * p.beta * ux(k);
    }
    v(m, m) = -ik * u.squaredNorm();
    return v;
}

inline CMatrix build_V(const LaxParams& p, const CVector& u, const CVector& ux, Complex lambda) {
    return -lambda * lambda * u1_matrix(p) - lambda * u0_matrix(p, u) + v0_matrix(p, u, ux);
}

/// || U(lambda) + Q U(lambda*)^dag Q ||_F  -- identically zero for the constructors above.
inline double reduction_residual_u(const LaxParams& p, const CVector& u, Complex lambda) {
    const CMatrix q = p.Q();
    const CMatrix lhs = build_U(p, u, lambda) + q * build_U(p, u, std::conj(lambda)).adjoint() * q;
    return lhs.norm();
}

inline double reduction_residual_v(const LaxParams& p, const CVector& u, const CVector& ux,
                                   Complex lambda) {
    const CMatrix q = p.Q();
    const CMatrix lhs =
        build_V(p, u, ux, lambda) + q * build_V(p, u, ux, std::conj(lambda)).adjoint() * q;
    return lhs.norm();
}

/// Same residual for an arbitrary constructor, for corrupted-parameter diagnostics.
inline double reduction_residual_of(const LaxParams& p, const CMatrix& m_at_lambda,
                                    const CMatrix& m_at_conj_lambda) {
    const CMatrix q = p.Q();
    return (m_at_lambda + q * m_at_conj_lambda.adjoint() * q).norm();
}

/// Fundamental solution of the zero-field auxiliary problem,
/// Psi = exp(U1 (mu x - mu^2 t)), diagonal, Psi(0,0) = 1.
inline CMatrix vacuum_fundamental(const LaxParams& p, Complex mu, double x, double t,
                                  double exponent_cap = 700.0) {
    const Complex s = mu * x - mu * mu * t;
    const Complex e_top = p.alpha * p.rho * s;
    const Complex e_bot = -p.alpha * s;
    if (std::abs(e_top.real()) > exponent_cap || std::abs(e_bot.real()) > exponent_cap)
        throw ExponentOverflow("vacuum_fundamental: exponent beyond cap");
    CMatrix psi = CMatrix::Zero(p.n, p.n);
    for (int k = 0; k + 1 < p.n; ++k) psi(k, k) = std::exp(e_top);
    psi(p.n - 1, p.n - 1) = std::exp(e_bot);
    return psi;
}

/// An evaluable field map (x,t) -> C^{n-1}. eval_dx defaults to a
/// centered fourth-order difference of eval.
struct FieldClosure {
    std::function<CVector(double, double)> eval;
    std::function<CVector(double, double)> eval_dx;

    FieldClosure() = default;
    explicit FieldClosure(std::function<CVector(double, double)> f,
                          std::function<CVector(double, double)> fx = nullptr)
        : eval(std::move(f)), eval_dx(std::move(fx)) {
        if (!eval_dx) {
            auto base = eval;
            eval_dx = [base](double x, double t) -> CVector {
                const double h = 1e-3;
                return (8.0 * (base(x + h, t) - base(x - h, t)) -
                        (base(x + 2 * h, t) - base(x - 2 * h, t))) /
                       (12.0 * h);
            };
        }
    }

    CVector operator()(double x, double t) const { return eval(x, t); }
};

inline FieldClosure zero_closure(int ncomp) {
    return FieldClosure([ncomp](double, double) { return CVector::Zero(ncomp).eval(); },
                        [ncomp](double, double) { return CVector::Zero(ncomp).eval(); });
}

struct IntegratorOptions {
    double max_step = 5e-3;   // RK4 step bound along each leg
    double exponent_cap = 700.0;
};

namespace detail {

template <typename Deriv>
CMatrix rk4_matrix_ode(CMatrix y, double s0, double s1, double max_step, const Deriv& f) {
    const double len = s1 - s0;
    if (len == 0.0) return y;
    const int nsteps = std::max(1, static_cast<int>(std::ceil(std::abs(len) / max_step)));
    const double h = len / nsteps;
    double s = s0;
    for (int i = 0; i < nsteps; ++i) {
        const CMatrix k1 = f(s) * y;
        const CMatrix k2 = f(s + 0.5 * h) * (y + 0.5 * h * k1);
        const CMatrix k3 = f(s + 0.5 * h) * (y + 0.5 * h * k2);
        const CMatrix k4 = f(s + h) * (y + h * k3);
        y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        if (!y.allFinite()) throw std::runtime_error("rk4_matrix_ode: non-finite state");
        s += h;
    }
    return y;
}

}  // namespace detail

/// Fundamental solution for a general field closure, integrated from (0,0):
/// t-leg at x=0 first, then the x-leg at fixed t. Set x_leg_first to probe
/// path independence (a zero-curvature diagnostic, not an error).
inline CMatrix numeric_fundamental(const LaxParams& p, const FieldClosure& u, Complex mu, double x,
                                   double t, const IntegratorOptions& opt = {},
                                   bool x_leg_first = false) {
    CMatrix psi = CMatrix::Identity(p.n, p.n);
    auto t_deriv = [&](double xf) {
        return [&, xf](double s) { return build_V(p, u.eval(xf, s), u.eval_dx(xf, s), mu); };
    };
    auto x_deriv = [&](double tf) {
        return [&, tf](double s) { return build_U(p, u.eval(s, tf), mu); };
    };
    if (x_leg_first) {
        psi = detail::rk4_matrix_ode(std::move(psi), 0.0, x, opt.max_step, x_deriv(0.0));
        psi = detail::rk4_matrix_ode(std::move(psi), 0.0, t, opt.max_step, t_deriv(x));
    } else {
        psi = detail::rk4_matrix_ode(std::move(psi), 0.0, t, opt.max_step, t_deriv(0.0));
        psi = detail::rk4_matrix_ode(std::move(psi), 0.0, x, opt.max_step, x_deriv(t));
    }
    return psi;
}

inline double path_swap_discrepancy(const LaxParams& p, const FieldClosure& u, Complex mu, double x,
                                    double t, const IntegratorOptions& opt = {}) {
    const CMatrix a = numeric_fundamental(p, u, mu, x, t, opt, false);
    const CMatrix b = numeric_fundamental(p, u, mu, x, t, opt, true);
    return (a - b).norm();
}

}  // namespace vnls
