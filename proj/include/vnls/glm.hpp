#pragma once

#include <vector>

#include "vnls/types.hpp"

namespace vnls::glm {

/// Constant coefficients of the two bare operators: the diagonal of the
/// first-order one and the time coefficient of the second-order one.
struct BareOperatorSpec {
    Eigen::VectorXd alpha;  // size n, all entries nonzero
    double a = -0.5;
};

inline BareOperatorSpec default_bare(int n, double a = -0.5) {
    BareOperatorSpec b;
    b.alpha = Eigen::VectorXd::Constant(n, -1.0);
    b.alpha(0) = 1.0;
    b.a = a;
    return b;
}

/// One separable term of the kernel data for one component: polarization
/// amplitudes and the six exponents.
struct KernelTerm {
    Complex b{}, bhat{};
    Complex lam{}, mu{}, lamhat{}, muhat{};
    Complex Lam{}, Lamhat{};
};

/// Degenerate-kernel data: per component j in {2..n} (stored 0-based) and per
/// spectral term.
struct KernelSpec {
    int n = 2;        // matrix size
    int nterms = 1;
    BareOperatorSpec bare;
    std::vector<std::vector<KernelTerm>> terms;  // [component][term]

    int ncomp() const { return n - 1; }
    const KernelTerm& at(int comp, int alpha) const { return terms[comp][alpha]; }
};

/// Recomputes the time exponents from the dispersion relations and enforces
/// the direction and decay constraints of the bare operators.
inline KernelSpec validate_kernel(KernelSpec spec, double tol = 1e-9) {
    const int m = spec.ncomp();
    if (static_cast<int>(spec.terms.size()) != m)
        throw std::invalid_argument("validate_kernel: component count mismatch");
    if (spec.bare.alpha.size() != spec.n || spec.bare.alpha(0) == 0.0)
        throw std::invalid_argument("validate_kernel: bad bare operator diagonal");
    const double a = spec.bare.a;
    for (int c = 0; c < m; ++c) {
        if (static_cast<int>(spec.terms[c].size()) != spec.nterms)
            throw std::invalid_argument("validate_kernel: term count mismatch");
        const double a1 = spec.bare.alpha(0);
        const double aj = spec.bare.alpha(c + 1);
        if (aj == 0.0) throw std::invalid_argument("validate_kernel: zero alpha entry");
        for (auto& term : spec.terms[c]) {
            if (std::abs(a1 * term.lam + aj * term.mu) > tol)
                throw DispersionMismatch("validate_kernel: direction constraint violated (f)");
            if (std::abs(aj * term.lamhat + a1 * term.muhat) > tol)
                throw DispersionMismatch("validate_kernel: direction constraint violated (fhat)");
            const Complex Lam = (term.lam * term.lam - term.mu * term.mu) / a;
            const Complex Lamhat = (term.lamhat * term.lamhat - term.muhat * term.muhat) / a;
            if (std::abs(term.Lam - Lam) > tol || std::abs(term.Lamhat - Lamhat) > tol)
                throw DispersionMismatch("validate_kernel: dispersion relation violated");
            term.Lam = Lam;
            term.Lamhat = Lamhat;
        }
    }
    // decay of every [x, inf) integral actually formed below
    for (int i = 0; i < m; ++i) {
        for (const auto& ti : spec.terms[i]) {
            for (const auto& tg : spec.terms[i])
                if ((tg.lamhat + ti.mu).imag() <= 0.0)
                    throw NonDecaying("validate_kernel: Im(lamhat + mu) must be positive");
            for (int j = 0; j < m; ++j)
                for (const auto& tj : spec.terms[j])
                    if ((tj.lam + ti.muhat).imag() <= 0.0)
                        throw NonDecaying("validate_kernel: Im(lam + muhat) must be positive");
        }
    }
    return spec;
}

/// The two families of decay integrals, and their analytic x-derivatives.
/// P[i](beta,gamma) pairs Z_i^beta with Xhat_i^gamma; Phat[i][j](gamma,alpha)
/// pairs Zhat_i^gamma with X_j^alpha.
struct PMatrices {
    std::vector<CMatrix> P;                   // [comp] (nterms x nterms)
    std::vector<std::vector<CMatrix>> Phat;   // [comp][comp]
    std::vector<CMatrix> dP;
    std::vector<std::vector<CMatrix>> dPhat;
};

inline PMatrices build_pmatrices(const KernelSpec& spec, double x, double t) {
    const int m = spec.ncomp();
    const int nt = spec.nterms;
    PMatrices out;
    out.P.assign(m, CMatrix(nt, nt));
    out.dP.assign(m, CMatrix(nt, nt));
    out.Phat.assign(m, std::vector<CMatrix>(m, CMatrix(nt, nt)));
    out.dPhat.assign(m, std::vector<CMatrix>(m, CMatrix(nt, nt)));
    for (int i = 0; i < m; ++i) {
        for (int be = 0; be < nt; ++be) {
            for (int ga = 0; ga < nt; ++ga) {
                const auto& tg = spec.at(i, ga);
                const auto& tb = spec.at(i, be);
                const Complex s = tg.lamhat + tb.mu;
                const Complex val =
                    -tg.bhat * std::exp(kI * tg.Lamhat * t + kI * s * x) / (kI * s);
                out.P[i](be, ga) = val;
                out.dP[i](be, ga) = val * kI * s;
            }
        }
        for (int j = 0; j < m; ++j) {
            for (int ga = 0; ga < nt; ++ga) {
                for (int al = 0; al < nt; ++al) {
                    const auto& ta = spec.at(j, al);
                    const auto& tg = spec.at(i, ga);
                    const Complex s = ta.lam + tg.muhat;
                    const Complex val =
                        -ta.b * std::exp(kI * ta.Lam * t + kI * s * x) / (kI * s);
                    out.Phat[i][j](ga, al) = val;
                    out.dPhat[i][j](ga, al) = val * kI * s;
                }
            }
        }
    }
    return out;
}

/// One exponential term in z of a kernel entry at fixed (x, t).
struct ZTerm {
    Complex coef;    // value of the x,t-dependent factor
    Complex dcoef;   // its analytic x-derivative
    Complex nu;      // K(.,z) carries exp(i nu z)
};

/// Everything solved at one point (x, t): the two coefficient families and
/// the kernel entries as exponential sums in z.
struct PointSolution {
    double x = 0.0, t = 0.0;
    int n = 2;
    CVector L;       // flat (comp, term)
    CVector dL;
    CMatrix Lij;     // rows: component i; cols: flat (comp j, term)
    CMatrix dLij;
    std::vector<std::vector<std::vector<ZTerm>>> K;  // [n][n] term lists

    CMatrix evaluate(double z) const {
        CMatrix k = CMatrix::Zero(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                for (const auto& term : K[r][c]) k(r, c) += term.coef * std::exp(kI * term.nu * z);
        return k;
    }

    /// d/dx of the diagonal map x' -> K(x', x') evaluated at this x.
    CMatrix ddx_diagonal() const {
        CMatrix k = CMatrix::Zero(n, n);
        for (int r = 0; r < n; ++r)
            for (int c = 0; c < n; ++c)
                for (const auto& term : K[r][c])
                    k(r, c) += (term.dcoef + term.coef * kI * term.nu) * std::exp(kI * term.nu * x);
        return k;
    }
};

namespace detail {

inline int flat(int comp, int term, int nterms) { return comp * nterms + term; }

}  // namespace detail

/// Assembles the dense coupling matrix M[(i,beta),(j,alpha)] = delta -
/// sum_gamma P_i(beta,gamma) Phat_ij(gamma,alpha) and its x-derivative.
inline void build_m(const KernelSpec& spec, const PMatrices& pm, CMatrix& M, CMatrix& dM) {
    const int m = spec.ncomp();
    const int nt = spec.nterms;
    const int dim = m * nt;
    M = CMatrix::Identity(dim, dim);
    dM = CMatrix::Zero(dim, dim);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            const CMatrix block = pm.P[i] * pm.Phat[i][j];
            const CMatrix dblock = pm.dP[i] * pm.Phat[i][j] + pm.P[i] * pm.dPhat[i][j];
            for (int be = 0; be < nt; ++be)
                for (int al = 0; al < nt; ++al) {
                    M(detail::flat(i, be, nt), detail::flat(j, al, nt)) -= block(be, al);
                    dM(detail::flat(i, be, nt), detail::flat(j, al, nt)) -= dblock(be, al);
                }
        }
    }
}

/// Solves both linear systems at (x, t) and assembles all kernel entries.
inline PointSolution solve_at(const KernelSpec& spec, double x, double t,
                              double rcond_floor = 1e-12) {
    const int m = spec.ncomp();
    const int nt = spec.nterms;
    const int dim = m * nt;
    const auto pm = build_pmatrices(spec, x, t);
    CMatrix M, dM;
    build_m(spec, pm, M, dM);
    if (rcond(M) < rcond_floor) throw SingularM("solve_at: coupling matrix singular");
    Eigen::PartialPivLU<CMatrix> lu(M.transpose());

    CVector X(dim), dX(dim), Xhat(dim), dXhat(dim);
    for (int j = 0; j < m; ++j) {
        for (int al = 0; al < nt; ++al) {
            const auto& term = spec.at(j, al);
            const Complex v = term.b * std::exp(kI * term.Lam * t + kI * term.lam * x);
            const Complex vh =
                term.bhat * std::exp(kI * term.Lamhat * t + kI * term.lamhat * x);
            X(detail::flat(j, al, nt)) = v;
            dX(detail::flat(j, al, nt)) = v * kI * term.lam;
            Xhat(detail::flat(j, al, nt)) = vh;
            dXhat(detail::flat(j, al, nt)) = vh * kI * term.lamhat;
        }
    }

    PointSolution out;
    out.x = x;
    out.t = t;
    out.n = spec.n;
    out.L = lu.solve(-X);
    out.dL = lu.solve(-dX - (dM.transpose() * out.L).eval());

    // second family: row i couples Xhat_i to Phat_i.
    out.Lij = CMatrix(m, dim);
    out.dLij = CMatrix(m, dim);
    CMatrix rhs(dim, m), drhs(dim, m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            for (int al = 0; al < nt; ++al) {
                Complex acc = 0.0, dacc = 0.0;
                for (int be = 0; be < nt; ++be) {
                    const Complex xh = Xhat(detail::flat(i, be, nt));
                    const Complex dxh = dXhat(detail::flat(i, be, nt));
                    acc += xh * pm.Phat[i][j](be, al);
                    dacc += dxh * pm.Phat[i][j](be, al) + xh * pm.dPhat[i][j](be, al);
                }
                rhs(detail::flat(j, al, nt), i) = acc;
                drhs(detail::flat(j, al, nt), i) = dacc;
            }
        }
    }
    const CMatrix l2 = lu.solve(rhs);
    out.Lij = l2.transpose();
    out.dLij = lu.solve(drhs - dM.transpose() * l2).transpose();

    // kernel entries as z-exponential sums
    out.K.assign(spec.n, std::vector<std::vector<ZTerm>>(spec.n));
    for (int j = 0; j < m; ++j) {
        auto& k1j = out.K[0][j + 1];
        for (int al = 0; al < nt; ++al) {
            const int f = detail::flat(j, al, nt);
            k1j.push_back(ZTerm{out.L(f), out.dL(f), spec.at(j, al).mu});
        }
    }
    {
        auto& k11 = out.K[0][0];
        for (int j = 0; j < m; ++j)
            for (int be = 0; be < nt; ++be)
                for (int ga = 0; ga < nt; ++ga) {
                    const int f = detail::flat(j, be, nt);
                    const Complex coef = -out.L(f) * pm.P[j](be, ga);
                    const Complex dcoef =
                        -out.dL(f) * pm.P[j](be, ga) - out.L(f) * pm.dP[j](be, ga);
                    k11.push_back(ZTerm{coef, dcoef, spec.at(j, ga).muhat});
                }
    }
    for (int i = 0; i < m; ++i) {
        auto& ki1 = out.K[i + 1][0];
        for (int be = 0; be < nt; ++be) {
            const int f = detail::flat(i, be, nt);
            ki1.push_back(ZTerm{-Xhat(f), -dXhat(f), spec.at(i, be).muhat});
        }
        for (int j = 0; j < m; ++j)
            for (int be = 0; be < nt; ++be)
                for (int ga = 0; ga < nt; ++ga) {
                    const int f = detail::flat(j, be, nt);
                    const Complex coef = -out.Lij(i, f) * pm.P[j](be, ga);
                    const Complex dcoef =
                        -out.dLij(i, f) * pm.P[j](be, ga) - out.Lij(i, f) * pm.dP[j](be, ga);
                    ki1.push_back(ZTerm{coef, dcoef, spec.at(j, ga).muhat});
                }
        for (int j = 0; j < m; ++j) {
            auto& kij = out.K[i + 1][j + 1];
            for (int al = 0; al < nt; ++al) {
                const int f = detail::flat(j, al, nt);
                kij.push_back(ZTerm{out.Lij(i, f), out.dLij(i, f), spec.at(j, al).mu});
            }
        }
    }
    return out;
}

/// F(x,z;t) as a matrix, and its term lists against the same layout.
inline CMatrix f_matrix(const KernelSpec& spec, double x, double z, double t) {
    const int m = spec.ncomp();
    CMatrix f = CMatrix::Zero(spec.n, spec.n);
    for (int j = 0; j < m; ++j) {
        for (const auto& term : spec.terms[j]) {
            f(0, j + 1) += term.b * std::exp(kI * (term.Lam * t + term.lam * x + term.mu * z));
            f(j + 1, 0) +=
                term.bhat * std::exp(kI * (term.Lamhat * t + term.lamhat * x + term.muhat * z));
        }
    }
    return f;
}

/// Residual of the reconstruction equation K + F + int_x^inf K F dy = 0 at
/// (x, z, t); the y-integrals are exact exponential integrals.
inline double glm_residual(const KernelSpec& spec, const PointSolution& sol, double z) {
    const double x = sol.x, t = sol.t;
    CMatrix acc = sol.evaluate(z) + f_matrix(spec, x, z, t);
    const int m = spec.ncomp();
    // (K F)(r,c): middle index pairs K(r, j+1) with f_j-terms (c=0 entries of F
    // live at column 0; F(0, j+1) rows pair with K(r, 0))
    for (int r = 0; r < sol.n; ++r) {
        for (const auto& kt : sol.K[r][0]) {
            for (int j = 0; j < m; ++j)
                for (const auto& term : spec.terms[j]) {
                    const Complex s = kt.nu + term.lam;
                    const Complex integral = -std::exp(kI * s * x) / (kI * s);
                    acc(r, j + 1) += kt.coef * term.b * std::exp(kI * term.Lam * t) * integral *
                                     std::exp(kI * term.mu * z);
                }
        }
        for (int j = 0; j < m; ++j) {
            for (const auto& kt : sol.K[r][j + 1]) {
                for (const auto& term : spec.terms[j]) {
                    const Complex s = kt.nu + term.lamhat;
                    const Complex integral = -std::exp(kI * s * x) / (kI * s);
                    acc(r, 0) += kt.coef * term.bhat * std::exp(kI * term.Lamhat * t) * integral *
                                 std::exp(kI * term.muhat * z);
                }
            }
        }
    }
    return acc.norm();
}

/// Field reconstruction u_{j-1}(x,t) = c K_{1j}(x,x).
inline CVector reconstruct_fields(const PointSolution& sol, Complex c = Complex(-2.0, 0.0)) {
    const int m = sol.n - 1;
    CVector u(m);
    for (int j = 0; j < m; ++j) {
        Complex acc = 0.0;
        for (const auto& term : sol.K[0][j + 1]) acc += term.coef * std::exp(kI * term.nu * sol.x);
        u(j) = c * acc;
    }
    return u;
}

/// Dressed potential of the second-order operator: Mhat = +2 d/dx K(x,x)
/// (equivalently -2 d/dx of the opposite-orientation kernel -K).
inline CMatrix dressed_potential(const PointSolution& sol) { return 2.0 * sol.ddx_diagonal(); }

struct TimeEvolutionResidual {
    double pde = 0.0;
    double trace = 0.0;
};

/// Finite-difference residuals of the evolution identities on the
/// lower-orientation kernel Khat = -K with the seed potential zero:
///   i a Khat_t - Khat_xx + Khat_yy - Mhat Khat   and
///   2 dKhat(x,x)/dx - (0 - Mhat).
inline TimeEvolutionResidual kernel_time_residual(const KernelSpec& spec, const CMatrix& mhat,
                                                  double x, double y, double t, double h) {
    auto khat = [&](double xx, double yy, double tt) -> CMatrix {
        return -solve_at(spec, xx, tt).evaluate(yy);
    };
    const CMatrix k0 = khat(x, y, t);
    const CMatrix kt = (khat(x, y, t + h) - khat(x, y, t - h)) / (2.0 * h);
    const CMatrix kxx = (khat(x + h, y, t) - 2.0 * k0 + khat(x - h, y, t)) / (h * h);
    const CMatrix kyy = (khat(x, y + h, t) - 2.0 * k0 + khat(x, y - h, t)) / (h * h);
    TimeEvolutionResidual res;
    res.pde = (kI * spec.bare.a * kt - kxx + kyy - mhat * k0).norm();
    auto khat_diag = [&](double xx) -> CMatrix { return -solve_at(spec, xx, t).evaluate(xx); };
    const CMatrix ddiag = (khat_diag(x + h) - khat_diag(x - h)) / (2.0 * h);
    res.trace = (2.0 * ddiag + mhat).norm();
    return res;
}

/// Uniform one-term closed forms: C = sum b_j bhat_j and
/// H = e^{i(Lam+Lamhat)t + i(lam+mu+lamhat+muhat)x} / ((lam+muhat)(lamhat+mu)).
struct OneTermClosedForm {
    Complex C{}, H{};
    CVector L;      // per component
    CVector Lhat;
};

inline OneTermClosedForm one_term_closed_form(const KernelSpec& spec, double x, double t) {
    if (spec.nterms != 1) throw std::invalid_argument("one_term_closed_form: nterms must be 1");
    const int m = spec.ncomp();
    const auto& t0 = spec.at(0, 0);
    OneTermClosedForm out;
    out.C = 0.0;
    for (int j = 0; j < m; ++j) out.C += spec.at(j, 0).b * spec.at(j, 0).bhat;
    out.H = std::exp(kI * (t0.Lam + t0.Lamhat) * t +
                     kI * (t0.lam + t0.mu + t0.lamhat + t0.muhat) * x) /
            ((t0.lam + t0.muhat) * (t0.lamhat + t0.mu));
    out.L = CVector(m);
    out.Lhat = CVector(m);
    const Complex denom = 1.0 + out.C * out.H;
    for (int j = 0; j < m; ++j) {
        const auto& tj = spec.at(j, 0);
        out.L(j) = -tj.b * std::exp(kI * tj.Lam * t + kI * tj.lam * x) / denom;
        out.Lhat(j) = -tj.bhat * std::exp(kI * tj.Lamhat * t + kI * tj.lamhat * x) / denom;
    }
    return out;
}

/// Coefficient of Zhat in K_{i1} when all hatted z-exponents coincide.
inline CVector lhat_uniform(const PointSolution& sol) {
    const int m = sol.n - 1;
    CVector lhat = CVector::Zero(m);
    for (int i = 0; i < m; ++i)
        for (const auto& term : sol.K[i + 1][0]) lhat(i) += term.coef;
    return lhat;
}

/// Least-squares modulus calibration of the reconstruction constant against a
/// reference profile sampled at xs (time t).
struct Calibration {
    double c_magnitude = 2.0;
    Complex c = Complex(-2.0, 0.0);
    double max_abs_diff = 0.0;
};

template <typename RefFn>
Calibration calibrate_c(const KernelSpec& spec, const RefFn& reference_modulus,
                        const std::vector<double>& xs, double t) {
    double num = 0.0, den = 0.0;
    std::vector<double> kmod(xs.size()), ref(xs.size());
    for (size_t i = 0; i < xs.size(); ++i) {
        const auto sol = solve_at(spec, xs[i], t);
        const CVector u = reconstruct_fields(sol, Complex(1.0, 0.0));
        kmod[i] = u.norm();
        ref[i] = reference_modulus(xs[i]);
        num += kmod[i] * ref[i];
        den += kmod[i] * kmod[i];
    }
    Calibration cal;
    cal.c_magnitude = (den > 0.0) ? num / den : 2.0;
    cal.c = Complex(-cal.c_magnitude, 0.0);
    for (size_t i = 0; i < xs.size(); ++i)
        cal.max_abs_diff = std::max(cal.max_abs_diff, std::abs(cal.c_magnitude * kmod[i] - ref[i]));
    return cal;
}

/// One-term spec matched to a zero-seed single-pole field at mu = i nu
/// (nu > 0, focusing): lam = mu = lamhat = muhat = i nu / 2, b = nu,
/// bhat = -nu, reconstruction constant -2.
inline KernelSpec darboux_matched_spec(double nu, int n = 2) {
    KernelSpec spec;
    spec.n = n;
    spec.nterms = 1;
    spec.bare = default_bare(n, (1.0 - n) / static_cast<double>(n));
    KernelTerm term;
    term.lam = term.mu = term.lamhat = term.muhat = kI * (nu / 2.0);
    term.Lam = term.Lamhat = 0.0;
    term.b = nu;
    term.bhat = -nu;
    spec.terms.assign(n - 1, {term});
    if (n > 2) {
        // put the whole polarization on the first component
        KernelTerm quiet = term;
        quiet.b = 0.0;
        quiet.bhat = 0.0;
        for (int c = 1; c < n - 1; ++c) spec.terms[c] = {quiet};
    }
    return validate_kernel(std::move(spec));
}

/// One-term spec with distinct exponents whose reconstruction is the rigidly
/// phase-rotating bright profile nu * e^{i nu^2 t} sech(nu x) (focusing
/// equation solution); bare diagonal (1, -3).
inline KernelSpec moving_phase_spec(double nu = 1.0) {
    KernelSpec spec;
    spec.n = 2;
    spec.nterms = 1;
    spec.bare.alpha = Eigen::VectorXd(2);
    spec.bare.alpha << 1.0, -3.0;
    spec.bare.a = -0.5;
    const double s = 0.75 * nu;
    KernelTerm term;
    term.lam = kI * s;
    term.mu = kI * (s / 3.0);
    term.lamhat = kI * (s / 3.0);
    term.muhat = kI * s;
    term.Lam = (term.lam * term.lam - term.mu * term.mu) / spec.bare.a;
    term.Lamhat = (term.lamhat * term.lamhat - term.muhat * term.muhat) / spec.bare.a;
    term.b = 1.0;
    term.bhat = -0.75;
    spec.terms = {{term}};
    return validate_kernel(std::move(spec));
}

}  // namespace vnls::glm
