#pragma once

#include <functional>
#include <optional>
#include <random>
#include <vector>

#include "vnls/types.hpp"

namespace vnls::lattice {

/// The printed defect equations of motion omit one coupling at site n-1;
/// ZccConsistent adds it (the discrete compatibility condition is the
/// arbiter, see zcc_discrete).
enum class DefectEquations { AsPrinted, ZccConsistent };

/// Same choice for the third charge: the printed closed form differs from the
/// exact log-trace expansion by the sign of two weighted hopping terms.
enum class ChargeForm { AsPrinted, SeriesConsistent };

struct Defect {
    int site = 0;
    Complex alpha{};
    CVector beta, gamma;   // row <beta_n|, column |gamma_n>
    CMatrix Delta;         // (ncomp x ncomp)
};

/// Periodic lattice state: per-site row vectors x_j and column vectors X_j,
/// with an optional defect site carrying its own variables instead of fields.
struct State {
    int nsites = 0;
    int ncomp = 1;
    std::vector<CVector> x, X;
    std::optional<Defect> defect;

    int wrap(int j) const { return ((j % nsites) + nsites) % nsites; }
    bool is_defect(int j) const { return defect && wrap(j) == defect->site; }
};

namespace detail {
inline Complex dot(const CVector& a, const CVector& b) { return (a.transpose() * b)(0, 0); }
}  // namespace detail

inline State make_state(int nsites, int ncomp) {
    if (nsites < 5) throw std::invalid_argument("make_state: need at least 5 sites");
    State s;
    s.nsites = nsites;
    s.ncomp = ncomp;
    s.x.assign(nsites, CVector::Zero(ncomp));
    s.X.assign(nsites, CVector::Zero(ncomp));
    return s;
}

inline void attach_defect(State& s, int site) {
    if (site <= 0 || site >= s.nsites - 1)
        throw std::invalid_argument("attach_defect: defect cannot sit on the boundary site");
    Defect d;
    d.site = site;
    d.beta = CVector::Zero(s.ncomp);
    d.gamma = CVector::Zero(s.ncomp);
    d.Delta = CMatrix::Zero(s.ncomp, s.ncomp);
    s.defect = d;
    s.x[site].setZero();
    s.X[site].setZero();
}

inline State random_state(int nsites, int ncomp, double amplitude, unsigned seed,
                          int defect_site = -1) {
    State s = make_state(nsites, ncomp);
    std::mt19937 gen(seed);
    std::uniform_real_distribution<double> d(-amplitude, amplitude);
    auto rnd = [&] { return Complex(d(gen), d(gen)); };
    for (int j = 0; j < nsites; ++j)
        for (int k = 0; k < ncomp; ++k) {
            s.x[j](k) = rnd();
            s.X[j](k) = rnd();
        }
    if (defect_site >= 0) {
        attach_defect(s, defect_site);
        auto& df = *s.defect;
        df.alpha = rnd();
        for (int k = 0; k < ncomp; ++k) {
            df.beta(k) = rnd();
            df.gamma(k) = rnd();
            for (int l = 0; l < ncomp; ++l) df.Delta(k, l) = rnd();
        }
    }
    return s;
}

inline Complex occupancy(const State& s, int j) {
    j = s.wrap(j);
    return 1.0 + detail::dot(s.x[j], s.X[j]);
}

/// Site matrix lambda e_11 + [[N_j, <x_j|], [|X_j>, 1]].
inline CMatrix site_lax(const State& s, int j, Complex lambda) {
    j = s.wrap(j);
    if (s.is_defect(j)) throw std::invalid_argument("site_lax: defect site");
    const int n = s.ncomp + 1;
    CMatrix l = CMatrix::Identity(n, n);
    l(0, 0) = lambda + occupancy(s, j);
    l.block(0, 1, 1, s.ncomp) = s.x[j].transpose();
    l.block(1, 0, s.ncomp, 1) = s.X[j];
    return l;
}

/// Defect matrix lambda 1 + [[alpha, <beta|], [|gamma>, Delta]].
inline CMatrix defect_lax(const State& s, Complex lambda) {
    if (!s.defect) throw std::invalid_argument("defect_lax: no defect configured");
    const auto& d = *s.defect;
    const int n = s.ncomp + 1;
    CMatrix l = lambda * CMatrix::Identity(n, n);
    l(0, 0) += d.alpha;
    l.block(0, 1, 1, s.ncomp) += d.beta.transpose();
    l.block(1, 0, s.ncomp, 1) += d.gamma;
    l.block(1, 1, s.ncomp, s.ncomp) += d.Delta;
    return l;
}

/// Ordered product over the periodic lattice, highest site leftmost; the
/// defect factor replaces its site.
inline CMatrix monodromy(const State& s, Complex lambda) {
    const int n = s.ncomp + 1;
    CMatrix t = CMatrix::Identity(n, n);
    for (int j = s.nsites - 1; j >= 0; --j)
        t *= s.is_defect(j) ? defect_lax(s, lambda) : site_lax(s, j, lambda);
    return t;
}

struct ChargeTriple {
    Complex I1{}, I2{}, I3{};
};

inline ChargeTriple charges_bulk(const State& s) {
    if (s.defect) throw std::invalid_argument("charges_bulk: state carries a defect");
    ChargeTriple c;
    for (int i = 0; i < s.nsites; ++i) {
        const Complex ni = occupancy(s, i);
        c.I1 += ni;
        c.I2 += -0.5 * ni * ni + detail::dot(s.x[i], s.X[s.wrap(i - 1)]);
        c.I3 += ni * ni * ni / 3.0 + detail::dot(s.x[i], s.X[s.wrap(i - 2)]) -
                (occupancy(s, i - 1) + ni) * detail::dot(s.x[i], s.X[s.wrap(i - 1)]);
    }
    return c;
}

inline ChargeTriple charges_defect(const State& s, ChargeForm form = ChargeForm::AsPrinted) {
    if (!s.defect) throw std::invalid_argument("charges_defect: no defect configured");
    const auto& d = *s.defect;
    const int n = d.site;
    auto xx = [&](int j) -> const CVector& { return s.x[s.wrap(j)]; };
    auto XX = [&](int j) -> const CVector& { return s.X[s.wrap(j)]; };
    const CVector xt = xx(n + 1) + d.beta;       // <x~_{n+1}|
    const CVector Xt = XX(n - 1) + d.gamma;      // |X~_{n-1}>
    ChargeTriple c;
    c.I1 = d.alpha;
    c.I2 = -0.5 * d.alpha * d.alpha;
    c.I3 = d.alpha * d.alpha * d.alpha / 3.0;
    for (int i = 0; i < s.nsites; ++i) {
        if (i == n) continue;
        const Complex ni = occupancy(s, i);
        c.I1 += ni;
        c.I2 += -0.5 * ni * ni;
        c.I3 += ni * ni * ni / 3.0;
        if (i != s.wrap(n - 1)) {
            c.I2 += detail::dot(xx(i + 1), XX(i));
            c.I3 -= (ni + occupancy(s, i + 1)) * detail::dot(xx(i + 1), XX(i));
        }
        if (i != s.wrap(n - 1) && i != s.wrap(n + 1))
            c.I3 += detail::dot(xx(i + 1), XX(i - 1));
    }
    c.I2 += detail::dot(xx(n + 1), XX(n - 1)) + detail::dot(d.beta, XX(n - 1)) +
            detail::dot(xx(n + 1), d.gamma);
    const double hop_sign = (form == ChargeForm::AsPrinted) ? 1.0 : -1.0;
    c.I3 += hop_sign * occupancy(s, n + 1) * detail::dot(xx(n + 1), Xt);
    if (form == ChargeForm::AsPrinted)
        c.I3 += (occupancy(s, n - 1) - d.alpha) * detail::dot(xt, XX(n - 1));
    else
        c.I3 -= (occupancy(s, n - 1) + d.alpha) * detail::dot(xt, XX(n - 1));
    c.I3 += detail::dot(xx(n + 1), (d.Delta * XX(n - 1)).eval()) + detail::dot(xx(n + 2), Xt) +
            detail::dot(xt, XX(n - 2)) - d.alpha * detail::dot(xx(n + 1), d.gamma);
    return c;
}

/// Time-component matrices of the first three flows. The third-order one has
/// four defect-neighborhood variants.
inline CMatrix a1_matrix(const State& s) {
    CMatrix a = CMatrix::Zero(s.ncomp + 1, s.ncomp + 1);
    a(0, 0) = 1.0;
    return a;
}

inline CMatrix a2_matrix(const State& s, int j, Complex mu) {
    j = s.wrap(j);
    const int n = s.ncomp + 1;
    CMatrix a = CMatrix::Zero(n, n);
    a(0, 0) = mu;
    if (s.defect && j == s.defect->site) {
        a.block(0, 1, 1, s.ncomp) = (s.x[s.wrap(j + 1)] + s.defect->beta).transpose();
        a.block(1, 0, s.ncomp, 1) = s.X[s.wrap(j - 1)];
    } else if (s.defect && j == s.wrap(s.defect->site + 1)) {
        a.block(0, 1, 1, s.ncomp) = s.x[j].transpose();
        a.block(1, 0, s.ncomp, 1) = s.X[s.wrap(j - 2)] + s.defect->gamma;
    } else {
        a.block(0, 1, 1, s.ncomp) = s.x[j].transpose();
        a.block(1, 0, s.ncomp, 1) = s.X[s.wrap(j - 1)];
    }
    return a;
}

inline CMatrix a3_matrix(const State& s, int j, Complex mu) {
    j = s.wrap(j);
    const int nn = s.ncomp + 1;
    CMatrix a = CMatrix::Zero(nn, nn);
    auto xx = [&](int k) -> const CVector& { return s.x[s.wrap(k)]; };
    auto XX = [&](int k) -> const CVector& { return s.X[s.wrap(k)]; };
    auto nocc = [&](int k) { return occupancy(s, k); };
    auto fill = [&](Complex corner, const CVector& row, const CVector& col, const CMatrix& block) {
        a(0, 0) = corner;
        a.block(0, 1, 1, s.ncomp) = row.transpose();
        a.block(1, 0, s.ncomp, 1) = col;
        a.block(1, 1, s.ncomp, s.ncomp) = block;
    };
    if (s.defect) {
        const int n = s.defect->site;
        const auto& d = *s.defect;
        const CVector xt = xx(n + 1) + d.beta;
        const CVector Xt = XX(n - 1) + d.gamma;
        if (j == s.wrap(n - 1)) {
            fill(mu * mu - detail::dot(xx(j), XX(j - 1)),
                 ((mu - nocc(j)) * xx(j) + xt).eval(),
                 ((mu - nocc(j - 1)) * XX(j - 1) + XX(j - 2)).eval(),
                 (XX(j - 1) * xx(j).transpose()).eval());
            return a;
        }
        if (j == n) {
            const CVector xhat =
                (d.Delta.transpose() * xx(n + 1) - nocc(n + 1) * xx(n + 1) - d.alpha * xt).eval();
            fill(mu * mu - detail::dot(xt, XX(n - 1)),
                 (mu * xt + xhat + xx(n + 2)).eval(),
                 ((mu - nocc(n - 1)) * XX(n - 1) + XX(n - 2)).eval(),
                 (XX(n - 1) * xt.transpose()).eval());
            return a;
        }
        if (j == s.wrap(n + 1)) {
            const CVector Xhat =
                (d.Delta * XX(n - 1) - nocc(n - 1) * XX(n - 1) - d.alpha * Xt).eval();
            fill(mu * mu - detail::dot(xx(j), Xt),
                 ((mu - nocc(j)) * xx(j) + xx(n + 2)).eval(),
                 (mu * Xt + Xhat + XX(n - 2)).eval(),
                 (Xt * xx(j).transpose()).eval());
            return a;
        }
        if (j == s.wrap(n + 2)) {
            fill(mu * mu - detail::dot(xx(j), XX(j - 1)),
                 ((mu - nocc(j)) * xx(j) + xx(j + 1)).eval(),
                 ((mu - nocc(j - 1)) * XX(j - 1) + Xt).eval(),
                 (XX(j - 1) * xx(j).transpose()).eval());
            return a;
        }
    }
    fill(mu * mu - detail::dot(xx(j), XX(j - 1)),
         ((mu - nocc(j)) * xx(j) + xx(j + 1)).eval(),
         ((mu - nocc(j - 1)) * XX(j - 1) + XX(j - 2)).eval(),
         (XX(j - 1) * xx(j).transpose()).eval());
    return a;
}

/// Right-hand side of the third flow; the result reuses State as a container
/// of derivatives (defect site rows stay zero).
inline State eom_rhs(const State& s, DefectEquations eqns = DefectEquations::AsPrinted) {
    State out = s;
    auto xx = [&](int k) -> const CVector& { return s.x[s.wrap(k)]; };
    auto XX = [&](int k) -> const CVector& { return s.X[s.wrap(k)]; };
    auto nocc = [&](int k) { return occupancy(s, k); };
    auto dot = detail::dot;

    auto bulk_x = [&](int j) -> CVector {
        const Complex nj = nocc(j);
        return nj * nj * xx(j) - dot(xx(j + 1), XX(j)) * xx(j) - dot(xx(j), XX(j - 1)) * xx(j) -
               (nj + nocc(j + 1)) * xx(j + 1) + xx(j + 2);
    };
    auto bulk_X = [&](int j) -> CVector {
        const Complex nj = nocc(j);
        return -nj * nj * XX(j) + dot(xx(j + 1), XX(j)) * XX(j) + dot(xx(j), XX(j - 1)) * XX(j) +
               (nocc(j - 1) + nj) * XX(j - 1) - XX(j - 2);
    };

    for (int j = 0; j < s.nsites; ++j) {
        out.x[j] = bulk_x(j);
        out.X[j] = bulk_X(j);
    }

    if (s.defect) {
        const auto& d = *s.defect;
        const int n = d.site;
        const CVector& b = d.beta;
        const CVector& g = d.gamma;
        const Complex al = d.alpha;
        const CMatrix& dl = d.Delta;

        {  // site n-2
            const int j = s.wrap(n - 2);
            const Complex nj = nocc(j);
            out.x[j] = nj * nj * xx(j) - dot(xx(n - 1), XX(j)) * xx(j) -
                       dot(xx(j), XX(n - 3)) * xx(j) - (nocc(n - 1) + nj) * xx(n - 1) + b +
                       xx(n + 1);
            out.X[j] = -nj * nj * XX(j) + dot(xx(n - 1), XX(j)) * XX(j) +
                       dot(xx(j), XX(n - 3)) * XX(j) + (nj + nocc(n - 3)) * XX(n - 3) - XX(n - 4);
        }
        {  // site n-1
            const int j = s.wrap(n - 1);
            const Complex nj = nocc(j);
            out.x[j] = nj * nj * xx(j) - dot(xx(n + 1), XX(j)) * xx(j) -
                       dot(xx(j), XX(n - 2)) * xx(j) - dot(b, XX(j)) * xx(j) - al * b - nj * b -
                       (nj + nocc(n + 1)) * xx(n + 1) + dl.transpose() * xx(n + 1) + xx(n + 2);
            if (eqns == DefectEquations::ZccConsistent) out.x[j] -= al * xx(n + 1);
            out.X[j] = -nj * nj * XX(j) + dot(xx(n + 1), XX(j)) * XX(j) +
                       dot(xx(j), XX(n - 2)) * XX(j) + dot(b, XX(j)) * XX(j) +
                       (nj + nocc(n - 2)) * XX(n - 2) - XX(n - 3);
        }
        {  // site n+1
            const int j = s.wrap(n + 1);
            const Complex nj = nocc(j);
            out.x[j] = nj * nj * xx(j) - dot(xx(j), XX(n - 1)) * xx(j) -
                       dot(xx(n + 2), XX(j)) * xx(j) - dot(xx(j), g) * xx(j) -
                       (nj + nocc(n + 2)) * xx(n + 2) + xx(n + 3);
            out.X[j] = -nj * nj * XX(j) + dot(xx(j), XX(n - 1)) * XX(j) +
                       dot(xx(n + 2), XX(j)) * XX(j) + dot(xx(j), g) * XX(j) + nj * g + al * g +
                       al * XX(n - 1) - dl * XX(n - 1) + (nocc(n - 1) + nj) * XX(n - 1) - XX(n - 2);
        }
        {  // site n+2
            const int j = s.wrap(n + 2);
            const Complex nj = nocc(j);
            out.x[j] = nj * nj * xx(j) - dot(xx(j), XX(n + 1)) * xx(j) -
                       dot(xx(n + 3), XX(j)) * xx(j) - (nj + nocc(n + 3)) * xx(n + 3) + xx(n + 4);
            out.X[j] = -nj * nj * XX(j) + dot(xx(j), XX(n + 1)) * XX(j) +
                       dot(xx(n + 3), XX(j)) * XX(j) + (nocc(n + 1) + nj) * XX(n + 1) - g -
                       XX(n - 1);
        }
        out.x[n].setZero();
        out.X[n].setZero();

        auto& od = *out.defect;
        od.alpha = (al + nocc(n - 1)) * dot(b, XX(n - 1)) - (al + nocc(n + 1)) * dot(xx(n + 1), g) +
                   dot(xx(n + 2), g) - dot(b, XX(n - 2));
        od.beta = -dot(xx(n + 1), XX(n - 1)) * b - dot(xx(n + 1), g) * b - dot(b, XX(n - 1)) * b +
                  al * al * b + al * (al + nocc(n + 1)) * xx(n + 1) -
                  (al + nocc(n + 1)) * (dl.transpose() * xx(n + 1)) -
                  dot(b, XX(n - 1)) * xx(n + 1) - al * xx(n + 2) + dl.transpose() * xx(n + 2);
        od.gamma = -al * al * g + dot(xx(n + 1), g) * g + dot(xx(n + 1), XX(n - 1)) * g +
                   dot(b, XX(n - 1)) * g - al * al * XX(n - 1) - al * nocc(n - 1) * XX(n - 1) +
                   (al + nocc(n - 1)) * (dl * XX(n - 1)) + dot(xx(n + 1), g) * XX(n - 1) +
                   al * XX(n - 2) - dl * XX(n - 2);
        od.Delta = -(al + nocc(n - 1)) * (XX(n - 1) * b.transpose()) +
                   (al + nocc(n + 1)) * (g * xx(n + 1).transpose()) + XX(n - 2) * b.transpose() -
                   g * xx(n + 2).transpose() + (XX(n - 1) * xx(n + 1).transpose()) * dl -
                   dl * (XX(n - 1) * xx(n + 1).transpose());
    }
    return out;
}

inline void add_scaled(State& s, const State& d, double c) {
    for (int j = 0; j < s.nsites; ++j) {
        s.x[j] += c * d.x[j];
        s.X[j] += c * d.X[j];
    }
    if (s.defect) {
        s.defect->alpha += c * d.defect->alpha;
        s.defect->beta += c * d.defect->beta;
        s.defect->gamma += c * d.defect->gamma;
        s.defect->Delta += c * d.defect->Delta;
    }
}

inline bool all_finite(const State& s) {
    for (int j = 0; j < s.nsites; ++j)
        if (!s.x[j].allFinite() || !s.X[j].allFinite()) return false;
    if (s.defect)
        return std::isfinite(std::abs(s.defect->alpha)) && s.defect->beta.allFinite() &&
               s.defect->gamma.allFinite() && s.defect->Delta.allFinite();
    return true;
}

inline State rk4_step(const State& s, double dt,
                      DefectEquations eqns = DefectEquations::AsPrinted) {
    if (dt <= 0.0) throw std::invalid_argument("rk4_step: dt must be positive");
    const State k1 = eom_rhs(s, eqns);
    State y2 = s;
    add_scaled(y2, k1, 0.5 * dt);
    const State k2 = eom_rhs(y2, eqns);
    State y3 = s;
    add_scaled(y3, k2, 0.5 * dt);
    const State k3 = eom_rhs(y3, eqns);
    State y4 = s;
    add_scaled(y4, k3, dt);
    const State k4 = eom_rhs(y4, eqns);
    State out = s;
    add_scaled(out, k1, dt / 6.0);
    add_scaled(out, k2, dt / 3.0);
    add_scaled(out, k3, dt / 3.0);
    add_scaled(out, k4, dt / 6.0);
    if (!all_finite(out)) throw std::runtime_error("rk4_step: non-finite state");
    return out;
}

/// || (L_j(s + h rhs) - L_j(s - h rhs)) / 2h - (A3_{j+1} L_j - L_j A3_j) ||_F
/// with one spectral parameter used consistently in L and A3.
inline double zcc_discrete(const State& s, int j, Complex mu, double h,
                           DefectEquations eqns = DefectEquations::AsPrinted) {
    if (h <= 0.0) throw std::invalid_argument("zcc_discrete: need h > 0");
    const State rhs = eom_rhs(s, eqns);
    State sp = s, sm = s;
    add_scaled(sp, rhs, h);
    add_scaled(sm, rhs, -h);
    j = s.wrap(j);
    auto lax_of = [&](const State& st) {
        return st.is_defect(j) ? defect_lax(st, mu) : site_lax(st, j, mu);
    };
    const CMatrix dl = (lax_of(sp) - lax_of(sm)) / (2.0 * h);
    const CMatrix commut = a3_matrix(s, j + 1, mu) * lax_of(s) - lax_of(s) * a3_matrix(s, j, mu);
    return (dl - commut).norm();
}

struct LnTauFit {
    ChargeTriple charges;
    CVector coefficients;  // all fitted powers of 1/lambda
    double rcond = 0.0;
};

/// Fits log(tr T(lambda)) - Nsites log(lambda) to a polynomial in 1/lambda on
/// the given samples; the leading three coefficients estimate the charges.
inline LnTauFit lntau_check(const State& s, std::vector<double> lambdas = {}, int npowers = 0) {
    if (lambdas.empty()) lambdas = {20.0, 25.0, 30.0, 35.0, 40.0, 45.0};
    if (lambdas.size() < 6) throw std::invalid_argument("lntau_check: need >= 6 samples");
    if (npowers <= 0) npowers = static_cast<int>(lambdas.size());
    const int ns = static_cast<int>(lambdas.size());
    CMatrix a(ns, npowers);
    CVector y(ns);
    for (int k = 0; k < ns; ++k) {
        const Complex tr = monodromy(s, lambdas[k]).trace();
        y(k) = std::log(tr / std::pow(Complex(lambdas[k], 0.0), s.nsites));
        for (int p = 0; p < npowers; ++p) a(k, p) = std::pow(lambdas[k], -(p + 1));
    }
    // column scaling keeps the Vandermonde solvable in double precision
    Eigen::VectorXd scale(npowers);
    for (int p = 0; p < npowers; ++p) scale(p) = std::pow(lambdas.front(), p + 1);
    CMatrix as = a * scale.asDiagonal();
    LnTauFit fit;
    fit.rcond = rcond(as);
    if (fit.rcond < 1e-13) throw std::runtime_error("lntau_check: ill-conditioned fit");
    const CVector sol = as.colPivHouseholderQr().solve(y);
    fit.coefficients = scale.asDiagonal() * sol;
    fit.charges.I1 = fit.coefficients(0);
    fit.charges.I2 = fit.coefficients(1);
    fit.charges.I3 = fit.coefficients(2);
    return fit;
}

enum class BracketConstants { Derived, AsPrinted };

using Functional = std::function<Complex(const State&)>;

/// Central-difference Poisson bracket: canonical {x, X} = -1 on field sites
/// plus the linear bracket on the defect block. `Derived` uses the structure
/// constants implied by the quadratic algebra; `AsPrinted` reproduces the
/// stated tensor (which fails antisymmetry; kept for diagnostics).
inline Complex poisson_bracket(const Functional& f, const Functional& g, const State& s, double h,
                               BracketConstants constants = BracketConstants::Derived) {
    if (h <= 0.0) throw std::invalid_argument("poisson_bracket: need h > 0");
    auto grad_site = [&](const Functional& fn, int j, bool wrt_x) {
        CVector grad(s.ncomp);
        for (int k = 0; k < s.ncomp; ++k) {
            State sp = s, sm = s;
            (wrt_x ? sp.x[j](k) : sp.X[j](k)) += h;
            (wrt_x ? sm.x[j](k) : sm.X[j](k)) -= h;
            grad(k) = (fn(sp) - fn(sm)) / (2.0 * h);
        }
        if (!grad.allFinite()) throw std::runtime_error("poisson_bracket: non-finite derivative");
        return grad;
    };
    Complex acc = 0.0;
    for (int j = 0; j < s.nsites; ++j) {
        if (s.is_defect(j)) continue;
        const CVector fx = grad_site(f, j, true);
        const CVector fX = grad_site(f, j, false);
        const CVector gx = grad_site(g, j, true);
        const CVector gX = grad_site(g, j, false);
        for (int k = 0; k < s.ncomp; ++k) acc -= fx(k) * gX(k) - fX(k) * gx(k);
    }
    if (s.defect) {
        const int nn = s.ncomp + 1;
        auto entry = [&](State& st, int i, int jj) -> Complex& {
            auto& d = *st.defect;
            if (i == 0 && jj == 0) return d.alpha;
            if (i == 0) return d.beta(jj - 1);
            if (jj == 0) return d.gamma(i - 1);
            return d.Delta(i - 1, jj - 1);
        };
        CMatrix amat(nn, nn);
        {
            State tmp = s;
            for (int i = 0; i < nn; ++i)
                for (int jj = 0; jj < nn; ++jj) amat(i, jj) = entry(tmp, i, jj);
        }
        auto grad_defect = [&](const Functional& fn) {
            CMatrix grad(nn, nn);
            for (int i = 0; i < nn; ++i)
                for (int jj = 0; jj < nn; ++jj) {
                    State sp = s, sm = s;
                    entry(sp, i, jj) += h;
                    entry(sm, i, jj) -= h;
                    grad(i, jj) = (fn(sp) - fn(sm)) / (2.0 * h);
                }
            return grad;
        };
        const CMatrix df = grad_defect(f);
        const CMatrix dg = grad_defect(g);
        for (int i = 0; i < nn; ++i)
            for (int jj = 0; jj < nn; ++jj)
                for (int k = 0; k < nn; ++k)
                    for (int l = 0; l < nn; ++l) {
                        const Complex pb =
                            (constants == BracketConstants::Derived)
                                ? amat(i, l) * static_cast<double>(k == jj) -
                                      amat(k, jj) * static_cast<double>(i == l)
                                : amat(i, l) * static_cast<double>(k == jj) -
                                      amat(l, jj) * static_cast<double>(i == k);
                        if (pb != 0.0) acc += df(i, jj) * dg(k, l) * pb;
                    }
    }
    return acc;
}

/// Convenience functionals for the three charges.
inline Functional charge_functional(int index, ChargeForm form = ChargeForm::SeriesConsistent) {
    return [index, form](const State& st) {
        const ChargeTriple c = st.defect ? charges_defect(st, form) : charges_bulk(st);
        return index == 1 ? c.I1 : (index == 2 ? c.I2 : c.I3);
    };
}

}  // namespace vnls::lattice
