#pragma once

#include <optional>
#include <vector>

#include "vnls/lax.hpp"
#include "vnls/types.hpp"

namespace vnls {

/// One dressing pole: mu with Im mu != 0 and a constant N x s matrix of
/// full column rank.
struct DarbouxPole {
    Complex mu;
    CMatrix C;

    int rank() const { return static_cast<int>(C.cols()); }
};

struct SolitonSpec {
    LaxParams params;
    std::vector<DarbouxPole> poles;
};

inline void validate(const SolitonSpec& spec) {
    const int n = spec.params.n;
    for (size_t i = 0; i < spec.poles.size(); ++i) {
        const auto& pole = spec.poles[i];
        if (pole.mu.imag() == 0.0) throw std::invalid_argument("pole must have Im mu != 0");
        if (pole.C.rows() != n || pole.C.cols() < 1 || pole.C.cols() > n - 1)
            throw std::invalid_argument("pole matrix must be n x s with 1 <= s <= n-1");
        Eigen::ColPivHouseholderQR<CMatrix> qr(pole.C);
        if (qr.rank() < pole.C.cols()) throw std::invalid_argument("pole matrix rank-deficient");
        for (size_t j = 0; j < spec.poles.size(); ++j) {
            if (spec.poles[i].mu == std::conj(spec.poles[j].mu))
                throw std::invalid_argument("poles must satisfy mu_i != conj(mu_j)");
            if (i != j && spec.poles[i].mu == spec.poles[j].mu)
                throw std::invalid_argument("poles must be distinct");
        }
    }
}

inline SolitonSpec make_soliton_spec(const LaxParams& p, std::vector<DarbouxPole> poles) {
    SolitonSpec spec{p, std::move(poles)};
    validate(spec);
    return spec;
}

/// Kernel matrix of the dressing at one pole, q^T = C^T Q Psi(mu*)^dag Q
/// with the zero-field fundamental solution.
inline CMatrix q_from_vacuum(const SolitonSpec& spec, size_t pole_index, double x, double t) {
    const auto& pole = spec.poles.at(pole_index);
    const CMatrix q = spec.params.Q();
    const CMatrix psi = vacuum_fundamental(spec.params, std::conj(pole.mu), x, t);
    return q * psi.conjugate() * q * pole.C;  // = (C^T Q Psi^dag Q)^T, Psi diagonal
}

/// Same construction against an arbitrary fundamental solution of the seed field.
inline CMatrix q_from_fundamental(const LaxParams& p, const CMatrix& C,
                                  const CMatrix& psi_at_conj_mu) {
    const CMatrix q = p.Q();
    return (C.transpose() * q * psi_at_conj_mu.adjoint() * q).transpose();
}

struct Projector {
    CMatrix P;      // n x n idempotent
    CMatrix q;      // n x s kernel data
    CMatrix gram;   // s x s, q^T Q q*
};

inline Projector projector(const LaxParams& p, const CMatrix& q, double rcond_floor = 1e-12) {
    const CMatrix gram = q.transpose() * p.Q() * q.conjugate();
    if (rcond(gram) < rcond_floor)
        throw SingularGram("projector: q^T Q q* numerically singular");
    Eigen::PartialPivLU<CMatrix> lu(gram);
    const CMatrix p_mat = p.Q() * q.conjugate() * lu.solve(q.transpose());
    return Projector{p_mat, q, gram};
}

/// M(lambda) = 1 + (mu - mu*)/(lambda - mu) P.
inline CMatrix darboux_matrix(const Projector& pr, Complex mu, Complex lambda) {
    if (lambda == mu) throw std::invalid_argument("darboux_matrix: lambda at the pole");
    const int n = static_cast<int>(pr.P.rows());
    return CMatrix::Identity(n, n) + ((mu - std::conj(mu)) / (lambda - mu)) * pr.P;
}

/// M(lambda)^{-1} = 1 + Q M0^dag Q / (lambda - mu*), M0 = (mu - mu*) P.
inline CMatrix darboux_inverse(const LaxParams& p, const Projector& pr, Complex mu,
                               Complex lambda) {
    if (lambda == std::conj(mu))
        throw std::invalid_argument("darboux_inverse: lambda at the conjugate pole");
    const int n = static_cast<int>(pr.P.rows());
    const CMatrix m0 = (mu - std::conj(mu)) * pr.P;
    return CMatrix::Identity(n, n) + (p.Q() * m0.adjoint() * p.Q()) / (lambda - std::conj(mu));
}

/// Field update of one elementary dressing step: u_j += i(mu* - mu)/sqrt(kappa) P_{n j}.
inline CVector dress_update(const LaxParams& p, const Projector& pr, Complex mu,
                            const CVector& seed_u) {
    const int m = p.ncomp();
    CVector u = seed_u;
    const Complex factor = kI * (std::conj(mu) - mu) / p.beta;
    for (int j = 0; j < m; ++j) u(j) += factor * pr.P(m, j);
    return u;
}

/// Single-pole dressing of the zero seed at (x, t).
inline CVector dress_once(const SolitonSpec& spec, size_t pole_index, double x, double t) {
    const CMatrix q = q_from_vacuum(spec, pole_index, x, t);
    const Projector pr = projector(spec.params, q);
    return dress_update(spec.params, pr, spec.poles[pole_index].mu, CVector::Zero(spec.params.ncomp()));
}

/// Single-pole dressing of a general seed closure whose auxiliary problem is
/// integrated numerically.
inline CVector dress_once_seeded(const SolitonSpec& spec, size_t pole_index,
                                 const FieldClosure& seed, double x, double t,
                                 const IntegratorOptions& opt = {}) {
    const auto& pole = spec.poles.at(pole_index);
    const CMatrix psi = numeric_fundamental(spec.params, seed, std::conj(pole.mu), x, t, opt);
    const CMatrix q = q_from_fundamental(spec.params, pole.C, psi);
    const Projector pr = projector(spec.params, q);
    return dress_update(spec.params, pr, pole.mu, seed.eval(x, t));
}

/// Chained elementary dressing: poles applied in order, each kernel built from
/// the previously dressed fundamental solution Phi_k = M_k ... M_1 Psi_0.
/// Returns the field after all poles (all closed-form; no integration).
struct ChainResult {
    CVector u;
    std::vector<Projector> projectors;
};

inline ChainResult dress_chain(const SolitonSpec& spec, double x, double t) {
    const LaxParams& p = spec.params;
    const size_t n = spec.poles.size();
    std::vector<Projector> prs;
    prs.reserve(n);
    auto fundamental_upto = [&](size_t k, Complex lambda) {
        CMatrix phi = vacuum_fundamental(p, lambda, x, t);
        for (size_t i = 0; i < k; ++i)
            phi = darboux_matrix(prs[i], spec.poles[i].mu, lambda) * phi;
        return phi;
    };
    CVector u = CVector::Zero(p.ncomp());
    for (size_t k = 0; k < n; ++k) {
        const CMatrix phi = fundamental_upto(k, std::conj(spec.poles[k].mu));
        const CMatrix q = q_from_fundamental(p, spec.poles[k].C, phi);
        prs.push_back(projector(p, q));
        u = dress_update(p, prs.back(), spec.poles[k].mu, u);
    }
    return ChainResult{std::move(u), std::move(prs)};
}

/// Cauchy pairing (q_i, q_j) = q_i^T Q q_j* / (mu_i - mu_j*) for rank-1 poles.
inline CMatrix cauchy_matrix(const SolitonSpec& spec, const std::vector<CVector>& qs) {
    const size_t n = qs.size();
    CMatrix g(n, n);
    for (size_t i = 0; i < n; ++i)
        for (size_t j = 0; j < n; ++j)
            g(i, j) = (qs[i].transpose() * spec.params.Q() * qs[j].conjugate())(0, 0) /
                      (spec.poles[i].mu - std::conj(spec.poles[j].mu));
    return g;
}

inline std::vector<CVector> multi_pole_q(const SolitonSpec& spec, double x, double t) {
    std::vector<CVector> qs;
    qs.reserve(spec.poles.size());
    for (size_t i = 0; i < spec.poles.size(); ++i) {
        if (spec.poles[i].rank() != 1)
            throw std::invalid_argument("multi-pole dressing requires rank-1 poles");
        qs.push_back(q_from_vacuum(spec, i, x, t).col(0));
    }
    return qs;
}

/// Residue vectors p_i solving sum_i (q_i, q_j) p_i = Q q_j*, by one dense solve.
inline std::vector<CVector> multi_pole_p(const SolitonSpec& spec, double x, double t,
                                         double rcond_floor = 1e-12) {
    const auto qs = multi_pole_q(spec, x, t);
    const size_t n = qs.size();
    const CMatrix g = cauchy_matrix(spec, qs);
    if (rcond(g) < rcond_floor) throw SingularCauchy("multi_pole_p: Cauchy matrix singular");
    CMatrix b(spec.params.n, n);
    for (size_t j = 0; j < n; ++j) b.col(j) = spec.params.Q() * qs[j].conjugate();
    // columns p_i of the unknown satisfy P G = B
    const CMatrix p = g.transpose().partialPivLu().solve(b.transpose()).transpose();
    std::vector<CVector> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = p.col(i);
    return out;
}

/// n-pole dressed field of the zero seed: u_j = -(i/sqrt(kappa)) tau_j / tau,
/// realized as a dense solve against the Cauchy matrix.
inline CVector n_soliton(const SolitonSpec& spec, double x, double t,
                         double rcond_floor = 1e-12) {
    const auto qs = multi_pole_q(spec, x, t);
    const size_t n = qs.size();
    const int m = spec.params.ncomp();
    const CMatrix g = cauchy_matrix(spec, qs);
    if (rcond(g) < rcond_floor) throw SingularCauchy("n_soliton: Cauchy matrix singular");
    // u_j = (i kappa / beta) * sum_{k,m} q_k(j) (G^{-T})_{km} conj(q_m(N));
    // one dense solve against G^T replaces the symbolic determinant ratio.
    CVector rhs(n);
    for (size_t k = 0; k < n; ++k) rhs(k) = std::conj(qs[k](m));
    const CVector sol = g.transpose().partialPivLu().solve(rhs);
    CVector u = CVector::Zero(m);
    const Complex factor = kI * static_cast<double>(spec.params.kappa) / spec.params.beta;
    for (int j = 0; j < m; ++j) {
        Complex acc = 0.0;
        for (size_t k = 0; k < n; ++k) acc += qs[k](j) * sol(k);
        u(j) = factor * acc;
    }
    return u;
}

/// Asymptotic-expansion diagnostic: || sum_i M_i + sum_i Q M_i^dag Q ||_F with
/// M_i = p_i q_i^T from the residue system.
inline double residue_sum_residual(const SolitonSpec& spec, double x, double t) {
    const auto qs = multi_pole_q(spec, x, t);
    const auto ps = multi_pole_p(spec, x, t);
    const CMatrix q = spec.params.Q();
    CMatrix acc = CMatrix::Zero(spec.params.n, spec.params.n);
    for (size_t i = 0; i < qs.size(); ++i) {
        const CMatrix mi = ps[i] * qs[i].transpose();
        acc += mi + q * mi.adjoint() * q;
    }
    return acc.norm();
}

/// Closure view of a dressed field (single pole or chain).
inline FieldClosure soliton_closure(const SolitonSpec& spec) {
    return FieldClosure([spec](double x, double t) {
        if (spec.poles.size() == 1) return dress_once(spec, 0, x, t);
        return dress_chain(spec, x, t).u;
    });
}

inline FieldClosure n_soliton_closure(const SolitonSpec& spec) {
    return FieldClosure([spec](double x, double t) { return n_soliton(spec, x, t); });
}

}  // namespace vnls
