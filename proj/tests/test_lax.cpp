#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "vnls/grid.hpp"
#include "vnls/lax.hpp"

using namespace vnls;
using Catch::Approx;

TEST_CASE("make_params fixes the normalisation constants") {
    auto p = make_params(2, 1);
    CHECK(p.rho == Approx(1.0));
    CHECK(p.a == Approx(-0.5));
    CHECK(p.alpha == Complex(0.0, -0.5));
    CHECK(p.beta == Complex(1.0, 0.0));

    auto p3 = make_params(3, 1);
    CHECK(p3.rho == Approx(0.5));
    CHECK(p3.a == Approx(-2.0 / 3.0));
    CHECK(p3.alpha.imag() == Approx(-2.0 / 3.0));

    auto pm = make_params(2, -1);
    CHECK(pm.beta == kI);

    CHECK_THROWS_AS(make_params(1, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_params(3, 0), std::invalid_argument);
    CHECK_THROWS_AS(make_params(3, 2), std::invalid_argument);
}

TEST_CASE("LaxParams invariants") {
    for (int n : {2, 3, 5}) {
        for (int kappa : {1, -1}) {
            auto p = make_params(n, kappa);
            CHECK(std::abs(u1_matrix(p).trace()) < 1e-15);
            const CMatrix q = p.Q();
            CHECK((q * q - CMatrix::Identity(n, n)).norm() < 1e-15);
            CHECK((q - q.adjoint()).norm() < 1e-15);
            CHECK(p.a * (p.rho + 1.0) == Approx(-1.0));
        }
    }
}

TEST_CASE("build_U block layout") {
    auto p = make_params(2, 1);
    CVector u0 = CVector::Zero(1);
    CMatrix m = build_U(p, u0, 2.0);
    CHECK((m - (CMatrix(2, 2) << Complex(0, -1), 0, 0, Complex(0, 1)).finished()).norm() < 1e-15);

    CVector u1(1);
    u1 << 1.0;
    m = build_U(p, u1, 0.0);
    CHECK((m - (CMatrix(2, 2) << 0, 1, 1, 0).finished()).norm() < 1e-15);

    auto p3 = make_params(3, -1);
    CMatrix m3 = build_U(p3, CVector::Zero(2), 1.0);
    CMatrix expect = CMatrix::Zero(3, 3);
    expect(0, 0) = Complex(0, -1.0 / 3.0);
    expect(1, 1) = Complex(0, -1.0 / 3.0);
    expect(2, 2) = Complex(0, 2.0 / 3.0);
    CHECK((m3 - expect).norm() < 1e-15);

    CHECK(std::abs(build_U(p3, oracle::rand_cvector(2), oracle::rand_complex()).trace()) < 1e-15);
}

TEST_CASE("build_V block layout") {
    auto p = make_params(2, 1);
    const Complex lam = oracle::rand_complex();
    CHECK((build_V(p, CVector::Zero(1), CVector::Zero(1), lam) + lam * lam * u1_matrix(p)).norm() <
          1e-15);

    CVector u(1), ux(1);
    u << 1.0;
    ux << 0.0;
    CMatrix m = build_V(p, u, ux, 0.0);
    CHECK((m - (CMatrix(2, 2) << kI, 0, 0, -kI).finished()).norm() < 1e-15);

    ux << 1.0;
    m = build_V(p, u, ux, 0.0);
    CHECK((m - (CMatrix(2, 2) << kI, -kI, kI, -kI).finished()).norm() < 1e-15);
}

TEST_CASE("reduction symmetry holds identically and detects corruption") {
    for (int kappa : {1, -1}) {
        auto p = make_params(3, kappa);
        for (int trial = 0; trial < 10; ++trial) {
            const CVector u = oracle::rand_cvector(2);
            const CVector ux = oracle::rand_cvector(2);
            const Complex lam = oracle::rand_complex(2.0);
            CHECK(reduction_residual_u(p, u, lam) < 1e-14);
            CHECK(reduction_residual_v(p, u, ux, lam) < 1e-13);
        }
        CHECK(reduction_residual_u(p, CVector::Zero(2), 1.0) == 0.0);

        // corrupted beta phase -> symmetry broken for nonzero fields
        // (a real rescale of beta keeps beta = kappa * conj(beta) and slips through)
        auto bad = p;
        bad.beta *= Complex(1.0, 0.5);
        const CVector u = oracle::rand_cvector(2);
        const Complex lam{1.0, 2.0};
        CHECK(reduction_residual_of(p, build_U(bad, u, lam), build_U(bad, u, std::conj(lam))) >
              1e-2);
        auto rescaled = p;
        rescaled.beta *= 2.0;
        CHECK(reduction_residual_of(p, build_U(rescaled, u, lam),
                                    build_U(rescaled, u, std::conj(lam))) < 1e-14);
    }
}

TEST_CASE("vacuum fundamental solution") {
    auto p = make_params(2, 1);
    CMatrix psi = vacuum_fundamental(p, kI, 1.0, 0.0);
    CHECK(std::abs(psi(0, 0) - std::exp(0.5)) < 1e-14);
    CHECK(std::abs(psi(1, 1) - std::exp(-0.5)) < 1e-14);
    CHECK(std::abs(psi(0, 1)) == 0.0);

    for (int n : {2, 4}) {
        auto pn = make_params(n, -1);
        CHECK((vacuum_fundamental(pn, oracle::rand_complex(), 0.0, 0.0) -
               CMatrix::Identity(n, n)).norm() < 1e-15);
    }

    // real spectral parameter: unitary diagonal
    psi = vacuum_fundamental(p, 1.0, 1.0, 1.0);
    for (int k = 0; k < 2; ++k) CHECK(std::abs(std::abs(psi(k, k)) - 1.0) < 1e-14);

    // exactly solves both legs of the linear system
    const Complex mu{0.4, 0.7};
    const double x = 0.3, t = 0.2, h = 1e-5;
    const CMatrix dx = (vacuum_fundamental(p, mu, x + h, t) - vacuum_fundamental(p, mu, x - h, t)) /
                       (2 * h);
    const CMatrix dt = (vacuum_fundamental(p, mu, x, t + h) - vacuum_fundamental(p, mu, x, t - h)) /
                       (2 * h);
    const CMatrix psi0 = vacuum_fundamental(p, mu, x, t);
    CHECK((dx - build_U(p, CVector::Zero(1), mu) * psi0).norm() < 1e-9);
    CHECK((dt - build_V(p, CVector::Zero(1), CVector::Zero(1), mu) * psi0).norm() < 1e-9);

    CHECK_THROWS_AS(vacuum_fundamental(p, Complex(0, 100.0), 20.0, 0.0), ExponentOverflow);
}

TEST_CASE("vacuum fundamental satisfies the conjugation constraint") {
    // Q Psi(lambda*)^{-dag} Q = Psi(lambda) at random probes
    for (int kappa : {1, -1}) {
        auto p = make_params(3, kappa);
        const CMatrix q = p.Q();
        for (int trial = 0; trial < 10; ++trial) {
            const Complex lam = oracle::rand_complex();
            const double x = oracle::rand_complex().real();
            const double t = oracle::rand_complex().real();
            const CMatrix psi = vacuum_fundamental(p, lam, x, t);
            const CMatrix other = vacuum_fundamental(p, std::conj(lam), x, t);
            CHECK((q * other.adjoint().inverse() * q - psi).norm() < 1e-12);
        }
    }
}

TEST_CASE("numeric fundamental matches the closed form on the zero field") {
    auto p = make_params(2, -1);
    auto u0 = zero_closure(1);
    const Complex mu{0.3, 1.0};
    IntegratorOptions opt;
    opt.max_step = 2e-3;
    const CMatrix got = numeric_fundamental(p, u0, mu, 0.8, 0.5, opt);
    const CMatrix want = vacuum_fundamental(p, mu, 0.8, 0.5);
    CHECK((got - want).norm() < 1e-10);
    CHECK(path_swap_discrepancy(p, u0, mu, 0.8, 0.5, opt) < 1e-10);
}

TEST_CASE("path swap discrepancy separates solutions from non-solutions") {
    auto p = make_params(2, -1);
    // u(x,t) = x is not a solution: the two integration orders disagree
    FieldClosure linear([](double x, double) {
        CVector v(1);
        v << x;
        return v;
    });
    CHECK(path_swap_discrepancy(p, linear, Complex(0, 2), 1.0, 0.5) > 1e-3);
}

TEST_CASE("vnls_residual is zero on the zero field and positive on a non-solution") {
    FieldGrid z(-1.0, 0.1, 25, 0.0, 0.01, 5, 1);
    auto r = vnls_residual(z, -1);
    CHECK(r.maxCoeff() == 0.0);
    CHECK(r.rows() == 3);
    CHECK(r.cols() == 21);

    FieldClosure linear([](double x, double) {
        CVector v(1);
        v << x;
        return v;
    });
    auto g = sample_closure(linear, 1, -1.0, 0.1, 25, 0.0, 0.01, 5);
    CHECK(vnls_residual(g, -1).maxCoeff() > 0.1);

    CHECK_THROWS_AS(FieldGrid(0, 0.1, 4, 0, 0.1, 5, 1), std::invalid_argument);
    CHECK_THROWS_AS(FieldGrid(0, 0.1, 5, 0, -0.1, 5, 1), std::invalid_argument);
}

TEST_CASE("scalar bright soliton passes the residual refinement study") {
    // u(x,t) = sech(x) e^{it} solves the focusing scalar equation
    FieldClosure soliton([](double x, double t) {
        CVector v(1);
        v << std::exp(kI * t) / std::cosh(x);
        return v;
    });
    std::vector<double> hs, errs;
    for (double dx : {0.1, 0.05, 0.025}) {
        const double dt = 0.5 * dx * dx;
        const int nx = static_cast<int>(std::round(8.0 / dx)) + 1;
        auto g = sample_closure(soliton, 1, -4.0, dx, nx, 0.0, dt, 7);
        hs.push_back(dx);
        errs.push_back(vnls_residual(g, -1).maxCoeff());
    }
    const double order = oracle::fitted_order(hs, errs);
    CHECK(order >= 3.5);
}

TEST_CASE("zero curvature residual on grids") {
    auto p = make_params(2, -1);
    FieldGrid z(-1.0, 0.1, 25, 0.0, 0.01, 5, 1);
    CHECK(zero_curvature_residual(z, p, Complex(0.2, 0.4)) < 1e-15);

    FieldClosure linear([](double x, double) {
        CVector v(1);
        v << x;
        return v;
    });
    auto g = sample_closure(linear, 1, -1.0, 0.05, 41, 0.0, 0.01, 5);
    CHECK(zero_curvature_residual(g, p, Complex(0.2, 0.4)) > 1e-3);
}
