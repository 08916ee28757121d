#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "uhfz2/actions.hpp"
#include "uhfz2/core.hpp"

using namespace uhfz2;
using testing_helpers::random_hermitian;
using testing_helpers::random_unitary;

TEST_CASE("unitary_log on diagonal and identity") {
    CHECK(op_norm(unitary_log(Unitary::identity(4)).h.m()) < 1e-14);
    CMatrix u = CMatrix::Zero(2, 2);
    u(0, 0) = std::polar(1.0, kTwoPi * 0.3);
    u(1, 1) = std::polar(1.0, -kTwoPi * 0.1);
    const CMatrix h = unitary_log(Unitary(u)).h.m();
    CHECK(std::abs(h(0, 0) - 0.3) < 1e-12);
    CHECK(std::abs(h(1, 1) + 0.1) < 1e-12);
    CHECK(std::abs(h(0, 1)) < 1e-12);
}

TEST_CASE("unitary_log matches a scalar log per eigenvalue") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        // spectrum in the upper half circle
        const CMatrix q = random_unitary(rng, 4);
        std::uniform_real_distribution<double> ph(0.01, 0.49);
        CVector lam(4);
        for (int i = 0; i < 4; ++i) lam(i) = std::polar(1.0, kTwoPi * ph(rng));
        const CMatrix u = q * lam.asDiagonal() * q.adjoint();
        const LogResult lg = unitary_log(Unitary(u));
        CHECK(op_norm(expm_sa(lg.h).m() - u) < 1e-10);
        Eigen::ComplexEigenSolver<CMatrix> es(u);
        CMatrix oracle = CMatrix::Zero(4, 4);
        for (int i = 0; i < 4; ++i) {
            CVector v = es.eigenvectors().col(i).normalized();
            oracle += (std::arg(es.eigenvalues()(i)) / kTwoPi) * (v * v.adjoint());
        }
        CHECK(op_norm(oracle - lg.h.m()) < 1e-9);
    }
}

TEST_CASE("unitary_log refuses the cut unless rotated") {
    CMatrix u = CMatrix::Identity(2, 2);
    u(1, 1) = -1.0;
    CHECK_THROWS_AS(unitary_log(Unitary(u)), Error);
    LogOptions opts;
    opts.rotation = 0.25;
    const LogResult lg = unitary_log(Unitary(u), Config{}, opts);
    CHECK(op_norm(expm_sa(lg.h).m() - u) < 1e-12);
}

TEST_CASE("expm_sa basics") {
    CHECK(op_norm(expm_sa(SelfAdjoint(CMatrix::Zero(3, 3))).m() - CMatrix::Identity(3, 3)) < 1e-15);
    CMatrix half(1, 1);
    half(0, 0) = 0.5;
    CHECK(std::abs(expm_sa(SelfAdjoint(half)).m()(0, 0) + 1.0) < 1e-15);
}

TEST_CASE("polar_unitary recovers the unitary factor") {
    std::mt19937_64 rng(11);
    CHECK(op_norm(polar_unitary(2.0 * CMatrix::Identity(3, 3)).m() - CMatrix::Identity(3, 3)) < 1e-14);
    for (int d : {3, 8, 80}) {
        const CMatrix u = random_unitary(rng, d);
        const CMatrix w = random_unitary(rng, d);
        std::uniform_real_distribution<double> ev(0.5, 2.0);
        RVector lam(d);
        for (int i = 0; i < d; ++i) lam(i) = ev(rng);
        const CMatrix pos = w * lam.cast<cplx>().asDiagonal() * w.adjoint();
        const Unitary got = polar_unitary(u * pos);
        CHECK(op_norm(got.m() - u) < 1e-9);
        CHECK(op_norm(polar_unitary(got.m()).m() - got.m()) < 1e-9);
        CHECK(op_norm(polar_unitary(u).m() - u) < 1e-9);
    }
    CHECK_THROWS_AS(polar_unitary(CMatrix::Zero(2, 2)), Error);
}

TEST_CASE("spectral_decomp of clock, shift and identity") {
    const auto dc = spectral_decomp(clock(3));
    REQUIRE(dc.clusters.size() == 3);
    CMatrix sum = CMatrix::Zero(3, 3);
    for (const auto& c : dc.clusters) {
        CHECK(std::abs(std::abs(c.eigenvalue) - 1.0) < 1e-12);
        const CMatrix p = c.projection().m();
        // coordinate projections
        CHECK(std::abs(p.trace() - 1.0) < 1e-12);
        CHECK((p.diagonal().array().abs() > 0.999).count() == 1);
        sum += p;
    }
    CHECK(op_norm(sum - CMatrix::Identity(3, 3)) < 1e-9);

    const auto ds = spectral_decomp(shift(4));
    REQUIRE(ds.clusters.size() == 4);
    Eigen::ComplexEigenSolver<CMatrix> es(shift(4).m());
    for (const auto& c : ds.clusters) {
        double best = 10.0;
        for (int i = 0; i < 4; ++i) best = std::min(best, std::abs(es.eigenvalues()(i) - c.eigenvalue));
        CHECK(best < 1e-9);
        CHECK(std::abs(std::pow(c.eigenvalue, 4) - 1.0) < 1e-9);
    }
    const auto di = spectral_decomp(Unitary::identity(5));
    REQUIRE(di.clusters.size() == 1);
    CHECK(op_norm(di.clusters[0].projection().m() - CMatrix::Identity(5, 5)) < 1e-12);
}

TEST_CASE("spectral_decomp reconstructs random unitaries") {
    std::mt19937_64 rng(5);
    for (int d : {2, 6, 17}) {
        const CMatrix u = random_unitary(rng, d);
        const auto sd = spectral_decomp(Unitary(u));
        CMatrix rec = CMatrix::Zero(d, d);
        for (std::size_t i = 0; i < sd.clusters.size(); ++i) {
            const CMatrix pi = sd.clusters[i].projection().m();
            rec += sd.clusters[i].eigenvalue * pi;
            for (std::size_t j = i + 1; j < sd.clusters.size(); ++j)
                CHECK(op_norm(pi * sd.clusters[j].projection().m()) < 1e-8);
        }
        CHECK(op_norm(rec - u) < 1e-8);
    }
}

TEST_CASE("op_norm and normalized_trace") {
    CHECK(std::abs(op_norm(CMatrix::Identity(4, 4)) - 1.0) < 1e-12);
    CMatrix d = CMatrix::Zero(2, 2);
    d(0, 0) = 3.0;
    d(1, 1) = -1.0;
    CHECK(std::abs(op_norm(d) - 3.0) < 1e-12);
    const CMatrix u = clock(7).m(), v = shift(7).m();
    CHECK(std::abs(op_norm(u * v - v * u) - std::abs(1.0 - std::polar(1.0, kTwoPi / 7))) < 1e-10);
    CHECK(std::abs(op_norm(u * v - v * u) - 0.8678) < 1e-4);
    CHECK(std::abs(normalized_trace(CMatrix::Identity(6, 6)) - 1.0) < 1e-15);
    CHECK(std::abs(normalized_trace(clock(5).m())) < 1e-14);
    CMatrix p = CMatrix::Zero(5, 5);
    p(1, 1) = p(3, 3) = 1.0;
    CHECK(std::abs(normalized_trace(p) - 0.4) < 1e-15);
    // large dimension takes the Gram route
    std::mt19937_64 rng(3);
    const CMatrix big = testing_helpers::gaussian(rng, 60);
    Eigen::JacobiSVD<CMatrix> svd(big);
    CHECK(std::abs(op_norm(big) - svd.singularValues()(0)) < 1e-10 * svd.singularValues()(0));
}

TEST_CASE("exp and log Lipschitz inequalities on random pairs") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> dim(2, 16);
    for (int trial = 0; trial < 100; ++trial) {
        const int d = dim(rng);
        const CMatrix h1 = random_hermitian(rng, d, 0.7);
        const CMatrix h2 = random_hermitian(rng, d, 0.7);
        const double lhs = op_norm(expm_sa(SelfAdjoint(h1)).m() - expm_sa(SelfAdjoint(h2)).m());
        CHECK(lhs <= kTwoPi * op_norm(h1 - h2) + 1e-12);

        // ||u_i - 1|| < 1/2 forces ||h_i|| < 1/12
        const Unitary u1 = expm_sa(SelfAdjoint(random_hermitian(rng, d, 0.079)));
        const Unitary u2 = expm_sa(SelfAdjoint(random_hermitian(rng, d, 0.079)));
        const double l1 = op_norm(unitary_log(u1).h.m() - unitary_log(u2).h.m());
        CHECK(l1 <= op_norm(u1.m() - u2.m()) / kPi + 1e-12);
    }
}

TEST_CASE("safe_rotation moves the cut into a gap") {
    CVector ev(3);
    ev << -1.0, std::polar(1.0, 0.2), std::polar(1.0, 2.0);
    const double rot = safe_rotation(ev, 1e-8);
    for (int i = 0; i < 3; ++i) {
        const double ph = std::arg(ev(i)) / kTwoPi;
        CHECK(std::abs(wrap_turn(ph - rot)) < 0.5 - 1e-3);
    }
}
