#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "uhfz2/homotopy.hpp"
#include "uhfz2/invariants.hpp"

using namespace uhfz2;
using testing_helpers::random_hermitian;
using testing_helpers::random_unitary;

namespace {

CMatrix diag_phases(const std::vector<double>& turns_) {
    CVector d(static_cast<Eigen::Index>(turns_.size()));
    for (std::size_t i = 0; i < turns_.size(); ++i) d(i) = std::polar(1.0, kTwoPi * turns_[i]);
    return d.asDiagonal();
}

// t -> g(t) diag(exp(2 pi i c_j sin(2 pi t))) g(t)*, a loop at 1 with zero windings.
UnitaryPath wiggle_loop(std::mt19937_64& rng, int d, double amp, int n) {
    const CMatrix k = random_hermitian(rng, d, 0.7);
    std::vector<double> c(d);
    std::uniform_real_distribution<double> U(-amp, amp);
    for (auto& x : c) x = U(rng);
    const SelfAdjoint K(k);
    UnitaryPath p = sample_path(
        [&](double t) {
            std::vector<double> ph(d);
            for (int j = 0; j < d; ++j) ph[j] = c[j] * std::sin(kTwoPi * t);
            const CMatrix g = expm_sa(K, t).m();
            return CMatrix(g * diag_phases(ph) * g.adjoint());
        },
        n);
    p.u.back() = p.u.front();
    return make_path(p.t, p.u);
}

}  // namespace

TEST_CASE("eigenvalue tracking follows linear phases") {
    const std::vector<double> rates{0.3, -0.2, 0.05};
    const UnitaryPath p = sample_path([&](double t) {
        return diag_phases({0.1 + rates[0] * t, -0.3 + rates[1] * t, 0.4 + rates[2] * t});
    }, 20);
    const EigenPathBundle b = track_eigenvalues(p);
    REQUIRE(b.lambdas.size() == 21);
    std::vector<double> got, want(rates);
    for (std::size_t i = 0; i < 3; ++i) got.push_back(b.lambdas.back()[i] - b.lambdas.front()[i]);
    std::sort(got.begin(), got.end());
    std::sort(want.begin(), want.end());
    for (std::size_t i = 0; i < 3; ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-9));
}

TEST_CASE("windings of a conjugated loop") {
    std::mt19937_64 rng(2);
    const CMatrix g = random_unitary(rng, 2);
    for (int n : {1, -2}) {
        const UnitaryPath p = sample_path([&](double t) {
            return CMatrix(g * diag_phases({n * t, 0.0}) * g.adjoint());
        }, 64);
        const auto w = track_eigenvalues(p).windings();
        std::vector<std::int64_t> got;
        for (const auto& x : w) {
            REQUIRE(x.has_value());
            got.push_back(*x);
        }
        std::sort(got.begin(), got.end());
        std::vector<std::int64_t> want{n, 0};
        std::sort(want.begin(), want.end());
        CHECK(got == want);
    }
}

TEST_CASE("a quarter turn of antipodal eigenvalues is ambiguous") {
    const UnitaryPath p = make_path({0.0, 1.0}, {diag_phases({0.0, 0.5}), diag_phases({0.25, 0.75})});
    try {
        track_eigenvalues(p);
        FAIL("expected AmbiguousMatching");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::AmbiguousMatching);
    }
}

TEST_CASE("short path endpoints and length") {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const CMatrix u = random_unitary(rng, 6);
        const UnitaryPath p = short_path(Unitary(u));
        CHECK(op_norm(p.front() - CMatrix::Identity(6, 6)) < 1e-12);
        CHECK(op_norm(p.back() - u) < 1e-12);
        CHECK(p.lip_estimate <= kPi + 1e-6);
    }
    // an eigenvalue exactly on the cut
    const CMatrix m = -CMatrix::Identity(3, 3);
    const UnitaryPath p = short_path(Unitary(m));
    CHECK(op_norm(p.back() - m) < 1e-12);
    CHECK(p.lip_estimate <= kPi + 1e-6);
}

TEST_CASE("super homotopy stays almost commuting") {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 8; ++trial) {
        const int d = 8;
        const CMatrix g = random_unitary(rng, d);
        std::vector<double> ph(d);
        std::uniform_real_distribution<double> U(-0.5, 0.5);
        for (auto& x : ph) x = U(rng);
        const CMatrix v = g * diag_phases(ph) * g.adjoint();
        // w commutes with v up to a small perturbation
        const CMatrix wc = g * diag_phases({0.4, -0.3, 0.1, 0.2, -0.45, 0.0, 0.33, -0.1}) * g.adjoint();
        const CMatrix w = polar_unitary(wc * expm_sa(SelfAdjoint(random_hermitian(rng, d, 0.002))).m()).m();
        const double eps = 0.1;
        HomotopyReport rep;
        const UnitaryPath z = super_homotopy(Unitary(v), Unitary(w), eps, {}, &rep);
        CHECK(op_norm(z.front() - CMatrix::Identity(d, d)) < 1e-12);
        CHECK(op_norm(z.back() - w) < 1e-12);
        for (const auto& m : z.u) CHECK(op_norm(v * m - m * v) < eps);
        CHECK(z.lip_estimate <= kPi + eps);
        CHECK(rep.commutator_max < eps);
    }
}

TEST_CASE("super homotopy refuses a nonzero Bott index") {
    try {
        super_homotopy(clock(7), shift(7), 0.1);
        FAIL("expected BottObstruction");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::BottObstruction);
    }
}

TEST_CASE("shrinking a loop with zero windings") {
    std::mt19937_64 rng(21);
    const UnitaryPath u = wiggle_loop(rng, 4, 0.3, 200);
    const double C = u.lip_estimate * 1.01;
    const double eps = 0.2;
    ShrinkReport rep;
    const SelfAdjointPath h = lip_shrink_loop(u, C, eps, {}, &rep);
    CHECK(rep.L == static_cast<int>(std::floor(2.0 * C / (eps / 16.0))) + 1);
    CHECK(rep.C_prime == doctest::Approx(2.0 * C * rep.L / 3.0 + C / 6.0));
    CHECK(op_norm(h.h.front()) < 1e-12);
    CHECK(op_norm(h.h.back()) < 1e-12);
    CHECK(rep.max_error < eps);
    CHECK(rep.lip_h <= rep.C_prime);
    // independent check of the approximation at off-grid times
    for (double s : {0.013, 0.25, 0.5, 0.777, 0.99}) {
        const CMatrix e = expm_sa(SelfAdjoint(h.at(s), 1e-8)).m();
        CHECK(op_norm(e - u.at(s)) < eps);
    }
}

TEST_CASE("a loop with nonzero winding cannot shrink") {
    const UnitaryPath u = sample_path([](double t) { return diag_phases({t, 0.0, 0.0}); }, 64);
    try {
        lip_shrink_loop(u, u.lip_estimate * 1.01, 0.2);
        FAIL("expected WindingObstruction");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::WindingObstruction);
    }
}

TEST_CASE("opposite windings cannot shrink either") {
    // the branches meet at -1 halfway and pass through each other
    const UnitaryPath u = sample_path([](double t) { return diag_phases({t, -t}); }, 64);
    REQUIRE(u.closed);
    const EigenPathBundle b = track_eigenvalues(u);
    const auto w = b.windings();
    CHECK(((*w[0] == 1 && *w[1] == -1) || (*w[0] == -1 && *w[1] == 1)));
    try {
        lip_shrink_loop(u, u.lip_estimate * 1.01, 0.2);
        FAIL("expected WindingObstruction");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::WindingObstruction);
    }
}

TEST_CASE("perimeter parametrization round trip") {
    for (double p : {0.0, 0.1, 0.25, 0.4, 0.5, 0.6, 0.75, 0.9}) {
        const auto [s, t] = perimeter_point(p);
        CHECK(perimeter_param(s, t) == doctest::Approx(p));
    }
    CHECK(perimeter_param(-1.0, -1.0) == doctest::Approx(0.5));
}

TEST_CASE("boundary map and disk extension of a coboundary") {
    std::mt19937_64 rng(3);
    const TruncatedUHF t({3});
    const ProductAction a(t, {LocalGen::clock_power(1)}, {LocalGen::shift_power(1)});
    const CMatrix w = expm_sa(SelfAdjoint(random_hermitian(rng, 3, 0.15))).m();
    const Cocycle c = coboundary(Unitary(w), a);
    Config cfg;
    cfg.boundary_samples = 24;
    cfg.disk_grid = 16;
    const BoundaryMap z = boundary_map(c.u1, c.u2, a, std::nullopt, 0.1, cfg);
    CHECK(op_norm(z.at(1.0, 1.0) - CMatrix::Identity(3, 3)) < 1e-12);
    CHECK(op_norm(z.at(-1.0, 1.0) - c.u1) < 1e-9);
    CHECK(op_norm(z.at(1.0, -1.0) - c.u2) < 1e-9);
    CHECK(z.eps_left < 1e-9);
    CHECK(z.eps_bottom < 1e-9 + 2.0 * c.defect);

    const DiskMap disk = disk_extension(z, 0.2, cfg);
    CHECK(disk.guard_max < 0.5);
    CHECK(disk.restriction_error < 1e-9);
    CHECK(op_norm(disk.at(0.0, 0.0) - CMatrix::Identity(3, 3)) < 1e-12);
    for (double s : {-0.9, -0.3, 0.2, 0.7}) {
        const CMatrix m = disk.at(s, 0.5 * s);
        CHECK(unitarity_defect(m) < 1e-9);
    }
    CHECK(std::isfinite(disk.lip_estimate));
}

TEST_CASE("parallel_for visits every index once") {
    std::vector<int> hits(100, 0);
    parallel_for(100, 4, [&](int k) { hits[k] += 1; });
    for (int h : hits) CHECK(h == 1);
}
