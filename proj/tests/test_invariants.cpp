#include "doctest.h"

#include <Eigen/Eigenvalues>

#include "helpers.hpp"
#include "uhfz2/invariants.hpp"

using namespace uhfz2;
using testing_helpers::random_hermitian;
using testing_helpers::random_unitary;

namespace {

SupernaturalNumber sn_235() {
    SupernaturalNumber sn;
    sn.exponents[2] = Exponent::finite(1);
    sn.exponents[3] = Exponent::finite(1);
    sn.exponents[5] = Exponent::inf();
    return sn;
}

// Tr of the principal log via a general eigensolver.
double brute_tr_log(const CMatrix& x) {
    Eigen::ComplexEigenSolver<CMatrix> es(x);
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) s += std::arg(es.eigenvalues()(i)) / kTwoPi;
    return s;
}

}  // namespace

TEST_CASE("winding_tau of simple loops") {
    const UnitaryPath c = sample_path([](double) { return CMatrix(CMatrix::Identity(3, 3)); }, 4);
    CHECK(winding_tau(c).numerator == 0);
    const UnitaryPath s = sample_path([](double t) { return CMatrix(std::polar(1.0, kTwoPi * t) * CMatrix::Identity(3, 3)); }, 16);
    CHECK(winding_tau(s) == K0Value{1, 1});
    const UnitaryPath h = sample_path(
        [](double t) {
            CMatrix m = CMatrix::Identity(2, 2);
            m(0, 0) = std::polar(1.0, kTwoPi * t);
            return m;
        },
        16);
    CHECK(winding_tau(h) == K0Value{1, 2});
    const UnitaryPath coarse = sample_path([](double t) { return CMatrix(std::polar(1.0, kTwoPi * t) * CMatrix::Identity(2, 2)); }, 3);
    CHECK_THROWS_AS(winding_tau(coarse), Error);
}

TEST_CASE("bott of clock and shift") {
    for (int q : {5, 7, 9, 11}) {
        const BottResult b = bott(clock(q), shift(q));
        CHECK(b.value == 1);
        CHECK(b.commutator_norm < 2.0);
        const CMatrix u = clock(q).m(), v = shift(q).m();
        CHECK(std::llround(brute_tr_log(u * v * u.adjoint() * v.adjoint())) == 1);
        CHECK(bott(clock(q), shift(q).adjoint()).value == -1);
    }
    CHECK(std::abs(bott(clock(7), shift(7)).commutator_norm - 0.8678) < 1e-4);
    CHECK(bott(clock(5), clock(5)).value == 0);
}

TEST_CASE("bott is antisymmetric on almost commuting pairs") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 10; ++trial) {
        const int q = 6 + trial;
        const CMatrix g = random_unitary(rng, q);
        const Unitary v(g * clock(q).m() * g.adjoint());
        const Unitary w(g * shift(q).m() * g.adjoint() * expm_sa(SelfAdjoint(random_hermitian(rng, q, 0.01))).m());
        CHECK(bott(v, w).value == -bott(w, v).value);
    }
}

TEST_CASE("kappa examples") {
    const TruncatedUHF t7({7});
    const ProductAction id = ProductAction::identity(t7);
    const CMatrix one = CMatrix::Identity(7, 7);
    CHECK(kappa_fast(one, one, id).integer_form == 0);
    const KappaResult k = kappa_fast(clock(7).m(), shift(7).m(), id);
    CHECK(k.integer_form == 1);
    CHECK(k.value == K0Value{1, 7});
    CHECK(std::abs(k.defect - 0.8678) < 1e-4);
    CHECK_FALSE(admissible(make_cocycle(clock(7).m(), shift(7).m(), id), id));

    // loop construction with short exponential paths agrees
    const auto h1 = exp_path(unitary_log(clock(7), Config{}, {0.25}).h, 64);
    const auto h2 = exp_path(unitary_log(shift(7), Config{}, {0.25}).h, 64);
    CHECK(kappa_loop(clock(7).m(), shift(7).m(), id, h1, h2).integer_form == 1);
    const auto c1 = exp_path(SelfAdjoint(CMatrix::Zero(7, 7)), 2);
    CHECK(kappa_loop(one, one, id, c1, c1).integer_form == 0);
}

TEST_CASE("kappa of coboundaries and the trace bound") {
    std::mt19937_64 rng(8);
    const TruncatedUHF t({2, 3, 5});
    ModelSpec spec;
    spec.f = {{2, 1}, {3, 2}};
    const ProductAction g = make_model_action(spec, t, sn_235());
    for (int i = 0; i < 20; ++i) {
        const Unitary v(random_unitary(rng, 30));
        const Cocycle c = coboundary(v, g);
        CHECK(kappa_fast(c.u1, c.u2, g).integer_form == 0);
        CHECK(admissible(c, g));
        const CMatrix u1 = c.u1 * expm_sa(SelfAdjoint(random_hermitian(rng, 30, 0.03 * (i + 1) / 20.0))).m();
        const KappaResult k = kappa_fast(u1, c.u2, g);
        CHECK(std::abs(k.tau_raw) < std::asin(k.defect) / kTwoPi);
        CHECK(k.residual < 1e-6);
    }
}

TEST_CASE("kappa_loop agrees with kappa_fast on perturbed coboundaries") {
    std::mt19937_64 rng(12);
    const TruncatedUHF t({2, 3});
    ModelSpec spec;
    spec.f = {{3, 1}};
    const ProductAction g = make_model_action(spec, t, sn_235());
    Config cfg;
    for (int i = 0; i < 10; ++i) {
        const Unitary v(random_unitary(rng, 6));
        const Cocycle c = coboundary(v, g);
        const CMatrix u2 = c.u2 * expm_sa(SelfAdjoint(random_hermitian(rng, 6, 0.05))).m();
        auto short_exp = [&](const CMatrix& u) {
            const EigenSystem es = unitary_eigensystem(u);
            LogOptions o;
            o.rotation = safe_rotation(es.values, 1e-3);
            return exp_path(unitary_log(Unitary::trusted(u), es, cfg, o).h, 96);
        };
        const KappaResult fast = kappa_fast(c.u1, u2, g);
        const KappaResult loop = kappa_loop(c.u1, u2, g, short_exp(c.u1), short_exp(u2));
        CHECK(fast.integer_form == loop.integer_form);
    }
}

TEST_CASE("delta_tau") {
    CHECK(delta_tau(Unitary::identity(3)).value == 0.0);
    const Unitary s = Unitary::trusted(std::polar(1.0, kTwoPi / 3.0) * CMatrix::Identity(2, 2));
    const DeltaTau d = delta_tau(s);
    CHECK(d.denominator == 2);
    // 1/3 modulo (1/2)Z
    CHECK(std::abs(d.value - 1.0 / 3.0) < 1e-12);
    std::mt19937_64 rng(3);
    for (int i = 0; i < 10; ++i) {
        const Unitary u = expm_sa(SelfAdjoint(random_hermitian(rng, 4, 0.2)));
        const Unitary v = expm_sa(SelfAdjoint(random_hermitian(rng, 4, 0.2)));
        const double lhs = delta_tau(u * v).value;
        const double rhs = delta_tau(u).value + delta_tau(v).value;
        const double diff = (lhs - rhs) * 4.0;
        CHECK(std::abs(diff - std::round(diff)) < 1e-9);
    }
}

TEST_CASE("model invariant and sign normalization") {
    const auto sn = sn_235();
    const TruncatedUHF t({2, 3, 5, 5});
    for (int f2 = 0; f2 < 2; ++f2)
        for (int f3 = 0; f3 < 3; ++f3) {
            ModelSpec spec;
            spec.f = {{2, f2}, {3, f3}};
            const ProductAction g = make_model_action(spec, t, sn);
            const auto inv = action_invariant(g, sn);
            CHECK(inv.at(2).value == f2);
            CHECK(inv.at(3).value == f3);
            CHECK(pair_invariant(g, g, sn, 2).residue.value == 0);
            CHECK(pair_invariant_dense(ProductAction::identity(t), g, sn, 3).residue.value == f3);
        }
}

TEST_CASE("pair invariant on random Weyl triples: oracle and additivity") {
    std::mt19937_64 rng(17);
    const auto sn = sn_235();
    const TruncatedUHF t({2, 3, 5});
    for (int trial = 0; trial < 5; ++trial) {
        testing_helpers::WeylData da, db, dc;
        const ProductAction a = testing_helpers::random_weyl_action(rng, t, da);
        const ProductAction b = testing_helpers::random_weyl_action(rng, t, db);
        const ProductAction c = testing_helpers::random_weyl_action(rng, t, dc);
        for (std::uint64_t p : {2u, 3u}) {
            const std::size_t k = p == 2 ? 0 : 1;
            const std::int64_t th = static_cast<std::int64_t>(p);
            const auto ba = pair_invariant(b, a, sn, p).residue;
            CHECK(ba.value == mod_floor(testing_helpers::symplectic(da, k) - testing_helpers::symplectic(db, k), th));
            const auto ca = pair_invariant(c, a, sn, p).residue;
            const auto cb = pair_invariant(c, b, sn, p).residue;
            CHECK(ca == cb + ba);
            CHECK(pair_invariant_dense(b, a, sn, p).residue == ba);
        }
    }
}

TEST_CASE("invariant is unchanged by coboundary perturbation") {
    std::mt19937_64 rng(5);
    const auto sn = sn_235();
    const TruncatedUHF t({2, 3, 5});
    ModelSpec spec;
    spec.f = {{2, 1}, {3, 2}};
    const ProductAction g = make_model_action(spec, t, sn);
    const Unitary v(random_unitary(rng, 30));
    const ProductAction pg = perturb(g, coboundary(v, g));
    const auto inv = action_invariant(pg, sn);
    CHECK(inv.at(2).value == 1);
    CHECK(inv.at(3).value == 2);
}
