#include <doctest.h>

#include "helpers.hpp"
#include "uhfz2/classify.hpp"

using namespace uhfz2;
using testing_helpers::random_hermitian;

namespace {

SupernaturalNumber sn_235() {
    SupernaturalNumber sn;
    sn.exponents[2] = Exponent::finite(1);
    sn.exponents[3] = Exponent::finite(1);
    sn.exponents[5] = Exponent::inf();
    return sn;
}

ProductAction model(const TruncatedUHF& t, std::int64_t f2, std::int64_t f3) {
    ModelSpec spec;
    spec.f[2] = f2;
    spec.f[3] = f3;
    return make_model_action(spec, t, sn_235());
}

Unitary small_unitary_on(std::mt19937_64& rng, const TruncatedUHF& t, std::vector<std::size_t> factors, double size) {
    Eigen::Index r = 1;
    for (auto k : factors) r *= t.factor(k);
    CMatrix h = random_hermitian(rng, r, 1.0);
    h *= size / op_norm(h);
    return expm_sa(SelfAdjoint(expand_from_factors(h, t, factors)));
}

// alpha with the local generators of one factor replaced.
ProductAction with_factor(const ProductAction& a, std::size_t k, LocalGen g1, LocalGen g2) {
    std::vector<LocalGen> x = a.gen(0), y = a.gen(1);
    x[k] = std::move(g1);
    y[k] = std::move(g2);
    return ProductAction(a.trunc(), x, y);
}

}  // namespace

TEST_CASE("invariants of equal and twisted models") {
    const TruncatedUHF t({2, 3, 5, 5});
    const ProductAction a = model(t, 1, 2);
    const InvariantComparison same = invariants_equal(a, a, sn_235());
    CHECK(same.all_equal);
    CHECK(same.primes.size() == 2);

    const InvariantComparison diff = invariants_equal(model(t, 1, 2), model(t, 0, 2), sn_235());
    CHECK_FALSE(diff.all_equal);
    CHECK(diff.mismatches == 1);
    for (const auto& c : diff.primes) CHECK(c.equal == (c.prime == 3));

    const InvariantComparison only3 = invariants_equal(model(t, 1, 2), model(t, 0, 2), sn_235(), {3});
    CHECK(only3.all_equal);
}

TEST_CASE("invariants survive a coboundary perturbation") {
    std::mt19937_64 rng(4);
    const TruncatedUHF t({2, 3, 5});
    const ProductAction a = model(t, 1, 1);
    const Unitary w = small_unitary_on(rng, t, {0, 1, 2}, 0.3);
    const ProductAction b = perturb(a, coboundary(w, a));
    CHECK(invariants_equal(a, b, sn_235()).all_equal);
}

TEST_CASE("matching an action with itself") {
    const TruncatedUHF t({2, 3, 5, 5});
    const ProductAction a = model(t, 1, 0);
    const std::vector<CMatrix> F{embed_factor(clock(2).m(), t, 0), embed_factor(shift(5).m(), t, 3)};
    MatchReport rep;
    const Cocycle c = approximate_match(a, a, sn_235(), F, 0.1, {}, &rep);
    const CMatrix one = CMatrix::Identity(t.dim(), t.dim());
    CHECK(op_norm(c.u1 - one) < 1e-12);
    CHECK(op_norm(c.u2 - one) < 1e-12);
    CHECK(rep.defect < 1e-12);
    CHECK(rep.kappa_corrections == 0);
}

TEST_CASE("matching recovers a coboundary perturbation") {
    std::mt19937_64 rng(8);
    const TruncatedUHF t({2, 3, 5, 5});
    const ProductAction a = model(t, 1, 2);
    const Unitary w = small_unitary_on(rng, t, {0, 1}, 0.2);
    const Cocycle cb = coboundary(w, a);
    const ProductAction b = perturb(a, cb);
    std::vector<CMatrix> F;
    for (std::size_t k = 0; k < t.size(); ++k) F.push_back(embed_factor(clock(t.factor(k)).m(), t, k));
    MatchReport rep;
    const Cocycle c = approximate_match(a, b, sn_235(), F, 1e-6, {}, &rep);
    CHECK(c.defect <= 1e-9);
    CHECK(rep.defect < 1e-9);
    CHECK(rep.kappa_final.numerator == 0);
    // the forward construction, up to a phase
    for (int i = 0; i < 2; ++i) {
        const CMatrix& got = i == 0 ? c.u1 : c.u2;
        const CMatrix& want = i == 0 ? cb.u1 : cb.u2;
        const cplx phase = normalized_trace(want.adjoint() * got);
        CHECK(std::abs(phase) == doctest::Approx(1.0));
        CHECK(op_norm(got - phase * want) < 1e-9);
    }
}

TEST_CASE("matching refuses different invariants") {
    const TruncatedUHF t({2, 3, 5});
    try {
        approximate_match(model(t, 0, 1), model(t, 0, 2), sn_235(), {}, 0.1);
        FAIL("expected InvariantMismatch");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::InvariantMismatch);
    }
}

TEST_CASE("a phase twist on an infinite prime needs the kappa correction") {
    // The same model with an extra clock/shift pair on factor 2: the
    // invariants at 2 and 3 agree, the raw intertwiners have kappa = +-1/5.
    const TruncatedUHF t({2, 3, 5, 5, 5});
    const ProductAction a = model(t, 1, 1);
    const ProductAction b = with_factor(a, 2, LocalGen::clock_power(1), LocalGen::shift_power(1));
    REQUIRE(invariants_equal(a, b, sn_235()).all_equal);

    const std::vector<CMatrix> F{embed_factor(clock(2).m(), t, 0), embed_factor(shift(3).m(), t, 1)};
    MatchReport rep;
    const Cocycle c = approximate_match(a, b, sn_235(), F, 1e-6, {}, &rep);
    CHECK(rep.kappa_raw.reduced().second == 5);
    CHECK(rep.kappa_corrections == 1);
    REQUIRE(rep.correction.has_value());
    CHECK(rep.correction->height % 5 == 0);
    CHECK(rep.kappa_final.numerator == 0);
    // independent: x is the identity, so kappa vanishes
    const CMatrix x = c.u1 * a.apply_gen(0, c.u2) * (c.u2 * a.apply_gen(1, c.u1)).adjoint();
    CHECK(op_norm(x - CMatrix::Identity(t.dim(), t.dim())) < 1e-9);
    CHECK(c.defect < 1e-9);
    CHECK(rep.defect < 1e-9);
}

TEST_CASE("kappa correction without a free factor fails") {
    const TruncatedUHF t({2, 3, 5, 5});
    const ProductAction a = model(t, 1, 1);
    const ProductAction b = with_factor(a, 2, LocalGen::clock_power(1), LocalGen::shift_power(1));
    // F occupies the only other 5-factor
    const std::vector<CMatrix> F{embed_factor(clock(5).m(), t, 3)};
    try {
        approximate_match(a, b, sn_235(), F, 0.1);
        FAIL("expected CorrectionFailure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::CorrectionFailure);
        CHECK(std::string(e.what()).find("divisible by 5") != std::string::npos);
    }
}

TEST_CASE("ek rounds of an action against itself") {
    const TruncatedUHF t({2, 3, 5, 5});
    const ProductAction a = model(t, 0, 0);
    const std::vector<CMatrix> F{embed_factor(clock(5).m(), t, 2)};
    const EkTranscript tr = ek_rounds(a, a, sn_235(), 3, {F}, {0.2});
    REQUIRE(tr.rounds.size() == 3);
    CHECK(tr.initial_defect < 1e-12);
    for (const auto& r : tr.rounds) {
        CHECK(r.defect < 1e-12);
        CHECK(r.matcher_defect < 1e-12);
        CHECK(r.kappa_corrections == 0);
    }
    CHECK(tr.monotone);
    CHECK_FALSE(tr.stalled_round.has_value());
}

TEST_CASE("ek rounds refuse a twisted pair and a rising schedule") {
    const TruncatedUHF t({2, 3, 5});
    CHECK_THROWS_AS(ek_rounds(model(t, 1, 0), model(t, 0, 0), sn_235(), 2, {{}}, {0.2}), Error);
    CHECK_THROWS_AS(ek_rounds(model(t, 0, 0), model(t, 0, 0), sn_235(), 2, {{}}, {0.1, 0.2}), Error);
}

TEST_CASE("ek rounds undo a small coboundary") {
    std::mt19937_64 rng(12);
    const TruncatedUHF t({2, 3, 5, 5, 5});
    const ProductAction a = model(t, 1, 2);
    const Unitary w = small_unitary_on(rng, t, {4}, 0.05);
    const ProductAction b = perturb(a, coboundary(w, a));
    const std::vector<CMatrix> F1{embed_factor(clock(5).m(), t, 4), embed_factor(shift(5).m(), t, 4)};
    std::vector<CMatrix> F2 = F1;
    F2.push_back(embed_factor(clock(2).m(), t, 0));
    const EkTranscript tr = ek_rounds(a, b, sn_235(), 3, {F1, F2}, {0.25, 0.2, 0.15});
    REQUIRE(tr.rounds.size() == 3);
    CHECK(tr.initial_defect > 0.1);
    double prev = tr.initial_defect;
    for (const auto& r : tr.rounds) {
        CHECK((r.defect < 1e-12 || r.defect < prev));
        prev = r.defect;
    }
    CHECK(tr.rounds.back().defect < 0.05);
    CHECK(tr.monotone);

    // the starting defect, measured on the actions themselves
    double d0 = 0.0;
    for (const auto& x : F1)
        for (int i = 0; i < 2; ++i) d0 = std::max(d0, op_norm(b.apply_gen(i, x) - a.apply_gen(i, x)));
    CHECK(tr.initial_defect == doctest::Approx(d0).epsilon(1e-9));
}
