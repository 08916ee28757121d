#include <doctest.h>

#include "helpers.hpp"
#include "uhfz2/invariants.hpp"
#include "uhfz2/rohlin.hpp"

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

ProductAction model(const TruncatedUHF& t, std::int64_t f2, std::int64_t f3) {
    ModelSpec spec;
    spec.f[2] = f2;
    spec.f[3] = f3;
    return make_model_action(spec, t, sn_235());
}

}  // namespace

TEST_CASE("tower for the untwisted model on (2, 3, 5, 5)") {
    const TruncatedUHF t({2, 3, 5, 5});
    const ProductAction a = model(t, 0, 0);
    const RohlinTower tower = build_tower(a, {}, 3);
    CHECK(tower.shape[0] == 5);
    CHECK(tower.shape[1] == 3);
    CHECK(tower.axes[0].factors == std::vector<std::size_t>{3});
    CHECK(tower.axes[1].factors == std::vector<std::size_t>{1});

    // dense relations, measured directly on the d x d projections
    const Eigen::Index d = t.dim();
    CMatrix sum = CMatrix::Zero(d, d);
    std::vector<CMatrix> e;
    for (int g1 = 0; g1 < 5; ++g1)
        for (int g2 = 0; g2 < 3; ++g2) e.push_back(tower.projection(g1, g2));
    double worst = 0.0;
    for (int g1 = 0; g1 < 5; ++g1)
        for (int g2 = 0; g2 < 3; ++g2) {
            const CMatrix& p = e[g1 * 3 + g2];
            sum += p;
            worst = std::max(worst, op_norm(p * p - p));
            worst = std::max(worst, op_norm(a.apply_gen(0, p) - e[((g1 + 1) % 5) * 3 + g2]));
            worst = std::max(worst, op_norm(a.apply_gen(1, p) - e[g1 * 3 + (g2 + 1) % 3]));
        }
    worst = std::max(worst, op_norm(sum - CMatrix::Identity(d, d)));
    CHECK(worst <= 1e-12);
}

TEST_CASE("coprime factors combine into one tall axis") {
    const TruncatedUHF t({2, 3, 5, 5});
    const ProductAction a = model(t, 0, 0);
    const RohlinTower tower = build_tower(a, {}, 0);
    CHECK(tower.shape[0] == 5);
    CHECK(tower.shape[1] == 30);
    const TowerReport rep = verify_tower(tower, a, {}, 1e-12);
    CHECK(rep.pass);
}

TEST_CASE("towers need free moving factors") {
    const TruncatedUHF t({2, 3, 5, 5});
    auto kind_of = [&](auto f) {
        try {
            f();
        } catch (const Error& e) {
            return e.kind();
        }
        return ErrorKind::InvalidArgument;
    };
    CHECK(kind_of([&] { build_tower(ProductAction::identity(t), {}, 2); }) == ErrorKind::NoFreeFactors);
    CHECK(kind_of([&] { build_tower(model(t, 1, 1), {0, 1, 2, 3}, 2); }) == ErrorKind::NoFreeFactors);
}

TEST_CASE("verify_tower with F on protected factors") {
    std::mt19937_64 rng(4);
    const TruncatedUHF t({2, 3, 5, 5});
    const ProductAction a = model(t, 1, 2);
    const RohlinTower tower = build_tower(a, {0, 1}, 2);
    std::vector<CMatrix> F{embed_factor(testing_helpers::gaussian(rng, 2), t, 0),
                           embed_factor(testing_helpers::gaussian(rng, 3), t, 1)};
    const TowerReport rep = verify_tower(tower, a, F, 1e-9);
    CHECK(rep.pass);
    CHECK(rep.max_defect < 1e-9);

    // empty F passes the commutator family trivially
    CHECK(verify_tower(tower, a, {}, 1e-9).commutator_defect == 0.0);

    // rotated projections break the relations
    RohlinTower bad = tower;
    const CMatrix r = random_unitary(rng, bad.axes[0].local.front().rows());
    for (auto& p : bad.axes[0].local) p = r * p * r.adjoint();
    const TowerReport worse = verify_tower(bad, a, F, 1e-9);
    CHECK_FALSE(worse.pass);
    CHECK(worse.shift_defect > 1e-3);
}

TEST_CASE("power_action and restrict_action") {
    const TruncatedUHF t({2, 3, 5, 5});
    const ProductAction a = model(t, 1, 1);
    const ProductAction p = power_action(a, 2, 3);
    std::mt19937_64 rng(9);
    const CMatrix x = testing_helpers::gaussian(rng, t.dim());
    CHECK(op_norm(p.apply_gen(0, x) - a.apply(2, 0, x)) < 1e-9);
    CHECK(op_norm(p.apply_gen(1, x) - a.apply(0, 3, x)) < 1e-9);

    const ProductAction r = restrict_action(a, {1, 3});
    const CMatrix y = testing_helpers::gaussian(rng, 15);
    const CMatrix lifted = expand_from_factors(y, t, {1, 3});
    CHECK(op_norm(expand_from_factors(r.apply_gen(0, y), t, {1, 3}) - a.apply_gen(0, lifted)) < 1e-10);
}

TEST_CASE("support_factors") {
    std::mt19937_64 rng(1);
    const TruncatedUHF t({2, 3, 5});
    const CMatrix x = embed_factor(testing_helpers::gaussian(rng, 3), t, 1);
    CHECK(support_factors(x, t) == std::vector<std::size_t>{1});
    CHECK(support_factors(CMatrix::Identity(30, 30), t).empty());
}

TEST_CASE("vanishing the trivial cocycle") {
    const TruncatedUHF t({2, 3, 5, 5});
    const ProductAction a = model(t, 1, 1);
    const CMatrix one = CMatrix::Identity(t.dim(), t.dim());
    const Cocycle c = make_cocycle(one, one, a);
    VanishReport rep;
    const Unitary v = vanish_cocycle(a, c, {}, 0.25, {}, &rep);
    CHECK(rep.eps_achieved[0] < 1e-12);
    CHECK(rep.eps_achieved[1] < 1e-12);
    CHECK(unitarity_defect(v.m()) < 1e-12);
}

TEST_CASE("vanishing a coboundary") {
    std::mt19937_64 rng(17);
    const TruncatedUHF t({2, 3, 5, 5});
    for (auto [f2, f3] : {std::pair{1, 1}, std::pair{1, 2}, std::pair{0, 1}}) {
        const ProductAction a = model(t, f2, f3);
        const CMatrix h0 = random_hermitian(rng, 3, 0.02);
        const CMatrix v0 = embed_factor(expm_sa(SelfAdjoint(h0)).m(), t, 1);
        REQUIRE(op_norm(v0 - CMatrix::Identity(t.dim(), t.dim())) < 0.2);
        const Cocycle c = coboundary(Unitary(v0), a);
        const std::vector<CMatrix> F{embed_factor(testing_helpers::gaussian(rng, 2), t, 0)};
        VanishReport rep;
        const Unitary v = vanish_cocycle(a, c, F, 0.25, {}, &rep);
        // independent measurement of the contract
        const CMatrix vs = v.m().adjoint();
        CHECK(op_norm(c.u1 - v.m() * a.apply_gen(0, vs)) < 0.25);
        CHECK(op_norm(c.u2 - v.m() * a.apply_gen(1, vs)) < 0.25);
        CHECK(op_norm(v.m() * F[0] - F[0] * v.m()) < 0.25);
        CHECK(rep.budget.total + 1e-9 >= std::max(rep.eps_achieved[0], rep.eps_achieved[1]));
        // the residual cocycle has kappa 0
        const CMatrix r1 = vs * c.u1 * a.apply_gen(0, v.m());
        const CMatrix r2 = vs * c.u2 * a.apply_gen(1, v.m());
        CHECK(kappa_fast(r1, r2, a).integer_form == 0);
    }
}

TEST_CASE("cocycles with nonzero kappa are not admissible") {
    const TruncatedUHF t({2, 3, 5});
    const ProductAction a = model(t, 1, 1);
    const CMatrix u1 = testing_helpers::cyclic_phase(t);
    const CMatrix one = CMatrix::Identity(t.dim(), t.dim());
    REQUIRE(kappa_fast(u1, one, a).integer_form != 0);
    try {
        vanish_cocycle(a, make_cocycle(u1, one, a), {}, 0.25);
        FAIL("expected NotAdmissible");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::NotAdmissible);
    }
}
