#include "uhfz2/selftest.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <random>

#include <Eigen/Eigenvalues>

namespace uhfz2 {

namespace {

using io::json;

CMatrix gaussian(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> n(0.0, 1.0);
    CMatrix m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = cplx(n(rng), n(rng));
    return m;
}

CMatrix random_unitary(std::mt19937_64& rng, Eigen::Index d) {
    Eigen::HouseholderQR<CMatrix> qr(gaussian(rng, d));
    return qr.householderQ() * CMatrix::Identity(d, d);
}

// operator norm exactly `scale`
CMatrix random_hermitian(std::mt19937_64& rng, Eigen::Index d, double scale) {
    const CMatrix g = gaussian(rng, d);
    const CMatrix h = (g + g.adjoint()) / 2.0;
    return h * (scale / op_norm(h));
}

double uniform(std::mt19937_64& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
int uniform_int(std::mt19937_64& rng, int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

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

CMatrix weyl(int q, int a, int b) {
    CMatrix w = CMatrix::Identity(q, q);
    for (int k = 0; k < a; ++k) w = clock(q).m() * w;
    for (int k = 0; k < b; ++k) w = w * shift(q).m();
    return w;
}

// Each factor conjugated Weyl pair; exps[k] = (a1, b1, a2, b2).
ProductAction random_weyl_action(std::mt19937_64& rng, const TruncatedUHF& t, std::vector<std::array<int, 4>>& exps) {
    std::vector<LocalGen> g1, g2;
    exps.clear();
    for (std::size_t k = 0; k < t.size(); ++k) {
        const int q = t.factor(k);
        const std::array<int, 4> x{uniform_int(rng, 0, q - 1), uniform_int(rng, 0, q - 1), uniform_int(rng, 0, q - 1),
                                   uniform_int(rng, 0, q - 1)};
        exps.push_back(x);
        const CMatrix g = random_unitary(rng, q);
        g1.push_back(LocalGen::dense(g * weyl(q, x[0], x[1]) * g.adjoint()));
        g2.push_back(LocalGen::dense(g * weyl(q, x[2], x[3]) * g.adjoint()));
    }
    return ProductAction(t, g1, g2);
}

std::int64_t symplectic(const std::array<int, 4>& x) {
    return static_cast<std::int64_t>(x[0]) * x[3] - static_cast<std::int64_t>(x[2]) * x[1];
}

// Diagonal phase along the joint cycle of shifts on pairwise coprime factors:
// u alpha(u)* = exp(2 pi i / d) for alpha = Ad(shift (x) ... (x) shift).
CMatrix cyclic_phase(const TruncatedUHF& t) {
    const Eigen::Index d = t.dim();
    CVector ph(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::Index rem = i;
        std::vector<long> digits(t.size());
        for (std::size_t k = t.size(); k-- > 0;) {
            digits[k] = rem % t.factor(k);
            rem /= t.factor(k);
        }
        long n = 0;
        for (;; ++n) {
            bool ok = true;
            for (std::size_t k = 0; k < t.size(); ++k)
                if (n % t.factor(k) != digits[k]) ok = false;
            if (ok) break;
        }
        ph(i) = std::polar(1.0, kTwoPi * static_cast<double>(n) / static_cast<double>(d));
    }
    return ph.asDiagonal();
}

double brute_tr_log(const CMatrix& x) {
    Eigen::ComplexEigenSolver<CMatrix> es(x);
    double s = 0.0;
    for (Eigen::Index i = 0; i < x.rows(); ++i) s += std::arg(es.eigenvalues()(i)) / kTwoPi;
    return s;
}

// u alpha_i(u) ... alpha_i^{m-1}(u)
CMatrix power_product(const CMatrix& u, const ProductAction& a, int i, int m) {
    CMatrix out = u, shifted = u;
    for (int k = 1; k < m; ++k) {
        shifted = a.apply_gen(i, shifted);
        out = out * shifted;
    }
    return out;
}

ErrorKind kind_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.kind();
    }
    return ErrorKind::InvalidArgument;
}

double max_lip(const std::vector<double>& t, const std::vector<CMatrix>& h) {
    double lip = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k) lip = std::max(lip, op_norm(h[k + 1] - h[k]) / (t[k + 1] - t[k]));
    return lip;
}

struct Outcome {
    bool pass = true;
    json details = json::object();
};

// ---------------------------------------------------------------------------

Outcome bott_oracle(std::mt19937_64&, const Config& cfg) {
    Outcome o;
    o.details["cases"] = json::array();
    for (int q : {5, 7, 9, 11}) {
        const BottResult b = bott(clock(q), shift(q), cfg);
        const CMatrix x = clock(q).m() * shift(q).m() * clock(q).m().adjoint() * shift(q).m().adjoint();
        const double brute = brute_tr_log(x);
        const auto rounded = static_cast<std::int64_t>(std::llround(brute));
        const bool ok = b.value == 1 && rounded == 1 && std::abs(brute - 1.0) < 1e-6 && b.commutator_norm < 2.0;
        o.pass = o.pass && ok;
        o.details["cases"].push_back({{"q", q},
                                      {"bott", b.value},
                                      {"residual", b.residual},
                                      {"commutator_norm", b.commutator_norm},
                                      {"brute_tr_log", brute},
                                      {"pass", ok}});
    }
    return o;
}

Outcome trace_bound(std::mt19937_64& rng, const Config& cfg) {
    Outcome o;
    const std::vector<std::vector<int>> truncs{{2, 3}, {2, 3, 5}, {3, 4, 5}, {2, 2, 3, 5}, {7, 9}};
    int n = 0, violations = 0, residual_fail = 0, nonzero = 0, redraws = 0;
    double eps_min = 1.0, eps_max = 0.0, worst_ratio = 0.0, worst_residual = 0.0;
    while (n < 200) {
        const TruncatedUHF t(truncs[n % truncs.size()]);
        std::vector<std::array<int, 4>> exps;
        const ProductAction a = random_weyl_action(rng, t, exps);
        const Eigen::Index d = t.dim();
        const Cocycle c = coboundary(Unitary(random_unitary(rng, d)), a);
        const double s = uniform(rng, 0.0005, 0.05);
        const CMatrix u1 = c.u1 * expm_sa(SelfAdjoint(random_hermitian(rng, d, s))).m();
        const CMatrix u2 = c.u2 * expm_sa(SelfAdjoint(random_hermitian(rng, d, uniform(rng, 0.0, s)))).m();
        const double eps = cocycle_defect(u1, u2, a);
        if (!(eps > 0.0 && eps < 0.9)) {
            ++redraws;
            continue;
        }
        const KappaResult k = kappa_fast(u1, u2, a, cfg);
        const double bound = std::asin(eps) / kTwoPi;
        const double rounded = static_cast<double>(k.value.numerator) / static_cast<double>(k.value.denominator);
        if (!(std::abs(k.tau_raw) < bound && std::abs(rounded) < bound)) ++violations;
        if (!(k.residual < 1e-6)) ++residual_fail;
        if (k.integer_form != 0) ++nonzero;
        eps_min = std::min(eps_min, eps);
        eps_max = std::max(eps_max, eps);
        worst_ratio = std::max(worst_ratio, std::abs(k.tau_raw) / bound);
        worst_residual = std::max(worst_residual, k.residual);
        ++n;
    }
    o.pass = violations == 0 && residual_fail == 0;
    o.details = {{"instances", n},       {"redraws", redraws},
                 {"violations", violations}, {"residual_failures", residual_fail},
                 {"nonzero_kappa", nonzero}, {"eps_min", eps_min},
                 {"eps_max", eps_max},   {"max_tau_over_bound", worst_ratio},
                 {"max_residual", worst_residual}};
    return o;
}

Outcome power_lemma(std::mt19937_64& rng, const Config& cfg) {
    Outcome o;
    const std::vector<std::vector<int>> truncs{{2, 3, 5, 7}, {3, 4, 5}};
    const std::vector<std::pair<int, int>> mn{{2, 2}, {2, 3}, {3, 3}};
    int n = 0, mismatches = 0, oracle_mismatches = 0, redraws = 0;
    double worst_defect = 0.0;
    json samples = json::array();
    while (n < 50) {
        const TruncatedUHF t(truncs[n % 2]);
        const Eigen::Index d = t.dim();
        const int variant = (n / 2) % 2;   // which generator moves along the cycle
        const int k = uniform_int(rng, 1, d >= 200 ? 3 : 1);
        std::vector<LocalGen> moving, still;
        for (std::size_t j = 0; j < t.size(); ++j) {
            moving.push_back(LocalGen::shift_power(1));
            still.push_back(LocalGen::id());
        }
        const ProductAction a = variant == 0 ? ProductAction(t, still, moving) : ProductAction(t, moving, still);
        CMatrix p = CMatrix::Identity(d, d);
        for (int j = 0; j < k; ++j) p = p * cyclic_phase(t);
        const CMatrix one = CMatrix::Identity(d, d);
        // kappa = k/d when u1 = p^k moves against alpha_2, -k/d for u2 against alpha_1
        const std::int64_t expected = variant == 0 ? k : -k;
        CMatrix u1 = variant == 0 ? p : one;
        CMatrix u2 = variant == 0 ? one : p;
        // twist by a random coboundary and a small perturbation
        const CMatrix w = random_unitary(rng, d);
        u1 = w * u1 * a.apply_gen(0, w.adjoint()) * expm_sa(SelfAdjoint(random_hermitian(rng, d, 0.002))).m();
        u2 = w * u2 * a.apply_gen(1, w.adjoint());

        bool usable = true;
        std::vector<KappaResult> ks;
        double defect = cocycle_defect(u1, u2, a);
        usable = defect < 1.0;
        for (auto [m, nn] : mn) {
            if (!usable) break;
            const ProductAction pa = power_action(a, m, nn);
            const CMatrix um = power_product(u1, a, 0, m);
            const CMatrix un = power_product(u2, a, 1, nn);
            const double dm = cocycle_defect(um, un, pa);
            defect = std::max(defect, dm);
            if (dm >= 1.0) usable = false;
            else ks.push_back(kappa_fast(um, un, pa, cfg));
        }
        if (!usable) {
            ++redraws;
            continue;
        }
        const KappaResult base = kappa_fast(u1, u2, a, cfg);
        if (base.integer_form != expected) ++oracle_mismatches;
        bool ok = true;
        for (std::size_t j = 0; j < mn.size(); ++j) {
            const std::int64_t nm = static_cast<std::int64_t>(mn[j].first) * mn[j].second;
            if (ks[j].integer_form != nm * base.integer_form || ks[j].integer_form != nm * expected) ok = false;
        }
        if (!ok) ++mismatches;
        worst_defect = std::max(worst_defect, defect);
        if (n < 4)
            samples.push_back({{"dim", d},
                               {"kappa", base.integer_form},
                               {"kappa_22", ks[0].integer_form},
                               {"kappa_23", ks[1].integer_form},
                               {"kappa_33", ks[2].integer_form}});
        ++n;
    }
    o.pass = mismatches == 0 && oracle_mismatches == 0;
    o.details = {{"instances", n},
                 {"redraws", redraws},
                 {"mismatches", mismatches},
                 {"base_oracle_mismatches", oracle_mismatches},
                 {"max_intermediate_defect", worst_defect},
                 {"samples", samples}};
    return o;
}

Outcome exp_log(std::mt19937_64& rng, const Config& cfg) {
    Outcome o;
    int exp_viol = 0, log_viol = 0;
    double exp_ratio = 0.0, log_ratio = 0.0;
    for (int trial = 0; trial < 500; ++trial) {
        const int d = uniform_int(rng, 2, 16);
        const CMatrix h1 = random_hermitian(rng, d, uniform(rng, 0.01, 1.0));
        const CMatrix h2 = random_hermitian(rng, d, uniform(rng, 0.01, 1.0));
        const double lhs = op_norm(expm_sa(SelfAdjoint(h1)).m() - expm_sa(SelfAdjoint(h2)).m());
        const double rhs = kTwoPi * op_norm(h1 - h2);
        if (!(lhs <= rhs + 1e-12)) ++exp_viol;
        exp_ratio = std::max(exp_ratio, lhs / rhs);
    }
    for (int trial = 0; trial < 500; ++trial) {
        const int d = uniform_int(rng, 2, 16);
        // ||u - 1|| < 1/2 once ||h|| < 1/12
        const Unitary u1 = expm_sa(SelfAdjoint(random_hermitian(rng, d, uniform(rng, 0.001, 0.079))));
        const Unitary u2 = expm_sa(SelfAdjoint(random_hermitian(rng, d, uniform(rng, 0.001, 0.079))));
        const double lhs = op_norm(unitary_log(u1, cfg).h.m() - unitary_log(u2, cfg).h.m());
        const double rhs = op_norm(u1.m() - u2.m()) / kPi;
        if (!(lhs <= rhs + 1e-12)) ++log_viol;
        log_ratio = std::max(log_ratio, lhs / rhs);
    }
    o.pass = exp_viol == 0 && log_viol == 0;
    o.details = {{"exp_pairs", 500},
                 {"exp_violations", exp_viol},
                 {"exp_max_ratio", exp_ratio},
                 {"log_pairs", 500},
                 {"log_violations", log_viol},
                 {"log_max_ratio", log_ratio}};
    return o;
}

Outcome model_invariant(std::mt19937_64& rng, const Config& cfg) {
    Outcome o;
    const SupernaturalNumber sn = sn_235();
    const TruncatedUHF t = truncate(sn, 750);
    json models = json::array();
    for (int f2 = 0; f2 < 2; ++f2)
        for (int f3 = 0; f3 < 3; ++f3) {
            const auto inv = action_invariant(model(t, f2, f3), sn, cfg);
            const bool ok = inv.at(2).value == f2 && inv.at(3).value == f3;
            o.pass = o.pass && ok;
            models.push_back({{"f", {{"2", f2}, {"3", f3}}},
                              {"invariant", {{"2", inv.at(2).value}, {"3", inv.at(3).value}}},
                              {"pass", ok}});
        }
    int additivity_fail = 0, oracle_fail = 0;
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<std::array<int, 4>> ea, eb, ec;
        const ProductAction a = random_weyl_action(rng, t, ea);
        const ProductAction b = random_weyl_action(rng, t, eb);
        const ProductAction c = random_weyl_action(rng, t, ec);
        for (std::uint64_t p : {2u, 3u}) {
            const std::size_t k = *theta_block(t, p);
            const auto ba = pair_invariant(b, a, sn, p, cfg).residue;
            const auto cb = pair_invariant(c, b, sn, p, cfg).residue;
            const auto ca = pair_invariant(c, a, sn, p, cfg).residue;
            if (!(ca == cb + ba)) ++additivity_fail;
            const auto th = static_cast<std::int64_t>(p);
            if (ba.value != mod_floor(symplectic(ea[k]) - symplectic(eb[k]), th)) ++oracle_fail;
        }
    }
    o.pass = o.pass && additivity_fail == 0 && oracle_fail == 0;
    o.details = {{"trunc", t.factors()},
                 {"models", models},
                 {"triples", 20},
                 {"additivity_failures", additivity_fail},
                 {"symplectic_oracle_failures", oracle_fail}};
    return o;
}

// t -> g(t) diag(exp(2 pi i c_j sin(2 pi t))) g(t)*, a loop at 1 with zero windings
UnitaryPath wiggle_loop(std::mt19937_64& rng, int d, double amp, int n) {
    const SelfAdjoint K(random_hermitian(rng, d, uniform(rng, 0.1, 0.7)));
    std::vector<double> c(d);
    for (auto& x : c) x = uniform(rng, -amp, amp);
    UnitaryPath p = sample_path(
        [&](double t) {
            CVector ph(d);
            for (int j = 0; j < d; ++j) ph(j) = std::polar(1.0, kTwoPi * c[j] * std::sin(kTwoPi * t));
            const CMatrix g = expm_sa(K, t).m();
            return CMatrix(g * ph.asDiagonal() * g.adjoint());
        },
        n);
    p.u.back() = p.u.front();
    return make_path(p.t, p.u);
}

Outcome lipshrink(std::mt19937_64& rng, const Config& cfg) {
    Outcome o;
    const double eps = 0.2;
    int n = 0, error_fail = 0, lip_fail = 0, redraws = 0;
    double worst_error = 0.0, worst_lip_ratio = 0.0, C_max = 0.0;
    while (n < 30) {
        const int d = uniform_int(rng, 2, 16);
        const UnitaryPath u = wiggle_loop(rng, d, uniform(rng, 0.02, 0.15), 160);
        const double C = u.lip_estimate * 1.01;
        if (C > 12.0) {
            ++redraws;
            continue;
        }
        ShrinkReport rep;
        const SelfAdjointPath h = lip_shrink_loop(u, C, eps, cfg, &rep);
        // independent: error at every sample and off-grid, Lip from the samples
        double err = 0.0;
        for (std::size_t k = 0; k < u.size(); ++k)
            err = std::max(err, op_norm(u.u[k] - expm_sa(SelfAdjoint(h.at(u.t[k]), 1e-8)).m()));
        for (double s : {0.013, 0.25, 0.5, 0.777, 0.99})
            err = std::max(err, op_norm(u.at(s) - expm_sa(SelfAdjoint(h.at(s), 1e-8)).m()));
        const double lip = max_lip(h.t, h.h);
        const double bound = 2.0 * C * rep.L / 3.0 + C / 6.0;
        if (!(err < eps)) ++error_fail;
        if (!(lip <= bound)) ++lip_fail;
        worst_error = std::max(worst_error, err);
        worst_lip_ratio = std::max(worst_lip_ratio, lip / bound);
        C_max = std::max(C_max, C);
        ++n;
    }
    int rejected = 0;
    const int obstructed = 6;
    for (int j = 0; j < obstructed; ++j) {
        const int d = uniform_int(rng, 2, 8);
        const CMatrix g = random_unitary(rng, d);
        // r branches wind once, or two wind in opposite directions; the
        // others wiggle
        const bool opposite = j % 3 == 2;
        const int r = opposite ? 2 : 1 + j % 2;
        const UnitaryPath u = sample_path(
            [&](double t) {
                CVector ph(d);
                for (int i = 0; i < d; ++i) {
                    const double turn = i < r ? (opposite && i == 1 ? -t : t) : 0.1 * std::sin(kTwoPi * t);
                    ph(i) = std::polar(1.0, kTwoPi * turn);
                }
                return CMatrix(g * ph.asDiagonal() * g.adjoint());
            },
            96);
        if (kind_of([&] { lip_shrink_loop(u, u.lip_estimate * 1.01, eps, cfg); }) == ErrorKind::WindingObstruction)
            ++rejected;
    }
    o.pass = error_fail == 0 && lip_fail == 0 && rejected == obstructed;
    o.details = {{"loops", n},
                 {"redraws", redraws},
                 {"eps", eps},
                 {"max_C", C_max},
                 {"max_error", worst_error},
                 {"error_failures", error_fail},
                 {"max_lip_over_bound", worst_lip_ratio},
                 {"lip_failures", lip_fail},
                 {"obstructed", obstructed},
                 {"rejected", rejected}};
    return o;
}

Outcome vanishing(std::mt19937_64& rng, const Config& cfg) {
    Outcome o;
    const double eps = 0.25;
    int fails = 0, kappa_fails = 0;
    double worst_eps = 0.0, worst_comm = 0.0;
    std::int64_t max_dim = 0;
    for (int n = 0; n < 20; ++n) {
        const TruncatedUHF t(n < 16 ? std::vector<int>{2, 3, 5, 5} : std::vector<int>{2, 3, 5, 5, 5});
        const int f2 = n % 2, f3 = (n / 2) % 3;
        const ProductAction a = model(t, f2, f3);
        const CMatrix h0 = random_hermitian(rng, 3, uniform(rng, 0.01, 0.03));
        const CMatrix v0 = embed_factor(expm_sa(SelfAdjoint(h0)).m(), t, 1);
        const Cocycle c = coboundary(Unitary(v0), a);
        const std::vector<CMatrix> F{embed_factor(gaussian(rng, 2), t, 0)};
        const Unitary v = vanish_cocycle(a, c, F, eps, cfg);
        const CMatrix vs = v.m().adjoint();
        const double e = std::max(op_norm(c.u1 - v.m() * a.apply_gen(0, vs)), op_norm(c.u2 - v.m() * a.apply_gen(1, vs)));
        const double comm = op_norm(v.m() * F[0] - F[0] * v.m());
        if (!(e < eps && comm < eps)) ++fails;
        const CMatrix r1 = vs * c.u1 * a.apply_gen(0, v.m());
        const CMatrix r2 = vs * c.u2 * a.apply_gen(1, v.m());
        if (kappa_fast(r1, r2, a, cfg).integer_form != 0) ++kappa_fails;
        worst_eps = std::max(worst_eps, e);
        worst_comm = std::max(worst_comm, comm);
        max_dim = std::max<std::int64_t>(max_dim, t.dim());
    }
    int rejected = 0;
    const TruncatedUHF t({2, 3, 5});
    const CMatrix one = CMatrix::Identity(t.dim(), t.dim());
    for (int k = 1; k <= 3; ++k) {
        const ProductAction a = model(t, k % 2, k % 3);
        CMatrix u1 = one;
        for (int j = 0; j < k; ++j) u1 = u1 * cyclic_phase(t);
        if (kind_of([&] { vanish_cocycle(a, make_cocycle(u1, one, a), {}, eps, cfg); }) == ErrorKind::NotAdmissible)
            ++rejected;
    }
    o.pass = fails == 0 && kappa_fails == 0 && rejected == 3;
    o.details = {{"cocycles", 20},
                 {"max_dim", max_dim},
                 {"max_eps", worst_eps},
                 {"max_commutator", worst_comm},
                 {"failures", fails},
                 {"residual_kappa_failures", kappa_fails},
                 {"nonzero_kappa_inputs", 3},
                 {"rejected", rejected}};
    return o;
}

Outcome towers(std::mt19937_64& rng, const Config&) {
    Outcome o;
    json cases = json::array();
    for (const std::vector<int>& fs : {std::vector<int>{2, 3, 5, 5}, std::vector<int>{2, 3, 5, 5, 5}}) {
        const TruncatedUHF t(fs);
        for (int f2 = 0; f2 < 2; ++f2)
            for (int f3 = 0; f3 < 3; ++f3) {
                const ProductAction a = model(t, f2, f3);
                const RohlinTower free = build_tower(a, {}, 0);
                const TowerReport exact = verify_tower(free, a, {}, 1e-12);
                const RohlinTower prot = build_tower(a, {0, 1}, 2);
                const std::vector<CMatrix> F{embed_factor(gaussian(rng, 2), t, 0),
                                             embed_factor(gaussian(rng, 3), t, 1)};
                const TowerReport rep = verify_tower(prot, a, F, 1e-9);
                // dense relations measured directly on the small truncation
                double dense = 0.0;
                if (t.dim() <= 150) {
                    const int s1 = free.shape[0], s2 = free.shape[1];
                    std::vector<CMatrix> e;
                    CMatrix sum = CMatrix::Zero(t.dim(), t.dim());
                    for (int g1 = 0; g1 < s1; ++g1)
                        for (int g2 = 0; g2 < s2; ++g2) e.push_back(free.projection(g1, g2));
                    for (int g1 = 0; g1 < s1; ++g1)
                        for (int g2 = 0; g2 < s2; ++g2) {
                            const CMatrix& p = e[g1 * s2 + g2];
                            sum += p;
                            dense = std::max(dense, op_norm(p * p - p));
                            dense = std::max(dense, op_norm(a.apply_gen(0, p) - e[((g1 + 1) % s1) * s2 + g2]));
                            dense = std::max(dense, op_norm(a.apply_gen(1, p) - e[g1 * s2 + (g2 + 1) % s2]));
                        }
                    dense = std::max(dense, op_norm(sum - CMatrix::Identity(t.dim(), t.dim())));
                }
                const bool ok = exact.max_defect <= 1e-12 && rep.pass && dense <= 1e-12;
                o.pass = o.pass && ok;
                cases.push_back({{"trunc", fs},
                                 {"f", {{"2", f2}, {"3", f3}}},
                                 {"shape", free.shape},
                                 {"relation_defect", exact.max_defect},
                                 {"dense_defect", dense},
                                 {"protected_shape", prot.shape},
                                 {"protected_defect", rep.max_defect},
                                 {"pass", ok}});
            }
    }
    o.details["cases"] = cases;
    return o;
}

Outcome ek(std::mt19937_64& rng, const Config& cfg) {
    Outcome o;
    const TruncatedUHF t({2, 3, 5, 5, 5});
    const ProductAction a = model(t, 1, 2);
    const CMatrix h = random_hermitian(rng, 5, 0.05);
    const ProductAction b = perturb(a, coboundary(expm_sa(SelfAdjoint(embed_factor(h, t, 4))), a));
    const std::vector<CMatrix> F1{embed_factor(clock(5).m(), t, 4), embed_factor(shift(5).m(), t, 4)};
    std::vector<CMatrix> F2 = F1;
    F2.push_back(embed_factor(clock(2).m(), t, 0));
    const EkTranscript tr = ek_rounds(a, b, sn_235(), 3, {F1, F2}, {0.25, 0.2, 0.15}, cfg);

    double d0 = 0.0;
    for (const auto& x : F1)
        for (int i = 0; i < 2; ++i) d0 = std::max(d0, op_norm(b.apply_gen(i, x) - a.apply_gen(i, x)));
    bool monotone = true;
    double prev = d0;
    for (const auto& r : tr.rounds) {
        if (!(r.defect < 1e-12 || r.defect < prev)) monotone = false;
        prev = r.defect;
    }
    const double final_defect = tr.rounds.empty() ? d0 : tr.rounds.back().defect;
    o.pass = tr.rounds.size() == 3 && monotone && final_defect < 0.05 && std::abs(tr.initial_defect - d0) <= 1e-9 * d0;
    o.details = {{"h_norm", op_norm(h)},
                 {"measured_initial_defect", d0},
                 {"monotone", monotone},
                 {"final_defect", final_defect},
                 {"transcript", io::transcript_to_json(tr, false)}};
    return o;
}

struct Entry {
    int id;
    const char* name;
    double limit;
    Outcome (*run)(std::mt19937_64&, const Config&);
};

const Entry kCases[] = {
    {1, "bott oracle", 1.0, bott_oracle},
    {2, "kappa trace bound", 30.0, trace_bound},
    {3, "kappa of power cocycles", 0.0, power_lemma},
    {4, "exp and log inequalities", 0.0, exp_log},
    {5, "model invariant and additivity", 120.0, model_invariant},
    {6, "loop shrinking", 0.0, lipshrink},
    {7, "cocycle vanishing", 180.0, vanishing},
    {8, "rohlin towers", 0.0, towers},
    {9, "intertwining rounds", 0.0, ek},
};

}  // namespace

std::vector<SelftestCase> run_selftest(const SelftestOptions& opts) {
    std::vector<SelftestCase> out;
    for (const Entry& e : kCases) {
        if (!opts.only.empty() && std::find(opts.only.begin(), opts.only.end(), e.id) == opts.only.end()) continue;
        std::seed_seq seq{static_cast<std::uint32_t>(opts.seed), static_cast<std::uint32_t>(opts.seed >> 32),
                          static_cast<std::uint32_t>(e.id)};
        std::mt19937_64 rng(seq);
        SelftestCase c;
        c.id = e.id;
        c.name = e.name;
        c.time_limit = e.limit;
        const auto start = std::chrono::steady_clock::now();
        try {
            Outcome r = e.run(rng, opts.cfg);
            c.pass = r.pass;
            c.details = std::move(r.details);
        } catch (const Error& err) {
            c.pass = false;
            c.details = {{"error", err.what()}, {"kind", to_string(err.kind())}};
        }
        c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.push_back(std::move(c));
    }
    return out;
}

io::json selftest_to_json(const std::vector<SelftestCase>& cases, std::uint64_t seed, bool with_times) {
    json list = json::array();
    bool all = true;
    for (const auto& c : cases) {
        json j = {{"id", c.id}, {"name", c.name}, {"pass", c.pass}, {"details", c.details}};
        if (with_times) {
            j["seconds"] = c.seconds;
            if (c.time_limit > 0.0) j["time_limit"] = c.time_limit;
        }
        list.push_back(std::move(j));
        all = all && c.pass;
    }
    return {{"seed", seed}, {"pass", all}, {"cases", list}};
}

}  // namespace uhfz2
