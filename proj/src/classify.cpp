#include "uhfz2/classify.hpp"

#include <algorithm>
#include <chrono>
#include <numeric>

namespace uhfz2 {

namespace {

void add_support(std::vector<std::size_t>& out, const CMatrix& x, const TruncatedUHF& t) {
    for (auto k : support_factors(x, t))
        if (std::find(out.begin(), out.end(), k) == out.end()) out.push_back(k);
}

std::vector<std::pair<std::int64_t, std::int64_t>> prime_powers(std::int64_t n) {
    std::vector<std::pair<std::int64_t, std::int64_t>> out;
    for (std::int64_t p = 2; p * p <= n; ++p) {
        if (n % p) continue;
        std::int64_t pk = 1;
        while (n % p == 0) {
            n /= p;
            pk *= p;
        }
        out.emplace_back(p, pk);
    }
    if (n > 1) out.emplace_back(n, n);
    return out;
}

// Factors whose joint cycle under generator i has length divisible by l.
std::optional<std::vector<std::size_t>> correction_factors(const ProductAction& a, int i, std::int64_t l,
                                                           const std::vector<std::size_t>& blocked,
                                                           std::vector<int>& seen_orders) {
    const TruncatedUHF& t = a.trunc();
    std::vector<std::pair<std::size_t, int>> cands;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (std::find(blocked.begin(), blocked.end(), k) != blocked.end()) continue;
        const int q = t.factor(k);
        const LocalGen& g = a.gen(i)[k];
        if (g.kind != LocalGen::Kind::Clock && g.kind != LocalGen::Kind::Shift) continue;
        const int s = static_cast<int>(mod_floor(g.power, q));
        if (s == 0 || !a.gen(1 - i)[k].is_identity(q)) continue;
        cands.emplace_back(k, q / std::gcd(s, q));
        seen_orders.push_back(q / std::gcd(s, q));
    }
    std::vector<std::size_t> chosen;
    std::int64_t height = 1;
    for (const auto& [p, pk] : prime_powers(l)) {
        if (height % pk == 0) continue;
        bool found = false;
        for (const auto& [k, order] : cands) {
            if (order % pk != 0 || std::gcd<std::int64_t>(height, order) != 1) continue;
            if (std::find(chosen.begin(), chosen.end(), k) != chosen.end()) continue;
            chosen.push_back(k);
            height *= order;
            found = true;
            break;
        }
        if (!found) return std::nullopt;
    }
    return chosen;
}

double match_defect(const ProductAction& alpha, const ProductAction& beta, const CMatrix& u1, const CMatrix& u2,
                    const std::vector<CMatrix>& F) {
    double out = 0.0;
    for (const auto& a : F)
        for (int i = 0; i < 2; ++i) {
            const CMatrix& u = i == 0 ? u1 : u2;
            out = std::max(out, op_norm(beta.apply_gen(i, a) - u * alpha.apply_gen(i, a) * u.adjoint()));
        }
    return out;
}

double to_identity(const CMatrix& u) { return op_norm(u - CMatrix::Identity(u.rows(), u.cols())); }

}  // namespace

InvariantComparison invariants_equal(const ProductAction& alpha, const ProductAction& beta,
                                     const SupernaturalNumber& sn, const std::vector<std::uint64_t>& primes,
                                     const Config& cfg) {
    if (!(alpha.trunc() == beta.trunc())) fail(ErrorKind::DimMismatch, "actions live on different truncations");
    std::vector<std::uint64_t> ps = primes;
    if (ps.empty())
        for (auto p : prime_set(sn)) ps.push_back(p);
    const ProductAction id = ProductAction::identity(alpha.trunc());
    InvariantComparison out;
    for (auto p : ps) {
        PrimeComparison c;
        c.prime = p;
        c.alpha = pair_invariant(id, alpha, sn, p, cfg).residue;
        c.beta = pair_invariant(id, beta, sn, p, cfg).residue;
        c.equal = c.alpha == c.beta;
        if (!c.equal) ++out.mismatches;
        out.primes.push_back(c);
    }
    out.all_equal = out.mismatches == 0;
    return out;
}

KappaResult pair_kappa(const CMatrix& u1, const CMatrix& u2, const ProductAction& action, const Config& cfg) {
    const TruncatedUHF& t = action.trunc();
    const CMatrix x = kappa_x(u1, u2, action);
    const cplx lambda = normalized_trace(x);
    const double off = (x - lambda * CMatrix::Identity(t.dim(), t.dim())).norm();
    KappaResult out;
    if (std::abs(std::abs(lambda) - 1.0) < 1e-9 && off < 1e-9) {
        out.defect = std::abs(1.0 - lambda);
        out.tau_raw = std::arg(lambda) / kTwoPi;
        if (out.tau_raw <= -0.5) out.tau_raw += 1.0;
        out.value = round_to_lattice(out.tau_raw, t.dim(), cfg, &out.residual);
        out.integer_form = out.value.numerator;
        return out;
    }
    std::vector<std::size_t> supp;
    add_support(supp, u1, t);
    add_support(supp, u2, t);
    std::sort(supp.begin(), supp.end());
    if (supp.empty() || supp.size() == t.size()) return kappa_fast(u1, u2, action, cfg);
    const ProductAction as = restrict_action(action, supp);
    out = kappa_fast(compress_to_factors(u1, t, supp), compress_to_factors(u2, t, supp), as, cfg);
    out.value = out.value.rescaled(t.dim());
    out.integer_form = out.value.numerator;
    return out;
}

Cocycle approximate_match(const ProductAction& alpha, const ProductAction& beta, const SupernaturalNumber& sn,
                          const std::vector<CMatrix>& F, double eps, const Config& cfg, MatchReport* report,
                          bool check_invariants) {
    if (!alpha.is_product()) fail(ErrorKind::InvalidArgument, "approximate_match needs a product-type alpha");
    if (!(alpha.trunc() == beta.trunc())) fail(ErrorKind::DimMismatch, "actions live on different truncations");
    const TruncatedUHF& t = alpha.trunc();
    if (check_invariants) {
        const InvariantComparison cmp = invariants_equal(alpha, beta, sn, {}, cfg);
        if (!cmp.all_equal) {
            std::string where;
            for (const auto& c : cmp.primes)
                if (!c.equal)
                    where += " p=" + std::to_string(c.prime) + " (" + std::to_string(c.alpha.value) + " vs " +
                             std::to_string(c.beta.value) + ")";
            fail(ErrorKind::InvariantMismatch, "invariants differ at" + where);
        }
    }

    // Exact intertwiners: beta_i = Ad(V_i W_i*) o alpha_i.
    CMatrix u1 = beta.implementer(0) * alpha.implementer(0).adjoint();
    CMatrix u2 = beta.implementer(1) * alpha.implementer(1).adjoint();

    MatchReport rep;
    const KappaResult k0 = pair_kappa(u1, u2, alpha, cfg);
    rep.kappa_raw = k0.value;
    rep.kappa_final = k0.value;
    if (k0.integer_form != 0) {
        const auto [m, l] = k0.value.reduced();
        std::vector<std::size_t> blocked;
        add_support(blocked, u1, t);
        add_support(blocked, u2, t);
        for (const auto& a : F) {
            add_support(blocked, a, t);
            for (int i = 0; i < 2; ++i) add_support(blocked, beta.apply_gen(i, a), t);
        }
        std::vector<int> orders;
        std::optional<std::vector<std::size_t>> ks;
        int gen = 1;
        for (; gen >= 0; --gen)
            if ((ks = correction_factors(alpha, gen, l, blocked, orders))) break;
        if (!ks) {
            std::sort(orders.begin(), orders.end());
            orders.erase(std::unique(orders.begin(), orders.end()), orders.end());
            std::string avail;
            for (int o : orders) avail += " " + std::to_string(o);
            fail(ErrorKind::CorrectionFailure, "kappa = " + k0.value.str() + " needs a tower of height divisible by " +
                                                   std::to_string(l) + "; free factor orders:" +
                                                   (avail.empty() ? " none" : avail));
        }
        const TowerAxis axis = tower_axis(alpha, gen, *ks);
        // v alpha_gen(v*) = zeta; it multiplies x by zeta (gen 2, on u1) or by
        // its conjugate (gen 1, on u2).
        const double turns = (gen == 1 ? -1.0 : 1.0) * static_cast<double>(m) / static_cast<double>(l);
        const cplx zeta = std::polar(1.0, kTwoPi * turns);
        const Eigen::Index r = axis.local.front().rows();
        CMatrix vloc = CMatrix::Zero(r, r);
        cplx z = 1.0;
        for (int j = 0; j < axis.height; ++j, z *= zeta) vloc += z * axis.local[j];
        if (gen == 1)
            u1 = left_multiply_placed(vloc, t, axis.factors, u1);
        else
            u2 = left_multiply_placed(vloc, t, axis.factors, u2);
        rep.correction = KappaCorrection{m, l, gen, axis.height, axis.factors};
        rep.kappa_corrections = 1;
        rep.kappa_final = pair_kappa(u1, u2, alpha, cfg).value;
        if (rep.kappa_final.numerator != 0)
            fail(ErrorKind::CorrectionFailure, "kappa after correction is " + rep.kappa_final.str());
    }

    Cocycle c = make_cocycle(std::move(u1), std::move(u2), alpha);
    rep.cocycle_defect = c.defect;
    rep.defect = match_defect(alpha, beta, c.u1, c.u2, F);
    if (report) *report = rep;
    if (rep.defect >= eps)
        fail(ErrorKind::CorrectionFailure, "matched pair moves F by " + std::to_string(rep.defect));
    return c;
}

EkTranscript ek_rounds(const ProductAction& alpha, const ProductAction& beta, const SupernaturalNumber& sn, int rounds,
                       const std::vector<std::vector<CMatrix>>& F_schedule, const std::vector<double>& eps_schedule,
                       const Config& cfg, const VanishOptions& vopts) {
    if (!alpha.is_product()) fail(ErrorKind::InvalidArgument, "ek_rounds needs a product-type alpha");
    if (rounds < 0) fail(ErrorKind::InvalidArgument, "rounds must be non-negative");
    if (F_schedule.empty() || eps_schedule.empty()) fail(ErrorKind::InvalidArgument, "empty schedule");
    for (std::size_t r = 1; r < eps_schedule.size(); ++r)
        if (eps_schedule[r] > eps_schedule[r - 1]) fail(ErrorKind::InvalidArgument, "eps schedule must decrease");
    const auto F_at = [&](int r) -> const std::vector<CMatrix>& {
        return F_schedule[std::min<std::size_t>(static_cast<std::size_t>(r), F_schedule.size() - 1)];
    };
    const auto eps_at = [&](int r) { return eps_schedule[std::min<std::size_t>(r, eps_schedule.size() - 1)]; };

    EkTranscript out;
    out.invariants = invariants_equal(alpha, beta, sn, {}, cfg);
    if (!out.invariants.all_equal) fail(ErrorKind::InvariantMismatch, "invariants differ");

    // beta pulled back by the accumulated unitary, as a perturbation of alpha:
    // beta' = Ad(b_i) o alpha_i.
    CMatrix b1 = beta.implementer(0) * alpha.implementer(0).adjoint();
    CMatrix b2 = beta.implementer(1) * alpha.implementer(1).adjoint();
    const auto defect_on = [&](const std::vector<CMatrix>& F) {
        double e = 0.0;
        for (const auto& a : F)
            for (int i = 0; i < 2; ++i) {
                const CMatrix& b = i == 0 ? b1 : b2;
                const CMatrix x = alpha.apply_gen(i, a);
                e = std::max(e, op_norm(b * x * b.adjoint() - x));
            }
        return e;
    };
    out.initial_defect = defect_on(F_at(0));
    double previous = out.initial_defect;

    for (int r = 0; r < rounds; ++r) {
        const auto t0 = std::chrono::steady_clock::now();
        const std::vector<CMatrix>& F = F_at(r);
        const double eps = eps_at(r);
        EkRound rec;
        rec.round = r + 1;

        const ProductAction current = alpha.with_left(b1, b2);
        MatchReport mrep;
        const Cocycle u = approximate_match(alpha, current, sn, F, eps, cfg, &mrep, false);
        rec.matcher_defect = mrep.defect;
        rec.kappa_corrections = mrep.kappa_corrections;
        rec.cocycle_size = std::max(to_identity(u.u1), to_identity(u.u2));

        // The vanishing unitary must keep what earlier rounds matched; the
        // new elements of F are repaired by it.
        const std::vector<CMatrix> none;
        const std::vector<CMatrix>& keep = r == 0 ? none : F_at(r - 1);
        Unitary v = Unitary::identity(alpha.trunc().dim());
        if (rec.cocycle_size > 1e-12) {
            VanishReport vrep;
            v = vanish_cocycle(alpha, u, keep, eps, cfg, &vrep, vopts);
            rec.vanish_eps = std::max(vrep.eps_achieved[0], vrep.eps_achieved[1]);
            rec.commutator = vrep.commutator_max;
        } else {
            rec.vanish_eps = rec.cocycle_size;
        }

        // Ad(v*) o beta' o Ad(v) = Ad(v* b_i alpha_i(v)) o alpha_i.
        const CMatrix vs = v.m().adjoint();
        b1 = vs * b1 * alpha.apply_gen(0, v.m());
        b2 = vs * b2 * alpha.apply_gen(1, v.m());
        rec.defect = defect_on(F);
        rec.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

        if (rec.defect > 1e-12 && rec.defect >= previous) {
            out.monotone = false;
            if (!out.stalled_round) out.stalled_round = rec.round;
        }
        previous = rec.defect;
        out.rounds.push_back(rec);
    }
    return out;
}

}  // namespace uhfz2
