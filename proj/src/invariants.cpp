#include "uhfz2/invariants.hpp"

#include <cmath>

namespace uhfz2 {

K0Value round_to_lattice(double value, std::int64_t d, const Config& cfg, double* residual) {
    const double scaled = value * static_cast<double>(d);
    const auto n = static_cast<std::int64_t>(std::llround(scaled));
    const double r = std::abs(scaled - static_cast<double>(n));
    if (residual) *residual = r;
    if (r > cfg.lattice_tol)
        fail(ErrorKind::NotOnLattice, "value is " + std::to_string(r) + " away from (1/" + std::to_string(d) + ")Z");
    return {n, d};
}

K0Value winding_tau(const UnitaryPath& path, const Config& cfg, double* residual) {
    if (!path.closed) fail(ErrorKind::InvalidArgument, "winding_tau needs a closed path");
    return round_to_lattice(winding_real(path), path.dim(), cfg, residual);
}

namespace {

// (1/2 pi i) log of a unitary, moving the cut only when an eigenvalue sits on it.
LogResult log_anywhere(const CMatrix& x, const Config& cfg) {
    const EigenSystem es = unitary_eigensystem(x);
    LogOptions opts;
    const double rot = safe_rotation(es.values, cfg.branch_guard);
    if (rot != 0.0) opts.rotation = rot;
    return unitary_log(Unitary::trusted(x), es, cfg, opts);
}

}  // namespace

BottResult bott(const Unitary& v, const Unitary& w, const Config& cfg) {
    if (v.dim() != w.dim()) fail(ErrorKind::DimMismatch, "bott needs equal dimensions");
    const CMatrix x = v.m() * w.m() * v.m().adjoint() * w.m().adjoint();
    const LogResult lg = unitary_log(Unitary::trusted(x), cfg);
    const double tr = lg.h.m().trace().real();
    BottResult out;
    out.value = std::llround(tr);
    out.residual = std::abs(tr - static_cast<double>(out.value));
    out.commutator_norm = op_norm(v.m() * w.m() - w.m() * v.m());
    if (out.residual > cfg.lattice_tol)
        fail(ErrorKind::NotInteger, "Tr(a) is " + std::to_string(out.residual) + " away from an integer");
    return out;
}

CMatrix kappa_x(const CMatrix& u1, const CMatrix& u2, const ProductAction& action) {
    const CMatrix left = u1 * action.apply_gen(0, u2);
    const CMatrix right = u2 * action.apply_gen(1, u1);
    return left * right.adjoint();
}

KappaResult kappa_fast(const CMatrix& u1, const CMatrix& u2, const ProductAction& action, const Config& cfg) {
    KappaResult out;
    out.defect = cocycle_defect(u1, u2, action);
    if (out.defect >= 1.0)
        fail(ErrorKind::NotAlmostCocycle, "defect " + std::to_string(out.defect) + " is not below 1");
    const CMatrix x = kappa_x(u1, u2, action);
    const LogResult lg = unitary_log(Unitary::trusted(x), cfg);
    const auto d = static_cast<std::int64_t>(x.rows());
    out.tau_raw = normalized_trace(lg.h.m()).real();
    out.value = round_to_lattice(out.tau_raw, d, cfg, &out.residual);
    out.integer_form = out.value.numerator;
    return out;
}

UnitaryPath kappa_loop_path(const CMatrix& u1, const CMatrix& u2, const ProductAction& action,
                            const UnitaryPath& h1, const UnitaryPath& h2, const Config& cfg) {
    const double defect = cocycle_defect(u1, u2, action);
    if (defect >= 1.0) fail(ErrorKind::NotAlmostCocycle, "defect " + std::to_string(defect) + " is not below 1");
    const Eigen::Index d = u1.rows();
    const CMatrix one = CMatrix::Identity(d, d);
    if (op_norm(h1.front() - one) > 1e-9 || op_norm(h1.back() - u1) > 1e-9 || op_norm(h2.front() - one) > 1e-9 ||
        op_norm(h2.back() - u2) > 1e-9)
        fail(ErrorKind::InvalidArgument, "h_i must run from 1 to u_i");

    auto mapped = [&](const UnitaryPath& h, const CMatrix& lead, int gen) {
        std::vector<CMatrix> u(h.size());
        for (std::size_t k = 0; k < h.size(); ++k) u[k] = lead * action.apply_gen(gen, h.u[k]);
        return make_path(h.t, std::move(u));
    };
    const UnitaryPath th2 = mapped(h2, u1, 0);   // u1 -> u1 a1(u2)
    const UnitaryPath th1 = mapped(h1, u2, 1);   // u2 -> u2 a2(u1)

    const CMatrix base = u2 * action.apply_gen(1, u1);
    const CMatrix x = u1 * action.apply_gen(0, u2) * base.adjoint();
    const LogResult lg = unitary_log(Unitary::trusted(x), cfg);
    UnitaryPath k = exp_path(lg.h, cfg.path_samples);
    for (auto& m : k.u) m = m * base;
    k.u.back() = th2.back();
    k = make_path(k.t, k.u);

    UnitaryPath H = concatenate({h1, th2, reversed(k), reversed(th1), reversed(h2)});
    H.u.back() = H.u.front();
    H.closed = true;
    return H;
}

KappaResult kappa_loop(const CMatrix& u1, const CMatrix& u2, const ProductAction& action,
                       const UnitaryPath& h1, const UnitaryPath& h2, const Config& cfg) {
    const UnitaryPath H = kappa_loop_path(u1, u2, action, h1, h2, cfg);
    KappaResult out;
    out.defect = cocycle_defect(u1, u2, action);
    out.tau_raw = cfg.kappa_loop_orientation * winding_real(H);
    out.value = round_to_lattice(out.tau_raw, H.dim(), cfg, &out.residual);
    out.integer_form = out.value.numerator;
    return out;
}

DeltaTau delta_tau(const Unitary& u, const std::optional<UnitaryPath>& path, const Config& cfg) {
    double raw = 0.0;
    if (path) {
        if (op_norm(path->front() - CMatrix::Identity(u.dim(), u.dim())) > 1e-9 || op_norm(path->back() - u.m()) > 1e-9)
            fail(ErrorKind::InvalidArgument, "path must run from 1 to u");
        raw = winding_real(*path);
    } else {
        raw = normalized_trace(unitary_log(u, cfg).h.m()).real();
    }
    DeltaTau out;
    out.denominator = u.dim();
    const double step = 1.0 / static_cast<double>(out.denominator);
    out.value = raw - step * std::floor(raw / step);
    if (out.value >= step - 1e-15) out.value = 0.0;
    return out;
}

// ---------------------------------------------------------------------------

namespace {

std::size_t locate_a0(const TruncatedUHF& t, const SupernaturalNumber& sn, std::uint64_t p,
                      std::optional<std::size_t> a0_block) {
    const auto th = theta(sn, p);
    if (a0_block) {
        if (*a0_block >= t.size() || static_cast<std::uint64_t>(t.factor(*a0_block)) != th)
            fail(ErrorKind::NotEmbeddable, "factor " + std::to_string(*a0_block) + " is not M_" + std::to_string(th));
        return *a0_block;
    }
    const auto blk = theta_block(t, th);
    if (!blk) fail(ErrorKind::NotEmbeddable, "truncation has no M_" + std::to_string(th) + " block");
    return *blk;
}

PairInvariant finish(double tau_h, double commutator_bound, const TruncatedUHF& t, const SupernaturalNumber& sn,
                     std::uint64_t p, const Config& cfg, bool factorized) {
    if (commutator_bound >= 0.5)
        fail(ErrorKind::CommutationFailure,
             "path to x moves A0 by " + std::to_string(commutator_bound) + " (needs < 1/2)");
    PairInvariant out;
    out.factorized = factorized;
    out.commutation = commutator_bound;
    const K0Value w = round_to_lattice(cfg.invariant_orientation * tau_h, t.dim(), cfg, &out.defect);
    out.winding = w;
    out.residue = k0_reduce(w, p, static_cast<std::int64_t>(theta(sn, p)));
    return out;
}

void check_same(const ProductAction& beta, const ProductAction& alpha) {
    if (!(beta.trunc() == alpha.trunc())) fail(ErrorKind::DimMismatch, "actions live on different truncations");
}

}  // namespace

PairInvariant pair_invariant_dense(const ProductAction& beta, const ProductAction& alpha, const SupernaturalNumber& sn,
                                   std::uint64_t p, const Config& cfg, std::optional<std::size_t> a0_block) {
    check_same(beta, alpha);
    const TruncatedUHF& t = alpha.trunc();
    const std::size_t a0 = locate_a0(t, sn, p, a0_block);
    // beta_i = Ad(u_i) o alpha_i with u_i = V_i W_i*.
    const CMatrix u1 = beta.implementer(0) * alpha.implementer(0).adjoint();
    const CMatrix u2 = beta.implementer(1) * alpha.implementer(1).adjoint();
    const CMatrix x = kappa_x(u1, u2, alpha);
    const LogResult lg = log_anywhere(x, cfg);
    const CMatrix& h = lg.h.m();
    const double off = op_norm(h - commutant_expectation(h, t, {a0}));
    // ||[exp(2 pi i s h), a]|| <= 2 pi ||[h, a]|| <= 4 pi ||h - E(h)||.
    return finish(normalized_trace(h).real(), 4.0 * kPi * off, t, sn, p, cfg, false);
}

PairInvariant pair_invariant(const ProductAction& beta, const ProductAction& alpha, const SupernaturalNumber& sn,
                             std::uint64_t p, const Config& cfg, std::optional<std::size_t> a0_block) {
    if (!beta.is_product() || !alpha.is_product()) return pair_invariant_dense(beta, alpha, sn, p, cfg, a0_block);
    check_same(beta, alpha);
    const TruncatedUHF& t = alpha.trunc();
    const std::size_t a0 = locate_a0(t, sn, p, a0_block);
    // x = V1 V2 W2* W1* W2 W1 V1* V2* factorizes over the tensor factors.
    double tau_h = 0.0;
    double bound = 0.0;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const int q = t.factor(k);
        auto local = [&](const ProductAction& a, int i) {
            const CMatrix& m = a.factor_unitaries(i)[k];
            return m.size() == 0 ? CMatrix(CMatrix::Identity(q, q)) : m;
        };
        const CMatrix v1 = local(beta, 0), v2 = local(beta, 1), w1 = local(alpha, 0), w2 = local(alpha, 1);
        const CMatrix xk = v1 * v2 * w2.adjoint() * w1.adjoint() * w2 * w1 * v1.adjoint() * v2.adjoint();
        const LogResult lg = log_anywhere(xk, cfg);
        const cplx tr = normalized_trace(lg.h.m());
        tau_h += tr.real();
        if (k == a0)
            bound = 4.0 * kPi * op_norm(lg.h.m() - tr * CMatrix::Identity(q, q));
    }
    return finish(tau_h, bound, t, sn, p, cfg, true);
}

std::map<std::uint64_t, K0Residue> action_invariant(const ProductAction& alpha, const SupernaturalNumber& sn,
                                                    const Config& cfg) {
    const ProductAction id = ProductAction::identity(alpha.trunc());
    std::map<std::uint64_t, K0Residue> out;
    for (std::uint64_t p : prime_set(sn)) out[p] = pair_invariant(id, alpha, sn, p, cfg).residue;
    return out;
}

bool admissible(const Cocycle& c, const ProductAction& action, const Config& cfg) {
    return kappa_fast(c.u1, c.u2, action, cfg).integer_form == 0;
}

}  // namespace uhfz2
