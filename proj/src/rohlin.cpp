#include "uhfz2/rohlin.hpp"

#include <algorithm>
#include <numeric>

#include "uhfz2/invariants.hpp"

namespace uhfz2 {

namespace {

bool contains(const std::vector<std::size_t>& v, std::size_t k) { return std::find(v.begin(), v.end(), k) != v.end(); }

// Orthonormal basis permuted by the generator: standard for shifts, Fourier
// for clocks (clock f_j = f_{j+1}).
CVector basis_vector(int q, int j, bool fourier) {
    CVector b = CVector::Zero(q);
    if (!fourier) {
        b(j) = 1.0;
        return b;
    }
    const double norm = 1.0 / std::sqrt(static_cast<double>(q));
    for (int l = 0; l < q; ++l) b(l) = std::polar(norm, kTwoPi * static_cast<double>((static_cast<long>(j) * l) % q) / q);
    return b;
}

// Q_a = sum_c |b_{c + a s}><b_{c + a s}| over coset representatives c.
std::vector<CMatrix> factor_projections(int q, int s, bool fourier) {
    const int g = std::gcd(s, q);
    const int r = q / g;
    std::vector<CMatrix> out(r, CMatrix::Zero(q, q));
    for (int a = 0; a < r; ++a)
        for (int c = 0; c < g; ++c) {
            const CVector b = basis_vector(q, static_cast<int>((c + static_cast<long>(a) * s) % q), fourier);
            out[a] += b * b.adjoint();
        }
    return out;
}

}  // namespace

TowerAxis tower_axis(const ProductAction& action, int i, std::vector<std::size_t> factors) {
    const TruncatedUHF& t = action.trunc();
    std::sort(factors.begin(), factors.end());
    TowerAxis axis;
    std::vector<std::vector<CMatrix>> per_factor;
    for (std::size_t k : factors) {
        if (k >= t.size()) fail(ErrorKind::InvalidArgument, "factor index out of range");
        const int q = t.factor(k);
        const LocalGen& g = action.gen(i)[k];
        const int s = static_cast<int>(mod_floor(g.power, q));
        if ((g.kind != LocalGen::Kind::Clock && g.kind != LocalGen::Kind::Shift) || s == 0 ||
            !action.gen(1 - i)[k].is_identity(q))
            fail(ErrorKind::NoFreeFactors, "generator " + std::to_string(i + 1) + " does not permute factor " +
                                               std::to_string(k) + " freely");
        const int order = q / std::gcd(s, q);
        if (std::gcd(axis.height, order) != 1)
            fail(ErrorKind::NoFreeFactors, "factor orders of a tower axis must be coprime");
        axis.factors.push_back(k);
        axis.orders.push_back(order);
        axis.fourier.push_back(g.kind == LocalGen::Kind::Clock);
        axis.height *= order;
        per_factor.push_back(factor_projections(q, s, g.kind == LocalGen::Kind::Clock));
    }
    for (int g = 0; g < axis.height; ++g) {
        CMatrix e = CMatrix::Identity(1, 1);
        for (std::size_t j = 0; j < per_factor.size(); ++j) e = kron(e, per_factor[j][g % axis.orders[j]]);
        axis.local.push_back(std::move(e));
    }
    return axis;
}

namespace {

TowerAxis make_axis(const ProductAction& action, int i, const std::vector<std::size_t>& blocked, int M) {
    const TruncatedUHF& t = action.trunc();
    const int other = 1 - i;
    struct Cand {
        std::size_t k;
        int order;
        int step;
        bool fourier;
    };
    std::vector<Cand> cands;
    for (std::size_t k = 0; k < t.size(); ++k) {
        if (contains(blocked, k)) continue;
        const int q = t.factor(k);
        const LocalGen& g = action.gen(i)[k];
        if (!action.gen(other)[k].is_identity(q)) continue;
        if (g.kind != LocalGen::Kind::Clock && g.kind != LocalGen::Kind::Shift) continue;
        const int s = static_cast<int>(mod_floor(g.power, q));
        if (s == 0) continue;
        cands.push_back({k, q / std::gcd(s, q), s, g.kind == LocalGen::Kind::Clock});
    }
    std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.order > b.order; });

    std::vector<Cand> chosen;
    int height = 1;
    // The shortest single factor that is tall enough, if there is one.
    for (auto it = cands.rbegin(); M > 0 && it != cands.rend(); ++it)
        if (it->order >= M) {
            chosen.push_back(*it);
            height = it->order;
            break;
        }
    if (chosen.empty())
        for (const auto& c : cands) {
            if (M > 0 && height >= M) break;
            if (std::gcd(height, c.order) != 1) continue;   // heights combine only through CRT
            chosen.push_back(c);
            height *= c.order;
        }
    if (chosen.empty() || height < std::max(M, 2))
        fail(ErrorKind::NoFreeFactors, "no free factors give generator " + std::to_string(i + 1) +
                                           " a tower of height " + std::to_string(std::max(M, 2)));
    std::vector<std::size_t> ks;
    for (const auto& c : chosen) ks.push_back(c.k);
    return tower_axis(action, i, ks);
}

int wrap(int g, int m) { return static_cast<int>(mod_floor(g, m)); }

}  // namespace

std::vector<std::size_t> RohlinTower::factors_used() const {
    std::vector<std::size_t> out = axes[0].factors;
    out.insert(out.end(), axes[1].factors.begin(), axes[1].factors.end());
    std::sort(out.begin(), out.end());
    return out;
}

CMatrix RohlinTower::left_multiply(int g1, int g2, const CMatrix& x) const {
    CMatrix y = left_multiply_placed(axes[0].local.at(wrap(g1, shape[0])), trunc, axes[0].factors, x);
    return left_multiply_placed(axes[1].local.at(wrap(g2, shape[1])), trunc, axes[1].factors, y);
}

CMatrix RohlinTower::projection(int g1, int g2) const {
    return left_multiply(g1, g2, CMatrix::Identity(trunc.dim(), trunc.dim()));
}

RohlinTower build_tower(const ProductAction& action, const std::vector<std::size_t>& protected_factors, int M,
                        const std::vector<std::size_t>& avoid) {
    if (!action.is_product()) fail(ErrorKind::InvalidArgument, "towers need a product-type action");
    RohlinTower tower;
    tower.trunc = action.trunc();
    tower.protected_factors = protected_factors;
    std::sort(tower.protected_factors.begin(), tower.protected_factors.end());
    std::vector<std::size_t> blocked = protected_factors;
    blocked.insert(blocked.end(), avoid.begin(), avoid.end());
    tower.axes[0] = make_axis(action, 0, blocked, M);
    blocked.insert(blocked.end(), tower.axes[0].factors.begin(), tower.axes[0].factors.end());
    tower.axes[1] = make_axis(action, 1, blocked, M);
    tower.shape = {tower.axes[0].height, tower.axes[1].height};
    return tower;
}

TowerReport verify_tower(const RohlinTower& tower, const ProductAction& action, const std::vector<CMatrix>& F,
                         double eps) {
    TowerReport rep;
    const TruncatedUHF& t = tower.trunc;
    // e_g = Q1_{g1} (x) Q2_{g2} on disjoint factor groups: the partition and
    // orthogonality defects are those of the local families.
    for (const auto& axis : tower.axes) {
        const Eigen::Index n = axis.local.empty() ? 1 : axis.local.front().rows();
        CMatrix sum = CMatrix::Zero(n, n);
        for (std::size_t a = 0; a < axis.local.size(); ++a) {
            sum += axis.local[a];
            for (std::size_t b = 0; b < axis.local.size(); ++b) {
                const CMatrix prod = axis.local[a] * axis.local[b];
                const double d = op_norm(a == b ? CMatrix(prod - axis.local[a]) : prod);
                rep.orthogonality_defect = std::max(rep.orthogonality_defect, d);
            }
        }
        rep.partition_defect = std::max(rep.partition_defect, op_norm(sum - CMatrix::Identity(n, n)));
    }

    // Tower relations, factor by factor: generator i must move its own axis
    // by one step and leave the other axis fixed.
    const TruncatedUHF sub0 = sub_truncation(t, tower.axes[0].factors);
    const TruncatedUHF sub1 = sub_truncation(t, tower.axes[1].factors);
    for (int i = 0; i < 2 && action.is_product(); ++i)
        for (int ax = 0; ax < 2; ++ax) {
            const TowerAxis& axis = tower.axes[ax];
            const TruncatedUHF& sub = ax == 0 ? sub0 : sub1;
            std::vector<CMatrix> ws;
            for (std::size_t k : axis.factors) ws.push_back(action.factor_unitaries(i)[k]);
            const int step = (i == ax) ? 1 : 0;
            for (int g = 0; g < axis.height; ++g) {
                const CMatrix moved = conjugate_by_product(ws, sub, axis.local[g]);
                rep.shift_defect = std::max(rep.shift_defect, op_norm(moved - axis.local[wrap(g + step, axis.height)]));
            }
        }
    if (!action.is_product()) {
        // dense left factors: measure the relations directly
        for (int g1 = 0; g1 < tower.shape[0]; ++g1)
            for (int g2 = 0; g2 < tower.shape[1]; ++g2) {
                const CMatrix e = tower.projection(g1, g2);
                rep.shift_defect = std::max(rep.shift_defect, op_norm(action.apply_gen(0, e) - tower.projection(g1 + 1, g2)));
                rep.shift_defect = std::max(rep.shift_defect, op_norm(action.apply_gen(1, e) - tower.projection(g1, g2 + 1)));
            }
    }

    for (const auto& a : F) {
        const CMatrix as = a.adjoint();
        for (int g1 = 0; g1 < tower.shape[0]; ++g1)
            for (int g2 = 0; g2 < tower.shape[1]; ++g2) {
                // [a, e] = a e - e a = (e a*)* - e a
                const CMatrix ea = tower.left_multiply(g1, g2, a);
                const CMatrix eas = tower.left_multiply(g1, g2, as);
                const CMatrix c = CMatrix(eas.adjoint()) - ea;
                const double frob = c.norm();
                rep.commutator_defect = std::max(rep.commutator_defect, frob < 1e-13 ? frob : op_norm(c));
            }
    }
    rep.max_defect = std::max({rep.partition_defect, rep.orthogonality_defect, rep.shift_defect, rep.commutator_defect});
    rep.pass = rep.max_defect < eps;
    return rep;
}

// ---------------------------------------------------------------------------

std::vector<std::size_t> support_factors(const CMatrix& x, const TruncatedUHF& t, double tol) {
    std::vector<std::size_t> out;
    for (std::size_t k = 0; k < t.size(); ++k) {
        const CMatrix e = commutant_expectation(x, t, {k});
        if ((x - e).cwiseAbs().maxCoeff() > tol) out.push_back(k);
    }
    return out;
}

ProductAction restrict_action(const ProductAction& action, const std::vector<std::size_t>& factors) {
    if (!action.is_product()) fail(ErrorKind::InvalidArgument, "only product-type actions restrict to factors");
    std::vector<std::size_t> sorted = factors;
    std::sort(sorted.begin(), sorted.end());
    std::vector<LocalGen> g1, g2;
    for (std::size_t k : sorted) {
        g1.push_back(action.gen(0).at(k));
        g2.push_back(action.gen(1).at(k));
    }
    return ProductAction(sub_truncation(action.trunc(), sorted), std::move(g1), std::move(g2));
}

ProductAction power_action(const ProductAction& action, int m1, int m2) {
    if (!action.is_product()) fail(ErrorKind::InvalidArgument, "power_action needs a product-type action");
    const TruncatedUHF& t = action.trunc();
    auto raise = [&](const LocalGen& g, int q, int m) -> LocalGen {
        switch (g.kind) {
            case LocalGen::Kind::Id: return LocalGen::id();
            case LocalGen::Kind::Clock: return LocalGen::clock_power(static_cast<int>(mod_floor(static_cast<std::int64_t>(g.power) * m, q)));
            case LocalGen::Kind::Shift: return LocalGen::shift_power(static_cast<int>(mod_floor(static_cast<std::int64_t>(g.power) * m, q)));
            case LocalGen::Kind::Dense: {
                const CMatrix base = m < 0 ? CMatrix(g.matrix.adjoint()) : g.matrix;
                CMatrix out = CMatrix::Identity(q, q);
                for (int j = 0; j < std::abs(m); ++j) out = base * out;
                return LocalGen::dense(out);
            }
        }
        return LocalGen::id();
    };
    std::vector<LocalGen> g1, g2;
    for (std::size_t k = 0; k < t.size(); ++k) {
        g1.push_back(raise(action.gen(0)[k], t.factor(k), m1));
        g2.push_back(raise(action.gen(1)[k], t.factor(k), m2));
    }
    return ProductAction(t, std::move(g1), std::move(g2));
}

Unitary vanish_cocycle(const ProductAction& action, const Cocycle& c, const std::vector<CMatrix>& F, double eps,
                       const Config& cfg, VanishReport* report, const VanishOptions& opts) {
    if (!action.is_product()) fail(ErrorKind::InvalidArgument, "vanish_cocycle needs a product-type action");
    const TruncatedUHF& t = action.trunc();
    const Eigen::Index d = t.dim();
    if (c.u1.rows() != d || c.u2.rows() != d) fail(ErrorKind::DimMismatch, "cocycle does not match the truncation");

    std::vector<std::size_t> prot = opts.protected_factors;
    if (prot.empty())
        for (const auto& a : F)
            for (auto k : support_factors(a, t))
                if (!contains(prot, k)) prot.push_back(k);
    std::vector<std::size_t> avoid;
    for (const CMatrix* u : {&c.u1, &c.u2})
        for (auto k : support_factors(*u, t))
            if (!contains(avoid, k)) avoid.push_back(k);

    // x = u1 a1(u2) (u2 a2(u1))* lives on the support of the cocycle, and so
    // does its trace.
    if (!avoid.empty()) {
        std::sort(avoid.begin(), avoid.end());
        const ProductAction as = restrict_action(action, avoid);
        const CMatrix s1 = compress_to_factors(c.u1, t, avoid), s2 = compress_to_factors(c.u2, t, avoid);
        if (kappa_fast(s1, s2, as, cfg).integer_form != 0)
            fail(ErrorKind::NotAdmissible, "kappa(u1, u2) is not zero");
    }

    RohlinTower tower;
    try {
        tower = build_tower(action, prot, opts.min_height, avoid);
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::NoFreeFactors) throw;
        fail(ErrorKind::TowerUnavailable, e.what());
    }
    const int m1 = tower.shape[0], m2 = tower.shape[1];
    const std::vector<std::size_t> used = tower.factors_used();
    std::vector<std::size_t> W;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (!contains(used, k)) W.push_back(k);
    if (W.empty()) fail(ErrorKind::TowerUnavailable, "the tower leaves no working factors");

    // Everything below lives on the working factors.
    const ProductAction aw = restrict_action(action, W);
    const Eigen::Index dw = aw.trunc().dim();
    const CMatrix u1 = compress_to_factors(c.u1, t, W);
    const CMatrix u2 = compress_to_factors(c.u2, t, W);

    // u_g along the staircase: first xi_1 steps, then xi_2 steps.
    std::vector<CMatrix> ug(static_cast<std::size_t>((m1 + 1) * (m2 + 1)));
    auto U = [&](int g1, int g2) -> CMatrix& { return ug[static_cast<std::size_t>(g1 * (m2 + 1) + g2)]; };
    U(0, 0) = CMatrix::Identity(dw, dw);
    for (int g1 = 1; g1 <= m1; ++g1) U(g1, 0) = u1 * aw.apply_gen(0, U(g1 - 1, 0));
    for (int g1 = 0; g1 <= m1; ++g1)
        for (int g2 = 1; g2 <= m2; ++g2) U(g1, g2) = u2 * aw.apply_gen(1, U(g1, g2 - 1));

    const Cocycle cw = make_cocycle(u1, u2, aw);
    CMatrix P1 = U(m1, 0), P2 = U(0, m2);
    if (cw.defect <= 1e-6) {
        P1 = extend_cocycle(cw, aw, m1, 0).m();
        P2 = extend_cocycle(cw, aw, 0, m2).m();
    }
    const ProductAction A = power_action(aw, m1, m2);
    const BoundaryMap z = boundary_map(P1, P2, A, std::nullopt, eps, cfg);
    const DiskMap disk = disk_extension(z, opts.shrink_eps, cfg);

    std::vector<CMatrix> X(static_cast<std::size_t>(m1 * m2));
    parallel_for(m1 * m2, cfg.threads, [&](int idx) {
        const int g1 = idx / m2, g2 = idx % m2;
        const CMatrix w = disk.at(2.0 * g1 / m1 - 1.0, 2.0 * g2 / m2 - 1.0);
        X[idx] = U(g1, g2) * aw.apply(g1, g2, w);
    });
    CMatrix v = CMatrix::Zero(d, d);
    for (int g1 = 0; g1 < m1; ++g1)
        for (int g2 = 0; g2 < m2; ++g2)
            v += tower.left_multiply(g1, g2, expand_from_factors(X[static_cast<std::size_t>(g1 * m2 + g2)], t, W));

    VanishReport rep;
    rep.eps_target = eps;
    rep.shape = tower.shape;
    rep.working = W;
    rep.tower_factors = used;
    const CMatrix vs = v.adjoint();
    rep.eps_achieved[0] = op_norm(c.u1 - v * action.apply_gen(0, vs));
    rep.eps_achieved[1] = op_norm(c.u2 - v * action.apply_gen(1, vs));
    for (const auto& a : F) rep.commutator_max = std::max(rep.commutator_max, op_norm(v * a - a * v));

    const TowerReport tr = verify_tower(tower, action, {}, eps);
    VanishBudget& b = rep.budget;
    b.boundary = std::max(z.eps_left, z.eps_bottom);
    b.lip_disk = disk.lip_estimate;
    b.grid_step = disk.lip_estimate * 2.0 / std::min(m1, m2);
    b.tower = tr.max_defect;
    b.cocycle = c.defect * static_cast<double>(m1 + m2);
    b.C_prime = disk.shrink.C_prime;
    b.guard = disk.guard_max;
    b.total = b.boundary + b.grid_step + b.tower + b.cocycle;
    if (report) *report = rep;

    const double worst = std::max({rep.eps_achieved[0], rep.eps_achieved[1], rep.commutator_max});
    if (worst >= eps)
        fail(ErrorKind::AssemblyDefect, "measured defect " + std::to_string(worst) + " (budget: boundary " +
                                            std::to_string(b.boundary) + ", grid " + std::to_string(b.grid_step) +
                                            ", tower " + std::to_string(b.tower) + ", cocycle " +
                                            std::to_string(b.cocycle) + ")");
    return Unitary::trusted(std::move(v));
}

}  // namespace uhfz2
