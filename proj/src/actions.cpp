#include "uhfz2/actions.hpp"

#include <algorithm>
#include <numeric>

namespace uhfz2 {

Unitary clock(int q) {
    if (q < 2) fail(ErrorKind::InvalidArgument, "clock needs q >= 2");
    CMatrix m = CMatrix::Zero(q, q);
    for (int j = 0; j < q; ++j) m(j, j) = std::polar(1.0, kTwoPi * j / q);
    return Unitary::trusted(std::move(m));
}

Unitary shift(int q) {
    if (q < 2) fail(ErrorKind::InvalidArgument, "shift needs q >= 2");
    CMatrix m = CMatrix::Zero(q, q);
    for (int j = 0; j + 1 < q; ++j) m(j + 1, j) = 1.0;
    m(0, q - 1) = 1.0;
    return Unitary::trusted(std::move(m));
}

namespace {

CMatrix matrix_power(const CMatrix& w, int n) {
    CMatrix base = n < 0 ? CMatrix(w.adjoint()) : w;
    CMatrix out = CMatrix::Identity(w.rows(), w.cols());
    for (int k = 0; k < std::abs(n); ++k) out = base * out;
    return out;
}

double distance_to_scalar(const CMatrix& m) {
    const cplx c = normalized_trace(m);
    return op_norm(m - c * CMatrix::Identity(m.rows(), m.cols()));
}

}  // namespace

CMatrix LocalGen::unitary(int q) const {
    switch (kind) {
        case Kind::Id: return CMatrix::Identity(q, q);
        case Kind::Clock: return matrix_power(clock(q).m(), mod_floor(power, q));
        case Kind::Shift: return matrix_power(shift(q).m(), mod_floor(power, q));
        case Kind::Dense:
            if (matrix.rows() != q || matrix.cols() != q)
                fail(ErrorKind::DimMismatch, "dense generator does not match factor size");
            return matrix;
    }
    return CMatrix::Identity(q, q);
}

bool LocalGen::is_identity(int q) const {
    switch (kind) {
        case Kind::Id: return true;
        case Kind::Clock:
        case Kind::Shift: return mod_floor(power, q) == 0;
        case Kind::Dense: return distance_to_scalar(matrix) < 1e-12;
    }
    return false;
}

std::optional<std::pair<int, int>> weyl_exponents(const LocalGen& g, int q) {
    switch (g.kind) {
        case LocalGen::Kind::Id: return std::make_pair(0, 0);
        case LocalGen::Kind::Clock: return std::make_pair(static_cast<int>(mod_floor(g.power, q)), 0);
        case LocalGen::Kind::Shift: return std::make_pair(0, static_cast<int>(mod_floor(g.power, q)));
        case LocalGen::Kind::Dense: return std::nullopt;
    }
    return std::nullopt;
}

ProductAction::ProductAction(TruncatedUHF trunc, std::vector<LocalGen> gen1, std::vector<LocalGen> gen2)
    : trunc_(std::move(trunc)), gens_{std::move(gen1), std::move(gen2)} {
    for (int i = 0; i < 2; ++i) {
        if (gens_[i].size() != trunc_.size())
            fail(ErrorKind::DimMismatch, "one local generator per factor expected");
        locals_[i].resize(trunc_.size());
        for (std::size_t k = 0; k < trunc_.size(); ++k) {
            const int q = trunc_.factor(k);
            if (!gens_[i][k].is_identity(q)) locals_[i][k] = gens_[i][k].unitary(q);
            if (gens_[i][k].kind == LocalGen::Kind::Dense && unitarity_defect(gens_[i][k].matrix) > 1e-9)
                fail(ErrorKind::InvalidArgument, "dense generator is not unitary");
        }
    }
    if (commutation_defect() > 1e-9)
        fail(ErrorKind::InvalidArgument, "generators do not commute up to scalars on every factor");
}

ProductAction ProductAction::identity(const TruncatedUHF& trunc) {
    return ProductAction(trunc, std::vector<LocalGen>(trunc.size()), std::vector<LocalGen>(trunc.size()));
}

double ProductAction::commutation_defect() const {
    double worst = 0.0;
    for (std::size_t k = 0; k < trunc_.size(); ++k) {
        const CMatrix& a = locals_[0][k];
        const CMatrix& b = locals_[1][k];
        if (a.size() == 0 || b.size() == 0) continue;
        worst = std::max(worst, distance_to_scalar(a * b * a.adjoint() * b.adjoint()));
    }
    return worst;
}

CMatrix ProductAction::implementer(int i) const {
    CMatrix w = left_multiply_product(locals_.at(i), trunc_, CMatrix::Identity(trunc_.dim(), trunc_.dim()));
    if (left_[i]) w = *left_[i] * w;
    return w;
}

CMatrix ProductAction::apply_gen(int i, const CMatrix& a, bool inverse) const {
    if (a.rows() != trunc_.dim() || a.cols() != trunc_.dim())
        fail(ErrorKind::DimMismatch, "matrix does not match the truncation");
    if (!inverse) {
        CMatrix y = conjugate_by_product(locals_[i], trunc_, a);
        if (left_[i]) y = *left_[i] * y * left_[i]->adjoint();
        return y;
    }
    CMatrix y = left_[i] ? CMatrix(left_[i]->adjoint() * a * *left_[i]) : a;
    std::vector<CMatrix> adj(locals_[i].size());
    for (std::size_t k = 0; k < adj.size(); ++k)
        if (locals_[i][k].size() != 0) adj[k] = locals_[i][k].adjoint();
    return conjugate_by_product(adj, trunc_, y);
}

CMatrix ProductAction::apply(int n1, int n2, const CMatrix& a) const {
    if (is_product()) {
        std::vector<CMatrix> ws(trunc_.size());
        bool any = false;
        for (std::size_t k = 0; k < trunc_.size(); ++k) {
            const CMatrix& w1 = locals_[0][k];
            const CMatrix& w2 = locals_[1][k];
            if (w1.size() == 0 && w2.size() == 0) continue;
            const int q = trunc_.factor(k);
            CMatrix w = CMatrix::Identity(q, q);
            if (w1.size() != 0) w = matrix_power(w1, n1);
            if (w2.size() != 0) w = w * matrix_power(w2, n2);
            ws[k] = std::move(w);
            any = true;
        }
        return any ? conjugate_by_product(ws, trunc_, a) : a;
    }
    CMatrix y = a;
    for (int k = 0; k < std::abs(n2); ++k) y = apply_gen(1, y, n2 < 0);
    for (int k = 0; k < std::abs(n1); ++k) y = apply_gen(0, y, n1 < 0);
    return y;
}

ProductAction ProductAction::with_left(const CMatrix& u1, const CMatrix& u2) const {
    ProductAction out = *this;
    const CMatrix* us[2] = {&u1, &u2};
    for (int i = 0; i < 2; ++i) {
        if (us[i]->rows() != trunc_.dim()) fail(ErrorKind::DimMismatch, "cocycle does not match the truncation");
        out.left_[i] = left_[i] ? CMatrix(*us[i] * *left_[i]) : *us[i];
    }
    return out;
}

// ---------------------------------------------------------------------------

namespace {

bool covers_exactly(const std::vector<std::size_t>& a, const std::vector<std::size_t>& b, std::size_t n) {
    std::vector<int> seen(n, 0);
    for (auto v : a) { if (v >= n) return false; ++seen[v]; }
    for (auto v : b) { if (v >= n) return false; ++seen[v]; }
    return std::all_of(seen.begin(), seen.end(), [](int s) { return s == 1; });
}

}  // namespace

ModelPartition model_partition(const ModelSpec& spec, const TruncatedUHF& t, const SupernaturalNumber& sn) {
    ModelPartition part;
    std::vector<bool> in_lf(t.size(), false);
    std::vector<bool> finite_block(t.size(), false);
    for (std::uint64_t p : prime_set(sn)) {
        const auto th = static_cast<std::int64_t>(theta(sn, p));
        const auto blk = theta_block(t, static_cast<std::uint64_t>(th));
        if (!blk) fail(ErrorKind::SpecMismatch, "truncation has no M_" + std::to_string(th) + " block");
        finite_block[*blk] = true;
    }
    for (const auto& [p, value] : spec.f) {
        if (!is_prime(p)) fail(ErrorKind::NotPrime, std::to_string(p) + " is not prime");
        const Exponent e = zeta(sn, p);
        if (e.infinite || e.value == 0)
            fail(ErrorKind::SpecMismatch, "f is defined only on primes of finite nonzero exponent");
        const auto th = static_cast<std::int64_t>(theta(sn, p));
        if (value < 0 || value >= th)
            fail(ErrorKind::SpecMismatch, "f(" + std::to_string(p) + ") must lie in [0, " + std::to_string(th) + ")");
        if (value == 0) continue;
        const auto blk = theta_block(t, static_cast<std::uint64_t>(th));
        if (!blk) fail(ErrorKind::SpecMismatch, "truncation has no M_" + std::to_string(th) + " block");
        in_lf[*blk] = true;
    }
    for (std::size_t k = 0; k < t.size(); ++k)
        if (in_lf[k]) part.Lf.push_back(k);

    if (spec.L1.empty() && spec.L2.empty()) {
        // Finite-prime blocks outside L_f go to L1; the remaining factors
        // alternate, starting with L1.
        bool next_l1 = true;
        for (std::size_t k = 0; k < t.size(); ++k) {
            if (in_lf[k]) continue;
            if (finite_block[k]) { part.L1.push_back(k); continue; }
            (next_l1 ? part.L1 : part.L2).push_back(k);
            next_l1 = !next_l1;
        }
        return part;
    }
    if (!covers_exactly(spec.L1, spec.L2, t.size()))
        fail(ErrorKind::SpecMismatch, "L1 and L2 must partition the factor indices");
    for (auto k : spec.L1)
        if (!in_lf[k]) part.L1.push_back(k);
    for (auto k : spec.L2)
        if (!in_lf[k]) part.L2.push_back(k);
    std::sort(part.L1.begin(), part.L1.end());
    std::sort(part.L2.begin(), part.L2.end());
    return part;
}

ProductAction make_model_action(const ModelSpec& spec, const TruncatedUHF& t, const SupernaturalNumber& sn) {
    const ModelPartition part = model_partition(spec, t, sn);
    std::vector<LocalGen> g1(t.size()), g2(t.size());
    for (auto k : part.Lf) {
        std::int64_t power = 0;
        for (const auto& [p, value] : spec.f)
            if (value != 0 && static_cast<std::int64_t>(theta(sn, p)) == t.factor(k)) power = value;
        g1[k] = LocalGen::clock_power(static_cast<int>(power));
        g2[k] = LocalGen::shift_power(1);
    }
    for (auto k : part.L1) g2[k] = LocalGen::shift_power(1);
    for (auto k : part.L2) g1[k] = LocalGen::clock_power(1);
    return ProductAction(t, std::move(g1), std::move(g2));
}

// ---------------------------------------------------------------------------

double cocycle_defect(const CMatrix& u1, const CMatrix& u2, const ProductAction& action) {
    return op_norm(u1 * action.apply_gen(0, u2) - u2 * action.apply_gen(1, u1));
}

Cocycle make_cocycle(CMatrix u1, CMatrix u2, const ProductAction& action) {
    if (u1.rows() != action.trunc().dim() || u2.rows() != action.trunc().dim())
        fail(ErrorKind::DimMismatch, "cocycle does not match the truncation");
    const double d = cocycle_defect(u1, u2, action);
    return {std::move(u1), std::move(u2), d};
}

Cocycle coboundary(const Unitary& v, const ProductAction& action) {
    const CMatrix vs = v.m().adjoint();
    CMatrix u1 = v.m() * action.apply_gen(0, vs);
    CMatrix u2 = v.m() * action.apply_gen(1, vs);
    return make_cocycle(std::move(u1), std::move(u2), action);
}

namespace {

// u_{k xi_i} for any integer k.
CMatrix cocycle_power(const Cocycle& c, const ProductAction& action, int i, int k) {
    const Eigen::Index d = action.trunc().dim();
    CMatrix step = i == 0 ? c.u1 : c.u2;
    bool inverse = false;
    if (k < 0) {
        step = action.apply_gen(i, step.adjoint(), true);   // u_{-xi} = alpha_xi^{-1}(u_xi*)
        inverse = true;
    }
    CMatrix out = CMatrix::Identity(d, d);
    for (int j = 0; j < std::abs(k); ++j) out = step * action.apply_gen(i, out, inverse);
    return out;
}

}  // namespace

Unitary extend_cocycle(const Cocycle& c, const ProductAction& action, int n1, int n2) {
    if (c.defect > 1e-6) fail(ErrorKind::NotACocycle, "cocycle defect " + std::to_string(c.defect) + " exceeds 1e-6");
    const CMatrix a = cocycle_power(c, action, 0, n1);
    const CMatrix b = cocycle_power(c, action, 1, n2);
    CMatrix stair = a * action.apply(n1, 0, b);
    const CMatrix reverse = b * action.apply(0, n2, a);
    const double gap = op_norm(stair - reverse);
    const double allowed = 10.0 * c.defect * (std::abs(n1) + 1) * (std::abs(n2) + 1) + 1e-9;
    if (gap > allowed)
        fail(ErrorKind::NotACocycle, "staircase paths disagree by " + std::to_string(gap));
    return Unitary::trusted(std::move(stair));
}

ProductAction perturb(const ProductAction& action, const Cocycle& c) {
    if (c.defect > 1e-6) fail(ErrorKind::NotACocycle, "cocycle defect " + std::to_string(c.defect) + " exceeds 1e-6");
    return action.with_left(c.u1, c.u2);
}

// ---------------------------------------------------------------------------

namespace {

CMatrix fourier_projection(int q, int j) {
    CVector f(q);
    for (int l = 0; l < q; ++l) f(l) = std::polar(1.0 / std::sqrt(static_cast<double>(q)), kTwoPi * j * l / q);
    return f * f.adjoint();
}

}  // namespace

OuternessWitness outerness_witness(const ProductAction& action, int n1, int n2, const CMatrix& a,
                                   const Projection& p, double eps) {
    if (n1 == 0 && n2 == 0) fail(ErrorKind::InvalidArgument, "outerness needs n != 0");
    if (!action.is_product()) fail(ErrorKind::InvalidArgument, "witnesses need a product-type action");
    const TruncatedUHF& t = action.trunc();
    for (std::size_t k = 0; k < t.size(); ++k) {
        const int q = t.factor(k);
        const auto e1 = weyl_exponents(action.gen(0)[k], q);
        const auto e2 = weyl_exponents(action.gen(1)[k], q);
        if (!e1 || !e2) continue;
        const int ca = static_cast<int>(mod_floor(static_cast<std::int64_t>(n1) * e1->first + static_cast<std::int64_t>(n2) * e2->first, q));
        const int sb = static_cast<int>(mod_floor(static_cast<std::int64_t>(n1) * e1->second + static_cast<std::int64_t>(n2) * e2->second, q));
        if (ca == 0 && sb == 0) continue;
        const std::vector<std::size_t> traced{k};
        if (op_norm(a - commutant_expectation(a, t, traced)) > 1e-12) continue;
        if (op_norm(p.m() - commutant_expectation(p.m(), t, traced)) > 1e-12) continue;
        OuternessWitness w;
        w.factor = k;
        for (int j = 0; j < q; ++j) {
            CMatrix local;
            if (sb != 0) {
                local = CMatrix::Zero(q, q);
                local(j, j) = 1.0;
            } else {
                local = fourier_projection(q, j);
            }
            CMatrix pj = p.m() * embed_factor(local, t, k);
            w.bound = std::max(w.bound, op_norm(pj * a * action.apply(n1, n2, pj)));
            w.projections.push_back(Projection::trusted(std::move(pj)));
        }
        if (w.bound < eps) return w;
    }
    fail(ErrorKind::NoFreeTail, "no factor moves in this direction off the support of a and p");
}

}  // namespace uhfz2
