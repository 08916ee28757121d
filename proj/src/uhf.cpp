#include "uhfz2/uhf.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <tuple>

namespace uhfz2 {

bool SupernaturalNumber::is_uhf() const {
    return std::any_of(exponents.begin(), exponents.end(), [](const auto& kv) { return kv.second.infinite; });
}

bool is_prime(std::uint64_t n) {
    if (n < 2) return false;
    for (std::uint64_t k = 2; k * k <= n; ++k)
        if (n % k == 0) return false;
    return true;
}

Exponent zeta(const SupernaturalNumber& sn, std::uint64_t p) {
    if (!is_prime(p)) fail(ErrorKind::NotPrime, std::to_string(p) + " is not prime");
    const auto it = sn.exponents.find(p);
    return it == sn.exponents.end() ? Exponent::finite(0) : it->second;
}

std::set<std::uint64_t> prime_set(const SupernaturalNumber& sn) {
    std::set<std::uint64_t> out;
    for (const auto& [p, e] : sn.exponents)
        if (!e.infinite && e.value >= 1) out.insert(p);
    return out;
}

std::uint64_t theta(const SupernaturalNumber& sn, std::uint64_t p) {
    const Exponent e = zeta(sn, p);
    if (e.infinite) fail(ErrorKind::InfiniteExponent, "theta(" + std::to_string(p) + ") is infinite");
    std::uint64_t out = 1;
    for (std::uint32_t k = 0; k < e.value; ++k) out *= p;
    return out;
}

TruncatedUHF::TruncatedUHF(std::vector<int> factors) : factors_(std::move(factors)) {
    if (factors_.empty()) fail(ErrorKind::InvalidArgument, "truncation needs at least one factor");
    dim_ = 1;
    for (int q : factors_) {
        if (q < 2) fail(ErrorKind::InvalidArgument, "factor sizes must be >= 2");
        dim_ *= q;
    }
}

Eigen::Index TruncatedUHF::inner(std::size_t k) const {
    Eigen::Index r = 1;
    for (std::size_t j = k + 1; j < factors_.size(); ++j) r *= factors_[j];
    return r;
}

Eigen::Index TruncatedUHF::outer(std::size_t k) const {
    Eigen::Index r = 1;
    for (std::size_t j = 0; j < k; ++j) r *= factors_[j];
    return r;
}

TruncatedUHF truncate(const SupernaturalNumber& sn, std::int64_t budget) {
    std::vector<int> factors;
    std::int64_t dim = 1;
    for (std::uint64_t p : prime_set(sn)) {
        const auto th = static_cast<std::int64_t>(theta(sn, p));
        factors.push_back(static_cast<int>(th));
        dim *= th;
    }
    if (dim > budget)
        fail(ErrorKind::BudgetTooSmall, "finite-prime blocks need dimension " + std::to_string(dim));

    std::vector<std::uint64_t> infinite;
    for (const auto& [p, e] : sn.exponents)
        if (e.infinite) infinite.push_back(p);
    bool grew = true;
    while (grew) {
        grew = false;
        for (std::uint64_t p : infinite) {
            if (dim * static_cast<std::int64_t>(p) <= budget) {
                factors.push_back(static_cast<int>(p));
                dim *= static_cast<std::int64_t>(p);
                grew = true;
            }
        }
    }
    if (factors.empty())
        fail(ErrorKind::BudgetTooSmall, "budget " + std::to_string(budget) + " admits no factor");
    return TruncatedUHF(std::move(factors));
}

std::optional<std::size_t> theta_block(const TruncatedUHF& t, std::uint64_t theta_p) {
    for (std::size_t k = 0; k < t.size(); ++k)
        if (static_cast<std::uint64_t>(t.factor(k)) == theta_p) return k;
    return std::nullopt;
}

CMatrix kron(const CMatrix& a, const CMatrix& b) {
    CMatrix out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

CMatrix embed_factor(const CMatrix& local, const TruncatedUHF& t, std::size_t k) {
    if (k >= t.size()) fail(ErrorKind::DimMismatch, "factor index out of range");
    if (local.rows() != t.factor(k) || local.cols() != t.factor(k))
        fail(ErrorKind::DimMismatch, "local matrix does not match factor size");
    const CMatrix left = CMatrix::Identity(t.outer(k), t.outer(k));
    const CMatrix right = CMatrix::Identity(t.inner(k), t.inner(k));
    return kron(kron(left, local), right);
}

CMatrix embed_product(const std::vector<CMatrix>& locals, const TruncatedUHF& t) {
    if (locals.size() != t.size()) fail(ErrorKind::DimMismatch, "one local matrix per factor expected");
    CMatrix out = CMatrix::Identity(1, 1);
    for (std::size_t k = 0; k < t.size(); ++k) {
        const CMatrix& w = locals[k];
        if (w.size() == 0)
            out = kron(out, CMatrix::Identity(t.factor(k), t.factor(k)));
        else
            out = kron(out, w);
    }
    return out;
}

void apply_left_factor(CMatrix& x, const CMatrix& w, const TruncatedUHF& t, std::size_t k) {
    const Eigen::Index q = t.factor(k);
    const Eigen::Index in = t.inner(k);
    const Eigen::Index out = t.outer(k);
    if (x.rows() != t.dim() || w.rows() != q || w.cols() != q)
        fail(ErrorKind::DimMismatch, "apply_left_factor shape mismatch");
    const CMatrix wt = w.transpose();
    CMatrix tmp(in, q);
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
        cplx* col = x.col(c).data();
        for (Eigen::Index o = 0; o < out; ++o) {
            Eigen::Map<CMatrix> block(col + o * q * in, in, q);
            tmp.noalias() = block * wt;
            block = tmp;
        }
    }
}

CMatrix left_multiply_product(const std::vector<CMatrix>& ws, const TruncatedUHF& t, CMatrix x) {
    for (std::size_t k = 0; k < t.size(); ++k)
        if (k < ws.size() && ws[k].size() != 0) apply_left_factor(x, ws[k], t, k);
    return x;
}

CMatrix conjugate_by_product(const std::vector<CMatrix>& ws, const TruncatedUHF& t, const CMatrix& a) {
    CMatrix y = left_multiply_product(ws, t, a);
    CMatrix z = left_multiply_product(ws, t, y.adjoint());
    return z.adjoint();
}

namespace {

struct IndexSplit {
    std::vector<Eigen::Index> kept;     // full index -> kept multi-index
    std::vector<Eigen::Index> traced;   // full index -> traced multi-index
    Eigen::Index kept_dim = 1;
    Eigen::Index traced_dim = 1;
};

IndexSplit split_indices(const TruncatedUHF& t, const std::vector<std::size_t>& keep) {
    std::vector<bool> is_kept(t.size(), false);
    for (std::size_t k : keep) {
        if (k >= t.size()) fail(ErrorKind::DimMismatch, "factor index out of range");
        is_kept[k] = true;
    }
    IndexSplit s;
    for (std::size_t k = 0; k < t.size(); ++k) (is_kept[k] ? s.kept_dim : s.traced_dim) *= t.factor(k);
    const Eigen::Index d = t.dim();
    s.kept.resize(d);
    s.traced.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        Eigen::Index rem = i, kept = 0, traced = 0, kept_scale = 1, traced_scale = 1;
        for (std::size_t kk = t.size(); kk-- > 0;) {
            const Eigen::Index q = t.factor(kk);
            const Eigen::Index digit = rem % q;
            rem /= q;
            if (is_kept[kk]) { kept += digit * kept_scale; kept_scale *= q; }
            else { traced += digit * traced_scale; traced_scale *= q; }
        }
        s.kept[i] = kept;
        s.traced[i] = traced;
    }
    return s;
}

}  // namespace

CMatrix compress_to_factors(const CMatrix& x, const TruncatedUHF& t, const std::vector<std::size_t>& keep) {
    if (x.rows() != t.dim() || x.cols() != t.dim()) fail(ErrorKind::DimMismatch, "compress shape mismatch");
    const IndexSplit s = split_indices(t, keep);
    CMatrix out = CMatrix::Zero(s.kept_dim, s.kept_dim);
    const Eigen::Index d = t.dim();
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i)
            if (s.traced[i] == s.traced[j]) out(s.kept[i], s.kept[j]) += x(i, j);
    return out / static_cast<double>(s.traced_dim);
}

CMatrix expand_from_factors(const CMatrix& y, const TruncatedUHF& t, const std::vector<std::size_t>& keep) {
    const IndexSplit s = split_indices(t, keep);
    if (y.rows() != s.kept_dim || y.cols() != s.kept_dim) fail(ErrorKind::DimMismatch, "expand shape mismatch");
    const Eigen::Index d = t.dim();
    CMatrix out = CMatrix::Zero(d, d);
    for (Eigen::Index j = 0; j < d; ++j)
        for (Eigen::Index i = 0; i < d; ++i)
            if (s.traced[i] == s.traced[j]) out(i, j) = y(s.kept[i], s.kept[j]);
    return out;
}

CMatrix left_multiply_placed(const CMatrix& local, const TruncatedUHF& t, const std::vector<std::size_t>& factors,
                             const CMatrix& x) {
    const IndexSplit s = split_indices(t, factors);
    if (local.rows() != s.kept_dim || local.cols() != s.kept_dim || x.rows() != t.dim())
        fail(ErrorKind::DimMismatch, "placed multiply shape mismatch");
    // rows[r * kept_dim + k]: full index with traced part r and kept part k
    std::vector<Eigen::Index> rows(static_cast<std::size_t>(t.dim()));
    for (Eigen::Index i = 0; i < t.dim(); ++i) rows[s.traced[i] * s.kept_dim + s.kept[i]] = i;
    CMatrix out(x.rows(), x.cols());
    CMatrix block(s.kept_dim, x.cols());
    for (Eigen::Index r = 0; r < s.traced_dim; ++r) {
        for (Eigen::Index k = 0; k < s.kept_dim; ++k) block.row(k) = x.row(rows[r * s.kept_dim + k]);
        const CMatrix y = local * block;
        for (Eigen::Index k = 0; k < s.kept_dim; ++k) out.row(rows[r * s.kept_dim + k]) = y.row(k);
    }
    return out;
}

CMatrix commutant_expectation(const CMatrix& x, const TruncatedUHF& t, const std::vector<std::size_t>& traced) {
    std::vector<std::size_t> keep;
    for (std::size_t k = 0; k < t.size(); ++k)
        if (std::find(traced.begin(), traced.end(), k) == traced.end()) keep.push_back(k);
    if (keep.empty()) return normalized_trace(x) * CMatrix::Identity(t.dim(), t.dim());
    return expand_from_factors(compress_to_factors(x, t, keep), t, keep);
}

TruncatedUHF sub_truncation(const TruncatedUHF& t, const std::vector<std::size_t>& keep) {
    std::vector<int> f;
    std::vector<std::size_t> sorted = keep;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t k : sorted) f.push_back(t.factor(k));
    return TruncatedUHF(std::move(f));
}

// ---------------------------------------------------------------------------

std::int64_t mod_floor(std::int64_t a, std::int64_t m) {
    const std::int64_t r = a % m;
    return r < 0 ? r + m : r;
}

std::int64_t mod_inverse(std::int64_t a, std::int64_t m) {
    if (m == 1) return 0;
    std::int64_t r0 = mod_floor(a, m), r1 = m;
    std::int64_t s0 = 1, s1 = 0;
    while (r1 != 0) {
        const std::int64_t q = r0 / r1;
        std::tie(r0, r1) = std::make_pair(r1, r0 - q * r1);
        std::tie(s0, s1) = std::make_pair(s1, s0 - q * s1);
    }
    if (r0 != 1) fail(ErrorKind::InvalidArgument, "no modular inverse");
    return mod_floor(s0, m);
}

std::pair<std::int64_t, std::int64_t> K0Value::reduced() const {
    const std::int64_t g = std::gcd(numerator, denominator);
    if (g == 0) return {0, 1};
    return {numerator / g, denominator / g};
}

K0Value K0Value::rescaled(std::int64_t new_denominator) const {
    if (new_denominator % denominator != 0)
        fail(ErrorKind::NotEmbeddable, "stage " + std::to_string(denominator) + " does not divide " +
                                           std::to_string(new_denominator));
    return {numerator * (new_denominator / denominator), new_denominator};
}

std::string K0Value::str() const {
    const auto [n, d] = reduced();
    return std::to_string(n) + "/" + std::to_string(d);
}

K0Value K0Value::operator+(const K0Value& o) const {
    const std::int64_t l = std::lcm(denominator, o.denominator);
    return {numerator * (l / denominator) + o.numerator * (l / o.denominator), l};
}

bool K0Value::operator==(const K0Value& o) const { return reduced() == o.reduced(); }

K0Residue K0Residue::operator+(const K0Residue& o) const {
    if (modulus != o.modulus) fail(ErrorKind::InvalidArgument, "residues with different moduli");
    return {prime, modulus, mod_floor(value + o.value, modulus)};
}

K0Residue K0Residue::operator-() const { return {prime, modulus, mod_floor(-value, modulus)}; }

K0Residue k0_reduce(const K0Value& v, std::uint64_t p, std::int64_t theta_p) {
    if (v.denominator % theta_p != 0)
        fail(ErrorKind::NotEmbeddable, "theta(" + std::to_string(p) + ") = " + std::to_string(theta_p) +
                                           " does not divide " + std::to_string(v.denominator));
    const std::int64_t cofactor = v.denominator / theta_p;
    if (std::gcd(cofactor, theta_p) != 1)
        fail(ErrorKind::NotEmbeddable, "theta(" + std::to_string(p) + ") is not the full p-part of " +
                                           std::to_string(v.denominator));
    const std::int64_t inv = mod_inverse(cofactor, theta_p);
    return {p, theta_p, mod_floor(mod_floor(v.numerator, theta_p) * inv, theta_p)};
}

K0Residue k0_reduce(const K0Value& v, const TruncatedUHF& t, const SupernaturalNumber& sn, std::uint64_t p) {
    if (v.denominator != t.dim())
        fail(ErrorKind::DimMismatch, "K0 value is not at the stage of this truncation");
    return k0_reduce(v, p, static_cast<std::int64_t>(theta(sn, p)));
}

}  // namespace uhfz2
