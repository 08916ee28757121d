#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "uhfz2/core.hpp"

namespace uhfz2 {

/// Exponent in N u {inf}.
struct Exponent {
    std::uint32_t value = 0;
    bool infinite = false;

    static Exponent inf() { return {0, true}; }
    static Exponent finite(std::uint32_t v) { return {v, false}; }
    bool operator==(const Exponent&) const = default;
};

/// Formal product of prime powers; models a UHF algebra.
struct SupernaturalNumber {
    std::map<std::uint64_t, Exponent> exponents;

    /// True when the represented algebra is infinite dimensional.
    bool is_uhf() const;
};

bool is_prime(std::uint64_t n);

Exponent zeta(const SupernaturalNumber& sn, std::uint64_t p);

/// Primes with 1 <= zeta(p) < inf.
std::set<std::uint64_t> prime_set(const SupernaturalNumber& sn);

/// p^zeta(p); throws InfiniteExponent when zeta(p) = inf.
std::uint64_t theta(const SupernaturalNumber& sn, std::uint64_t p);

/// A finite stage M_{q_1} (x) ... (x) M_{q_N}. The first factor is the most
/// significant index, matching the Kronecker convention.
class TruncatedUHF {
public:
    TruncatedUHF() = default;
    explicit TruncatedUHF(std::vector<int> factors);

    const std::vector<int>& factors() const noexcept { return factors_; }
    std::size_t size() const noexcept { return factors_.size(); }
    int factor(std::size_t k) const { return factors_.at(k); }
    Eigen::Index dim() const noexcept { return dim_; }
    /// Product of the factor sizes after index k.
    Eigen::Index inner(std::size_t k) const;
    /// Product of the factor sizes before index k.
    Eigen::Index outer(std::size_t k) const;

    bool operator==(const TruncatedUHF& o) const { return factors_ == o.factors_; }

private:
    std::vector<int> factors_;
    Eigen::Index dim_ = 1;
};

/// Greedy deterministic truncation: one M_theta(p) factor per finite prime
/// (ascending), then infinite-exponent primes round-robin while they fit.
TruncatedUHF truncate(const SupernaturalNumber& sn, std::int64_t budget);

/// Index of the factor carrying M_theta(p), if the truncation has one.
std::optional<std::size_t> theta_block(const TruncatedUHF& t, std::uint64_t theta_p);

// ---------------------------------------------------------------------------
// Tensor placement.

CMatrix kron(const CMatrix& a, const CMatrix& b);

/// 1 (x) ... (x) local (x) ... (x) 1 with `local` on factor k.
CMatrix embed_factor(const CMatrix& local, const TruncatedUHF& t, std::size_t k);

/// (x)_k locals[k].
CMatrix embed_product(const std::vector<CMatrix>& locals, const TruncatedUHF& t);

/// x <- (1 (x) .. (x) w (x) .. (x) 1) x, in place, without forming the big matrix.
void apply_left_factor(CMatrix& x, const CMatrix& w, const TruncatedUHF& t, std::size_t k);

/// W a W* for W = (x)_k ws[k]. Empty entries stand for identities.
CMatrix conjugate_by_product(const std::vector<CMatrix>& ws, const TruncatedUHF& t, const CMatrix& a);

/// W x for W = (x)_k ws[k].
CMatrix left_multiply_product(const std::vector<CMatrix>& ws, const TruncatedUHF& t, CMatrix x);

/// Normalized partial trace over the factors in `traced`, re-embedded as
/// 1 (x) Tr(x)/r: the trace-preserving conditional expectation onto the
/// commutant of the full matrix algebra on those factors.
CMatrix commutant_expectation(const CMatrix& x, const TruncatedUHF& t, const std::vector<std::size_t>& traced);

/// Partial trace (normalized) returning the compressed matrix on the remaining
/// factors, in their original order.
CMatrix compress_to_factors(const CMatrix& x, const TruncatedUHF& t, const std::vector<std::size_t>& keep);

/// Inverse of compress_to_factors for an element of the kept subalgebra:
/// places `y` on the kept factors and identities elsewhere.
CMatrix expand_from_factors(const CMatrix& y, const TruncatedUHF& t, const std::vector<std::size_t>& keep);

/// (local placed on `factors`) * x, without forming the placed matrix.
CMatrix left_multiply_placed(const CMatrix& local, const TruncatedUHF& t, const std::vector<std::size_t>& factors,
                             const CMatrix& x);

/// Sub-truncation made of the listed factors.
TruncatedUHF sub_truncation(const TruncatedUHF& t, const std::vector<std::size_t>& keep);

// ---------------------------------------------------------------------------
// K_0 arithmetic.

/// tau-value numerator/denominator, with denominator the ambient dimension d.
struct K0Value {
    std::int64_t numerator = 0;
    std::int64_t denominator = 1;

    /// Reduced fraction (numerator, denominator).
    std::pair<std::int64_t, std::int64_t> reduced() const;
    double value() const { return static_cast<double>(numerator) / static_cast<double>(denominator); }
    /// Same value at a finer stage d' (requires d | d').
    K0Value rescaled(std::int64_t new_denominator) const;
    std::string str() const;   // "p/q", reduced

    K0Value operator+(const K0Value& o) const;
    K0Value operator-() const { return {-numerator, denominator}; }
    bool operator==(const K0Value& o) const;
};

/// Element of Z/theta(p)Z.
struct K0Residue {
    std::uint64_t prime = 0;
    std::int64_t modulus = 1;
    std::int64_t value = 0;

    K0Residue operator+(const K0Residue& o) const;
    K0Residue operator-() const;
    bool operator==(const K0Residue& o) const = default;
};

/// Image of v in K0(A)/K0(A n A0') = ((1/d)Z)/((theta/d)Z) ~ Z/theta Z, with
/// the stage-independent identification 1/theta -> 1: for v = n/d and
/// d = theta*m, the residue is n * m^{-1} mod theta.
K0Residue k0_reduce(const K0Value& v, std::uint64_t p, std::int64_t theta_p);
K0Residue k0_reduce(const K0Value& v, const TruncatedUHF& t, const SupernaturalNumber& sn, std::uint64_t p);

std::int64_t mod_floor(std::int64_t a, std::int64_t m);
std::int64_t mod_inverse(std::int64_t a, std::int64_t m);

}  // namespace uhfz2
