#pragma once

#include <array>
#include <map>
#include <optional>
#include <vector>

#include "uhfz2/core.hpp"
#include "uhfz2/uhf.hpp"

namespace uhfz2 {

Unitary clock(int q);
Unitary shift(int q);

/// Generator of one direction restricted to one tensor factor.
struct LocalGen {
    enum class Kind { Id, Clock, Shift, Dense };
    Kind kind = Kind::Id;
    int power = 1;
    CMatrix matrix;   // used when kind == Dense

    static LocalGen id() { return {}; }
    static LocalGen clock_power(int s) { return {Kind::Clock, s, {}}; }
    static LocalGen shift_power(int s) { return {Kind::Shift, s, {}}; }
    static LocalGen dense(CMatrix m) { return {Kind::Dense, 1, std::move(m)}; }

    /// Local unitary on M_q.
    CMatrix unitary(int q) const;
    bool is_identity(int q) const;
};

/// Z^2-action on a truncation. Generator i is Ad(L_i W_i) with W_i = (x)_k w_ik
/// and an optional dense left factor L_i (present after cocycle perturbation).
class ProductAction {
public:
    ProductAction() = default;
    ProductAction(TruncatedUHF trunc, std::vector<LocalGen> gen1, std::vector<LocalGen> gen2);

    static ProductAction identity(const TruncatedUHF& trunc);

    const TruncatedUHF& trunc() const noexcept { return trunc_; }
    const std::vector<LocalGen>& gen(int i) const { return gens_.at(i); }
    const std::optional<CMatrix>& left(int i) const { return left_.at(i); }
    bool is_product() const { return !left_[0] && !left_[1]; }

    /// Per-factor unitaries of generator i (empty matrix for identity factors).
    const std::vector<CMatrix>& factor_unitaries(int i) const { return locals_.at(i); }

    /// Dense implementing unitary L_i W_i.
    CMatrix implementer(int i) const;

    /// alpha_{xi_i}(a), or its inverse.
    CMatrix apply_gen(int i, const CMatrix& a, bool inverse = false) const;

    /// alpha_n(a) for n = (n1, n2).
    CMatrix apply(int n1, int n2, const CMatrix& a) const;

    /// Same generators with left factor L_i replaced by u_i L_i.
    ProductAction with_left(const CMatrix& u1, const CMatrix& u2) const;

    /// max_k of the distance of w1k w2k w1k* w2k* to the nearest scalar.
    double commutation_defect() const;

private:
    TruncatedUHF trunc_;
    std::array<std::vector<LocalGen>, 2> gens_;
    std::array<std::vector<CMatrix>, 2> locals_;
    std::array<std::optional<CMatrix>, 2> left_;
};

struct ModelSpec {
    std::map<std::uint64_t, std::int64_t> f;
    std::vector<std::size_t> L1, L2;   // empty: default partition
};

struct ModelPartition {
    std::vector<std::size_t> Lf, L1, L2;   // L1 and L2 exclude Lf
};

ModelPartition model_partition(const ModelSpec& spec, const TruncatedUHF& t, const SupernaturalNumber& sn);

/// The action gamma^f.
ProductAction make_model_action(const ModelSpec& spec, const TruncatedUHF& t, const SupernaturalNumber& sn);

struct Cocycle {
    CMatrix u1, u2;
    double defect = 0.0;   // ||u1 a1(u2) - u2 a2(u1)||
};

double cocycle_defect(const CMatrix& u1, const CMatrix& u2, const ProductAction& action);
Cocycle make_cocycle(CMatrix u1, CMatrix u2, const ProductAction& action);

/// u_i = v alpha_i(v*).
Cocycle coboundary(const Unitary& v, const ProductAction& action);

/// u_n along the staircase (first xi_1, then xi_2).
Unitary extend_cocycle(const Cocycle& c, const ProductAction& action, int n1, int n2);

/// Perturbed action Ad(u_i) o alpha_i.
ProductAction perturb(const ProductAction& action, const Cocycle& c);

struct OuternessWitness {
    std::size_t factor = 0;
    std::vector<Projection> projections;
    double bound = 0.0;   // max_i ||p_i a alpha_n(p_i)||
};

OuternessWitness outerness_witness(const ProductAction& action, int n1, int n2, const CMatrix& a,
                                   const Projection& p, double eps);

/// Clock and shift exponents (a, b) with w = c u^a v^b for a local generator
/// of Id/Clock/Shift kind; nullopt for dense ones.
std::optional<std::pair<int, int>> weyl_exponents(const LocalGen& g, int q);

}  // namespace uhfz2
