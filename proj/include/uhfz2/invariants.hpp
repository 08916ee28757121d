#pragma once

#include <map>
#include <optional>

#include "uhfz2/actions.hpp"
#include "uhfz2/paths.hpp"

namespace uhfz2 {

/// Nearest point of (1/d)Z, or NotOnLattice beyond cfg.lattice_tol.
K0Value round_to_lattice(double value, std::int64_t d, const Config& cfg, double* residual = nullptr);

/// tau-winding of a closed path.
K0Value winding_tau(const UnitaryPath& path, const Config& cfg = {}, double* residual = nullptr);

struct BottResult {
    std::int64_t value = 0;
    double residual = 0.0;
    double commutator_norm = 0.0;   // ||vw - wv||
};

BottResult bott(const Unitary& v, const Unitary& w, const Config& cfg = {});

struct KappaResult {
    K0Value value;
    std::int64_t integer_form = 0;
    double residual = 0.0;
    double defect = 0.0;
    double tau_raw = 0.0;   // tau(a) before rounding
};

/// x = u1 alpha_1(u2) (u2 alpha_2(u1))*.
CMatrix kappa_x(const CMatrix& u1, const CMatrix& u2, const ProductAction& action);

KappaResult kappa_fast(const CMatrix& u1, const CMatrix& u2, const ProductAction& action, const Config& cfg = {});

/// The closed path H of the five-segment construction.
UnitaryPath kappa_loop_path(const CMatrix& u1, const CMatrix& u2, const ProductAction& action,
                            const UnitaryPath& h1, const UnitaryPath& h2, const Config& cfg = {});

KappaResult kappa_loop(const CMatrix& u1, const CMatrix& u2, const ProductAction& action,
                       const UnitaryPath& h1, const UnitaryPath& h2, const Config& cfg = {});

struct DeltaTau {
    double value = 0.0;          // representative in [0, 1/d)
    std::int64_t denominator = 1;  // defined modulo (1/denominator) Z
};

DeltaTau delta_tau(const Unitary& u, const std::optional<UnitaryPath>& path = std::nullopt, const Config& cfg = {});

struct PairInvariant {
    K0Residue residue;
    K0Value winding;          // tau-value of the path to x
    double commutation = 0.0; // certified bound on sup ||[h(t), a]||, a in U(A0)
    double defect = 0.0;      // distance of x to the lattice-consistent value
    bool factorized = false;
};

/// [beta, alpha](p). a0_block defaults to the factor carrying M_theta(p).
PairInvariant pair_invariant(const ProductAction& beta, const ProductAction& alpha, const SupernaturalNumber& sn,
                             std::uint64_t p, const Config& cfg = {},
                             std::optional<std::size_t> a0_block = std::nullopt);

/// Same, forcing the dense route (used to cross-check the factorized one).
PairInvariant pair_invariant_dense(const ProductAction& beta, const ProductAction& alpha, const SupernaturalNumber& sn,
                                   std::uint64_t p, const Config& cfg = {},
                                   std::optional<std::size_t> a0_block = std::nullopt);

/// [alpha](p) = [id, alpha](p) for every p in P(A).
std::map<std::uint64_t, K0Residue> action_invariant(const ProductAction& alpha, const SupernaturalNumber& sn,
                                                    const Config& cfg = {});

bool admissible(const Cocycle& c, const ProductAction& action, const Config& cfg = {});

}  // namespace uhfz2
