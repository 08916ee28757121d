#pragma once

#include <array>
#include <vector>

#include "uhfz2/actions.hpp"
#include "uhfz2/homotopy.hpp"

namespace uhfz2 {

/// One direction of a grid tower: projections on a group of factors that
/// generator i permutes cyclically.
struct TowerAxis {
    std::vector<std::size_t> factors;   // ascending
    std::vector<int> orders;            // cyclic order contributed by each factor
    std::vector<bool> fourier;          // basis: Fourier (clock generator) or standard (shift)
    int height = 1;
    std::vector<CMatrix> local;         // local[g], g in Z_height, on the factors above
};

/// Axis on the listed factors for generator i. Each factor must be permuted
/// by generator i, fixed by the other one, and the orders must be coprime.
TowerAxis tower_axis(const ProductAction& action, int i, std::vector<std::size_t> factors);

/// Single grid tower (R = 1). Projections are kept factor-local; dense ones
/// are formed on demand.
struct RohlinTower {
    TruncatedUHF trunc;
    std::array<int, 2> shape{1, 1};
    std::array<TowerAxis, 2> axes;
    std::vector<std::size_t> protected_factors;

    std::vector<std::size_t> factors_used() const;
    /// e_g as a d x d matrix.
    CMatrix projection(int g1, int g2) const;
    /// e_g x without forming e_g.
    CMatrix left_multiply(int g1, int g2, const CMatrix& x) const;
};

/// Grid tower of shape >= (M, M) on factors outside `protected_factors` and
/// `avoid`. M <= 0 takes every usable factor.
RohlinTower build_tower(const ProductAction& action, const std::vector<std::size_t>& protected_factors, int M,
                        const std::vector<std::size_t>& avoid = {});

struct TowerReport {
    double partition_defect = 0.0;     // ||sum e_g - 1||
    double orthogonality_defect = 0.0; // max ||e_g e_h - delta_gh e_g||
    double shift_defect = 0.0;         // max ||alpha_i(e_g) - e_{g + xi_i}||
    double commutator_defect = 0.0;    // max ||[a, e_g]||, a in F
    double max_defect = 0.0;
    bool pass = false;
};

TowerReport verify_tower(const RohlinTower& tower, const ProductAction& action, const std::vector<CMatrix>& F,
                         double eps);

struct VanishBudget {
    double boundary = 0.0;     // boundary map defects (left and bottom sides)
    double grid_step = 0.0;    // Lip(disk) * 2 / min(m1, m2)
    double tower = 0.0;        // tower relation defects
    double cocycle = 0.0;      // defect of c, amplified along the staircase
    double total = 0.0;
    double lip_disk = 0.0;
    double C_prime = 0.0;      // shrink bound 2CL/3 + C/6 of the disk extension
    double guard = 0.0;
};

struct VanishReport {
    double eps_target = 0.0;
    std::array<double, 2> eps_achieved{0.0, 0.0};   // ||u_i - v alpha_i(v*)||
    double commutator_max = 0.0;                     // max ||[v, a]||, a in F
    std::array<int, 2> shape{1, 1};
    std::vector<std::size_t> working;
    std::vector<std::size_t> tower_factors;
    VanishBudget budget;
};

struct VanishOptions {
    /// Factors F lives on. Empty: computed from F.
    std::vector<std::size_t> protected_factors;
    int min_height = 0;
    double shrink_eps = 0.25;
};

/// v with u_i ~ v alpha_i(v*) and [v, F] ~ 0.
Unitary vanish_cocycle(const ProductAction& action, const Cocycle& c, const std::vector<CMatrix>& F, double eps,
                       const Config& cfg = {}, VanishReport* report = nullptr, const VanishOptions& opts = {});

/// Factors an element of the truncation acts on nontrivially.
std::vector<std::size_t> support_factors(const CMatrix& x, const TruncatedUHF& t, double tol = 1e-10);

/// Product action with generators restricted to the listed factors.
ProductAction restrict_action(const ProductAction& action, const std::vector<std::size_t>& factors);

/// Product action generated by alpha_1^{m1} and alpha_2^{m2}.
ProductAction power_action(const ProductAction& action, int m1, int m2);

}  // namespace uhfz2
