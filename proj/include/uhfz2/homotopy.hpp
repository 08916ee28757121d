#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "uhfz2/actions.hpp"
#include "uhfz2/paths.hpp"

namespace uhfz2 {

/// Continuous eigenvalue branches of a sampled path.
struct EigenPathBundle {
    std::vector<double> grid;
    std::vector<std::vector<double>> lambdas;   // lambdas[k][i]: lifted phase (turns) of branch i at grid[k]
    std::vector<std::vector<int>> pairing;      // pairing[k][i]: eigen index at k+1 taken by branch i
    std::vector<CMatrix> vectors;               // vectors[k].col(i): eigenvector of branch i at grid[k]
    double lip = 0.0;                           // max chord step / dt over all branches

    /// Rotation numbers; nullopt for a branch that does not return to its start.
    std::vector<std::optional<std::int64_t>> windings(double tol = 1e-6) const;
};

EigenPathBundle track_eigenvalues(const UnitaryPath& path, const Config& cfg = {});

/// t -> exp(2 pi i t log u) with the cut placed in a spectral gap.
UnitaryPath short_path(const Unitary& u, const Config& cfg = {}, int samples = 0);

struct HomotopyReport {
    double commutator_max = 0.0;   // max_t ||[v, w(t)]||
    double lip = 0.0;
    double gap_threshold = 0.0;
    int clusters = 0;
};

/// Path from 1 to w almost commuting with v.
UnitaryPath super_homotopy(const Unitary& v, const Unitary& w, double eps, const Config& cfg = {},
                           HomotopyReport* report = nullptr);

/// Sampled path of self-adjoints.
struct SelfAdjointPath {
    std::vector<double> t;
    std::vector<CMatrix> h;
    double lip_estimate = 0.0;

    /// Linear interpolation between samples.
    CMatrix at(double s) const;
};

struct ShrinkReport {
    int L = 0;
    double C = 0.0;
    double C_prime = 0.0;      // 2CL/3 + C/6
    double delta = 0.0;
    double max_error = 0.0;    // max ||u(t) - exp(2 pi i h(t))||
    double lip_h = 0.0;
    double max_commutator = 0.0;
};

SelfAdjointPath lip_shrink_loop(const UnitaryPath& u, double C, double eps, const Config& cfg = {},
                                ShrinkReport* report = nullptr);

/// z on the boundary of E = [-1, 1]^2, stored as a closed loop in the
/// perimeter parameter p in [0, 1]: p = 0 at (1, 1), then the top side to
/// (-1, 1), the left side to (-1, -1), the bottom side to (1, -1) and the
/// right side back to (1, 1).
struct BoundaryMap {
    UnitaryPath loop;
    double lip_estimate = 0.0;     // with respect to the sup-norm on E
    double eps_left = 0.0;         // max_t ||z(-1, t) - u1 a1(z(1, t))||
    double eps_bottom = 0.0;       // max_s ||z(s, -1) - u2 a2(z(s, 1))||
    double commutant_defect = 0.0; // max ||z1 - z0|| of the commutant correction

    CMatrix at(double s, double t) const;   // (s, t) on the boundary
};

/// Perimeter parameter of a boundary point, and back.
double perimeter_param(double s, double t);
std::pair<double, double> perimeter_point(double p);

BoundaryMap boundary_map(const CMatrix& u1, const CMatrix& u2, const ProductAction& action,
                         const std::optional<std::vector<std::size_t>>& a0_factors, double eps,
                         const Config& cfg = {});

struct DiskMap {
    BoundaryMap boundary;
    SelfAdjointPath h;             // shrinking family of the boundary loop
    double lip_estimate = 0.0;
    double restriction_error = 0.0;
    double guard_max = 0.0;        // max ||z - z0|| on the boundary
    ShrinkReport shrink;

    CMatrix at(double s, double t) const;
};

DiskMap disk_extension(const BoundaryMap& z, double eps, const Config& cfg = {});

/// Evaluates f(k) for k in [0, n) on cfg.threads workers.
void parallel_for(int n, unsigned threads, const std::function<void(int)>& f);

}  // namespace uhfz2
