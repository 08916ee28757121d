#pragma once

#include <functional>
#include <vector>

#include "uhfz2/core.hpp"
#include "uhfz2/uhf.hpp"

namespace uhfz2 {

/// Sampled path of unitaries on [0, 1].
struct UnitaryPath {
    std::vector<double> t;
    std::vector<CMatrix> u;
    bool closed = false;
    double lip_estimate = 0.0;

    std::size_t size() const noexcept { return t.size(); }
    Eigen::Index dim() const { return u.empty() ? 0 : u.front().rows(); }
    const CMatrix& front() const { return u.front(); }
    const CMatrix& back() const { return u.back(); }

    /// Geodesic interpolation between neighbouring samples.
    CMatrix at(double s) const;
};

/// Validates times (strictly increasing, 0 to 1) and fills lip_estimate.
/// `closed` is set when the end points agree within 1e-9.
UnitaryPath make_path(std::vector<double> t, std::vector<CMatrix> u);

/// n+1 uniform samples of f on [0, 1].
UnitaryPath sample_path(const std::function<CMatrix(double)>& f, int n);

/// t -> exp(2 pi i t h).
UnitaryPath exp_path(const SelfAdjoint& h, int n);

/// Pointwise product, on the union grid.
UnitaryPath path_product(const UnitaryPath& a, const UnitaryPath& b);

/// Segments concatenated and reparametrized to equal time shares.
UnitaryPath concatenate(const std::vector<UnitaryPath>& pieces);

UnitaryPath reversed(const UnitaryPath& p);

double lip_of(const std::vector<double>& t, const std::vector<CMatrix>& u);

/// Maximum over adjacent samples of ||U(t_{k+1}) U(t_k)* - 1||.
double max_step_gap(const UnitaryPath& p);

/// Sum_k tau(log(U_{k+1} U_k*)) / (2 pi i) as a real number, with the per-step
/// gap check (StepTooCoarse when a gap reaches sqrt 2).
double winding_real(const UnitaryPath& p);

}  // namespace uhfz2
