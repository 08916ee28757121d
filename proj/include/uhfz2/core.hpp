#pragma once

#include <complex>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace uhfz2 {

using cplx = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RVector = Eigen::VectorXd;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Every numerical threshold used by the library, with its default.
///
/// Functions take a `const Config&` so that a run can be reproduced from the
/// record alone; nothing reads global state.
struct Config {
    double unitarity_tol = 1e-10;   // ||U U* - 1||, ||H - H*||, projection checks
    double branch_guard = 1e-8;     // |lambda + 1| below this is "on the cut"
    double cluster_tol = 1e-8;      // eigenvalue clustering in spectral_decomp
    double lattice_tol = 1e-6;      // integer / (1/d)Z rounding residual
    double singular_tol = 1e-12;    // smallest singular value for polar
    double delta0 = 1.0 / 16.0;     // commutation constant of the pair invariant
    double homotopy_delta_ratio = 1.0 / 8.0;  // delta(eps) = ratio * eps
    double matching_tol = 1e-7;     // eigenvalue tracking slack
    int boundary_samples = 64;      // per side of the square
    int path_samples = 32;          // exponential paths
    int disk_grid = 32;             // disk map Lipschitz grid (per axis)
    // Orientation of the pair invariant, fixed so that [gamma^f] = f.
    int invariant_orientation = -1;
    // Orientation of the five-segment loop, fixed so that kappa_loop equals
    // kappa_fast (the literal loop winds as -tau(a)).
    int kappa_loop_orientation = -1;
    unsigned threads = 1;
};

enum class ErrorKind {
    InvalidArgument,
    DimMismatch,
    BranchCut,
    Singular,
    NotPrime,
    InfiniteExponent,
    BudgetTooSmall,
    NotEmbeddable,
    SpecMismatch,
    NotACocycle,
    NoFreeTail,
    StepTooCoarse,
    NotOnLattice,
    NotInteger,
    NotAlmostCocycle,
    CommutationFailure,
    AmbiguousMatching,
    LipschitzViolation,
    BottObstruction,
    WindingObstruction,
    SynthesisFailure,
    NotAdmissible,
    CommutantDefect,
    GuardViolated,
    NoFreeFactors,
    TowerUnavailable,
    AssemblyDefect,
    InvariantMismatch,
    CorrectionFailure,
    Stalled,
};

const char* to_string(ErrorKind kind);

/// Mathematical obstructions (a nonzero invariant, a failed synthesis) are
/// results, not input mistakes; the CLI maps them to a distinct exit code.
bool is_obstruction(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what);
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] void fail(ErrorKind kind, const std::string& what);

// ---------------------------------------------------------------------------
// Role-checked matrices. Construction validates; `trusted` skips the check for
// values produced by operations that preserve the role algebraically.

class Unitary {
public:
    explicit Unitary(CMatrix m, double tol = Config{}.unitarity_tol);
    static Unitary trusted(CMatrix m);
    static Unitary identity(Eigen::Index dim);

    const CMatrix& m() const noexcept { return m_; }
    Eigen::Index dim() const noexcept { return m_.rows(); }
    Unitary adjoint() const { return trusted(m_.adjoint()); }
    Unitary operator*(const Unitary& other) const { return trusted(m_ * other.m_); }

private:
    struct TrustedTag {};
    Unitary(CMatrix m, TrustedTag) : m_(std::move(m)) {}
    CMatrix m_;
};

class SelfAdjoint {
public:
    explicit SelfAdjoint(CMatrix m, double tol = Config{}.unitarity_tol);
    static SelfAdjoint trusted(CMatrix m);

    const CMatrix& m() const noexcept { return m_; }
    Eigen::Index dim() const noexcept { return m_.rows(); }

private:
    struct TrustedTag {};
    SelfAdjoint(CMatrix m, TrustedTag) : m_(std::move(m)) {}
    CMatrix m_;
};

class Projection {
public:
    explicit Projection(CMatrix m, double tol = 1e-9);
    static Projection trusted(CMatrix m);

    const CMatrix& m() const noexcept { return m_; }
    Eigen::Index dim() const noexcept { return m_.rows(); }

private:
    struct TrustedTag {};
    Projection(CMatrix m, TrustedTag) : m_(std::move(m)) {}
    CMatrix m_;
};

// ---------------------------------------------------------------------------
// Basic measurements.

double op_norm(const CMatrix& m);
cplx normalized_trace(const CMatrix& m);
double unitarity_defect(const CMatrix& m);   // ||M M* - 1||
double hermiticity_defect(const CMatrix& m); // ||M - M*||
CMatrix commutator(const CMatrix& a, const CMatrix& b);

/// Eigen-decomposition of a normal (here: unitary) matrix, U V = V diag(values).
struct EigenSystem {
    CVector values;
    CMatrix vectors;   // unitary, columns are eigenvectors
    double residual = 0.0;  // max column norm of U V - V diag(values)
};

EigenSystem unitary_eigensystem(const CMatrix& u);

struct LogOptions {
    /// Center of the branch, in turns. Phases of the result lie in
    /// (rotation - 1/2, rotation + 1/2]. Supplying it disables the cut check.
    std::optional<double> rotation;
};

struct LogResult {
    SelfAdjoint h;
    double residual;   // ||exp(2 pi i h) - U||
};

/// h with U = exp(2 pi i h); principal phases in (-1/2, 1/2].
LogResult unitary_log(const Unitary& u, const Config& cfg = {}, const LogOptions& opts = {});

/// Same, for a precomputed eigensystem of U.
LogResult unitary_log(const Unitary& u, const EigenSystem& es, const Config& cfg,
                      const LogOptions& opts);

/// Rotation (in turns) of the branch center that puts the cut in the middle of
/// the spectral gap closest to -1. Zero when no eigenvalue is near the cut.
double safe_rotation(const CVector& eigenvalues, double guard);

Unitary expm_sa(const SelfAdjoint& h);

/// exp(2 pi i s h) for a real multiple s.
Unitary expm_sa(const SelfAdjoint& h, double s);

/// Nearest unitary W = M (M* M)^{-1/2}.
Unitary polar_unitary(const CMatrix& m, const Config& cfg = {});

struct SpectralCluster {
    cplx eigenvalue;   // representative, |eigenvalue| = 1
    CMatrix basis;     // d x r orthonormal columns
    Projection projection() const;
};

struct SpectralDecomposition {
    std::vector<SpectralCluster> clusters;
    double residual;   // ||sum lambda_i P_i - U||
};

SpectralDecomposition spectral_decomp(const Unitary& u, const Config& cfg = {});

/// Wrap a real number to (-1/2, 1/2].
double wrap_turn(double x);

}  // namespace uhfz2
