#include "uhfz2/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace uhfz2 {

const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::DimMismatch: return "DimMismatch";
    case ErrorKind::BranchCut: return "BranchCut";
    case ErrorKind::Singular: return "Singular";
    case ErrorKind::NotPrime: return "NotPrime";
    case ErrorKind::InfiniteExponent: return "InfiniteExponent";
    case ErrorKind::BudgetTooSmall: return "BudgetTooSmall";
    case ErrorKind::NotEmbeddable: return "NotEmbeddable";
    case ErrorKind::SpecMismatch: return "SpecMismatch";
    case ErrorKind::NotACocycle: return "NotACocycle";
    case ErrorKind::NoFreeTail: return "NoFreeTail";
    case ErrorKind::StepTooCoarse: return "StepTooCoarse";
    case ErrorKind::NotOnLattice: return "NotOnLattice";
    case ErrorKind::NotInteger: return "NotInteger";
    case ErrorKind::NotAlmostCocycle: return "NotAlmostCocycle";
    case ErrorKind::CommutationFailure: return "CommutationFailure";
    case ErrorKind::AmbiguousMatching: return "AmbiguousMatching";
    case ErrorKind::LipschitzViolation: return "LipschitzViolation";
    case ErrorKind::BottObstruction: return "BottObstruction";
    case ErrorKind::WindingObstruction: return "WindingObstruction";
    case ErrorKind::SynthesisFailure: return "SynthesisFailure";
    case ErrorKind::NotAdmissible: return "NotAdmissible";
    case ErrorKind::CommutantDefect: return "CommutantDefect";
    case ErrorKind::GuardViolated: return "GuardViolated";
    case ErrorKind::NoFreeFactors: return "NoFreeFactors";
    case ErrorKind::TowerUnavailable: return "TowerUnavailable";
    case ErrorKind::AssemblyDefect: return "AssemblyDefect";
    case ErrorKind::InvariantMismatch: return "InvariantMismatch";
    case ErrorKind::CorrectionFailure: return "CorrectionFailure";
    case ErrorKind::Stalled: return "Stalled";
    }
    return "Unknown";
}

bool is_obstruction(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::InvalidArgument:
    case ErrorKind::DimMismatch:
    case ErrorKind::NotPrime:
    case ErrorKind::SpecMismatch:
        return false;
    default:
        return true;
    }
}

Error::Error(ErrorKind kind, const std::string& what)
    : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

namespace {

void require_square(const CMatrix& m, const char* role) {
    if (m.rows() != m.cols() || m.rows() == 0)
        fail(ErrorKind::DimMismatch, std::string(role) + " must be a non-empty square matrix");
    if (!m.allFinite())
        fail(ErrorKind::InvalidArgument, std::string(role) + " has non-finite entries");
}

}  // namespace

Unitary::Unitary(CMatrix m, double tol) : m_(std::move(m)) {
    require_square(m_, "unitary");
    const double defect = unitarity_defect(m_);
    if (defect > tol) {
        std::ostringstream os;
        os << "matrix is not unitary (||UU*-1|| = " << defect << ")";
        fail(ErrorKind::InvalidArgument, os.str());
    }
}

Unitary Unitary::trusted(CMatrix m) { return Unitary(std::move(m), TrustedTag{}); }

Unitary Unitary::identity(Eigen::Index dim) { return trusted(CMatrix::Identity(dim, dim)); }

SelfAdjoint::SelfAdjoint(CMatrix m, double tol) : m_(std::move(m)) {
    require_square(m_, "self-adjoint");
    const double defect = hermiticity_defect(m_);
    if (defect > tol) {
        std::ostringstream os;
        os << "matrix is not self-adjoint (||H-H*|| = " << defect << ")";
        fail(ErrorKind::InvalidArgument, os.str());
    }
}

SelfAdjoint SelfAdjoint::trusted(CMatrix m) { return SelfAdjoint(std::move(m), TrustedTag{}); }

Projection::Projection(CMatrix m, double tol) : m_(std::move(m)) {
    require_square(m_, "projection");
    if (op_norm(m_ * m_ - m_) > tol || hermiticity_defect(m_) > tol)
        fail(ErrorKind::InvalidArgument, "matrix is not an orthogonal projection");
}

Projection Projection::trusted(CMatrix m) { return Projection(std::move(m), TrustedTag{}); }

double op_norm(const CMatrix& m) {
    if (m.size() == 0) return 0.0;
    // ||M|| <= sqrt(||M||_1 ||M||_inf); tiny matrices stop here.
    const double cheap = std::sqrt(m.cwiseAbs().colwise().sum().maxCoeff() * m.cwiseAbs().rowwise().sum().maxCoeff());
    if (cheap <= 1e-12) return cheap;
    if (m.rows() <= 8 && m.cols() <= 8) {
        Eigen::JacobiSVD<CMatrix> svd(m);
        return svd.singularValues()(0);
    }
    // Gram matrix on the smaller side; the top eigenvalue is sigma_max^2.
    const CMatrix gram = m.rows() <= m.cols() ? CMatrix(m * m.adjoint()) : CMatrix(m.adjoint() * m);
    Eigen::SelfAdjointEigenSolver<CMatrix> es(gram, Eigen::EigenvaluesOnly);
    return std::sqrt(std::max(0.0, es.eigenvalues().maxCoeff()));
}

cplx normalized_trace(const CMatrix& m) { return m.trace() / static_cast<double>(m.rows()); }

double unitarity_defect(const CMatrix& m) {
    return op_norm(m * m.adjoint() - CMatrix::Identity(m.rows(), m.rows()));
}

double hermiticity_defect(const CMatrix& m) { return op_norm(m - m.adjoint()); }

CMatrix commutator(const CMatrix& a, const CMatrix& b) { return a * b - b * a; }

double wrap_turn(double x) {
    double r = x - std::floor(x);   // [0, 1)
    if (r > 0.5) r -= 1.0;
    return r;   // (-1/2, 1/2]
}

namespace {

double max_column_residual(const CMatrix& u, const EigenSystem& es) {
    const CMatrix r = u * es.vectors - es.vectors * es.values.asDiagonal();
    return r.colwise().norm().maxCoeff();
}

EigenSystem schur_eigensystem(const CMatrix& u) {
    Eigen::ComplexSchur<CMatrix> schur(u);
    EigenSystem es;
    es.values = schur.matrixT().diagonal();
    es.vectors = schur.matrixU();
    return es;
}

}  // namespace

// Real and imaginary parts of a normal matrix commute, so eigenvectors of
// Re U, refined by Im U inside near-degenerate groups, diagonalize U. Two
// Hermitian solves are much cheaper than a complex Schur form.
EigenSystem unitary_eigensystem(const CMatrix& u) {
    require_square(u, "unitary");
    const Eigen::Index d = u.rows();
    const cplx i(0.0, 1.0);
    const CMatrix re = 0.5 * (u + u.adjoint());
    const CMatrix im = (u - u.adjoint()) / (2.0 * i);

    Eigen::SelfAdjointEigenSolver<CMatrix> es_re(re);
    const RVector& a = es_re.eigenvalues();
    CMatrix vecs = es_re.eigenvectors();

    constexpr double kGroupGap = 1e-5;
    Eigen::Index start = 0;
    while (start < d) {
        Eigen::Index end = start + 1;
        while (end < d && a(end) - a(end - 1) < kGroupGap) ++end;
        const Eigen::Index len = end - start;
        if (len > 1) {
            const CMatrix block = vecs.middleCols(start, len);
            const CMatrix im_c = block.adjoint() * im * block;
            Eigen::SelfAdjointEigenSolver<CMatrix> es_im(0.5 * (im_c + im_c.adjoint()));
            vecs.middleCols(start, len) = block * es_im.eigenvectors();
        }
        start = end;
    }

    EigenSystem out;
    out.vectors = std::move(vecs);
    out.values.resize(d);
    const CMatrix uv = u * out.vectors;
    for (Eigen::Index j = 0; j < d; ++j) {
        const cplx lambda = out.vectors.col(j).dot(uv.col(j));
        out.values(j) = std::abs(lambda) > 0 ? lambda / std::abs(lambda) : cplx(1.0, 0.0);
    }
    out.residual = max_column_residual(u, out);
    if (out.residual > 1e-9) {
        EigenSystem fallback = schur_eigensystem(u);
        fallback.residual = max_column_residual(u, fallback);
        if (fallback.residual < out.residual) return fallback;
    }
    return out;
}

double safe_rotation(const CVector& eigenvalues, double guard) {
    const Eigen::Index n = eigenvalues.size();
    bool near_cut = false;
    for (Eigen::Index j = 0; j < n; ++j)
        if (std::abs(eigenvalues(j) + 1.0) < guard) near_cut = true;
    if (!near_cut || n == 0) return 0.0;

    std::vector<double> phases(n);
    for (Eigen::Index j = 0; j < n; ++j) phases[j] = std::arg(eigenvalues(j)) / kTwoPi;
    std::sort(phases.begin(), phases.end());
    const double min_gap = 4.0 * guard / kTwoPi;
    double best_mid = 0.5, best_dist = 2.0, widest = -1.0, widest_mid = 0.5;
    for (Eigen::Index j = 0; j < n; ++j) {
        const double lo = phases[j];
        const double hi = (j + 1 < n) ? phases[j + 1] : phases[0] + 1.0;
        const double gap = hi - lo;
        const double mid = lo + gap / 2;
        if (gap > widest) { widest = gap; widest_mid = mid; }
        if (gap > min_gap) {
            const double dist = std::abs(wrap_turn(mid - 0.5));
            if (dist < best_dist) { best_dist = dist; best_mid = mid; }
        }
    }
    const double cut = best_dist <= 1.0 ? best_mid : widest_mid;
    return wrap_turn(cut - 0.5);
}

LogResult unitary_log(const Unitary& u, const EigenSystem& es, const Config& cfg,
                      const LogOptions& opts) {
    const Eigen::Index d = u.dim();
    if (!opts.rotation) {
        for (Eigen::Index j = 0; j < d; ++j) {
            if (std::abs(es.values(j) + 1.0) < cfg.branch_guard)
                fail(ErrorKind::BranchCut, "eigenvalue within branch_guard of -1");
        }
    }
    const double center = opts.rotation.value_or(0.0);
    RVector phase(d);
    CVector rebuilt(d);
    for (Eigen::Index j = 0; j < d; ++j) {
        const double t = std::arg(es.values(j)) / kTwoPi;
        phase(j) = center + wrap_turn(t - center);
        rebuilt(j) = std::polar(1.0, kTwoPi * phase(j));
    }
    CMatrix h = es.vectors * phase.cast<cplx>().asDiagonal() * es.vectors.adjoint();
    h = 0.5 * (h + h.adjoint());
    const CMatrix back = es.vectors * rebuilt.asDiagonal() * es.vectors.adjoint();
    return LogResult{SelfAdjoint::trusted(std::move(h)), op_norm(back - u.m())};
}

LogResult unitary_log(const Unitary& u, const Config& cfg, const LogOptions& opts) {
    return unitary_log(u, unitary_eigensystem(u.m()), cfg, opts);
}

Unitary expm_sa(const SelfAdjoint& h, double s) {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h.m());
    const Eigen::Index d = h.dim();
    CVector phases(d);
    for (Eigen::Index j = 0; j < d; ++j) phases(j) = std::polar(1.0, kTwoPi * s * es.eigenvalues()(j));
    return Unitary::trusted(es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint());
}

Unitary expm_sa(const SelfAdjoint& h) { return expm_sa(h, 1.0); }

Unitary polar_unitary(const CMatrix& m, const Config& cfg) {
    require_square(m, "polar input");
    const Eigen::Index d = m.rows();
    if (d <= 8) {
        Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
        if (svd.singularValues()(d - 1) < cfg.singular_tol)
            fail(ErrorKind::Singular, "smallest singular value below threshold");
        return Unitary::trusted(svd.matrixU() * svd.matrixV().adjoint());
    }
    Eigen::SelfAdjointEigenSolver<CMatrix> es(m.adjoint() * m);
    const RVector& s2 = es.eigenvalues();
    if (s2(0) < cfg.singular_tol * cfg.singular_tol)
        fail(ErrorKind::Singular, "smallest singular value below threshold");
    const RVector inv_s = s2.cwiseSqrt().cwiseInverse();
    CMatrix w = m * es.eigenvectors() * inv_s.cast<cplx>().asDiagonal() * es.eigenvectors().adjoint();
    // Newton-Schulz polishing; W is already close to unitary.
    const CMatrix id = CMatrix::Identity(d, d);
    for (int it = 0; it < 2; ++it) w = 0.5 * w * (3.0 * id - w.adjoint() * w);
    return Unitary::trusted(std::move(w));
}

Projection SpectralCluster::projection() const {
    return Projection::trusted(basis * basis.adjoint());
}

SpectralDecomposition spectral_decomp(const Unitary& u, const Config& cfg) {
    const EigenSystem es = unitary_eigensystem(u.m());
    const Eigen::Index d = u.dim();

    // Sort by phase, then merge neighbours closer than cluster_tol (circularly).
    std::vector<Eigen::Index> order(d);
    std::iota(order.begin(), order.end(), 0);
    std::vector<double> phase(d);
    for (Eigen::Index j = 0; j < d; ++j) phase[j] = std::arg(es.values(j));
    std::sort(order.begin(), order.end(), [&](auto a, auto b) { return phase[a] < phase[b]; });

    std::vector<std::vector<Eigen::Index>> groups;
    for (Eigen::Index k = 0; k < d; ++k) {
        const Eigen::Index j = order[k];
        if (!groups.empty() && std::abs(es.values(j) - es.values(groups.back().back())) < cfg.cluster_tol)
            groups.back().push_back(j);
        else
            groups.push_back({j});
    }
    if (groups.size() > 1 &&
        std::abs(es.values(groups.front().front()) - es.values(groups.back().back())) < cfg.cluster_tol) {
        groups.front().insert(groups.front().begin(), groups.back().begin(), groups.back().end());
        groups.pop_back();
    }

    SpectralDecomposition out;
    CMatrix rebuilt = CMatrix::Zero(d, d);
    for (const auto& g : groups) {
        SpectralCluster c;
        cplx mean(0.0, 0.0);
        c.basis.resize(d, static_cast<Eigen::Index>(g.size()));
        for (std::size_t k = 0; k < g.size(); ++k) {
            c.basis.col(static_cast<Eigen::Index>(k)) = es.vectors.col(g[k]);
            mean += es.values(g[k]);
        }
        c.eigenvalue = mean / std::abs(mean);
        rebuilt += c.eigenvalue * c.basis * c.basis.adjoint();
        out.clusters.push_back(std::move(c));
    }
    out.residual = op_norm(rebuilt - u.m());
    return out;
}

}  // namespace uhfz2
