#include "uhfz2/paths.hpp"

#include <algorithm>
#include <cmath>

namespace uhfz2 {

double lip_of(const std::vector<double>& t, const std::vector<CMatrix>& u) {
    double lip = 0.0;
    for (std::size_t k = 0; k + 1 < t.size(); ++k)
        lip = std::max(lip, op_norm(u[k + 1] - u[k]) / (t[k + 1] - t[k]));
    return lip;
}

UnitaryPath make_path(std::vector<double> t, std::vector<CMatrix> u) {
    if (t.size() != u.size() || t.size() < 2) fail(ErrorKind::InvalidArgument, "a path needs at least two samples");
    if (std::abs(t.front()) > 1e-12 || std::abs(t.back() - 1.0) > 1e-12)
        fail(ErrorKind::InvalidArgument, "path times must run from 0 to 1");
    for (std::size_t k = 0; k + 1 < t.size(); ++k)
        if (!(t[k + 1] > t[k])) fail(ErrorKind::InvalidArgument, "path times must increase strictly");
    t.front() = 0.0;
    t.back() = 1.0;
    UnitaryPath p;
    p.lip_estimate = lip_of(t, u);
    p.closed = op_norm(u.front() - u.back()) <= 1e-9;
    p.t = std::move(t);
    p.u = std::move(u);
    return p;
}

UnitaryPath sample_path(const std::function<CMatrix(double)>& f, int n) {
    if (n < 1) fail(ErrorKind::InvalidArgument, "need at least one step");
    std::vector<double> t(n + 1);
    std::vector<CMatrix> u(n + 1);
    for (int k = 0; k <= n; ++k) {
        t[k] = static_cast<double>(k) / n;
        u[k] = f(t[k]);
    }
    return make_path(std::move(t), std::move(u));
}

UnitaryPath exp_path(const SelfAdjoint& h, int n) {
    // One eigendecomposition serves every sample.
    Eigen::SelfAdjointEigenSolver<CMatrix> es(h.m());
    const CMatrix& v = es.eigenvectors();
    const RVector& lam = es.eigenvalues();
    return sample_path(
        [&](double s) {
            CVector ph(lam.size());
            for (Eigen::Index i = 0; i < lam.size(); ++i) ph(i) = std::polar(1.0, kTwoPi * s * lam(i));
            return CMatrix(v * ph.asDiagonal() * v.adjoint());
        },
        n);
}

UnitaryPath path_product(const UnitaryPath& a, const UnitaryPath& b) {
    std::vector<double> t = a.t;
    t.insert(t.end(), b.t.begin(), b.t.end());
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end(), [](double x, double y) { return std::abs(x - y) < 1e-14; }), t.end());
    std::vector<CMatrix> u(t.size());
    for (std::size_t k = 0; k < t.size(); ++k) u[k] = a.at(t[k]) * b.at(t[k]);
    return make_path(std::move(t), std::move(u));
}

UnitaryPath concatenate(const std::vector<UnitaryPath>& pieces) {
    if (pieces.empty()) fail(ErrorKind::InvalidArgument, "nothing to concatenate");
    const double share = 1.0 / static_cast<double>(pieces.size());
    std::vector<double> t;
    std::vector<CMatrix> u;
    for (std::size_t j = 0; j < pieces.size(); ++j) {
        const UnitaryPath& p = pieces[j];
        if (j > 0 && op_norm(p.front() - u.back()) > 1e-8)
            fail(ErrorKind::InvalidArgument, "path pieces do not join");
        for (std::size_t k = (j == 0 ? 0 : 1); k < p.size(); ++k) {
            t.push_back(share * (static_cast<double>(j) + p.t[k]));
            u.push_back(p.u[k]);
        }
    }
    t.back() = 1.0;
    return make_path(std::move(t), std::move(u));
}

UnitaryPath reversed(const UnitaryPath& p) {
    std::vector<double> t(p.size());
    std::vector<CMatrix> u(p.size());
    for (std::size_t k = 0; k < p.size(); ++k) {
        t[k] = 1.0 - p.t[p.size() - 1 - k];
        u[k] = p.u[p.size() - 1 - k];
    }
    return make_path(std::move(t), std::move(u));
}

CMatrix UnitaryPath::at(double s) const {
    if (t.empty()) fail(ErrorKind::InvalidArgument, "empty path");
    if (s <= t.front()) return u.front();
    if (s >= t.back()) return u.back();
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - t.begin()) - 1;
    const double r = (s - t[k]) / (t[k + 1] - t[k]);
    if (r <= 0.0) return u[k];
    const CMatrix step = u[k].adjoint() * u[k + 1];
    if (op_norm(step - CMatrix::Identity(step.rows(), step.cols())) < 1e-14) return u[k];
    const Unitary su = Unitary::trusted(step);
    const EigenSystem es = unitary_eigensystem(step);
    LogOptions opts;
    opts.rotation = safe_rotation(es.values, 1e-6);
    const LogResult lg = unitary_log(su, es, Config{}, opts);
    return u[k] * expm_sa(lg.h, r).m();
}

double max_step_gap(const UnitaryPath& p) {
    double gap = 0.0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
        const CMatrix r = p.u[k + 1] * p.u[k].adjoint();
        gap = std::max(gap, op_norm(r - CMatrix::Identity(r.rows(), r.cols())));
    }
    return gap;
}

double winding_real(const UnitaryPath& p) {
    const double d = static_cast<double>(p.dim());
    double total = 0.0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
        const CMatrix r = p.u[k + 1] * p.u[k].adjoint();
        const EigenSystem es = unitary_eigensystem(r);
        double sum = 0.0;
        for (Eigen::Index i = 0; i < es.values.size(); ++i) {
            if (std::abs(es.values(i) - 1.0) >= std::sqrt(2.0))
                fail(ErrorKind::StepTooCoarse, "adjacent samples differ by a rotation of a quarter turn or more");
            sum += std::arg(es.values(i)) / kTwoPi;
        }
        total += sum / d;
    }
    return total;
}

}  // namespace uhfz2
