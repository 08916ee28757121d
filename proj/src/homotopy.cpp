#include "uhfz2/homotopy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <thread>

#include "uhfz2/invariants.hpp"

namespace uhfz2 {

void parallel_for(int n, unsigned threads, const std::function<void(int)>& f) {
    if (threads <= 1 || n < 2) {
        for (int k = 0; k < n; ++k) f(k);
        return;
    }
    const unsigned workers = std::min<unsigned>(threads, static_cast<unsigned>(n));
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                for (int k = static_cast<int>(w); k < n; k += static_cast<int>(workers)) f(k);
            } catch (...) {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

namespace {

// Minimum-cost perfect assignment (Hungarian method). Returns row -> column.
std::vector<int> hungarian(const Eigen::MatrixXd& cost) {
    const int n = static_cast<int>(cost.rows());
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0), minv(n + 1);
    std::vector<int> p(n + 1, 0), way(n + 1, 0);
    std::vector<char> used(n + 1);
    for (int i = 1; i <= n; ++i) {
        p[0] = i;
        int j0 = 0;
        std::fill(minv.begin(), minv.end(), inf);
        std::fill(used.begin(), used.end(), 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = 0;
            for (int j = 1; j <= n; ++j) {
                if (used[j]) continue;
                const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                if (cur < minv[j]) { minv[j] = cur; way[j] = j0; }
                if (minv[j] < delta) { delta = minv[j]; j1 = j; }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) { u[p[j]] += delta; v[j] -= delta; }
                else minv[j] -= delta;
            }
            j0 = j1;
        } while (p[j0] != 0);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0);
    }
    std::vector<int> row_to_col(n);
    for (int j = 1; j <= n; ++j) row_to_col[p[j] - 1] = j - 1;
    return row_to_col;
}

double turns(cplx z) { return std::arg(z) / kTwoPi; }

// Rotates the columns of b to best match prev (orthogonal Procrustes).
void align_block(CMatrix& b, const CMatrix& prev) {
    const CMatrix m = b.adjoint() * prev;
    Eigen::JacobiSVD<CMatrix> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
    b = b * (svd.matrixU() * svd.matrixV().adjoint());
}

}  // namespace

std::vector<std::optional<std::int64_t>> EigenPathBundle::windings(double tol) const {
    std::vector<std::optional<std::int64_t>> out;
    if (lambdas.empty()) return out;
    const auto& first = lambdas.front();
    const auto& last = lambdas.back();
    for (std::size_t i = 0; i < first.size(); ++i) {
        const double w = last[i] - first[i];
        const double r = std::round(w);
        if (std::abs(w - r) <= tol) out.emplace_back(static_cast<std::int64_t>(r));
        else out.emplace_back(std::nullopt);
    }
    return out;
}

EigenPathBundle track_eigenvalues(const UnitaryPath& path, const Config& cfg) {
    EigenPathBundle b;
    b.grid = path.t;
    const std::size_t K = path.size();
    const Eigen::Index n = path.dim();
    EigenSystem es = unitary_eigensystem(path.u[0]);
    std::vector<double> lift(n);
    for (Eigen::Index i = 0; i < n; ++i) lift[i] = turns(es.values(i));
    b.lambdas.push_back(lift);
    b.vectors.push_back(es.vectors);
    std::vector<cplx> current(es.values.data(), es.values.data() + n);
    std::vector<double> velocity(n, 0.0);

    for (std::size_t k = 0; k + 1 < K; ++k) {
        const EigenSystem nx = unitary_eigensystem(path.u[k + 1]);
        Eigen::MatrixXd cost(n, n);
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = 0; j < n; ++j) {
                const double a = wrap_turn(turns(nx.values(j)) - lift[i]);
                // branches leaving a degenerate point keep their direction
                const double e = wrap_turn(turns(nx.values(j)) - lift[i] - velocity[i]);
                cost(i, j) = a * a + 1e-9 * e * e;
            }
        const std::vector<int> sigma = hungarian(cost);

        // A tie between distinct branches heading to distinct eigenvalues is a
        // crossing the grid cannot resolve.
        for (Eigen::Index i = 0; i < n; ++i)
            for (Eigen::Index j = i + 1; j < n; ++j) {
                if (std::abs(current[i] - current[j]) <= cfg.cluster_tol) continue;
                if (std::abs(nx.values(sigma[i]) - nx.values(sigma[j])) <= cfg.cluster_tol) continue;
                const double kept = cost(i, sigma[i]) + cost(j, sigma[j]);
                const double swapped = cost(i, sigma[j]) + cost(j, sigma[i]);
                if (swapped - kept < 1e-12)
                    fail(ErrorKind::AmbiguousMatching, "eigenvalue branches cross between samples " +
                                                           std::to_string(k) + " and " + std::to_string(k + 1));
            }

        const double step = op_norm(path.u[k + 1] - path.u[k]);
        const double dt = path.t[k + 1] - path.t[k];
        CMatrix vecs(n, n);
        std::vector<double> next(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const cplx target = nx.values(sigma[i]);
            const double chord = std::abs(target - current[i]);
            if (chord > step + cfg.matching_tol)
                fail(ErrorKind::LipschitzViolation, "eigenvalue moved farther than the path at sample " + std::to_string(k));
            b.lip = std::max(b.lip, chord / dt);
            next[i] = lift[i] + wrap_turn(turns(target) - lift[i]);
            vecs.col(i) = nx.vectors.col(sigma[i]);
            current[i] = target;
        }

        // Degenerate clusters: rotate the new basis towards the previous one.
        const CMatrix& prev = b.vectors.back();
        std::vector<bool> done(n, false);
        for (Eigen::Index i = 0; i < n; ++i) {
            if (done[i]) continue;
            std::vector<Eigen::Index> group{i};
            for (Eigen::Index j = i + 1; j < n; ++j)
                if (!done[j] && std::abs(current[j] - current[i]) <= cfg.cluster_tol) group.push_back(j);
            for (auto j : group) done[j] = true;
            CMatrix blk(n, static_cast<Eigen::Index>(group.size()));
            CMatrix old(n, static_cast<Eigen::Index>(group.size()));
            for (std::size_t c = 0; c < group.size(); ++c) {
                blk.col(c) = vecs.col(group[c]);
                old.col(c) = prev.col(group[c]);
            }
            align_block(blk, old);
            for (std::size_t c = 0; c < group.size(); ++c) vecs.col(group[c]) = blk.col(c);
        }

        b.pairing.emplace_back(sigma.begin(), sigma.end());
        for (Eigen::Index i = 0; i < n; ++i) velocity[i] = next[i] - lift[i];
        b.lambdas.push_back(next);
        b.vectors.push_back(std::move(vecs));
        lift = std::move(next);
    }
    return b;
}

// ---------------------------------------------------------------------------

namespace {

struct ExpFamily {
    CMatrix vectors;
    RVector lambda;

    explicit ExpFamily(const CMatrix& h) {
        Eigen::SelfAdjointEigenSolver<CMatrix> es(h);
        vectors = es.eigenvectors();
        lambda = es.eigenvalues();
    }
    CMatrix at(double s) const {
        CVector ph(lambda.size());
        for (Eigen::Index i = 0; i < lambda.size(); ++i) ph(i) = std::polar(1.0, kTwoPi * s * lambda(i));
        return vectors * ph.asDiagonal() * vectors.adjoint();
    }
    double norm() const { return lambda.size() == 0 ? 0.0 : lambda.cwiseAbs().maxCoeff(); }
};

LogResult spectral_log(const CMatrix& u, const Config& cfg) {
    const EigenSystem es = unitary_eigensystem(u);
    LogOptions opts;
    const double rot = safe_rotation(es.values, std::max(cfg.branch_guard, 1e-6));
    if (rot != 0.0) opts.rotation = rot;
    return unitary_log(Unitary::trusted(u), es, cfg, opts);
}

}  // namespace

UnitaryPath short_path(const Unitary& u, const Config& cfg, int samples) {
    const LogResult lg = spectral_log(u.m(), cfg);
    const ExpFamily fam(lg.h.m());
    const double length = kTwoPi * fam.norm();
    int n = samples > 0 ? samples : std::max(cfg.path_samples, static_cast<int>(std::ceil(length / 0.2)));
    if (length < 1e-15) n = 1;
    UnitaryPath p = sample_path([&](double s) { return fam.at(s); }, n);
    p.u.front() = CMatrix::Identity(u.dim(), u.dim());
    p.u.back() = u.m();
    p.lip_estimate = lip_of(p.t, p.u);
    return p;
}

// ---------------------------------------------------------------------------

namespace {

struct Candidate {
    UnitaryPath path;
    HomotopyReport report;
};

std::optional<Candidate> blockwise_candidate(const CMatrix& v, const EigenSystem& es, const std::vector<int>& order,
                                             const std::vector<std::size_t>& cuts, const CMatrix& w,
                                             const Config& cfg) {
    const Eigen::Index d = v.rows();
    // clusters are runs of `order` between consecutive cuts (circularly)
    std::vector<std::vector<int>> clusters;
    if (cuts.empty()) {
        clusters.push_back(order);
    } else {
        for (std::size_t c = 0; c < cuts.size(); ++c) {
            std::vector<int> members;
            const std::size_t start = cuts[c];
            const std::size_t stop = cuts[(c + 1) % cuts.size()];
            std::size_t j = start;
            do {
                members.push_back(order[j]);
                j = (j + 1) % order.size();
            } while (j != stop);
            clusters.push_back(std::move(members));
        }
    }
    std::vector<CMatrix> bases;
    std::vector<ExpFamily> fams;
    CMatrix wprime = CMatrix::Zero(d, d);
    double len1 = 0.0;
    for (const auto& members : clusters) {
        CMatrix B(d, static_cast<Eigen::Index>(members.size()));
        for (std::size_t c = 0; c < members.size(); ++c) B.col(c) = es.vectors.col(members[c]);
        const CMatrix blk = B.adjoint() * w * B;
        Eigen::JacobiSVD<CMatrix> svd(blk);
        if (svd.singularValues().minCoeff() < 1e-3) return std::nullopt;
        const CMatrix wb = polar_unitary(blk, cfg).m();
        const LogResult lg = spectral_log(wb, cfg);
        fams.emplace_back(lg.h.m());
        len1 = std::max(len1, kTwoPi * fams.back().norm());
        wprime += B * wb * B.adjoint();
        bases.push_back(std::move(B));
    }
    const double gap = op_norm(w - wprime);
    if (gap >= 0.9) return std::nullopt;

    auto path1 = [&](double s) {
        CMatrix out = CMatrix::Zero(d, d);
        for (std::size_t j = 0; j < bases.size(); ++j) out += bases[j] * fams[j].at(s) * bases[j].adjoint();
        return out;
    };
    auto path2 = [&](double s) { return polar_unitary((1.0 - s) * wprime + s * w, cfg).m(); };

    // Length of the second leg, measured.
    const int probe = 8;
    double len2 = 0.0;
    CMatrix prev = wprime;
    for (int k = 1; k <= probe; ++k) {
        const CMatrix cur = path2(static_cast<double>(k) / probe);
        len2 += op_norm(cur - prev);
        prev = cur;
    }
    const double total = len1 + len2;
    Candidate cand;
    cand.report.clusters = static_cast<int>(clusters.size());
    if (total < 1e-14) {
        cand.path = sample_path([&](double) { return CMatrix(CMatrix::Identity(d, d)); }, 1);
        return cand;
    }
    const int n1 = len1 > 1e-14 ? std::max(2, static_cast<int>(std::ceil(len1 / 0.25))) : 0;
    int n2 = len2 > 1e-14 ? std::max(2, static_cast<int>(std::ceil(len2 / 0.05))) : 0;
    if (n1 == 0 && n2 == 0) n2 = 1;
    const double split = n1 == 0 ? 0.0 : n2 == 0 ? 1.0 : std::clamp(len1 / total, 0.02, 0.98);
    std::vector<double> ts{0.0};
    std::vector<CMatrix> us{CMatrix::Identity(d, d)};
    for (int k = 1; k <= n1; ++k) {
        ts.push_back(split * k / n1);
        us.push_back(path1(static_cast<double>(k) / n1));
    }
    for (int k = 1; k <= n2; ++k) {
        ts.push_back(split + (1.0 - split) * k / n2);
        us.push_back(path2(static_cast<double>(k) / n2));
    }
    ts.back() = 1.0;
    us.back() = w;
    cand.path = make_path(std::move(ts), std::move(us));
    for (const auto& z : cand.path.u) cand.report.commutator_max = std::max(cand.report.commutator_max, op_norm(v * z - z * v));
    cand.report.lip = cand.path.lip_estimate;
    return cand;
}

}  // namespace

UnitaryPath super_homotopy(const Unitary& v, const Unitary& w, double eps, const Config& cfg, HomotopyReport* report) {
    if (v.dim() != w.dim()) fail(ErrorKind::DimMismatch, "super_homotopy needs equal dimensions");
    const Eigen::Index d = v.dim();
    const CMatrix one = CMatrix::Identity(d, d);
    if (op_norm(w.m() - one) < 1e-14) {
        if (report) *report = {};
        return sample_path([&](double) { return one; }, 1);
    }
    try {
        const BottResult b = bott(v, w, cfg);
        if (b.value != 0) fail(ErrorKind::BottObstruction, "Bott(v, w) = " + std::to_string(b.value));
    } catch (const Error& e) {
        if (e.kind() == ErrorKind::BottObstruction) throw;
        fail(ErrorKind::SynthesisFailure, std::string("commutator too large for a Bott check: ") + e.what());
    }

    const EigenSystem es = unitary_eigensystem(v.m());
    const auto n = static_cast<std::size_t>(d);
    std::vector<int> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = static_cast<int>(i);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return turns(es.values(a)) < turns(es.values(b)); });
    // gap[j]: arc between order[j-1] and order[j] (circular)
    std::vector<double> gap(n);
    for (std::size_t j = 0; j < n; ++j) {
        const double a = turns(es.values(order[(j + n - 1) % n]));
        const double b = turns(es.values(order[j]));
        gap[j] = n == 1 ? 1.0 : b - a + (j == 0 ? 1.0 : 0.0);
    }
    std::vector<double> thresholds(gap.begin(), gap.end());
    std::sort(thresholds.begin(), thresholds.end(), std::greater<>());
    thresholds.erase(std::unique(thresholds.begin(), thresholds.end(),
                                 [](double a, double b) { return std::abs(a - b) < 1e-12; }),
                     thresholds.end());

    std::optional<Candidate> best;
    double best_score = std::numeric_limits<double>::infinity();
    // The single-cluster attempt (no cut) first, then finer and finer splits.
    std::vector<std::optional<double>> ladder{std::nullopt};
    for (double g : thresholds)
        if (g > cfg.cluster_tol) ladder.emplace_back(g);
    for (const auto& g : ladder) {
        std::vector<std::size_t> cuts;
        if (g)
            for (std::size_t j = 0; j < n; ++j)
                if (gap[j] >= *g - 1e-15) cuts.push_back(j);
        auto cand = blockwise_candidate(v.m(), es, order, cuts, w.m(), cfg);
        if (!cand) continue;
        cand->report.gap_threshold = g ? *g : 1.0;
        if (cand->report.commutator_max < eps && cand->report.lip <= kPi + eps) {
            if (report) *report = cand->report;
            return std::move(cand->path);
        }
        const double score = std::max(cand->report.commutator_max / eps, cand->report.lip / (kPi + eps));
        if (score < best_score) {
            best_score = score;
            best = std::move(cand);
        }
    }
    std::string msg = "no path met eps = " + std::to_string(eps);
    if (best)
        msg += " (best commutator " + std::to_string(best->report.commutator_max) + ", Lip " +
               std::to_string(best->report.lip) + ")";
    fail(ErrorKind::SynthesisFailure, msg);
}

// ---------------------------------------------------------------------------

CMatrix SelfAdjointPath::at(double s) const {
    if (t.empty()) fail(ErrorKind::InvalidArgument, "empty path");
    if (s <= t.front()) return h.front();
    if (s >= t.back()) return h.back();
    const auto it = std::upper_bound(t.begin(), t.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - t.begin()) - 1;
    const double r = (s - t[k]) / (t[k + 1] - t[k]);
    return (1.0 - r) * h[k] + r * h[k + 1];
}

SelfAdjointPath lip_shrink_loop(const UnitaryPath& u, double C, double eps, const Config& cfg, ShrinkReport* report) {
    const Eigen::Index d = u.dim();
    const CMatrix one = CMatrix::Identity(d, d);
    if (op_norm(u.front() - one) > 1e-9 || op_norm(u.back() - one) > 1e-9)
        fail(ErrorKind::InvalidArgument, "loop must start and end at 1");
    if (u.lip_estimate > C * (1.0 + 1e-9) + 1e-12)
        fail(ErrorKind::InvalidArgument, "measured Lip " + std::to_string(u.lip_estimate) + " exceeds C");
    if (!(eps > 0.0)) fail(ErrorKind::InvalidArgument, "eps must be positive");

    // windings on the caller's samples; the coarse grid below can step over a crossing
    auto check_windings = [](const EigenPathBundle& bundle) {
        for (const auto& w : bundle.windings())
            if (!w || *w != 0)
                fail(ErrorKind::WindingObstruction, w ? "an eigenvalue branch winds " + std::to_string(*w) + " times"
                                                      : "eigenvalue branches permute around the loop");
    };
    check_windings(track_eigenvalues(u, cfg));

    ShrinkReport rep;
    rep.C = C;
    rep.delta = cfg.homotopy_delta_ratio * (eps / 2.0);
    rep.L = static_cast<int>(std::floor(2.0 * C / rep.delta)) + 1;
    rep.C_prime = 2.0 * C * rep.L / 3.0 + C / 6.0;
    const int L = rep.L;

    std::vector<double> grid(L + 1);
    std::vector<CMatrix> samples(L + 1);
    for (int k = 0; k <= L; ++k) {
        grid[k] = static_cast<double>(k) / L;
        samples[k] = u.at(grid[k]);
    }
    samples.front() = one;
    samples.back() = one;
    const UnitaryPath coarse = make_path(grid, samples);
    const EigenPathBundle bundle = track_eigenvalues(coarse, cfg);
    check_windings(bundle);

    std::vector<std::vector<double>> local_t(L);
    std::vector<std::vector<CMatrix>> local_h(L);
    std::vector<double> commutators(L, 0.0);
    parallel_for(L, cfg.threads, [&](int k) {
        const CMatrix& Vk = bundle.vectors[k];
        const CMatrix& Vn = bundle.vectors[k + 1];
        const CMatrix wk = Vn * Vk.adjoint();
        HomotopyReport hr;
        const UnitaryPath z = super_homotopy(Unitary::trusted(samples[k]), Unitary::trusted(wk), eps / 2.0, cfg, &hr);
        commutators[k] = hr.commutator_max;
        const auto& l0 = bundle.lambdas[k];
        const auto& l1 = bundle.lambdas[k + 1];
        for (std::size_t j = 0; j < z.size(); ++j) {
            const double tau = z.t[j];
            RVector g(d);
            for (Eigen::Index i = 0; i < d; ++i) g(i) = l0[i] + tau * (l1[i] - l0[i]);
            const CMatrix inner = Vk * g.cast<cplx>().asDiagonal() * Vk.adjoint();
            CMatrix h = z.u[j] * inner * z.u[j].adjoint();
            local_t[k].push_back((k + tau) / L);
            local_h[k].push_back((h + h.adjoint()) / 2.0);
        }
    });

    SelfAdjointPath out;
    for (int k = 0; k < L; ++k) {
        for (std::size_t j = 0; j < local_t[k].size(); ++j) {
            if (k > 0 && j == 0) continue;   // shared with the previous piece
            if (!out.t.empty() && local_t[k][j] <= out.t.back() + 1e-15) continue;
            out.t.push_back(local_t[k][j]);
            out.h.push_back(std::move(local_h[k][j]));
        }
        rep.max_commutator = std::max(rep.max_commutator, commutators[k]);
    }
    out.t.front() = 0.0;
    out.t.back() = 1.0;
    out.h.front() = CMatrix::Zero(d, d);
    out.h.back() = CMatrix::Zero(d, d);
    for (std::size_t j = 0; j + 1 < out.t.size(); ++j)
        out.lip_estimate = std::max(out.lip_estimate, op_norm(out.h[j + 1] - out.h[j]) / (out.t[j + 1] - out.t[j]));
    rep.lip_h = out.lip_estimate;

    std::vector<double> errs(out.t.size(), 0.0);
    parallel_for(static_cast<int>(out.t.size()), cfg.threads, [&](int j) {
        errs[j] = op_norm(u.at(out.t[j]) - expm_sa(SelfAdjoint::trusted(out.h[j])).m());
    });
    rep.max_error = *std::max_element(errs.begin(), errs.end());
    if (report) *report = rep;
    if (rep.max_error >= eps)
        fail(ErrorKind::SynthesisFailure, "shrinking family misses the loop by " + std::to_string(rep.max_error));
    return out;
}

// ---------------------------------------------------------------------------

double perimeter_param(double s, double t) {
    // sides: top (t = 1), left (s = -1), bottom (t = -1), right (s = 1)
    if (std::abs(t - 1.0) < 1e-12 && s > -1.0 + 1e-12) return (1.0 - s) / 8.0;
    if (std::abs(s + 1.0) < 1e-12 && t > -1.0 + 1e-12) return 0.25 + (1.0 - t) / 8.0;
    if (std::abs(t + 1.0) < 1e-12 && s < 1.0 - 1e-12) return 0.5 + (s + 1.0) / 8.0;
    if (std::abs(s - 1.0) < 1e-12) {
        const double p = 0.75 + (t + 1.0) / 8.0;
        return p >= 1.0 ? 0.0 : p;
    }
    fail(ErrorKind::InvalidArgument, "point is not on the boundary of E");
}

std::pair<double, double> perimeter_point(double p) {
    p -= std::floor(p);
    if (p < 0.25) return {1.0 - 8.0 * p, 1.0};
    if (p < 0.5) return {-1.0, 1.0 - 8.0 * (p - 0.25)};
    if (p < 0.75) return {-1.0 + 8.0 * (p - 0.5), -1.0};
    return {1.0, -1.0 + 8.0 * (p - 0.75)};
}

CMatrix BoundaryMap::at(double s, double t) const { return loop.at(perimeter_param(s, t)); }

BoundaryMap boundary_map(const CMatrix& u1, const CMatrix& u2, const ProductAction& action,
                         const std::optional<std::vector<std::size_t>>& a0_factors, double eps, const Config& cfg) {
    const double defect = cocycle_defect(u1, u2, action);
    if (defect >= eps)
        fail(ErrorKind::NotAlmostCocycle, "defect " + std::to_string(defect) + " is not below eps");
    if (kappa_fast(u1, u2, action, cfg).integer_form != 0)
        fail(ErrorKind::NotAdmissible, "kappa(u1, u2) is not zero");

    const Eigen::Index d = u1.rows();
    const ExpFamily f1(spectral_log(u1, cfg).h.m());
    const ExpFamily f2(spectral_log(u2, cfg).h.m());
    const CMatrix base = u2 * action.apply_gen(1, u1);
    const ExpFamily fa(unitary_log(Unitary::trusted(u1 * action.apply_gen(0, u2) * base.adjoint()), cfg).h.m());
    const int n = std::max(cfg.boundary_samples, 2);

    auto h1 = [&](double r) { return f1.at(r); };
    auto h2 = [&](double r) { return f2.at(r); };
    auto side = [&](int which, double r) -> CMatrix {
        switch (which) {
            case 0: return h1(r);                                     // top, 1 -> u1
            case 1: return u1 * action.apply_gen(0, h2(r));           // left, u1 -> u1 a1(u2)
            case 2: return fa.at(1.0 - r) * u2 * action.apply_gen(1, h1(1.0 - r));  // bottom
            default: return h2(1.0 - r);                              // right, u2 -> 1
        }
    };

    std::vector<double> ts;
    std::vector<CMatrix> us;
    for (int s = 0; s < 4; ++s)
        for (int k = (s == 0 ? 0 : 1); k <= n; ++k) {
            const double r = static_cast<double>(k) / n;
            ts.push_back((s + r) / 4.0);
            us.push_back(side(s, r));
        }
    us.front() = CMatrix::Identity(d, d);
    us.back() = CMatrix::Identity(d, d);

    BoundaryMap z;
    if (a0_factors && !a0_factors->empty()) {
        for (auto& m : us) {
            const CMatrix e = commutant_expectation(m, action.trunc(), *a0_factors);
            const CMatrix z1 = polar_unitary(e, cfg).m();
            const double moved = op_norm(z1 - m);
            z.commutant_defect = std::max(z.commutant_defect, moved);
            if (moved >= 0.5)
                fail(ErrorKind::CommutantDefect, "commutant correction moved a sample by " + std::to_string(moved));
            m = z1;
        }
    }
    z.loop = make_path(std::move(ts), std::move(us));
    z.loop.closed = true;
    z.lip_estimate = z.loop.lip_estimate / 8.0;

    // conditions (2), sample by sample: left side index k pairs with right side
    // at the same t, bottom with top at the same s.
    const auto& U = z.loop.u;
    auto idx = [&](int s, int k) { return static_cast<std::size_t>(s * n + k); };
    for (int k = 0; k <= n; ++k) {
        // left sample at r = k/n has t = 1 - 2r; right sample with the same t has r' = 1 - r
        const CMatrix& left = U[idx(1, k)];
        const CMatrix& right = U[idx(3, n - k)];
        z.eps_left = std::max(z.eps_left, op_norm(left - u1 * action.apply_gen(0, right)));
        // bottom sample at r has s = -1 + 2r; top sample with the same s has r' = 1 - r
        const CMatrix& bottom = U[idx(2, k)];
        const CMatrix& top = U[idx(0, n - k)];
        z.eps_bottom = std::max(z.eps_bottom, op_norm(bottom - u2 * action.apply_gen(1, top)));
    }
    return z;
}

// ---------------------------------------------------------------------------

CMatrix DiskMap::at(double s, double t) const {
    const double r = std::max(std::abs(s), std::abs(t));
    const Eigen::Index d = boundary.loop.dim();
    if (r < 1e-15) return CMatrix::Identity(d, d);
    const double p = perimeter_param(s / r, t / r);
    if (r <= 0.5) return expm_sa(SelfAdjoint::trusted(h.at(p)), 2.0 * r).m();
    const CMatrix zb = boundary.loop.at(p);
    const CMatrix z0 = expm_sa(SelfAdjoint::trusted(h.at(p))).m();
    const LogResult k = unitary_log(Unitary::trusted(zb.adjoint() * z0));
    return zb * expm_sa(k.h, 2.0 - 2.0 * r).m();
}

DiskMap disk_extension(const BoundaryMap& z, double eps, const Config& cfg) {
    DiskMap out;
    out.boundary = z;
    const double C = z.loop.lip_estimate * (1.0 + 1e-9) + 1e-12;
    out.h = lip_shrink_loop(z.loop, C, std::min(eps, 0.45), cfg, &out.shrink);

    for (std::size_t j = 0; j < out.h.t.size(); ++j) {
        const CMatrix z0 = expm_sa(SelfAdjoint::trusted(out.h.h[j])).m();
        out.guard_max = std::max(out.guard_max, op_norm(z.loop.at(out.h.t[j]) - z0));
    }
    if (out.guard_max >= 0.5)
        fail(ErrorKind::GuardViolated, "||z - z0|| reaches " + std::to_string(out.guard_max));

    for (std::size_t j = 0; j < z.loop.size(); ++j) {
        const auto [s, t] = perimeter_point(z.loop.t[j]);
        out.restriction_error = std::max(out.restriction_error, op_norm(out.at(s, t) - z.loop.u[j]));
    }

    const int g = std::max(cfg.disk_grid, 2);
    const double step = 2.0 / g;
    std::vector<CMatrix> grid(static_cast<std::size_t>((g + 1) * (g + 1)));
    parallel_for((g + 1) * (g + 1), cfg.threads, [&](int idx) {
        const int i = idx / (g + 1), j = idx % (g + 1);
        grid[idx] = out.at(-1.0 + i * step, -1.0 + j * step);
    });
    auto G = [&](int i, int j) -> const CMatrix& { return grid[static_cast<std::size_t>(i * (g + 1) + j)]; };
    for (int i = 0; i <= g; ++i)
        for (int j = 0; j <= g; ++j) {
            if (i < g) out.lip_estimate = std::max(out.lip_estimate, op_norm(G(i + 1, j) - G(i, j)) / step);
            if (j < g) out.lip_estimate = std::max(out.lip_estimate, op_norm(G(i, j + 1) - G(i, j)) / step);
            if (i < g && j < g) {
                out.lip_estimate = std::max(out.lip_estimate, op_norm(G(i + 1, j + 1) - G(i, j)) / step);
                out.lip_estimate = std::max(out.lip_estimate, op_norm(G(i + 1, j) - G(i, j + 1)) / step);
            }
        }
    return out;
}

}  // namespace uhfz2
