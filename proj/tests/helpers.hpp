#pragma once

#include <array>
#include <random>

#include "uhfz2/core.hpp"

namespace testing_helpers {

inline uhfz2::CMatrix gaussian(std::mt19937_64& rng, Eigen::Index d) {
    std::normal_distribution<double> n(0.0, 1.0);
    uhfz2::CMatrix m(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) m(i, j) = uhfz2::cplx(n(rng), n(rng));
    return m;
}

inline uhfz2::CMatrix random_unitary(std::mt19937_64& rng, Eigen::Index d) {
    Eigen::HouseholderQR<uhfz2::CMatrix> qr(gaussian(rng, d));
    return qr.householderQ() * uhfz2::CMatrix::Identity(d, d);
}

// Hermitian with operator norm exactly `scale`.
inline uhfz2::CMatrix random_hermitian(std::mt19937_64& rng, Eigen::Index d, double scale) {
    uhfz2::CMatrix g = gaussian(rng, d);
    uhfz2::CMatrix h = (g + g.adjoint()) / 2.0;
    return h * (scale / uhfz2::op_norm(h));
}

}  // namespace testing_helpers

#include "uhfz2/actions.hpp"

namespace testing_helpers {

// Weyl exponents (a1, b1, a2, b2) per factor; generator i acts on factor k by
// Ad(g_k u^{a_i} v^{b_i} g_k*) with a random g_k.
struct WeylData {
    std::vector<std::array<int, 4>> exps;
};

inline uhfz2::CMatrix weyl(int q, int a, int b) {
    uhfz2::CMatrix w = uhfz2::CMatrix::Identity(q, q);
    for (int k = 0; k < a; ++k) w = uhfz2::clock(q).m() * w;
    for (int k = 0; k < b; ++k) w = w * uhfz2::shift(q).m();
    return w;
}

inline uhfz2::ProductAction random_weyl_action(std::mt19937_64& rng, const uhfz2::TruncatedUHF& t, WeylData& data) {
    std::vector<uhfz2::LocalGen> g1, g2;
    data.exps.clear();
    for (std::size_t k = 0; k < t.size(); ++k) {
        const int q = t.factor(k);
        std::uniform_int_distribution<int> e(0, q - 1);
        const std::array<int, 4> x{e(rng), e(rng), e(rng), e(rng)};
        data.exps.push_back(x);
        const uhfz2::CMatrix g = random_unitary(rng, q);
        g1.push_back(uhfz2::LocalGen::dense(g * weyl(q, x[0], x[1]) * g.adjoint()));
        g2.push_back(uhfz2::LocalGen::dense(g * weyl(q, x[2], x[3]) * g.adjoint()));
    }
    return uhfz2::ProductAction(t, g1, g2);
}

// a1 b2 - a2 b1 on factor k.
inline std::int64_t symplectic(const WeylData& d, std::size_t k) {
    const auto& x = d.exps[k];
    return static_cast<std::int64_t>(x[0]) * x[3] - static_cast<std::int64_t>(x[2]) * x[1];
}

}  // namespace testing_helpers

namespace testing_helpers {

// On factors whose second generator is a plain shift and whose sizes are
// pairwise coprime, the joint shift is one cycle of length n. Phases
// increasing by 1/n along it give u1 with u1 alpha_2(u1)* = exp(2 pi i / n),
// so (u1, 1) has kappa = 1/n while its defect is |1 - exp(2 pi i / n)|.
inline uhfz2::CMatrix cyclic_phase(const uhfz2::TruncatedUHF& t) {
    const Eigen::Index d = t.dim();
    uhfz2::CVector ph(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        // digits j_k of i; the orbit position n solves n = j_k mod q_k
        Eigen::Index rem = i;
        std::vector<long> digits(t.size());
        for (std::size_t k = t.size(); k-- > 0;) {
            digits[k] = rem % t.factor(k);
            rem /= t.factor(k);
        }
        long n = 0;
        while (true) {
            bool ok = true;
            for (std::size_t k = 0; k < t.size(); ++k)
                if (n % t.factor(k) != digits[k]) ok = false;
            if (ok) break;
            ++n;
        }
        ph(i) = std::polar(1.0, uhfz2::kTwoPi * static_cast<double>(n) / static_cast<double>(d));
    }
    return ph.asDiagonal();
}

}  // namespace testing_helpers
