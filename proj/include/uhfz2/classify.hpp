#pragma once

#include <optional>
#include <vector>

#include "uhfz2/invariants.hpp"
#include "uhfz2/rohlin.hpp"

namespace uhfz2 {

struct PrimeComparison {
    std::uint64_t prime = 0;
    K0Residue alpha, beta;
    bool equal = false;
};

struct InvariantComparison {
    std::vector<PrimeComparison> primes;
    int mismatches = 0;      // outer conjugacy at this stage: equality off this many primes
    bool all_equal = true;
};

/// [alpha](p) against [beta](p). An empty prime list means every p in P(A).
InvariantComparison invariants_equal(const ProductAction& alpha, const ProductAction& beta,
                                     const SupernaturalNumber& sn, const std::vector<std::uint64_t>& primes = {},
                                     const Config& cfg = {});

/// Tower unitary v = sum_j zeta^j e_j that multiplies x by a root of unity.
struct KappaCorrection {
    std::int64_t m = 0, l = 1;       // kappa before correction is m/l
    int generator = 0;               // e_j is permuted by this generator
    int height = 1;
    std::vector<std::size_t> factors;
};

struct MatchReport {
    double defect = 0.0;             // max ||beta_i(a) - Ad(u_i) alpha_i(a)||, a in F
    double cocycle_defect = 0.0;
    K0Value kappa_raw;
    K0Value kappa_final;
    int kappa_corrections = 0;
    std::optional<KappaCorrection> correction;
};

/// kappa of a pair on the truncation of `action`: read off the scalar x when
/// the pair is an exact cocycle up to a phase, otherwise computed on the
/// support of the pair.
KappaResult pair_kappa(const CMatrix& u1, const CMatrix& u2, const ProductAction& action, const Config& cfg = {});

/// alpha-cocycle u with beta_i ~ Ad(u_i) o alpha_i on F, kappa(u) = 0.
/// `invariants` skips the invariant check when the caller has done it.
Cocycle approximate_match(const ProductAction& alpha, const ProductAction& beta, const SupernaturalNumber& sn,
                          const std::vector<CMatrix>& F, double eps, const Config& cfg = {},
                          MatchReport* report = nullptr, bool check_invariants = true);

struct EkRound {
    int round = 0;
    double matcher_defect = 0.0;
    double cocycle_size = 0.0;       // max ||u_i - 1|| of the matched cocycle
    double vanish_eps = 0.0;         // max ||u_i - v alpha_i(v*)||
    double commutator = 0.0;         // max ||[v, a]||, a in F
    double defect = 0.0;             // max ||beta'_i(a) - alpha_i(a)||, a in F, after the round
    int kappa_corrections = 0;
    double wall_time = 0.0;
};

struct EkTranscript {
    InvariantComparison invariants;
    double initial_defect = 0.0;
    std::vector<EkRound> rounds;
    bool monotone = true;
    std::optional<int> stalled_round;
};

/// Alternates matching and vanishing. Round r matches on F_schedule[r] and
/// vanishes at eps_schedule[r] (the last entries repeat), keeping the
/// vanishing unitary almost central for F_schedule[r - 1].
EkTranscript ek_rounds(const ProductAction& alpha, const ProductAction& beta, const SupernaturalNumber& sn, int rounds,
                       const std::vector<std::vector<CMatrix>>& F_schedule, const std::vector<double>& eps_schedule,
                       const Config& cfg = {}, const VanishOptions& vopts = {});

}  // namespace uhfz2
