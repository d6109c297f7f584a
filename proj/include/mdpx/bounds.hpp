#pragma once

#include <optional>
#include <vector>

#include "mdpx/exact.hpp"
#include "mdpx/graph.hpp"
#include "mdpx/model.hpp"

namespace mdpx {

/// Certificate of strictly negative drift inside an end component: gain -t
/// with t > 0 and a vector u satisfying, for every component action,
///   -t + u_s >= wgt(s,a) + sum_t P(s,a,t) u_t     (checked exactly).
struct SuperPotential {
    Rat drift;           // t
    std::vector<Rat> u;  // per EC-local state, normalized to min 0
    Rat spread;          // max u - min u

    bool verify(const Mdp& model, const EndComponent& ec) const;
};

/// Potential from the bias of a gain-optimal policy when that already
/// satisfies the inequalities, otherwise from the gain program itself.
SuperPotential superPotential(const Mdp& model, const EndComponent& ec);

struct EcTailConstants {
    Rat c;       // ||u|| + W
    Rat lambda;  // (1 - t/c) / (1 + t/c), in [0,1)
};

EcTailConstants ecTailConstants(const SuperPotential& sp, const Weight& maxAbsWeight);

struct BoundsReport {
    Weight maxAbsWeight;  // W
    Rat delta;
    int stateCount = 0;

    struct PerMec {
        int mecIndex;
        SuperPotential sp;
        EcTailConstants tail;
    };
    std::vector<PerMec> perMec;

    Rat cM;
    Rat lambdaM;
    Rat peUb;                // (cM + W) / (1 - lambdaM)^2
    std::optional<Rat> q;    // minimal goal probability from the initial state
    std::optional<Rat> ceUb; // peUb / q when q > 0

    std::vector<std::optional<Rat>> qPerState;  // lower saturation; absent when unconstrained
    Rat qGlobal;                                // min over defined entries, 0 when none
    Rat bigD;
    mpz_class rPlus, rMinus;  // window radii for the requested epsilon
    Rat epsilon;
};

/// All quantitative constants for a model whose end components (other than
/// absorbing goal/`__fail`) have negative gain. `wantCe` additionally derives
/// the conditional-expectation bound from the minimal goal probability.
BoundsReport computeBounds(const Mdp& model, const Rat& epsilon, const ReachabilityProfile& prof,
                           const ExtremeSchedulers& ext, bool wantCe);

/// Least k >= 0 with (2*bigD) * lambda^k <= eps, by exact comparison.
long windowExponent(const Rat& bigD, const Rat& lambda, const Rat& eps);

}  // namespace mdpx
