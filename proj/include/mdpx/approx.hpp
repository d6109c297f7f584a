#pragma once

#include <optional>
#include <vector>

#include "mdpx/bounds.hpp"
#include "mdpx/exact.hpp"
#include "mdpx/model.hpp"
#include "mdpx/preprocess.hpp"

namespace mdpx {

/// Weight-based finite-memory scheduler: a table over an integer window of
/// accumulated weight, committing permanently to `above` on first exit over
/// the top and to `below` on first exit under the bottom.
struct WindowScheduler {
    long wLo = 1, wHi = 0;  // inclusive table window; empty when wLo > wHi
    std::vector<std::vector<int>> table;  // [state][w - wLo] -> action, -1 on absorbing states
    MemorylessScheduler above;
    MemorylessScheduler below;
    Rat bias;

    bool inWindow(long w) const { return w >= wLo && w <= wHi; }
};

struct ApproxDiagnostics {
    mpz_class windowLow = 0, windowHigh = 0;  // value-frame window actually used
    long cells = 0;
    int policyIterations = 0;
    bool exactPath = true;
    bool refinedBounds = false;
    Rat certifiedSlack;  // numeric certification slack folded into the interval
};

struct ApproxResult {
    Rat lower, upper;
    Rat epsilon;
    Rat bias;
    WindowScheduler scheduler;
    ApproxDiagnostics diag;
};

struct ApproxOptions {
    long cellGuard = 10'000'000;   // unfolded-state cap, reported as resource limit
    long exactCellLimit = 20'000;  // largest window solved with exact arithmetic
    bool refineBounds = true;
};

/// Certified interval [lower, upper] of width <= epsilon containing the
/// optimal partial expectation with the given bias, plus a witnessing
/// epsilon-optimal window scheduler. Throws SolverError on infinite values
/// or resource limits.
ApproxResult approxPe(const Mdp& model, const Rat& epsilon, const Rat& bias = Rat(0),
                      const ApproxOptions& opts = {});

struct BinarySearchStep {
    Rat a, b, theta;
    Rat probe;  // midpoint estimate of the optimal partial expectation at bias -theta
};

struct BinarySearchTrace {
    std::vector<BinarySearchStep> steps;
    long iterationCap = 0;
    Rat a0, b0;
    Rat minReach;  // p, the minimal goal probability from the initial state
};

struct CeResult {
    Rat value;  // within 3*epsilon of the optimal conditional expectation
    Rat epsilon;
    BinarySearchTrace trace;
    bool hasScheduler = false;
    WindowScheduler lastScheduler;  // scheduler of the final probe
};

/// Conditional-expectation approximation by bisection on the bias, probing
/// the partial expectation at each threshold. Requires finite conditional
/// expectation (no weight divergence, no critical scheduler).
CeResult approxCe(const Mdp& model, const Rat& epsilon, const ApproxOptions& opts = {});

struct WindowEvaluation {
    Rat pe;     // with the requested bias
    Rat reach;
    std::optional<Rat> ce;  // bias-0 conditional value when reach > 0
};

/// Exact value of a window scheduler on the given model (which must carry
/// the boundary vectors the scheduler embeds).
WindowEvaluation evaluateWindowScheduler(const Mdp& model, const WindowScheduler& sched,
                                         const Rat& bias);

}  // namespace mdpx
