#pragma once

#include <vector>

#include "mdpx/approx.hpp"
#include "mdpx/model.hpp"

namespace mdpx {

struct OracleResult {
    Rat best;
    WindowScheduler argBest;
    long enumerated = 0;  // policy combinations evaluated
};

/// Exact optimum over all window schedulers with the given symmetric window
/// and max/min boundary commitments. Deliberately simple machinery: cellwise
/// backward induction on the acyclic part, exhaustive enumeration or
/// verified Gauss-Seidel improvement on strongly connected blocks.
OracleResult oraclePe(const Mdp& model, long window, const Rat& bias,
                      long comboGuard = 1'000'000);

struct SimulationEstimate {
    double mean = 0;
    double stderror = 0;
    long samples = 0;
    long horizon = 0;
    unsigned long seed = 0;
    std::vector<double> tailFreq;  // per requested threshold: fraction of runs
                                   // whose prefix weight ever reached it
};

/// Seeded Monte-Carlo estimate of the horizon-truncated partial expectation
/// of a window scheduler. Weight is scored only on runs that reach the goal.
/// Mersenne-twister driven; branch sampling uses exact rational thresholds,
/// so estimates are bit-reproducible for a given seed.
SimulationEstimate simulate(const Mdp& model, const WindowScheduler& sched, long samples,
                            long horizon, unsigned long seed, const Rat& bias = Rat(0),
                            const std::vector<long>& tailThresholds = {});

}  // namespace mdpx
