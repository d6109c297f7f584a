#pragma once

#include <optional>
#include <vector>

#include "mdpx/approx.hpp"
#include "mdpx/preprocess.hpp"

namespace mdpx {

/// A model readied for windowed solving: collapsed, zero-mean components
/// flattened, reachability and extreme schedulers computed, and the global
/// tail constants derived.
struct PreparedPe {
    Mdp model;
    TransformTrace collapseTrace;
    ReachabilityProfile prof;
    ExtremeSchedulers ext;
    ModelConstants consts;

    Rat cM, lambdaM;
    Rat cw;        // cM + W
    Rat engineUb;  // (cM + W) / (1 - lambdaM): bound on PE from any state
    bool goalUnreachable = false;  // initial state collapsed into __fail
};

PreparedPe prepareForPe(const Mdp& raw);

/// Policy of a previous window solve, for warm-starting a related one.
struct WindowWarmStart {
    long wLo = 1, wHi = 0;
    std::vector<std::vector<int>> table;  // as WindowScheduler::table
};

struct EngineRequest {
    Rat epsilon;  // full interval budget
    Rat bias;
    Rat ubound;  // sound upper bound on PE from any state at bias 0
    long cellGuard = 10'000'000;
    long exactCellLimit = 20'000;
    bool wantPerStateUpper = false;  // requires bias == 0
    const WindowWarmStart* warm = nullptr;
};

struct EngineResult {
    Rat lower, upper;
    WindowScheduler sched;
    ApproxDiagnostics diag;
    std::vector<Rat> perStateUpper;  // per state, when requested
};

/// Solves the windowed fixed-point system for the request, exactly when the
/// window is small and through certified numerics otherwise. The returned
/// interval always satisfies lower <= optimum <= upper, upper - lower <=
/// epsilon; `sched` achieves at least `lower`.
EngineResult solveWindow(const PreparedPe& pm, const EngineRequest& req);

}  // namespace mdpx
