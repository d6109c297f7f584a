#include "mdpx/approx.hpp"

#include <algorithm>
#include <stdexcept>

#include "mdpx/errors.hpp"
#include "mdpx/linalg.hpp"
#include "mdpx/window_engine.hpp"

namespace mdpx {

namespace {

/// Sound upper bound on PE from any state, refined once through a coarse
/// bias-0 window solve when the planned window is large.
Rat refinedUpperBound(const PreparedPe& pm, const Rat& epsilon, const ApproxOptions& opts,
                      bool& usedRefinement) {
    usedRefinement = false;
    Rat u = pm.engineUb;
    if (!opts.refineBounds) return u;

    EngineRequest probe;
    probe.epsilon = max(Rat(1), epsilon);
    probe.bias = Rat(0);
    probe.ubound = u;
    probe.cellGuard = opts.cellGuard;
    probe.exactCellLimit = opts.exactCellLimit;
    probe.wantPerStateUpper = true;

    // Only worth a coarse pass when the direct window would be large.
    // A cheap size proxy: the engine bound itself.
    if (u < Rat(64)) return u;
    EngineResult coarse = solveWindow(pm, probe);
    Rat refined;
    bool first = true;
    for (const Rat& v : coarse.perStateUpper) {
        if (first || v > refined) refined = v;
        first = false;
    }
    refined = max(refined, Rat(0));  // absorbing states have value 0
    if (refined < u) {
        usedRefinement = true;
        return refined;
    }
    return u;
}

ApproxResult resultFromEngine(EngineResult&& er, const Rat& epsilon, const Rat& bias, bool refined) {
    ApproxResult out;
    out.lower = std::move(er.lower);
    out.upper = std::move(er.upper);
    out.epsilon = epsilon;
    out.bias = bias;
    out.scheduler = std::move(er.sched);
    out.diag = std::move(er.diag);
    out.diag.refinedBounds = refined;
    return out;
}

}  // namespace

ApproxResult approxPe(const Mdp& model, const Rat& epsilon, const Rat& bias,
                      const ApproxOptions& opts) {
    if (epsilon.sign() <= 0) throw std::invalid_argument("epsilon must be positive");
    PreparedPe pm = prepareForPe(model);
    if (pm.goalUnreachable) {
        ApproxResult out;
        out.lower = Rat(0);
        out.upper = Rat(0);
        out.epsilon = epsilon;
        out.bias = bias;
        out.scheduler.bias = bias;
        return out;
    }
    bool refined = false;
    Rat u = refinedUpperBound(pm, epsilon, opts, refined);

    EngineRequest req;
    req.epsilon = epsilon;
    req.bias = bias;
    req.ubound = u;
    req.cellGuard = opts.cellGuard;
    req.exactCellLimit = opts.exactCellLimit;
    EngineResult er = solveWindow(pm, req);
    return resultFromEngine(std::move(er), epsilon, bias, refined);
}

CeResult approxCe(const Mdp& model, const Rat& epsilon, const ApproxOptions& opts) {
    if (epsilon.sign() <= 0) throw std::invalid_argument("epsilon must be positive");
    requireValid(model);
    TransformResult col = collapseToFail(model);
    if (col.model.initial == col.model.failState())
        throw SolverError(SolverErrorCode::GoalUnreachable,
                          "goal unreachable: conditional expectation undefined");
    DivergenceCheck div = checkWeightDivergence(col.model);
    if (div.divergent)
        throw SolverError(SolverErrorCode::WeightDivergent,
                          "positively weight-divergent end component around state '" +
                              div.witnessStates.front() + "': conditional expectation infinite");
    CriticalCheck crit = checkCriticalScheduler(col.model);
    if (crit.critical)
        throw SolverError(SolverErrorCode::CriticalScheduler,
                          "critical scheduler through state '" +
                              col.model.stateNames[crit.cycle.front()] +
                              "': conditional expectation infinite");
    TransformResult pos = posminTransform(col.model);
    PreparedPe pm = prepareForPe(pos.model);
    if (pm.goalUnreachable) throw std::logic_error("goal lost during preparation");

    int init = pm.model.initial;
    Rat p = pm.prof.pMin[init];
    if (p.sign() <= 0) throw std::logic_error("minimal goal probability not positive after transform");

    CeResult res;
    res.epsilon = epsilon;
    res.trace.minReach = p;
    Rat a = pm.ext.max.peVector[init] / pm.prof.pMax[init];  // conditional value of the max scheduler
    Rat b = (pm.engineUb / p) + Rat(1);
    if (b < a) b = a;
    res.trace.a0 = a;
    res.trace.b0 = b;

    Rat probeEps = p * epsilon;
    {  // iteration cap: halving from b-a down to p*epsilon
        Rat width = b - a;
        long cap = 0;
        while (width > probeEps) {
            width /= Rat(2);
            if (++cap > 10'000) throw SolverError(SolverErrorCode::ResourceLimit, "bisection cap overflow");
        }
        res.trace.iterationCap = cap;
    }

    bool refined = false;
    Rat u = refinedUpperBound(pm, probeEps, opts, refined);

    Rat twoPe = probeEps + probeEps;
    WindowWarmStart warm;
    bool haveWarm = false;
    while (true) {
        if (b - a <= probeEps) {
            res.value = (a + b) / Rat(2);
            break;
        }
        Rat theta = (a + b) / Rat(2);
        EngineRequest req;
        req.epsilon = probeEps;
        req.bias = -theta;
        req.ubound = u;
        req.cellGuard = opts.cellGuard;
        req.exactCellLimit = opts.exactCellLimit;
        req.warm = haveWarm ? &warm : nullptr;
        EngineResult er = solveWindow(pm, req);
        Rat estimate = (er.lower + er.upper) / Rat(2);
        res.trace.steps.push_back({a, b, theta, estimate});
        if (static_cast<long>(res.trace.steps.size()) > res.trace.iterationCap + 1)
            throw std::logic_error("bisection exceeded its iteration bound");

        warm.wLo = er.sched.wLo;
        warm.wHi = er.sched.wHi;
        warm.table = er.sched.table;
        haveWarm = true;
        res.lastScheduler = std::move(er.sched);
        res.hasScheduler = true;

        if (estimate < -twoPe) {
            b = theta;
        } else if (estimate > twoPe) {
            a = theta;
        } else {
            res.value = theta;
            break;
        }
    }
    return res;
}

WindowEvaluation evaluateWindowScheduler(const Mdp& model, const WindowScheduler& sched,
                                         const Rat& bias) {
    requireValid(model);
    int n = model.stateCount();
    if (static_cast<int>(sched.above.peVector.size()) != n ||
        static_cast<int>(sched.below.peVector.size()) != n)
        throw std::invalid_argument("scheduler boundary vectors do not match the model");
    int fail = model.failState();

    auto aboveVal = [&](int s, long w) {
        return sched.above.peVector[s] + sched.above.reachVector[s] * (Rat(w) + bias);
    };
    auto belowVal = [&](int s, long w) {
        return sched.below.peVector[s] + sched.below.reachVector[s] * (Rat(w) + bias);
    };
    auto aboveReach = [&](int s) { return sched.above.reachVector[s]; };
    auto belowReach = [&](int s) { return sched.below.reachVector[s]; };

    WindowEvaluation ev;
    if (0 < sched.wLo || 0 > sched.wHi) {
        // the start lies outside the window and commits immediately
        bool above = 0 > sched.wHi;
        int s = model.initial;
        if (s == model.goal) {
            ev.pe = bias;
            ev.reach = Rat(1);
        } else if (s == fail) {
            ev.pe = Rat(0);
            ev.reach = Rat(0);
        } else if (above) {
            ev.pe = aboveVal(s, 0);
            ev.reach = aboveReach(s);
        } else {
            ev.pe = belowVal(s, 0);
            ev.reach = belowReach(s);
        }
        if (ev.reach.sign() > 0) ev.ce = (ev.pe - bias * ev.reach) / ev.reach;
        return ev;
    }

    // interior cells: non-absorbing states across the window
    std::vector<int> stateOf, idxOf(n, -1);
    for (int s = 0; s < n; ++s)
        if (s != model.goal && s != fail) {
            idxOf[s] = static_cast<int>(stateOf.size());
            stateOf.push_back(s);
        }
    int m = static_cast<int>(stateOf.size());
    long L = sched.wHi - sched.wLo + 1;
    long N = L * m;
    long maxW = 1;
    for (int s = 0; s < n; ++s)
        for (const Action& act : model.actions[s])
            maxW = std::max(maxW, std::labs(act.weight.get_si()));
    auto cellOf = [&](int si, long w) { return (w - sched.wLo) * m + si; };

    auto tableAction = [&](int s, long w) {
        if (idxOf[s] < 0) return -1;
        if (static_cast<long>(sched.table[s].size()) != L)
            throw std::invalid_argument("scheduler table does not span its window");
        int a = sched.table[s][w - sched.wLo];
        if (a < 0 || a >= static_cast<int>(model.actions[s].size()))
            throw std::invalid_argument("scheduler table action out of range");
        return a;
    };

    // cells that can never leave the window evaluate to zero in both systems
    std::vector<std::vector<int>> adj(N);
    for (long w = sched.wLo; w <= sched.wHi; ++w)
        for (int si = 0; si < m; ++si) {
            const Action& act = model.actions[stateOf[si]][tableAction(stateOf[si], w)];
            long wt = w + act.weight.get_si();
            for (const Branch& br : act.branches)
                if (idxOf[br.target] >= 0 && wt >= sched.wLo && wt <= sched.wHi)
                    adj[cellOf(si, w)].push_back(cellOf(idxOf[br.target], wt));
        }
    int nc = 0;
    std::vector<int> comp = sccDecompose(static_cast<int>(N), adj, nc);
    std::vector<bool> open(nc, false);  // component has an edge or branch leaving the window
    for (long w = sched.wLo; w <= sched.wHi; ++w)
        for (int si = 0; si < m; ++si) {
            long i = cellOf(si, w);
            const Action& act = model.actions[stateOf[si]][tableAction(stateOf[si], w)];
            long wt = w + act.weight.get_si();
            for (const Branch& br : act.branches) {
                bool interior = idxOf[br.target] >= 0 && wt >= sched.wLo && wt <= sched.wHi;
                if (!interior)
                    open[comp[i]] = true;
                else if (comp[cellOf(idxOf[br.target], wt)] != comp[i])
                    open[comp[i]] = true;
            }
        }
    std::vector<bool> trapped(N, false);
    for (long i = 0; i < N; ++i) trapped[i] = !open[comp[i]];

    int band = static_cast<int>(m * (maxW + 1));
    BandedLU<Rat> lu(static_cast<int>(N), band, band);
    std::vector<Rat> rhsPe(N), rhsReach(N);
    for (long w = sched.wLo; w <= sched.wHi; ++w)
        for (int si = 0; si < m; ++si) {
            long i = cellOf(si, w);
            lu.at(static_cast<int>(i), static_cast<int>(i)) = Rat(1);
            if (trapped[i]) continue;  // pinned to zero
            const Action& act = model.actions[stateOf[si]][tableAction(stateOf[si], w)];
            long wt = w + act.weight.get_si();
            for (const Branch& br : act.branches) {
                int t = br.target;
                bool interior = idxOf[t] >= 0 && wt >= sched.wLo && wt <= sched.wHi;
                if (interior && !trapped[cellOf(idxOf[t], wt)]) {
                    lu.at(static_cast<int>(i), static_cast<int>(cellOf(idxOf[t], wt))) -= br.prob;
                } else if (!interior) {
                    if (t == model.goal) {
                        rhsPe[i] += br.prob * (Rat(wt) + bias);
                        rhsReach[i] += br.prob;
                    } else if (t == fail) {
                        // zero in both systems
                    } else if (wt > sched.wHi) {
                        rhsPe[i] += br.prob * aboveVal(t, wt);
                        rhsReach[i] += br.prob * aboveReach(t);
                    } else {
                        rhsPe[i] += br.prob * belowVal(t, wt);
                        rhsReach[i] += br.prob * belowReach(t);
                    }
                }
            }
        }
    lu.factor();
    lu.solve(rhsPe);
    lu.solve(rhsReach);

    int s0 = model.initial;
    if (s0 == model.goal) {
        ev.pe = bias;
        ev.reach = Rat(1);
    } else if (s0 == fail) {
        ev.pe = Rat(0);
        ev.reach = Rat(0);
    } else {
        ev.pe = rhsPe[cellOf(idxOf[s0], 0)];
        ev.reach = rhsReach[cellOf(idxOf[s0], 0)];
    }
    if (ev.reach.sign() > 0) ev.ce = (ev.pe - bias * ev.reach) / ev.reach;
    return ev;
}

}  // namespace mdpx
