#include "mdpx/window_engine.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "mdpx/errors.hpp"
#include "mdpx/linalg.hpp"

namespace mdpx {

namespace {

constexpr int kScaleBits = 100;  // certification grid is 2^-100

// ---------------------------------------------------------------------------
// double-double arithmetic (value = hi + lo), enough for residual refinement
// ---------------------------------------------------------------------------
struct DD {
    double hi = 0.0, lo = 0.0;
};

inline DD twoSum(double a, double b) {
    double s = a + b;
    double bb = s - a;
    return {s, (a - (s - bb)) + (b - bb)};
}

inline DD ddAdd(const DD& a, const DD& b) {
    DD s = twoSum(a.hi, b.hi);
    double lo = s.lo + a.lo + b.lo;
    DD r = twoSum(s.hi, lo);
    return r;
}

inline DD ddAddDouble(const DD& a, double b) {
    DD s = twoSum(a.hi, b);
    double lo = s.lo + a.lo;
    return twoSum(s.hi, lo);
}

inline DD twoProd(double a, double b) {
    double p = a * b;
    return {p, std::fma(a, b, -p)};
}

/// acc += p * x with p = (pHi, pLo), x = (xHi, xLo)
inline void ddMulAcc(DD& acc, double pHi, double pLo, const DD& x) {
    DD p0 = twoProd(pHi, x.hi);
    p0.lo += pHi * x.lo + pLo * x.hi;
    acc = ddAdd(acc, p0);
}

// ---------------------------------------------------------------------------
// 256-bit signed accumulator for the exact certification sweep
// ---------------------------------------------------------------------------
struct I256 {
    __int128 hi = 0;
    unsigned __int128 lo = 0;

    static I256 fromI128(__int128 v) {
        I256 r;
        r.lo = static_cast<unsigned __int128>(v);
        r.hi = v < 0 ? -1 : 0;
        return r;
    }
    void add(const I256& o) {
        unsigned __int128 old = lo;
        lo += o.lo;
        hi += o.hi + (lo < old ? 1 : 0);
    }
    void negate() {
        hi = ~hi;
        lo = ~lo;
        if (++lo == 0) ++hi;
    }
    void sub(const I256& o) {
        I256 t = o;
        t.negate();
        add(t);
    }
    bool negative() const { return hi < 0; }
    bool positive() const { return hi > 0 || (hi == 0 && lo != 0); }
};

I256 mulI128I64(__int128 a, long b) {
    bool neg = false;
    unsigned __int128 ua;
    if (a < 0) {
        ua = static_cast<unsigned __int128>(-(a + 1)) + 1;
        neg = !neg;
    } else {
        ua = static_cast<unsigned __int128>(a);
    }
    unsigned long ub;
    if (b < 0) {
        ub = static_cast<unsigned long>(-(b + 1)) + 1UL;
        neg = !neg;
    } else {
        ub = static_cast<unsigned long>(b);
    }
    unsigned __int128 a0 = ua & ((static_cast<unsigned __int128>(1) << 64) - 1);
    unsigned __int128 a1 = ua >> 64;
    unsigned __int128 p0 = a0 * ub;
    unsigned __int128 p1 = a1 * ub;
    I256 r;
    r.lo = p0;
    unsigned __int128 mid = p1 << 64;
    unsigned __int128 old = r.lo;
    r.lo += mid;
    r.hi = static_cast<__int128>((p1 >> 64) + (r.lo < old ? 1 : 0));
    if (neg) r.negate();
    return r;
}

mpz_class mpzFromU128(unsigned __int128 v) {
    mpz_class r;
    mpz_import(r.get_mpz_t(), 2, -1, 8, 0, 0, &v);
    return r;
}

mpz_class mpzFromI256(const I256& v) {
    I256 t = v;
    bool neg = t.negative();
    if (neg) t.negate();
    mpz_class r = mpzFromU128(static_cast<unsigned __int128>(t.hi));
    r <<= 128;
    r += mpzFromU128(t.lo);
    if (neg) r = -r;
    return r;
}

__int128 i128FromMpz(const mpz_class& v) {
    mpz_class a = ::abs(v);
    if (mpz_sizeinbase(a.get_mpz_t(), 2) > 126)
        throw SolverError(SolverErrorCode::ResourceLimit, "quantized value out of range");
    unsigned __int128 lo = 0;
    mpz_class rem = a;
    for (int limb = 0; limb < 2; ++limb) {
        mpz_class chunk = rem & mpz_class(0xffffffffffffffffUL);
        lo |= static_cast<unsigned __int128>(chunk.get_ui()) << (64 * limb);
        rem >>= 64;
    }
    __int128 r = static_cast<__int128>(lo);
    return v < 0 ? -r : r;
}

/// Exact int128 from a double times 2^kScaleBits (splitting the mantissa).
__int128 quantizeDouble(double x) {
    if (x == 0.0) return 0;
    int e;
    double m = std::frexp(x, &e);               // x = m * 2^e, |m| in [0.5, 1)
    long long mant = std::llround(m * 9007199254740992.0);  // m * 2^53
    int shift = e - 53 + kScaleBits;
    __int128 v = mant;
    if (shift >= 0) {
        if (shift > 150) throw SolverError(SolverErrorCode::ResourceLimit, "value too large to certify");
        v <<= shift;
    } else if (shift > -130) {
        v >>= -shift;
    } else {
        v = 0;
    }
    return v;
}

__int128 quantizeDD(const DD& x) {
    return quantizeDouble(x.hi) + quantizeDouble(x.lo);
}

// ---------------------------------------------------------------------------
// unfolded grid
// ---------------------------------------------------------------------------
constexpr int kTargetGoal = -1;
constexpr int kTargetFail = -2;

struct ActionData {
    int action;
    long weight;
    long den = 1;  // lcm of branch denominators
    bool minConsistent;
    std::vector<int> target;  // compact state, or kTargetGoal/kTargetFail
    std::vector<long> num;    // prob * den
    std::vector<Rat> prob;
    std::vector<double> pHi, pLo;
};

struct Plan {
    bool degenerateMin = false;
    Rat rTop, rBot, qHat;
    long k = 0;
    long wLo = 1, wHi = 0;
    std::vector<Rat> qHatPerState;  // indexed by model state; +1 sentinel "none" via hasQ
    std::vector<bool> hasQ;
    long cells(int nonAbsorbing) const {
        if (degenerateMin || wHi < wLo) return 0;
        return (wHi - wLo + 1) * static_cast<long>(nonAbsorbing);
    }
};

Plan makePlan(const PreparedPe& pm, const Rat& ubound, const Rat& epsWin, const Rat& bias) {
    Plan plan;
    const Mdp& m = pm.model;
    int n = m.stateCount();

    Rat minPe;
    bool first = true;
    for (int s = 0; s < n; ++s) {
        Rat v = min(pm.ext.max.peVector[s], pm.ext.min.peVector[s]);
        if (first || v < minPe) minPe = v;
        first = false;
    }
    Rat bigD = ubound - minPe;
    if (bigD.sign() < 0) bigD = Rat(0);

    plan.qHatPerState.assign(n, Rat(0));
    plan.hasQ.assign(n, false);
    bool anyQ = false;
    Rat qHat;
    for (int s = 0; s < n; ++s) {
        bool constrained = false;
        Rat lowestOff;
        for (size_t a = 0; a < m.actions[s].size(); ++a) {
            if (pm.prof.actMin[s][a]) continue;
            if (!constrained || pm.prof.pMinByAction[s][a] < lowestOff)
                lowestOff = pm.prof.pMinByAction[s][a];
            constrained = true;
        }
        if (!constrained) continue;
        Rat num = ubound - pm.ext.min.peVector[s];
        if (num.sign() < 0) throw std::logic_error("upper bound below a scheduler value");
        Rat qs = num / (pm.prof.pMin[s] - lowestOff);
        plan.qHatPerState[s] = qs;
        plan.hasQ[s] = true;
        if (!anyQ || qs < qHat) qHat = qs;
        anyQ = true;
    }
    plan.qHat = anyQ ? min(qHat, Rat(0)) : Rat(0);

    plan.k = windowExponent(bigD, pm.lambdaM, epsWin);
    Rat radius = pm.cw * Rat(plan.k);
    plan.rTop = max(bias, plan.qHat) + radius;
    plan.rBot = plan.qHat - radius;
    if (bias <= plan.rBot) {
        plan.degenerateMin = true;
        return plan;
    }
    mpz_class lo = (plan.rBot - bias).floor() + 1;
    mpz_class hi = (plan.rTop - bias).ceil() - 1;
    if (lo > 0 || hi < 0) throw std::logic_error("window misses the start cell");
    if (::abs(lo) > 1'000'000'000 || ::abs(hi) > 1'000'000'000)
        throw SolverError(SolverErrorCode::ResourceLimit, "window out of addressable range");
    plan.wLo = lo.get_si();
    plan.wHi = hi.get_si();
    return plan;
}

struct Grid {
    const PreparedPe* pm;
    Rat bias;
    long wLo, wHi;
    int m = 0;                 // non-absorbing states
    std::vector<int> stateOf;  // compact -> model
    std::vector<int> idxOf;    // model -> compact (-1 absorbing)
    std::vector<std::vector<ActionData>> acts;
    std::vector<long> minOnlyUpTo;  // per compact state; LONG_MIN when unconstrained
    long maxAbsW = 0;

    long layers() const { return wHi - wLo + 1; }
    long cells() const { return layers() * m; }
    long cellOf(int si, long w) const { return (w - wLo) * m + si; }
    bool interiorW(long w) const { return w >= wLo && w <= wHi; }

    const std::vector<ActionData>& actionsAt(long /*cell*/) const;  // unused marker

    int allowedCount(int si, long w) const {
        if (w > minOnlyUpTo[si]) return static_cast<int>(acts[si].size());
        int c = 0;
        for (const ActionData& a : acts[si]) c += a.minConsistent ? 1 : 0;
        return c;
    }
    bool allowed(int si, long w, const ActionData& a) const {
        return w > minOnlyUpTo[si] || a.minConsistent;
    }

    /// Exact boundary/terminal value of the partial-expectation system.
    Rat boundaryExact(int target, long w) const {
        if (target == kTargetGoal) return Rat(static_cast<long>(w)) + bias;
        if (target == kTargetFail) return Rat(0);
        int s = stateOf[target];
        if (w > wHi) return pm->ext.max.peVector[s] + pm->prof.pMax[s] * (Rat(static_cast<long>(w)) + bias);
        return pm->ext.min.peVector[s] + pm->prof.pMin[s] * (Rat(static_cast<long>(w)) + bias);
    }
};

Grid buildGrid(const PreparedPe& pm, const Plan& plan, const Rat& bias) {
    Grid g;
    g.pm = &pm;
    g.bias = bias;
    g.wLo = plan.wLo;
    g.wHi = plan.wHi;
    const Mdp& m = pm.model;
    int n = m.stateCount();
    int fail = m.failState();
    g.idxOf.assign(n, -1);
    for (int s = 0; s < n; ++s) {
        if (s == m.goal || s == fail) continue;
        g.idxOf[s] = g.m++;
        g.stateOf.push_back(s);
    }
    g.acts.resize(g.m);
    g.minOnlyUpTo.assign(g.m, LONG_MIN);
    for (int si = 0; si < g.m; ++si) {
        int s = g.stateOf[si];
        if (plan.hasQ[s]) {
            // w is forced onto min-consistent actions when w + bias <= qHat_s
            mpz_class lim = (plan.qHatPerState[s] - bias).floor();
            if (lim < LONG_MIN / 2)
                g.minOnlyUpTo[si] = LONG_MIN;
            else
                g.minOnlyUpTo[si] = std::min<long>(lim.get_si(), LONG_MAX / 2);
        }
        for (size_t a = 0; a < m.actions[s].size(); ++a) {
            const Action& act = m.actions[s][a];
            ActionData ad;
            ad.action = static_cast<int>(a);
            if (::abs(act.weight) > mpz_class(1) << 40)
                throw SolverError(SolverErrorCode::ResourceLimit, "action weight out of engine range");
            ad.weight = act.weight.get_si();
            g.maxAbsW = std::max(g.maxAbsW, std::labs(ad.weight));
            ad.minConsistent = pm.prof.actMin[s][a];
            mpz_class den(1);
            for (const Branch& br : act.branches) den = lcm(den, br.prob.den());
            if (den > mpz_class(1) << 50)
                throw SolverError(SolverErrorCode::ResourceLimit, "probability denominators out of engine range");
            ad.den = den.get_si();
            for (const Branch& br : act.branches) {
                int tgt = br.target == m.goal ? kTargetGoal
                          : br.target == fail ? kTargetFail
                                              : g.idxOf[br.target];
                ad.target.push_back(tgt);
                mpz_class num = br.prob.num() * (den / br.prob.den());
                ad.num.push_back(num.get_si());
                ad.prob.push_back(br.prob);
                double hi = br.prob.toDouble();
                ad.pHi.push_back(hi);
                ad.pLo.push_back((br.prob - Rat(mpq_class(hi))).toDouble());
            }
            g.acts[si].push_back(std::move(ad));
        }
        if (g.allowedCount(si, g.wLo) == 0)
            throw std::logic_error("state without min-consistent action");
    }
    return g;
}

WindowScheduler emptyMinScheduler(const PreparedPe& pm, const Rat& bias) {
    WindowScheduler ws;
    ws.wLo = 1;
    ws.wHi = 0;
    ws.table.assign(pm.model.stateCount(), {});
    ws.above = pm.ext.max;
    ws.below = pm.ext.min;
    ws.bias = bias;
    return ws;
}

WindowScheduler schedulerFromPolicy(const Grid& g, const std::vector<int>& policy) {
    WindowScheduler ws;
    ws.wLo = g.wLo;
    ws.wHi = g.wHi;
    ws.bias = g.bias;
    ws.above = g.pm->ext.max;
    ws.below = g.pm->ext.min;
    int n = g.pm->model.stateCount();
    ws.table.assign(n, {});
    long L = g.layers();
    for (int s = 0; s < n; ++s) {
        if (g.idxOf[s] < 0) continue;
        ws.table[s].assign(L, -1);
        for (long j = 0; j < L; ++j) {
            const ActionData& ad = g.acts[g.idxOf[s]][policy[j * g.m + g.idxOf[s]]];
            ws.table[s][j] = ad.action;
        }
    }
    return ws;
}

std::vector<int> initialPolicy(const Grid& g, const WindowWarmStart* warm) {
    long N = g.cells();
    std::vector<int> policy(N, 0);
    for (int si = 0; si < g.m; ++si) {
        int s = g.stateOf[si];
        int maxIdx = -1, minIdx = -1, firstMin = -1;
        for (size_t a = 0; a < g.acts[si].size(); ++a) {
            if (g.acts[si][a].action == g.pm->ext.max.choice[s]) maxIdx = static_cast<int>(a);
            if (g.acts[si][a].action == g.pm->ext.min.choice[s]) minIdx = static_cast<int>(a);
            if (firstMin < 0 && g.acts[si][a].minConsistent) firstMin = static_cast<int>(a);
        }
        for (long w = g.wLo; w <= g.wHi; ++w) {
            int pick = -1;
            if (warm && w >= warm->wLo && w <= warm->wHi && !warm->table[s].empty()) {
                int act = warm->table[s][w - warm->wLo];
                for (size_t a = 0; a < g.acts[si].size(); ++a)
                    if (g.acts[si][a].action == act) pick = static_cast<int>(a);
            }
            if (pick < 0) pick = w >= 0 ? maxIdx : minIdx;
            if (pick < 0 || !g.allowed(si, w, g.acts[si][pick])) pick = firstMin;
            policy[g.cellOf(si, w)] = pick;
        }
    }
    return policy;
}

// ---------------------------------------------------------------------------
// exact path: Howard policy iteration with rational banded solves
// ---------------------------------------------------------------------------
EngineResult solveExactPath(const Grid& g, const Plan& plan, const EngineRequest& req, const Rat& epsWin) {
    long N = g.cells();
    int band = g.m * static_cast<int>(g.maxAbsW + 1);
    std::vector<int> policy = initialPolicy(g, req.warm);
    std::vector<Rat> x(N);
    int iters = 0;

    auto actionValue = [&](int si, long w, const ActionData& ad) {
        Rat q;
        for (size_t j = 0; j < ad.target.size(); ++j) {
            int tgt = ad.target[j];
            long wt = w + ad.weight;
            if (tgt >= 0 && g.interiorW(wt))
                q += ad.prob[j] * x[g.cellOf(tgt, wt)];
            else
                q += ad.prob[j] * g.boundaryExact(tgt, wt);
        }
        return q;
    };

    while (true) {
        if (++iters > 500) throw std::logic_error("exact window iteration diverged");
        BandedLU<Rat> lu(static_cast<int>(N), band, band);
        std::vector<Rat> rhs(N);
        for (long w = g.wLo; w <= g.wHi; ++w)
            for (int si = 0; si < g.m; ++si) {
                long i = g.cellOf(si, w);
                const ActionData& ad = g.acts[si][policy[i]];
                lu.at(static_cast<int>(i), static_cast<int>(i)) = Rat(1);
                for (size_t j = 0; j < ad.target.size(); ++j) {
                    int tgt = ad.target[j];
                    long wt = w + ad.weight;
                    if (tgt >= 0 && g.interiorW(wt)) {
                        long col = g.cellOf(tgt, wt);
                        lu.at(static_cast<int>(i), static_cast<int>(col)) -= ad.prob[j];
                    } else {
                        rhs[i] += ad.prob[j] * g.boundaryExact(tgt, wt);
                    }
                }
            }
        lu.factor();
        lu.solve(rhs);
        x = std::move(rhs);

        bool improved = false;
        for (long w = g.wLo; w <= g.wHi; ++w)
            for (int si = 0; si < g.m; ++si) {
                long i = g.cellOf(si, w);
                Rat best = x[i];
                int bestA = policy[i];
                for (int a = 0; a < static_cast<int>(g.acts[si].size()); ++a) {
                    if (a == policy[i] || !g.allowed(si, w, g.acts[si][a])) continue;
                    Rat q = actionValue(si, w, g.acts[si][a]);
                    if (q > best) {
                        best = q;
                        bestA = a;
                    }
                }
                if (bestA != policy[i]) {
                    policy[i] = bestA;
                    improved = true;
                }
            }
        if (!improved) break;
    }

    EngineResult res;
    int init = g.idxOf[g.pm->model.initial];
    res.lower = x[g.cellOf(init, 0)];
    res.upper = res.lower + epsWin;
    res.sched = schedulerFromPolicy(g, policy);
    res.diag.windowLow = plan.rBot.floor();
    res.diag.windowHigh = plan.rTop.ceil();
    res.diag.cells = N;
    res.diag.policyIterations = iters;
    res.diag.exactPath = true;
    if (req.wantPerStateUpper) {
        res.perStateUpper.assign(g.pm->model.stateCount(), Rat(0));
        for (int si = 0; si < g.m; ++si)
            res.perStateUpper[g.stateOf[si]] = x[g.cellOf(si, 0)] + epsWin;
        for (int s = 0; s < g.pm->model.stateCount(); ++s)
            if (g.idxOf[s] < 0) res.perStateUpper[s] = epsWin;  // absorbing: exact value 0
    }
    return res;
}

// ---------------------------------------------------------------------------
// certified path: double policy iteration + exact super/sub certificates
// ---------------------------------------------------------------------------
struct DyadicBounds {
    // all entries are scaled by 2^kScaleBits
    __int128 goalBiasUp, goalBiasDown;
    std::vector<__int128> baseUpMax, baseDownMax, baseUpMin, baseDownMin;
    std::vector<__int128> slopeUpMax, slopeDownMax, slopeUpMin, slopeDownMin;

    __int128 scaleRat(const Rat& v, bool up) const {
        mpz_class num = v.num() << kScaleBits;
        mpz_class q;
        if (up)
            mpz_cdiv_q(q.get_mpz_t(), num.get_mpz_t(), v.den().get_mpz_t());
        else
            mpz_fdiv_q(q.get_mpz_t(), num.get_mpz_t(), v.den().get_mpz_t());
        return i128FromMpz(q);
    }

    void build(const Grid& g) {
        const PreparedPe& pm = *g.pm;
        goalBiasUp = scaleRat(g.bias, true);
        goalBiasDown = scaleRat(g.bias, false);
        int m = g.m;
        baseUpMax.resize(m);
        baseDownMax.resize(m);
        baseUpMin.resize(m);
        baseDownMin.resize(m);
        slopeUpMax.resize(m);
        slopeDownMax.resize(m);
        slopeUpMin.resize(m);
        slopeDownMin.resize(m);
        for (int si = 0; si < m; ++si) {
            int s = g.stateOf[si];
            Rat baseMax = pm.ext.max.peVector[s] + pm.prof.pMax[s] * g.bias;
            Rat baseMin = pm.ext.min.peVector[s] + pm.prof.pMin[s] * g.bias;
            baseUpMax[si] = scaleRat(baseMax, true);
            baseDownMax[si] = scaleRat(baseMax, false);
            baseUpMin[si] = scaleRat(baseMin, true);
            baseDownMin[si] = scaleRat(baseMin, false);
            slopeUpMax[si] = scaleRat(pm.prof.pMax[s], true);
            slopeDownMax[si] = scaleRat(pm.prof.pMax[s], false);
            slopeUpMin[si] = scaleRat(pm.prof.pMin[s], true);
            slopeDownMin[si] = scaleRat(pm.prof.pMin[s], false);
        }
    }

    /// Directed bound of the boundary value; target must not be interior.
    __int128 value(const Grid& g, int target, long w, bool up) const {
        if (target == kTargetFail) return 0;
        if (target == kTargetGoal)
            return (static_cast<__int128>(w) << kScaleBits) + (up ? goalBiasUp : goalBiasDown);
        bool above = w > g.wHi;
        __int128 base = above ? (up ? baseUpMax[target] : baseDownMax[target])
                              : (up ? baseUpMin[target] : baseDownMin[target]);
        __int128 slopeP, slopeN;
        if (above) {
            slopeP = up ? slopeUpMax[target] : slopeDownMax[target];
            slopeN = up ? slopeDownMax[target] : slopeUpMax[target];
        } else {
            slopeP = up ? slopeUpMin[target] : slopeDownMin[target];
            slopeN = up ? slopeDownMin[target] : slopeUpMin[target];
        }
        __int128 slope = w >= 0 ? slopeP : slopeN;
        return base + slope * static_cast<__int128>(w);
    }
};

struct CertOutcome {
    Rat etaUp, etaDown;
    std::vector<__int128> x;    // quantized candidate
    std::vector<__int128> psi;  // quantized step certificate
};

double boundaryDouble(const Grid& g, int target, long w, double biasD,
                      const std::vector<double>& maxPeD, const std::vector<double>& maxPD,
                      const std::vector<double>& minPeD, const std::vector<double>& minPD) {
    if (target == kTargetFail) return 0.0;
    if (target == kTargetGoal) return static_cast<double>(w) + biasD;
    if (w > g.wHi) return maxPeD[target] + maxPD[target] * (static_cast<double>(w) + biasD);
    return minPeD[target] + minPD[target] * (static_cast<double>(w) + biasD);
}

EngineResult solveCertifiedPath(const Grid& g, const Plan& plan, const EngineRequest& req,
                                const Rat& epsWin) {
    long N = g.cells();
    int band = g.m * static_cast<int>(g.maxAbsW + 1);
    const PreparedPe& pm = *g.pm;

    std::vector<double> maxPeD(g.m), maxPD(g.m), minPeD(g.m), minPD(g.m);
    for (int si = 0; si < g.m; ++si) {
        int s = g.stateOf[si];
        maxPeD[si] = pm.ext.max.peVector[s].toDouble();
        maxPD[si] = pm.prof.pMax[s].toDouble();
        minPeD[si] = pm.ext.min.peVector[s].toDouble();
        minPD[si] = pm.prof.pMin[s].toDouble();
    }
    double biasD = g.bias.toDouble();
    DD biasDD{biasD, (g.bias - Rat(mpq_class(biasD))).toDouble()};

    auto bndD = [&](int tgt, long w) {
        return boundaryDouble(g, tgt, w, biasD, maxPeD, maxPD, minPeD, minPD);
    };
    auto bndDD = [&](int tgt, long w) -> DD {
        if (tgt == kTargetFail) return {0.0, 0.0};
        if (tgt == kTargetGoal) return ddAddDouble(biasDD, static_cast<double>(w));
        int s = g.stateOf[tgt];
        const Rat& pe = w > g.wHi ? pm.ext.max.peVector[s] : pm.ext.min.peVector[s];
        const Rat& p = w > g.wHi ? pm.prof.pMax[s] : pm.prof.pMin[s];
        double peHi = pe.toDouble();
        DD acc{peHi, (pe - Rat(mpq_class(peHi))).toDouble()};
        double pHi = p.toDouble();
        double pLo = (p - Rat(mpq_class(pHi))).toDouble();
        DD wb = ddAddDouble(biasDD, static_cast<double>(w));
        ddMulAcc(acc, pHi, pLo, wb);
        return acc;
    };

    // ---- value iteration prewarm + policy iteration in doubles ----
    std::vector<double> x(N);
    for (long w = g.wLo; w <= g.wHi; ++w)
        for (int si = 0; si < g.m; ++si) {
            double a = maxPeD[si] + maxPD[si] * (static_cast<double>(w) + biasD);
            double b = minPeD[si] + minPD[si] * (static_cast<double>(w) + biasD);
            x[g.cellOf(si, w)] = std::max(a, b);
        }
    auto qValueD = [&](int si, long w, const ActionData& ad) {
        double q = 0;
        for (size_t j = 0; j < ad.target.size(); ++j) {
            int tgt = ad.target[j];
            long wt = w + ad.weight;
            if (tgt >= 0 && g.interiorW(wt))
                q += ad.pHi[j] * x[g.cellOf(tgt, wt)];
            else
                q += ad.pHi[j] * bndD(tgt, wt);
        }
        return q;
    };
    std::vector<int> policy = initialPolicy(g, req.warm);
    for (int sweep = 0; sweep < 60; ++sweep) {
        bool forward = (sweep % 2) == 0;
        for (long step = 0; step < N; ++step) {
            long i = forward ? step : N - 1 - step;
            int si = static_cast<int>(i % g.m);
            long w = g.wLo + i / g.m;
            double best = -1e300;
            int bestA = policy[i];
            for (int a = 0; a < static_cast<int>(g.acts[si].size()); ++a) {
                if (!g.allowed(si, w, g.acts[si][a])) continue;
                double q = qValueD(si, w, g.acts[si][a]);
                if (q > best) {
                    best = q;
                    bestA = a;
                }
            }
            x[i] = best;
            policy[i] = bestA;
        }
    }

    auto makeLU = [&](const std::vector<int>& pol) {
        auto lu = std::make_unique<BandedLU<double>>(static_cast<int>(N), band, band);
        for (long w = g.wLo; w <= g.wHi; ++w)
            for (int si = 0; si < g.m; ++si) {
                long i = g.cellOf(si, w);
                const ActionData& ad = g.acts[si][pol[i]];
                lu->at(static_cast<int>(i), static_cast<int>(i)) = 1.0;
                for (size_t j = 0; j < ad.target.size(); ++j) {
                    int tgt = ad.target[j];
                    long wt = w + ad.weight;
                    if (tgt >= 0 && g.interiorW(wt))
                        lu->at(static_cast<int>(i), static_cast<int>(g.cellOf(tgt, wt))) -= ad.pHi[j];
                }
            }
        lu->factor();
        return lu;
    };

    int iters = 0;
    std::unique_ptr<BandedLU<double>> lu;
    while (true) {
        if (++iters > 80)
            throw SolverError(SolverErrorCode::ResourceLimit, "window policy iteration did not settle");
        lu = makeLU(policy);
        std::vector<double> rhs(N, 0.0);
        for (long w = g.wLo; w <= g.wHi; ++w)
            for (int si = 0; si < g.m; ++si) {
                long i = g.cellOf(si, w);
                const ActionData& ad = g.acts[si][policy[i]];
                for (size_t j = 0; j < ad.target.size(); ++j) {
                    int tgt = ad.target[j];
                    long wt = w + ad.weight;
                    if (!(tgt >= 0 && g.interiorW(wt))) rhs[i] += ad.pHi[j] * bndD(tgt, wt);
                }
            }
        lu->solve(rhs);
        x = std::move(rhs);
        bool improved = false;
        for (long w = g.wLo; w <= g.wHi; ++w)
            for (int si = 0; si < g.m; ++si) {
                long i = g.cellOf(si, w);
                double cur = qValueD(si, w, g.acts[si][policy[i]]);
                double best = cur;
                int bestA = policy[i];
                for (int a = 0; a < static_cast<int>(g.acts[si].size()); ++a) {
                    if (a == policy[i] || !g.allowed(si, w, g.acts[si][a])) continue;
                    double q = qValueD(si, w, g.acts[si][a]);
                    if (q > best * (1 + 1e-14) + 1e-14) {
                        best = q;
                        bestA = a;
                    }
                }
                if (bestA != policy[i]) {
                    policy[i] = bestA;
                    improved = true;
                }
            }
        if (!improved) break;
    }
    BandedLU<double>* luKeep = lu.get();

    // ---- double-double iterative refinement against the exact system ----
    std::vector<DD> xdd(N);
    for (long i = 0; i < N; ++i) xdd[i] = {x[i], 0.0};
    std::vector<double> corr(N);
    for (int pass = 0; pass < 4; ++pass) {
        for (long w = g.wLo; w <= g.wHi; ++w)
            for (int si = 0; si < g.m; ++si) {
                long i = g.cellOf(si, w);
                const ActionData& ad = g.acts[si][policy[i]];
                DD acc{-xdd[i].hi, -xdd[i].lo};
                for (size_t j = 0; j < ad.target.size(); ++j) {
                    int tgt = ad.target[j];
                    long wt = w + ad.weight;
                    if (tgt >= 0 && g.interiorW(wt))
                        ddMulAcc(acc, ad.pHi[j], ad.pLo[j], xdd[g.cellOf(tgt, wt)]);
                    else
                        ddMulAcc(acc, ad.pHi[j], ad.pLo[j], bndDD(tgt, wt));
                }
                corr[i] = acc.hi;
            }
        luKeep->solve(corr);
        double worst = 0;
        for (long i = 0; i < N; ++i) {
            xdd[i] = ddAddDouble(xdd[i], corr[i]);
            worst = std::max(worst, std::abs(corr[i]));
        }
        if (worst < 1e-24) break;
    }

    // ---- step certificate psi: maximal expected remaining steps, padded ----
    std::vector<double> psi(N, 0.0);
    {
        auto psiQ = [&](int si, long w, const ActionData& ad) {
            double q = 1.0;
            for (size_t j = 0; j < ad.target.size(); ++j) {
                int tgt = ad.target[j];
                long wt = w + ad.weight;
                if (tgt >= 0 && g.interiorW(wt)) q += ad.pHi[j] * psi[g.cellOf(tgt, wt)];
            }
            return q;
        };
        std::vector<int> psiPol = policy;
        std::unique_ptr<BandedLU<double>> psiLu = std::move(lu);  // value policy == first psi policy
        for (int round = 0; round < 40; ++round) {
            std::vector<double> rhs(N, 1.0);
            psiLu->solve(rhs);
            psi = std::move(rhs);
            bool improved = false;
            for (long w = g.wLo; w <= g.wHi; ++w)
                for (int si = 0; si < g.m; ++si) {
                    long i = g.cellOf(si, w);
                    double best = psiQ(si, w, g.acts[si][psiPol[i]]);
                    int bestA = psiPol[i];
                    for (int a = 0; a < static_cast<int>(g.acts[si].size()); ++a) {
                        if (a == psiPol[i] || !g.allowed(si, w, g.acts[si][a])) continue;
                        double q = psiQ(si, w, g.acts[si][a]);
                        if (q > best * (1 + 1e-12) + 1e-12) {
                            best = q;
                            bestA = a;
                        }
                    }
                    if (bestA != psiPol[i]) {
                        psiPol[i] = bestA;
                        improved = true;
                    }
                }
            if (!improved) break;
            psiLu = makeLU(psiPol);
        }
    }

    // ---- exact certification ----
    DyadicBounds dyb;
    dyb.build(g);
    CertOutcome cert;
    cert.x.resize(N);
    for (long i = 0; i < N; ++i) cert.x[i] = quantizeDD(xdd[i]);
    cert.psi.resize(N);
    double psiPad = 1e-6;
    for (int attempt = 0;; ++attempt) {
        if (attempt > 4)
            throw SolverError(SolverErrorCode::ResourceLimit, "step certificate failed to verify");
        for (long i = 0; i < N; ++i)
            cert.psi[i] = quantizeDouble(psi[i] * (1.0 + psiPad) + psiPad) + 1;
        bool ok = true;
        for (long w = g.wLo; w <= g.wHi && ok; ++w)
            for (int si = 0; si < g.m && ok; ++si) {
                long i = g.cellOf(si, w);
                for (const ActionData& ad : g.acts[si]) {
                    if (!g.allowed(si, w, ad)) continue;
                    I256 acc = I256::fromI128(0);
                    for (size_t j = 0; j < ad.target.size(); ++j) {
                        int tgt = ad.target[j];
                        long wt = w + ad.weight;
                        if (tgt >= 0 && g.interiorW(wt))
                            acc.add(mulI128I64(cert.psi[g.cellOf(tgt, wt)], ad.num[j]));
                    }
                    // need den*(psi - 1) >= acc
                    I256 lhs = mulI128I64(cert.psi[i] - (static_cast<__int128>(1) << kScaleBits), ad.den);
                    lhs.sub(acc);
                    if (lhs.negative()) {
                        ok = false;
                        break;
                    }
                }
            }
        if (ok) break;
        psiPad = psiPad * 10 + 1e-3;
    }

    Rat etaUp(0), etaDown(0);
    mpz_class scaleDen = mpz_class(1) << kScaleBits;
    for (long w = g.wLo; w <= g.wHi; ++w)
        for (int si = 0; si < g.m; ++si) {
            long i = g.cellOf(si, w);
            for (int a = 0; a < static_cast<int>(g.acts[si].size()); ++a) {
                const ActionData& ad = g.acts[si][a];
                bool isPolicy = (a == policy[i]);
                if (!g.allowed(si, w, ad)) continue;
                I256 accUp = I256::fromI128(0), accDown = I256::fromI128(0);
                bool touchedBoundary = false;
                for (size_t j = 0; j < ad.target.size(); ++j) {
                    int tgt = ad.target[j];
                    long wt = w + ad.weight;
                    if (tgt >= 0 && g.interiorW(wt)) {
                        I256 t = mulI128I64(cert.x[g.cellOf(tgt, wt)], ad.num[j]);
                        accUp.add(t);
                        if (isPolicy) accDown.add(t);
                    } else {
                        touchedBoundary = true;
                        accUp.add(mulI128I64(dyb.value(g, tgt, wt, true), ad.num[j]));
                        if (isPolicy) accDown.add(mulI128I64(dyb.value(g, tgt, wt, false), ad.num[j]));
                    }
                }
                (void)touchedBoundary;
                I256 dx = mulI128I64(cert.x[i], ad.den);
                I256 slackUp = accUp;
                slackUp.sub(dx);
                if (slackUp.positive()) {
                    Rat cand(mpzFromI256(slackUp), mpz_class(ad.den) * scaleDen);
                    if (cand > etaUp) etaUp = cand;
                }
                if (isPolicy) {
                    I256 slackDown = dx;
                    slackDown.sub(accDown);
                    if (slackDown.positive()) {
                        Rat cand(mpzFromI256(slackDown), mpz_class(ad.den) * scaleDen);
                        if (cand > etaDown) etaDown = cand;
                    }
                }
            }
        }

    int init = g.idxOf[pm.model.initial];
    auto cellRat = [&](const std::vector<__int128>& v, long i) {
        return Rat(mpzFromI256(I256::fromI128(v[i])), scaleDen);
    };
    long startCell = g.cellOf(init, 0);
    Rat xStart = cellRat(cert.x, startCell);
    Rat psiStart = cellRat(cert.psi, startCell);

    EngineResult res;
    res.lower = xStart - etaDown * psiStart;
    res.upper = xStart + etaUp * psiStart + epsWin;
    res.diag.certifiedSlack = (etaUp + etaDown) * psiStart;
    if (res.upper - res.lower > req.epsilon)
        throw SolverError(SolverErrorCode::ResourceLimit,
                          "certified interval exceeds the requested accuracy");
    res.sched = schedulerFromPolicy(g, policy);
    res.diag.windowLow = plan.rBot.floor();
    res.diag.windowHigh = plan.rTop.ceil();
    res.diag.cells = N;
    res.diag.policyIterations = iters;
    res.diag.exactPath = false;
    if (req.wantPerStateUpper) {
        res.perStateUpper.assign(pm.model.stateCount(), Rat(0));
        for (int si = 0; si < g.m; ++si) {
            long c = g.cellOf(si, 0);
            res.perStateUpper[g.stateOf[si]] = cellRat(cert.x, c) + etaUp * cellRat(cert.psi, c) + epsWin;
        }
        for (int s = 0; s < pm.model.stateCount(); ++s)
            if (g.idxOf[s] < 0) res.perStateUpper[s] = epsWin;
    }
    return res;
}

}  // namespace

PreparedPe prepareForPe(const Mdp& raw) {
    requireValid(raw);
    TransformResult col = collapseToFail(raw);
    PreparedPe pm;
    pm.collapseTrace = col.trace;
    if (col.model.initial == col.model.failState()) {
        pm.model = std::move(col.model);
        pm.goalUnreachable = true;
        return pm;
    }
    TransformResult sp = spiderTransform(col.model);  // throws when weight-divergent
    pm.model = std::move(sp.model);
    pm.prof = reachProbabilities(pm.model);
    pm.ext = extremeSchedulers(pm.model, pm.prof);
    pm.consts = modelConstants(pm.model);

    MecDecomposition dec = mecDecompose(pm.model);
    Rat sumC, prodOneMinus(1);
    int fail = pm.model.failState();
    for (const EndComponent& ec : dec.mecs) {
        if (ec.states.size() == 1 && (ec.states[0] == pm.model.goal || ec.states[0] == fail)) continue;
        SuperPotential sp2 = superPotential(pm.model, ec);
        EcTailConstants tc = ecTailConstants(sp2, pm.consts.maxAbsWeight);
        sumC += tc.c;
        prodOneMinus *= Rat(1) - tc.lambda;
    }
    pm.cM = Rat(static_cast<long>(pm.consts.stateCount)) * Rat(pm.consts.maxAbsWeight) + sumC;
    pm.lambdaM = Rat(1) - pm.consts.minProb.pow(static_cast<unsigned long>(pm.consts.stateCount)) * prodOneMinus;
    pm.cw = pm.cM + Rat(pm.consts.maxAbsWeight);
    Rat oneMinus = Rat(1) - pm.lambdaM;
    pm.engineUb = oneMinus.isZero() ? Rat(0) : pm.cw / oneMinus;
    return pm;
}

EngineResult solveWindow(const PreparedPe& pm, const EngineRequest& req) {
    if (req.epsilon.sign() <= 0) throw std::invalid_argument("epsilon must be positive");
    if (req.wantPerStateUpper && !req.bias.isZero())
        throw std::logic_error("per-state uppers need bias 0");
    Rat epsWin = req.epsilon / Rat(2);
    Plan plan = makePlan(pm, req.ubound, epsWin, req.bias);

    if (plan.degenerateMin) {
        EngineResult res;
        int init = pm.model.initial;
        res.lower = pm.ext.min.peVector[init] + pm.prof.pMin[init] * req.bias;
        res.upper = res.lower + epsWin;
        res.sched = emptyMinScheduler(pm, req.bias);
        res.diag.windowLow = plan.rBot.floor();
        res.diag.windowHigh = plan.rTop.ceil();
        res.diag.cells = 0;
        res.diag.exactPath = true;
        if (req.wantPerStateUpper) {
            res.perStateUpper.assign(pm.model.stateCount(), Rat(0));
            for (int s = 0; s < pm.model.stateCount(); ++s)
                res.perStateUpper[s] =
                    pm.ext.min.peVector[s] + pm.prof.pMin[s] * req.bias + epsWin;
        }
        return res;
    }

    Grid g = buildGrid(pm, plan, req.bias);
    if (g.cells() > req.cellGuard)
        throw SolverError(SolverErrorCode::ResourceLimit,
                          "window needs " + std::to_string(g.cells()) +
                              " unfolded states, over the configured cap");
    if (g.cells() <= req.exactCellLimit) return solveExactPath(g, plan, req, epsWin);
    return solveCertifiedPath(g, plan, req, epsWin);
}

}  // namespace mdpx
