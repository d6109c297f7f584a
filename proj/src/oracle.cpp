#include "mdpx/oracle.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

#include "mdpx/errors.hpp"
#include "mdpx/graph.hpp"
#include "mdpx/linalg.hpp"
#include "mdpx/window_engine.hpp"

namespace mdpx {

namespace {

struct OracleGrid {
    const PreparedPe* pm;
    Rat bias;
    long window;
    int m;
    std::vector<int> stateOf, idxOf;
    long cellOf(int si, long w) const { return (w + window) * m + si; }
    bool interior(long w) const { return w >= -window && w <= window; }

    Rat boundaryValue(int modelState, long w) const {
        if (modelState == pm->model.goal) return Rat(w) + bias;
        if (modelState == pm->model.failState()) return Rat(0);
        if (w > window)
            return pm->ext.max.peVector[modelState] + pm->prof.pMax[modelState] * (Rat(w) + bias);
        return pm->ext.min.peVector[modelState] + pm->prof.pMin[modelState] * (Rat(w) + bias);
    }
};

/// Exact values of one action-combination on a strongly connected block,
/// downstream values fixed.
std::vector<Rat> evalBlock(const OracleGrid& g, const std::vector<long>& block,
                           const std::vector<int>& pick, const std::vector<long>& posInBlock,
                           const std::vector<Rat>& value) {
    const Mdp& model = g.pm->model;
    int nb = static_cast<int>(block.size());
    std::vector<std::vector<Rat>> a(nb, std::vector<Rat>(nb));
    std::vector<Rat> rhs(nb);
    for (int bi = 0; bi < nb; ++bi) {
        long cell = block[bi];
        int si = static_cast<int>(cell % g.m);
        long w = cell / g.m - g.window;
        int s = g.stateOf[si];
        const Action& act = model.actions[s][pick[bi]];
        a[bi][bi] = Rat(1);
        long wt = w + act.weight.get_si();
        for (const Branch& br : act.branches) {
            int ti = br.target == model.goal || br.target == model.failState() ? -1 : g.idxOf[br.target];
            if (ti >= 0 && g.interior(wt)) {
                long tcell = g.cellOf(ti, wt);
                if (posInBlock[tcell] >= 0)
                    a[bi][posInBlock[tcell]] -= br.prob;
                else
                    rhs[bi] += br.prob * value[tcell];
            } else {
                rhs[bi] += br.prob * g.boundaryValue(br.target, wt);
            }
        }
    }
    return solveDenseRat(std::move(a), std::move(rhs));
}

}  // namespace

OracleResult oraclePe(const Mdp& model, long window, const Rat& bias, long comboGuard) {
    if (window < 1) throw std::invalid_argument("oracle window must be at least 1");
    PreparedPe pm = prepareForPe(model);
    OracleResult out;
    if (pm.goalUnreachable) {
        out.best = Rat(0);
        out.argBest.bias = bias;
        return out;
    }

    OracleGrid g;
    g.pm = &pm;
    g.bias = bias;
    g.window = window;
    g.m = 0;
    int n = pm.model.stateCount();
    int fail = pm.model.failState();
    g.idxOf.assign(n, -1);
    for (int s = 0; s < n; ++s) {
        if (s == pm.model.goal || s == fail) continue;
        g.idxOf[s] = g.m++;
        g.stateOf.push_back(s);
    }
    long L = 2 * window + 1;
    long N = L * g.m;
    if (N > 2'000'000)
        throw SolverError(SolverErrorCode::ResourceLimit, "oracle window too large");

    // condensation of the cell graph; Tarjan ids are reverse-topological
    std::vector<std::vector<int>> adj(N);
    for (long w = -window; w <= window; ++w)
        for (int si = 0; si < g.m; ++si) {
            long i = g.cellOf(si, w);
            for (const Action& act : pm.model.actions[g.stateOf[si]]) {
                long wt = w + act.weight.get_si();
                if (!g.interior(wt)) continue;
                for (const Branch& br : act.branches)
                    if (g.idxOf[br.target] >= 0)
                        adj[i].push_back(static_cast<int>(g.cellOf(g.idxOf[br.target], wt)));
            }
        }
    int nc = 0;
    std::vector<int> comp = sccDecompose(static_cast<int>(N), adj, nc);
    std::vector<std::vector<long>> members(nc);
    for (long i = 0; i < N; ++i) members[comp[i]].push_back(i);

    std::vector<Rat> value(N);
    std::vector<int> chosen(N, 0);
    std::vector<long> posInBlock(N, -1);

    for (int c = 0; c < nc; ++c) {
        std::vector<long>& block = members[c];
        std::sort(block.begin(), block.end());
        int nb = static_cast<int>(block.size());
        for (int bi = 0; bi < nb; ++bi) posInBlock[block[bi]] = bi;

        std::vector<std::vector<int>> actsOf(nb);
        double combosD = 1;
        for (int bi = 0; bi < nb; ++bi) {
            long cell = block[bi];
            int si = static_cast<int>(cell % g.m);
            int s = g.stateOf[si];
            for (int a = 0; a < static_cast<int>(pm.model.actions[s].size()); ++a)
                actsOf[bi].push_back(a);
            combosD *= static_cast<double>(actsOf[bi].size());
        }

        bool selfContained = false;  // does the block reference itself?
        for (int bi = 0; bi < nb && !selfContained; ++bi)
            for (int t : adj[block[bi]])
                if (comp[t] == c) selfContained = true;

        std::vector<int> pick(nb, 0);
        if (!selfContained) {
            // pure backward induction, cell by cell
            for (int bi = 0; bi < nb; ++bi) {
                std::vector<int> only{0};
                Rat best;
                int bestA = -1;
                for (int a : actsOf[bi]) {
                    std::vector<int> p{a};
                    std::vector<Rat> v = evalBlock(g, {block[bi]}, p, posInBlock, value);
                    ++out.enumerated;
                    if (bestA < 0 || v[0] > best) {
                        best = v[0];
                        bestA = a;
                    }
                }
                value[block[bi]] = best;
                chosen[block[bi]] = bestA;
                (void)only;
            }
        } else if (combosD <= 4096) {
            std::vector<Rat> bestVec;
            std::vector<int> bestPick;
            std::vector<int> idx(nb, 0);
            while (true) {
                for (int bi = 0; bi < nb; ++bi) pick[bi] = actsOf[bi][idx[bi]];
                std::vector<Rat> v = evalBlock(g, block, pick, posInBlock, value);
                ++out.enumerated;
                if (bestVec.empty()) {
                    bestVec = v;
                    bestPick = pick;
                } else {
                    bool anyBetter = false;
                    for (int bi = 0; bi < nb; ++bi)
                        if (v[bi] > bestVec[bi]) {
                            bestVec[bi] = v[bi];
                            anyBetter = true;
                        }
                    if (anyBetter) bestPick.clear();  // will re-detect the argmax below
                }
                int d = nb - 1;
                while (d >= 0 && ++idx[d] == static_cast<int>(actsOf[d].size())) idx[d--] = 0;
                if (d < 0) break;
            }
            // find a combination matching the componentwise optimum
            if (bestPick.empty()) {
                std::vector<int> idx2(nb, 0);
                while (true) {
                    for (int bi = 0; bi < nb; ++bi) pick[bi] = actsOf[bi][idx2[bi]];
                    std::vector<Rat> v = evalBlock(g, block, pick, posInBlock, value);
                    if (v == bestVec) {
                        bestPick = pick;
                        break;
                    }
                    int d = nb - 1;
                    while (d >= 0 && ++idx2[d] == static_cast<int>(actsOf[d].size())) idx2[d--] = 0;
                    if (d < 0) break;
                }
                if (bestPick.empty())
                    throw std::logic_error("no combination achieves the cellwise optimum");
            }
            for (int bi = 0; bi < nb; ++bi) {
                value[block[bi]] = bestVec[bi];
                chosen[block[bi]] = bestPick[bi];
            }
        } else {
            if (static_cast<double>(nb) * nb * nb > static_cast<double>(comboGuard) * 64)
                throw SolverError(SolverErrorCode::ResourceLimit,
                                  "oracle block too large to solve exactly");
            // Gauss-Seidel improvement with a final exhaustive deviation check
            std::vector<Rat> v;
            int guard = 0;
            while (true) {
                if (++guard > 5000) throw std::logic_error("oracle improvement diverged");
                v = evalBlock(g, block, pick, posInBlock, value);
                ++out.enumerated;
                for (int bi = 0; bi < nb; ++bi) value[block[bi]] = v[bi];
                bool improved = false;
                for (int bi = 0; bi < nb; ++bi) {
                    long cell = block[bi];
                    int si = static_cast<int>(cell % g.m);
                    long w = cell / g.m - g.window;
                    int s = g.stateOf[si];
                    Rat best = value[cell];
                    int bestA = pick[bi];
                    for (int a : actsOf[bi]) {
                        if (a == pick[bi]) continue;
                        const Action& act = pm.model.actions[s][a];
                        long wt = w + act.weight.get_si();
                        Rat q;
                        for (const Branch& br : act.branches) {
                            int ti = g.idxOf[br.target];
                            if (ti >= 0 && g.interior(wt))
                                q += br.prob * value[g.cellOf(ti, wt)];
                            else
                                q += br.prob * g.boundaryValue(br.target, wt);
                        }
                        if (q > best) {
                            best = q;
                            bestA = a;
                        }
                    }
                    if (bestA != pick[bi]) {
                        pick[bi] = bestA;
                        improved = true;
                    }
                }
                if (!improved) break;
            }
            // single-deviation optimality check, exact
            for (int bi = 0; bi < nb; ++bi) {
                long cell = block[bi];
                int si = static_cast<int>(cell % g.m);
                long w = cell / g.m - g.window;
                int s = g.stateOf[si];
                for (int a : actsOf[bi]) {
                    const Action& act = pm.model.actions[s][a];
                    long wt = w + act.weight.get_si();
                    Rat q;
                    for (const Branch& br : act.branches) {
                        int ti = g.idxOf[br.target];
                        if (ti >= 0 && g.interior(wt))
                            q += br.prob * value[g.cellOf(ti, wt)];
                        else
                            q += br.prob * g.boundaryValue(br.target, wt);
                    }
                    if (q > value[cell]) throw std::logic_error("oracle block not optimal");
                }
                chosen[cell] = pick[bi];
            }
        }
        for (int bi = 0; bi < nb; ++bi) posInBlock[block[bi]] = -1;
    }

    out.best = value[g.cellOf(g.idxOf[pm.model.initial], 0)];
    WindowScheduler ws;
    ws.wLo = -window;
    ws.wHi = window;
    ws.bias = bias;
    ws.above = pm.ext.max;
    ws.below = pm.ext.min;
    ws.table.assign(n, {});
    for (int s = 0; s < n; ++s) {
        if (g.idxOf[s] < 0) continue;
        ws.table[s].assign(L, -1);
        for (long w = -window; w <= window; ++w) ws.table[s][w + window] = chosen[g.cellOf(g.idxOf[s], w)];
    }
    out.argBest = std::move(ws);
    return out;
}

SimulationEstimate simulate(const Mdp& model, const WindowScheduler& sched, long samples,
                            long horizon, unsigned long seed, const Rat& bias,
                            const std::vector<long>& tailThresholds) {
    requireValid(model);
    if (samples < 1 || horizon < 1) throw std::invalid_argument("samples and horizon must be positive");
    int n = model.stateCount();
    int fail = model.failState();

    // exact branch thresholds: pick the first j with r < ceil(cum_j * 2^64)
    struct Sampler {
        std::vector<unsigned long> cut;  // per branch, last one omitted
    };
    std::vector<std::vector<Sampler>> samplers(n);
    mpz_class two64 = mpz_class(1) << 64;
    for (int s = 0; s < n; ++s)
        for (const Action& act : model.actions[s]) {
            Sampler sm;
            Rat cum;
            for (size_t j = 0; j + 1 < act.branches.size(); ++j) {
                cum += act.branches[j].prob;
                mpz_class t;
                mpz_class numScaled = cum.num() * two64;
                mpz_cdiv_q(t.get_mpz_t(), numScaled.get_mpz_t(), cum.den().get_mpz_t());
                sm.cut.push_back(t.get_ui());
            }
            samplers[s].push_back(std::move(sm));
        }

    std::mt19937_64 rng(seed);
    mpz_class sumW = 0, sumSq = 0;
    long goals = 0;
    std::vector<long> tailHits(tailThresholds.size(), 0);

    for (long it = 0; it < samples; ++it) {
        int s = model.initial;
        long w = 0;
        long maxPrefix = 0;
        int committed = 0;  // 0 table, +1 above, -1 below
        bool reached = false;
        for (long step = 0; step < horizon; ++step) {
            if (s == model.goal) {
                reached = true;
                break;
            }
            if (s == fail) break;
            int a;
            if (committed > 0) {
                a = sched.above.choice[s];
            } else if (committed < 0) {
                a = sched.below.choice[s];
            } else if (sched.inWindow(w)) {
                a = sched.table[s].empty() ? 0 : sched.table[s][w - sched.wLo];
            } else {
                committed = w > sched.wHi ? 1 : -1;
                a = committed > 0 ? sched.above.choice[s] : sched.below.choice[s];
            }
            const Action& act = model.actions[s][a];
            unsigned long r = rng();
            size_t j = 0;
            const auto& cut = samplers[s][a].cut;
            while (j < cut.size() && r >= cut[j]) ++j;
            w += act.weight.get_si();
            maxPrefix = std::max(maxPrefix, w);
            s = act.branches[j].target;
        }
        if (s == model.goal) reached = true;
        if (reached) {
            ++goals;
            sumW += w;
            sumSq += mpz_class(w) * w;
        }
        for (size_t k = 0; k < tailThresholds.size(); ++k)
            if (maxPrefix >= tailThresholds[k]) ++tailHits[k];
    }

    SimulationEstimate est;
    est.samples = samples;
    est.horizon = horizon;
    est.seed = seed;
    // scores: X = (w + bias) on goal runs, 0 otherwise
    Rat mean = (Rat(sumW) + bias * Rat(static_cast<long>(goals))) / Rat(samples);
    Rat ex2 = (Rat(sumSq) + Rat(2) * bias * Rat(sumW) + bias * bias * Rat(static_cast<long>(goals))) /
              Rat(samples);
    est.mean = mean.toDouble();
    Rat var = ex2 - mean * mean;
    if (samples > 1) var = var * Rat(samples) / Rat(samples - 1);
    est.stderror = var.sign() > 0 ? std::sqrt(var.toDouble() / static_cast<double>(samples)) : 0.0;
    for (size_t k = 0; k < tailThresholds.size(); ++k)
        est.tailFreq.push_back(static_cast<double>(tailHits[k]) / static_cast<double>(samples));
    return est;
}

}  // namespace mdpx
