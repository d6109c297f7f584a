#include "mdpx/exact.hpp"

#include <algorithm>
#include <stdexcept>

#include "mdpx/errors.hpp"
#include "mdpx/linalg.hpp"
#include "mdpx/simplex.hpp"

namespace mdpx {

namespace {

/// Bottom SCCs of the chain a full policy induces.
std::vector<std::vector<int>> chainBottomClasses(const Mdp& model, const std::vector<int>& choice) {
    int n = model.stateCount();
    std::vector<std::vector<int>> adj(n);
    for (int s = 0; s < n; ++s)
        for (const Branch& br : model.actions[s][choice[s]].branches) adj[s].push_back(br.target);
    int nc = 0;
    std::vector<int> comp = sccDecompose(n, adj, nc);
    std::vector<bool> leaves(nc, false);
    for (int s = 0; s < n; ++s)
        for (int t : adj[s])
            if (comp[t] != comp[s]) leaves[comp[s]] = true;
    std::vector<std::vector<int>> out(nc);
    for (int s = 0; s < n; ++s)
        if (!leaves[comp[s]]) out[comp[s]].push_back(s);
    out.erase(std::remove_if(out.begin(), out.end(), [](auto& c) { return c.empty(); }), out.end());
    return out;
}

std::vector<Rat> solveTransient(const Mdp& model, const std::vector<int>& choice,
                                const std::vector<int>& interior, const std::vector<Rat>& fixed,
                                const std::vector<Rat>& offset) {
    int m = static_cast<int>(interior.size());
    std::vector<int> pos(model.stateCount(), -1);
    for (int i = 0; i < m; ++i) pos[interior[i]] = i;
    std::vector<std::vector<Rat>> a(m, std::vector<Rat>(m));
    std::vector<Rat> b(m);
    for (int i = 0; i < m; ++i) {
        int s = interior[i];
        a[i][i] = Rat(1);
        b[i] = offset[s];
        for (const Branch& br : model.actions[s][choice[s]].branches) {
            if (pos[br.target] >= 0)
                a[i][pos[br.target]] -= br.prob;
            else
                b[i] += br.prob * fixed[br.target];
        }
    }
    return solveDenseRat(std::move(a), std::move(b));
}

}  // namespace

PolicyEvaluation evalMemoryless(const Mdp& model, const std::vector<int>& choice) {
    int n = model.stateCount();
    PolicyEvaluation ev;
    ev.reach.assign(n, Rat(0));
    ev.pe.assign(n, Rat(0));

    std::vector<bool> recurrent(n, false);
    for (const auto& cls : chainBottomClasses(model, choice))
        for (int s : cls) recurrent[s] = true;

    // Recurrent classes either are {goal} or never see the goal; both pin the
    // boundary exactly.
    std::vector<int> interior;
    for (int s = 0; s < n; ++s)
        if (!recurrent[s]) interior.push_back(s);
    ev.reach[model.goal] = Rat(1);

    std::vector<Rat> zeros(n, Rat(0));
    std::vector<Rat> sol = solveTransient(model, choice, interior, ev.reach, zeros);
    for (size_t i = 0; i < interior.size(); ++i) ev.reach[interior[i]] = sol[i];

    std::vector<Rat> offset(n, Rat(0));
    for (int s = 0; s < n; ++s)
        if (!recurrent[s]) offset[s] = Rat(model.actions[s][choice[s]].weight) * ev.reach[s];
    std::vector<Rat> fixedPe(n, Rat(0));
    sol = solveTransient(model, choice, interior, fixedPe, offset);
    for (size_t i = 0; i < interior.size(); ++i) ev.pe[interior[i]] = sol[i];
    return ev;
}

ChainSolution solveMarkovChain(const Mdp& chain, const Rat& bias) {
    if (!chain.isMarkovChain())
        throw std::invalid_argument("model is not a Markov chain (one action per state)");
    std::vector<int> choice(chain.stateCount(), 0);
    PolicyEvaluation ev = evalMemoryless(chain, choice);
    ChainSolution sol;
    sol.reach = ev.reach[chain.initial];
    sol.pe = ev.pe[chain.initial] + bias * sol.reach;
    if (sol.reach.sign() > 0) sol.ce = ev.pe[chain.initial] / sol.reach;
    return sol;
}

namespace {

/// Least super-solution of  x_s = max_a [ wgt(s,a)*pBy(s,a) + sum_t P x_t ]
/// over the allowed actions, boundary states pinned to 0. Returns the full
/// vector together with the tight-action sets.
struct BellmanLp {
    std::vector<Rat> value;
    std::vector<std::vector<int>> tight;
};

BellmanLp solveExtremeLp(const Mdp& model, const std::vector<std::vector<bool>>& allowed,
                         const std::vector<std::vector<Rat>>& pByAction,
                         const std::vector<bool>& boundary) {
    int n = model.stateCount();
    std::vector<int> pos(n, -1);
    std::vector<int> interior;
    for (int s = 0; s < n; ++s)
        if (!boundary[s]) {
            pos[s] = static_cast<int>(interior.size());
            interior.push_back(s);
        }
    int m = static_cast<int>(interior.size());
    std::vector<Rat> c(m, Rat(1));
    std::vector<std::vector<Rat>> rows;
    std::vector<Rat> rhs;
    for (int i = 0; i < m; ++i) {
        int s = interior[i];
        for (size_t a = 0; a < model.actions[s].size(); ++a) {
            if (!allowed[s][a]) continue;
            std::vector<Rat> row(m);
            row[i] += Rat(1);
            Rat b = Rat(model.actions[s][a].weight) * pByAction[s][a];
            for (const Branch& br : model.actions[s][a].branches)
                if (pos[br.target] >= 0) row[pos[br.target]] -= br.prob;
            rows.push_back(std::move(row));
            rhs.push_back(b);
        }
    }
    LpResult lp = solveLpMinFree(c, rows, rhs);
    if (lp.status != LpStatus::Optimal)
        throw std::logic_error("extreme-scheduler program not optimal (end components left?)");

    BellmanLp out;
    out.value.assign(n, Rat(0));
    for (int i = 0; i < m; ++i) out.value[interior[i]] = lp.x[i];
    out.tight.resize(n);
    for (int s = 0; s < n; ++s) {
        if (boundary[s]) continue;
        for (size_t a = 0; a < model.actions[s].size(); ++a) {
            if (!allowed[s][a]) continue;
            Rat q = Rat(model.actions[s][a].weight) * pByAction[s][a];
            for (const Branch& br : model.actions[s][a].branches) q += br.prob * out.value[br.target];
            if (q == out.value[s]) out.tight[s].push_back(static_cast<int>(a));
        }
    }
    return out;
}

/// Picks, per non-boundary state, the lowest tight action that moves with
/// positive probability strictly closer to the target set.
std::vector<int> progressPolicy(const Mdp& model, const std::vector<std::vector<int>>& tight,
                                const std::vector<bool>& target, const std::vector<bool>& boundary) {
    int n = model.stateCount();
    std::vector<int> rank(n, -1), choice(n, -1);
    for (int s = 0; s < n; ++s)
        if (target[s]) rank[s] = 0;
    for (int round = 1; round <= n; ++round)
        for (int s = 0; s < n; ++s) {
            if (rank[s] >= 0 || boundary[s]) continue;
            for (int a : tight[s]) {
                bool closer = false;
                for (const Branch& br : model.actions[s][a].branches)
                    if (rank[br.target] >= 0 && rank[br.target] < round) closer = true;
                if (closer) {
                    rank[s] = round;
                    choice[s] = a;
                    break;
                }
            }
        }
    return choice;
}

}  // namespace

ExtremeSchedulers extremeSchedulers(const Mdp& model, const ReachabilityProfile& prof) {
    int n = model.stateCount();
    ExtremeSchedulers out;

    // ---- max side ----
    std::vector<bool> boundaryMax(n, false), goalOnly(n, false);
    for (int s = 0; s < n; ++s) boundaryMax[s] = (s == model.goal) || prof.pMax[s].isZero();
    goalOnly[model.goal] = true;
    BellmanLp maxLp = solveExtremeLp(model, prof.actMax, prof.pMaxByAction, boundaryMax);
    std::vector<int> maxChoice = progressPolicy(model, maxLp.tight, goalOnly, boundaryMax);
    for (int s = 0; s < n; ++s)
        if (maxChoice[s] < 0) {
            if (!boundaryMax[s]) throw std::logic_error("max policy extraction failed");
            maxChoice[s] = 0;
        }
    PolicyEvaluation evMax = evalMemoryless(model, maxChoice);
    for (int s = 0; s < n; ++s) {
        if (evMax.reach[s] != prof.pMax[s]) throw std::logic_error("max policy misses p^max");
        if (evMax.pe[s] != maxLp.value[s]) throw std::logic_error("max policy value mismatch");
    }
    out.max.choice = std::move(maxChoice);
    out.max.peVector = maxLp.value;
    out.max.reachVector = prof.pMax;

    out.peMaxByAction.resize(n);
    for (int s = 0; s < n; ++s)
        for (size_t a = 0; a < model.actions[s].size(); ++a) {
            Rat q = Rat(model.actions[s][a].weight) * prof.pMaxByAction[s][a];
            for (const Branch& br : model.actions[s][a].branches)
                q += br.prob * out.max.peVector[br.target];
            out.peMaxByAction[s].push_back(q);
        }

    // ---- min side ----
    // States with minimal probability zero evaluate to 0: the attaining
    // schedulers never reach the goal from there.
    std::vector<bool> boundaryMin(n, false), targetMin(n, false);
    for (int s = 0; s < n; ++s) boundaryMin[s] = (s == model.goal) || prof.pMin[s].isZero();
    for (int s = 0; s < n; ++s) targetMin[s] = boundaryMin[s];
    BellmanLp minLp = solveExtremeLp(model, prof.actMin, prof.pMinByAction, boundaryMin);
    std::vector<int> minChoice = progressPolicy(model, minLp.tight, targetMin, boundaryMin);
    for (int s = 0; s < n; ++s) {
        if (minChoice[s] >= 0) continue;
        if (!boundaryMin[s]) throw std::logic_error("min policy extraction failed");
        minChoice[s] = 0;
        for (size_t a = 0; a < model.actions[s].size(); ++a)
            if (prof.actMin[s][a]) {
                minChoice[s] = static_cast<int>(a);
                break;
            }
    }
    PolicyEvaluation evMin = evalMemoryless(model, minChoice);
    for (int s = 0; s < n; ++s) {
        if (evMin.reach[s] != prof.pMin[s]) throw std::logic_error("min policy misses p^min");
        if (evMin.pe[s] != minLp.value[s]) throw std::logic_error("min policy value mismatch");
    }
    out.min.choice = std::move(minChoice);
    out.min.peVector = minLp.value;
    out.min.reachVector = prof.pMin;
    return out;
}

Rat nonnegSaturationPoint(const Mdp& model, const ReachabilityProfile& prof,
                          const ExtremeSchedulers& ext, const Rat& bias) {
    for (const auto& acts : model.actions)
        for (const Action& act : acts)
            if (act.weight < 0)
                throw SolverError(SolverErrorCode::NegativeWeights,
                                  "saturation point requires nonnegative weights");
    bool any = false;
    Rat best;
    for (int s = 0; s < model.stateCount(); ++s)
        for (size_t a = 0; a < model.actions[s].size(); ++a) {
            if (prof.actMax[s][a]) continue;
            Rat gap = prof.pMax[s] - prof.pMaxByAction[s][a];  // > 0 off the max set
            Rat cand = (ext.peMaxByAction[s][a] - ext.max.peVector[s]) / gap;
            if (!any || cand > best) {
                best = cand;
                any = true;
            }
        }
    if (!any) return Rat(0);
    return best - bias;
}

ExactPeTable nonnegSolveExact(const Mdp& model, const ReachabilityProfile& prof,
                              const ExtremeSchedulers& ext, const Rat& bias) {
    ExactPeTable table;
    table.bias = bias;
    table.saturation = nonnegSaturationPoint(model, prof, ext, bias);

    Weight maxW = 0;
    for (const auto& acts : model.actions)
        for (const Action& act : acts)
            if (act.weight > maxW) maxW = act.weight;
    mpz_class top = (table.saturation + Rat(maxW)).ceil();
    if (top < 0) top = 0;
    if (top > 2'000'000)
        throw SolverError(SolverErrorCode::ResourceLimit,
                          "saturated window too large: " + top.get_str());
    table.windowTop = top.get_si();

    int n = model.stateCount();
    int fail = model.failState();
    long B = table.windowTop;
    table.values.assign(n, std::vector<Rat>(B + 1));
    table.scheduler.assign(n, std::vector<int>(B + 1, -1));

    auto saturated = [&](long r) { return Rat(static_cast<long>(r)) >= table.saturation; };
    auto cellValue = [&](int t, long r) -> Rat {
        if (t == model.goal) return Rat(static_cast<long>(r)) + bias;
        if (t == fail) return Rat(0);
        return table.values[t][r];
    };

    for (long r = B; r >= 0; --r) {
        if (saturated(r)) {
            for (int s = 0; s < n; ++s) {
                if (s == model.goal || s == fail) continue;
                table.values[s][r] = prof.pMax[s] * (Rat(static_cast<long>(r)) + bias) + ext.max.peVector[s];
                table.scheduler[s][r] = ext.max.choice[s];
            }
            continue;
        }
        // Zero-weight actions couple cells inside this layer; solve the layer
        // as a small total-reward problem by policy iteration.
        std::vector<int> layerStates;
        std::vector<int> pos(n, -1);
        for (int s = 0; s < n; ++s)
            if (s != model.goal && s != fail) {
                pos[s] = static_cast<int>(layerStates.size());
                layerStates.push_back(s);
            }
        int m = static_cast<int>(layerStates.size());
        std::vector<int> choice(m, 0);
        std::vector<Rat> val(m);

        auto actionConst = [&](int s, int a) {
            const Action& act = model.actions[s][a];
            long wl = act.weight.get_si();
            Rat q;
            for (const Branch& br : act.branches) {
                if (br.target == model.goal)
                    q += br.prob * (Rat(static_cast<long>(r + wl)) + bias);
                else if (br.target != fail && wl > 0)
                    q += br.prob * table.values[br.target][r + wl];
            }
            return q;  // same-layer terms excluded
        };

        int guard = 0;
        while (true) {
            if (++guard > 1000) throw std::logic_error("layer policy iteration diverged");
            // evaluate: val = const + sameLayer * val
            std::vector<std::vector<Rat>> a(m, std::vector<Rat>(m));
            std::vector<Rat> b(m);
            for (int i = 0; i < m; ++i) {
                int s = layerStates[i];
                const Action& act = model.actions[s][choice[i]];
                a[i][i] = Rat(1);
                b[i] = actionConst(s, choice[i]);
                if (act.weight == 0)
                    for (const Branch& br : act.branches)
                        if (pos[br.target] >= 0) a[i][pos[br.target]] -= br.prob;
            }
            val = solveDenseRat(std::move(a), std::move(b));
            bool improved = false;
            for (int i = 0; i < m; ++i) {
                int s = layerStates[i];
                Rat best = val[i];
                int bestA = choice[i];
                for (int a2 = 0; a2 < static_cast<int>(model.actions[s].size()); ++a2) {
                    const Action& act = model.actions[s][a2];
                    Rat q = actionConst(s, a2);
                    if (act.weight == 0)
                        for (const Branch& br : act.branches)
                            if (pos[br.target] >= 0) q += br.prob * val[pos[br.target]];
                    if (q > best) {
                        best = q;
                        bestA = a2;
                    }
                }
                if (bestA != choice[i]) {
                    choice[i] = bestA;
                    improved = true;
                }
            }
            if (!improved) break;
        }
        for (int i = 0; i < m; ++i) {
            table.values[layerStates[i]][r] = val[i];
            table.scheduler[layerStates[i]][r] = choice[i];
        }
    }
    (void)cellValue;
    return table;
}

}  // namespace mdpx
