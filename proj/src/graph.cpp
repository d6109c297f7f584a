#include "mdpx/graph.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

#include "mdpx/linalg.hpp"
#include "mdpx/simplex.hpp"

namespace mdpx {

int EndComponent::indexOf(int state) const {
    auto it = std::lower_bound(states.begin(), states.end(), state);
    if (it == states.end() || *it != state) return -1;
    return static_cast<int>(it - states.begin());
}

std::vector<int> sccDecompose(int n, const std::vector<std::vector<int>>& adj, int& sccCount) {
    // Iterative Tarjan.
    std::vector<int> index(n, -1), low(n, 0), comp(n, -1);
    std::vector<bool> onStack(n, false);
    std::vector<int> stack;
    int next = 0;
    sccCount = 0;

    struct Frame {
        int v;
        size_t child;
    };
    for (int root = 0; root < n; ++root) {
        if (index[root] >= 0) continue;
        std::vector<Frame> call{{root, 0}};
        index[root] = low[root] = next++;
        stack.push_back(root);
        onStack[root] = true;
        while (!call.empty()) {
            Frame& f = call.back();
            if (f.child < adj[f.v].size()) {
                int w = adj[f.v][f.child++];
                if (index[w] < 0) {
                    index[w] = low[w] = next++;
                    stack.push_back(w);
                    onStack[w] = true;
                    call.push_back({w, 0});
                } else if (onStack[w]) {
                    low[f.v] = std::min(low[f.v], index[w]);
                }
            } else {
                if (low[f.v] == index[f.v]) {
                    while (true) {
                        int w = stack.back();
                        stack.pop_back();
                        onStack[w] = false;
                        comp[w] = sccCount;
                        if (w == f.v) break;
                    }
                    ++sccCount;
                }
                int v = f.v;
                call.pop_back();
                if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
            }
        }
    }
    return comp;
}

MecDecomposition mecDecompose(const Mdp& model) {
    int n = model.stateCount();
    std::vector<std::vector<bool>> allowed(n);
    for (int s = 0; s < n; ++s) allowed[s].assign(model.actions[s].size(), true);

    bool changed = true;
    std::vector<int> comp;
    int sccCount = 0;
    while (changed) {
        changed = false;
        std::vector<std::vector<int>> adj(n);
        for (int s = 0; s < n; ++s)
            for (size_t a = 0; a < model.actions[s].size(); ++a)
                if (allowed[s][a])
                    for (const Branch& br : model.actions[s][a].branches) adj[s].push_back(br.target);
        comp = sccDecompose(n, adj, sccCount);
        for (int s = 0; s < n; ++s)
            for (size_t a = 0; a < model.actions[s].size(); ++a) {
                if (!allowed[s][a]) continue;
                for (const Branch& br : model.actions[s][a].branches)
                    if (comp[br.target] != comp[s]) {
                        allowed[s][a] = false;
                        changed = true;
                        break;
                    }
            }
    }

    // SCCs in which every state kept an action form the MECs.
    std::vector<std::vector<int>> members(sccCount);
    for (int s = 0; s < n; ++s) members[comp[s]].push_back(s);

    MecDecomposition dec;
    dec.membership.assign(n, -1);
    std::vector<EndComponent> found;
    for (auto& group : members) {
        std::sort(group.begin(), group.end());
        bool ok = !group.empty();
        for (int s : group) {
            bool has = false;
            for (size_t a = 0; a < model.actions[s].size(); ++a) has |= allowed[s][a];
            if (!has) {
                ok = false;
                break;
            }
        }
        if (!ok) continue;
        EndComponent ec;
        ec.states = group;
        for (int s : group) {
            std::vector<int> acts;
            for (size_t a = 0; a < model.actions[s].size(); ++a)
                if (allowed[s][a]) acts.push_back(static_cast<int>(a));
            ec.actionIdx.push_back(std::move(acts));
        }
        found.push_back(std::move(ec));
    }
    std::sort(found.begin(), found.end(),
              [](const EndComponent& a, const EndComponent& b) { return a.states[0] < b.states[0]; });
    for (size_t i = 0; i < found.size(); ++i)
        for (int s : found[i].states) dec.membership[s] = static_cast<int>(i);
    dec.mecs = std::move(found);
    return dec;
}

QuotientResult mecQuotient(const Mdp& model, const MecDecomposition& dec) {
    int n = model.stateCount();
    QuotientResult out;
    out.stateMap.assign(n, -1);

    // Quotient states in order of lowest original index.
    std::vector<int> repOrder;
    for (int s = 0; s < n; ++s) {
        int m = dec.membership[s];
        if (m < 0 || dec.mecs[m].states[0] == s) repOrder.push_back(s);
    }
    for (int rep : repOrder) {
        int q = out.quotient.addState(model.stateNames[rep]);
        int m = dec.membership[rep];
        out.classOf.push_back(m);
        if (m < 0) {
            out.stateMap[rep] = q;
        } else {
            for (int s : dec.mecs[m].states) out.stateMap[s] = q;
        }
    }

    out.actionOrigin.assign(out.quotient.stateCount(), {});
    auto inComponent = [&](int mec, int s, int a) {
        if (mec < 0) return false;
        const EndComponent& ec = dec.mecs[mec];
        int i = ec.indexOf(s);
        if (i < 0) return false;
        const auto& acts = ec.actionIdx[i];
        return std::find(acts.begin(), acts.end(), a) != acts.end();
    };

    for (int s = 0; s < n; ++s) {
        int q = out.stateMap[s];
        int m = dec.membership[s];
        for (size_t a = 0; a < model.actions[s].size(); ++a) {
            if (inComponent(m, s, static_cast<int>(a))) continue;  // internal, dropped
            const Action& src = model.actions[s][a];
            Action act;
            act.label = src.label;
            act.weight = src.weight;
            std::map<int, Rat> merged;
            for (const Branch& br : src.branches) merged[out.stateMap[br.target]] += br.prob;
            for (auto& [tgt, p] : merged) act.branches.push_back({tgt, p});
            // labels may collide after pooling a component's actions
            for (const Action& existing : out.quotient.actions[q])
                if (existing.label == act.label) {
                    act.label += "_" + model.stateNames[s];
                    break;
                }
            out.quotient.actions[q].push_back(std::move(act));
            out.actionOrigin[q].push_back({s, static_cast<int>(a)});
        }
    }

    out.dead.assign(out.quotient.stateCount(), false);
    for (int q = 0; q < out.quotient.stateCount(); ++q) {
        if (!out.quotient.actions[q].empty()) continue;
        out.dead[q] = true;
        Action loop;
        loop.label = "loop";
        loop.weight = 0;
        loop.branches.push_back({q, Rat(1)});
        out.quotient.actions[q].push_back(std::move(loop));
        out.actionOrigin[q].push_back({-1, -1});
    }
    out.quotient.initial = out.stateMap[model.initial];
    out.quotient.goal = out.stateMap[model.goal];
    return out;
}

std::vector<bool> statesReachingGoal(const Mdp& model) {
    int n = model.stateCount();
    std::vector<std::vector<int>> radj(n);
    for (int s = 0; s < n; ++s)
        for (const Action& act : model.actions[s])
            for (const Branch& br : act.branches) radj[br.target].push_back(s);
    std::vector<bool> seen(n, false);
    std::vector<int> todo{model.goal};
    seen[model.goal] = true;
    while (!todo.empty()) {
        int v = todo.back();
        todo.pop_back();
        for (int u : radj[v])
            if (!seen[u]) {
                seen[u] = true;
                todo.push_back(u);
            }
    }
    return seen;
}

bool ReachabilityProfile::allActionsMin(int s) const {
    for (bool f : actMin[s])
        if (!f) return false;
    return true;
}

namespace {

/// Evaluates the reachability value of a memoryless policy on a model where
/// every policy reaches `boundary` almost surely. boundaryValue gives the
/// absorbed values; interior states are solved exactly.
std::vector<Rat> evalReachPolicy(const Mdp& model, const std::vector<int>& policy,
                                 const std::vector<int>& interior, const std::vector<Rat>& fixed) {
    int m = static_cast<int>(interior.size());
    std::vector<int> pos(model.stateCount(), -1);
    for (int i = 0; i < m; ++i) pos[interior[i]] = i;
    std::vector<std::vector<Rat>> a(m, std::vector<Rat>(m));
    std::vector<Rat> b(m);
    for (int i = 0; i < m; ++i) {
        int s = interior[i];
        a[i][i] = Rat(1);
        for (const Branch& br : model.actions[s][policy[s]].branches) {
            if (pos[br.target] >= 0)
                a[i][pos[br.target]] -= br.prob;
            else
                b[i] += br.prob * fixed[br.target];
        }
    }
    return solveDenseRat(std::move(a), std::move(b));
}

/// Policy iteration for extremal reachability on a model whose every policy
/// is absorbing from `interior`. maximize=true for p^max.
void reachPolicyIteration(const Mdp& model, const std::vector<int>& interior, std::vector<Rat>& value,
                          bool maximize) {
    if (interior.empty()) return;
    std::vector<int> policy(model.stateCount(), 0);
    std::vector<int> pos(model.stateCount(), -1);
    for (size_t i = 0; i < interior.size(); ++i) pos[interior[i]] = static_cast<int>(i);

    int guard = 0;
    while (true) {
        if (++guard > 10000) throw std::logic_error("reachability policy iteration diverged");
        std::vector<Rat> sol = evalReachPolicy(model, policy, interior, value);
        for (size_t i = 0; i < interior.size(); ++i) value[interior[i]] = sol[i];
        bool improved = false;
        for (int s : interior) {
            const auto& acts = model.actions[s];
            Rat best = value[s];
            int bestA = policy[s];
            for (int a = 0; a < static_cast<int>(acts.size()); ++a) {
                Rat q;
                for (const Branch& br : acts[a].branches) q += br.prob * value[br.target];
                if ((maximize && q > best) || (!maximize && q < best)) {
                    best = q;
                    bestA = a;
                }
            }
            if (bestA != policy[s]) {
                policy[s] = bestA;
                improved = true;
            }
        }
        if (!improved) break;
    }
}

}  // namespace

ReachabilityProfile reachProbabilities(const Mdp& model) {
    int n = model.stateCount();
    ReachabilityProfile prof;
    prof.pMax.assign(n, Rat(0));
    prof.pMin.assign(n, Rat(0));

    // --- maximal probabilities, solved on the MEC-quotient ---
    MecDecomposition dec = mecDecompose(model);
    QuotientResult quo = mecQuotient(model, dec);
    const Mdp& q = quo.quotient;
    int qn = q.stateCount();
    std::vector<bool> qReach = statesReachingGoal(q);
    std::vector<Rat> qv(qn, Rat(0));
    qv[q.goal] = Rat(1);
    std::vector<int> interior;
    for (int i = 0; i < qn; ++i)
        if (i != q.goal && !quo.dead[i] && qReach[i]) interior.push_back(i);
    reachPolicyIteration(q, interior, qv, /*maximize=*/true);
    for (int s = 0; s < n; ++s) prof.pMax[s] = qv[quo.stateMap[s]];

    // --- minimal probabilities on the original model ---
    // gfp of "some action stays inside" = states from which the goal can be
    // avoided surely.
    std::vector<bool> avoid(n, true);
    avoid[model.goal] = false;
    bool changed = true;
    while (changed) {
        changed = false;
        for (int s = 0; s < n; ++s) {
            if (!avoid[s]) continue;
            bool keep = false;
            for (const Action& act : model.actions[s]) {
                bool inside = true;
                for (const Branch& br : act.branches) inside &= avoid[br.target];
                if (inside) {
                    keep = true;
                    break;
                }
            }
            if (!keep) {
                avoid[s] = false;
                changed = true;
            }
        }
    }
    std::vector<Rat> minv(n, Rat(0));
    minv[model.goal] = Rat(1);
    std::vector<int> minInterior;
    for (int s = 0; s < n; ++s)
        if (s != model.goal && !avoid[s]) minInterior.push_back(s);
    reachPolicyIteration(model, minInterior, minv, /*maximize=*/false);
    prof.pMin = minv;

    // --- per-action values and consistent sets ---
    prof.pMaxByAction.resize(n);
    prof.pMinByAction.resize(n);
    prof.actMax.resize(n);
    prof.actMin.resize(n);
    for (int s = 0; s < n; ++s) {
        for (const Action& act : model.actions[s]) {
            Rat qmax, qmin;
            for (const Branch& br : act.branches) {
                qmax += br.prob * prof.pMax[br.target];
                qmin += br.prob * prof.pMin[br.target];
            }
            prof.pMaxByAction[s].push_back(qmax);
            prof.pMinByAction[s].push_back(qmin);
            prof.actMax[s].push_back(qmax == prof.pMax[s]);
            prof.actMin[s].push_back(qmin == prof.pMin[s]);
        }
    }
    return prof;
}

MeanPayoffResult maxMeanPayoff(const Mdp& model, const EndComponent& ec) {
    int k = static_cast<int>(ec.states.size());
    std::vector<std::pair<int, int>> rows;  // (local state, action)
    for (int i = 0; i < k; ++i)
        for (int a : ec.actionIdx[i]) rows.push_back({i, a});

    // Gain program: minimize g subject to
    //   g + u_s - sum_t P(s,a,t) u_t >= wgt(s,a)   for all component actions.
    int nv = 1 + k;  // [g, u_0..u_{k-1}]
    std::vector<Rat> c(nv);
    c[0] = Rat(1);
    std::vector<std::vector<Rat>> a;
    std::vector<Rat> rhs;
    for (auto [i, act] : rows) {
        std::vector<Rat> row(nv);
        row[0] = Rat(1);
        row[1 + i] += Rat(1);
        int s = ec.states[i];
        for (const Branch& br : model.actions[s][act].branches) {
            int j = ec.indexOf(br.target);
            if (j < 0) throw std::logic_error("end component action leaves the component");
            row[1 + j] -= br.prob;
        }
        a.push_back(std::move(row));
        rhs.push_back(Rat(model.actions[s][act].weight));
    }
    LpResult lp = solveLpMinFree(c, a, rhs);
    if (lp.status != LpStatus::Optimal) throw std::logic_error("gain program not optimal");

    MeanPayoffResult res;
    res.gain = lp.x[0];
    res.potential.assign(k, Rat(0));
    for (int i = 0; i < k; ++i) res.potential[i] = lp.x[1 + i];

    // Dual program: a maximizing occupation measure. Its support carries the
    // recurrent behaviour of an optimal policy.
    int nr = static_cast<int>(rows.size());
    std::vector<Rat> dc(nr);
    std::vector<std::vector<Rat>> da;
    std::vector<Rat> drhs;
    for (int r = 0; r < nr; ++r)
        dc[r] = -Rat(model.actions[ec.states[rows[r].first]][rows[r].second].weight);
    {
        std::vector<Rat> one(nr, Rat(1));
        da.push_back(one);
        drhs.push_back(Rat(1));
        for (auto& v : one) v = -v;
        da.push_back(one);
        drhs.push_back(Rat(-1));
    }
    for (int i = 0; i < k; ++i) {
        std::vector<Rat> bal(nr);
        for (int r = 0; r < nr; ++r) {
            auto [j, act] = rows[r];
            if (j == i) bal[r] += Rat(1);
            for (const Branch& br : model.actions[ec.states[j]][act].branches)
                if (ec.indexOf(br.target) == i) bal[r] -= br.prob;
        }
        da.push_back(bal);
        drhs.push_back(Rat(0));
        for (auto& v : bal) v = -v;
        da.push_back(bal);
        drhs.push_back(Rat(0));
    }
    for (int r = 0; r < nr; ++r) {  // y >= 0
        std::vector<Rat> row(nr);
        row[r] = Rat(1);
        da.push_back(row);
        drhs.push_back(Rat(0));
    }
    LpResult dual = solveLpMinFree(dc, da, drhs);
    if (dual.status != LpStatus::Optimal) throw std::logic_error("occupation program not optimal");
    if (-dual.objective != res.gain) throw std::logic_error("gain duality gap");

    // Support actions on support states; everything else walks toward the
    // support (some successor strictly closer), which leaves the support
    // states' recurrent behaviour intact.
    res.policy.assign(k, -1);
    std::vector<bool> support(k, false);
    for (int r = 0; r < nr; ++r)
        if (dual.x[r].sign() > 0 && res.policy[rows[r].first] < 0) {
            res.policy[rows[r].first] = rows[r].second;
            support[rows[r].first] = true;
        }
    std::vector<int> rank(k, -1);
    for (int i = 0; i < k; ++i)
        if (support[i]) rank[i] = 0;
    for (int round = 1; round <= k; ++round) {
        for (int i = 0; i < k; ++i) {
            if (rank[i] >= 0) continue;
            for (int actIdx : ec.actionIdx[i]) {
                bool closer = false;
                for (const Branch& br : model.actions[ec.states[i]][actIdx].branches) {
                    int j = ec.indexOf(br.target);
                    if (j >= 0 && rank[j] >= 0 && rank[j] < round) closer = true;
                }
                if (closer) {
                    rank[i] = round;
                    res.policy[i] = actIdx;
                    break;
                }
            }
        }
    }
    for (int i = 0; i < k; ++i)
        if (res.policy[i] < 0) throw std::logic_error("gain policy extraction failed");
    return res;
}

}  // namespace mdpx
