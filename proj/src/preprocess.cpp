#include "mdpx/preprocess.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

#include "mdpx/errors.hpp"

namespace mdpx {

namespace {

std::string freshLabel(const Mdp& model, int state, const std::string& base) {
    auto taken = [&](const std::string& l) {
        for (const Action& a : model.actions[state])
            if (a.label == l) return true;
        return false;
    };
    if (!taken(base)) return base;
    for (int i = 1;; ++i) {
        std::string cand = base + "_" + std::to_string(i);
        if (!taken(cand)) return cand;
    }
}

int ensureFailState(Mdp& model) {
    int f = model.failState();
    if (f >= 0) return f;
    f = model.addState(kFailName);
    Action loop;
    loop.label = "loop";
    loop.weight = 0;
    loop.branches.push_back({f, Rat(1)});
    model.actions[f].push_back(std::move(loop));
    return f;
}

/// Bottom SCCs (no edge leaving the component) of the chain a policy induces
/// on an end component; indices are EC-local.
std::vector<std::vector<int>> bottomClasses(const Mdp& model, const EndComponent& ec,
                                            const std::vector<int>& policy) {
    int k = static_cast<int>(ec.states.size());
    std::vector<std::vector<int>> adj(k);
    for (int i = 0; i < k; ++i)
        for (const Branch& br : model.actions[ec.states[i]][policy[i]].branches) {
            int j = ec.indexOf(br.target);
            if (j < 0) throw std::logic_error("policy leaves its end component");
            adj[i].push_back(j);
        }
    int nc = 0;
    std::vector<int> comp = sccDecompose(k, adj, nc);
    std::vector<bool> leaves(nc, false);
    for (int i = 0; i < k; ++i)
        for (int j : adj[i])
            if (comp[j] != comp[i]) leaves[comp[i]] = true;
    std::vector<std::vector<int>> classes(nc);
    for (int i = 0; i < k; ++i)
        if (!leaves[comp[i]]) classes[comp[i]].push_back(i);
    std::vector<std::vector<int>> out;
    for (auto& c : classes)
        if (!c.empty()) {
            std::sort(c.begin(), c.end());
            out.push_back(std::move(c));
        }
    std::sort(out.begin(), out.end());
    return out;
}

struct SpiderOutcome {
    Mdp model;
    bool divergent = false;
    std::vector<int> witnessStates;  // indices valid in the input model
    int applications = 0;
};

bool isAbsorbingSingleton(const Mdp& m, const EndComponent& ec, int special) {
    return ec.states.size() == 1 && ec.states[0] == special;
}

/// Iteratively flattens zero-mean recurrent structure. Stops early with a
/// divergence witness when a component has positive gain or zero gain with a
/// nonzero-weight cycle in its recurrent behaviour.
SpiderOutcome runSpider(const Mdp& input) {
    SpiderOutcome out;
    out.model = input;
    Mdp& m = out.model;

    long cap = 16L * (m.stateCount() + m.actionCount()) + 64;
    for (long round = 0;; ++round) {
        if (round > cap) throw std::logic_error("zero-component flattening did not terminate");
        MecDecomposition dec = mecDecompose(m);
        bool acted = false;
        for (const EndComponent& ec : dec.mecs) {
            if (isAbsorbingSingleton(m, ec, m.goal) || isAbsorbingSingleton(m, ec, m.failState()))
                continue;
            MeanPayoffResult mp = maxMeanPayoff(m, ec);
            if (mp.gain.sign() < 0) continue;
            if (mp.gain.sign() > 0) {
                out.divergent = true;
                out.witnessStates = ec.states;
                return out;
            }

            // Zero gain: inspect the recurrent class of a gain-optimal policy.
            std::vector<std::vector<int>> classes = bottomClasses(m, ec, mp.policy);
            const std::vector<int>& cls = classes.front();

            // Weight levels along the chain; consistent iff all cycles weigh 0.
            int k = static_cast<int>(ec.states.size());
            std::vector<bool> inCls(k, false);
            for (int i : cls) inCls[i] = true;
            std::vector<Weight> level(k);
            std::vector<bool> seen(k, false);
            int base = cls.front();
            seen[base] = true;
            std::vector<int> todo{base};
            bool consistent = true;
            while (!todo.empty() && consistent) {
                int i = todo.back();
                todo.pop_back();
                const Action& act = m.actions[ec.states[i]][mp.policy[i]];
                for (const Branch& br : act.branches) {
                    int j = ec.indexOf(br.target);
                    Weight lj = level[i] + act.weight;
                    if (!seen[j]) {
                        seen[j] = true;
                        level[j] = lj;
                        todo.push_back(j);
                    } else if (level[j] != lj) {
                        consistent = false;
                        break;
                    }
                }
            }
            if (!consistent) {
                out.divergent = true;
                out.witnessStates.clear();
                for (int i : cls) out.witnessStates.push_back(ec.states[i]);
                return out;
            }

            // Flatten the class onto its pivot.
            int pivotLocal = cls.front();
            int pivot = ec.states[pivotLocal];
            int fail = ensureFailState(m);
            // w_s: weight of every path from s to the pivot inside the class.
            std::vector<Weight> wTo(k);
            for (int i : cls) wTo[i] = level[pivotLocal] - level[i];

            std::vector<Action> pivotKept;
            for (int a = 0; a < static_cast<int>(m.actions[pivot].size()); ++a)
                if (a != mp.policy[pivotLocal]) pivotKept.push_back(m.actions[pivot][a]);

            for (int i : cls) {
                int s = ec.states[i];
                if (s == pivot) continue;
                std::vector<Action> moved;
                for (int a = 0; a < static_cast<int>(m.actions[s].size()); ++a) {
                    if (a == mp.policy[i]) continue;
                    Action act = m.actions[s][a];
                    act.weight -= wTo[i];
                    moved.push_back(std::move(act));
                }
                Action hop;
                hop.label = "jump";
                hop.weight = wTo[i];
                hop.branches.push_back({pivot, Rat(1)});
                m.actions[s] = {std::move(hop)};
                for (Action& act : moved) {
                    act.label = act.label + "_" + m.stateNames[s];
                    pivotKept.push_back(std::move(act));
                }
            }
            Action bail;
            bail.weight = 0;
            bail.branches.push_back({fail, Rat(1)});
            m.actions[pivot] = std::move(pivotKept);
            bail.label = freshLabel(m, pivot, "stop");
            m.actions[pivot].push_back(std::move(bail));
            // relabel duplicates that pooling may have produced
            for (size_t a = 0; a < m.actions[pivot].size(); ++a)
                for (size_t b_ = 0; b_ < a; ++b_)
                    if (m.actions[pivot][a].label == m.actions[pivot][b_].label)
                        m.actions[pivot][a].label += "_" + std::to_string(a);

            ++out.applications;
            acted = true;
            break;  // decomposition is stale, restart
        }
        if (!acted) break;
    }
    return out;
}

}  // namespace

TransformResult collapseToFail(const Mdp& model) {
    requireValid(model);
    std::vector<bool> reaches = statesReachingGoal(model);
    int n = model.stateCount();

    TransformResult out;
    out.trace.kind = TransformKind::Collapse;
    out.trace.stateMapping.assign(n, -1);

    bool allReach = true;
    for (int s = 0; s < n; ++s) allReach &= reaches[s];
    if (allReach) {
        out.model = model;
        for (int s = 0; s < n; ++s) out.trace.stateMapping[s] = s;
        return out;
    }

    Mdp& m = out.model;
    for (int s = 0; s < n; ++s)
        if (reaches[s]) out.trace.stateMapping[s] = m.addState(model.stateNames[s]);
    int fail = ensureFailState(m);
    for (int s = 0; s < n; ++s)
        if (!reaches[s]) out.trace.stateMapping[s] = fail;

    for (int s = 0; s < n; ++s) {
        if (!reaches[s]) continue;
        int ns = out.trace.stateMapping[s];
        for (const Action& src : model.actions[s]) {
            Action act;
            act.label = src.label;
            act.weight = src.weight;
            std::map<int, Rat> merged;
            for (const Branch& br : src.branches) merged[out.trace.stateMapping[br.target]] += br.prob;
            for (auto& [t, p] : merged) act.branches.push_back({t, p});
            m.actions[ns].push_back(std::move(act));
        }
    }
    m.initial = out.trace.stateMapping[model.initial];
    m.goal = out.trace.stateMapping[model.goal];
    return out;
}

DivergenceCheck checkWeightDivergence(const Mdp& model) {
    requireValid(model);
    SpiderOutcome sp = runSpider(model);
    DivergenceCheck res;
    res.divergent = sp.divergent;
    if (sp.divergent) {
        MecDecomposition dec = mecDecompose(model);
        res.witnessMec = dec.membership[sp.witnessStates.front()];
        for (int s : sp.witnessStates) res.witnessStates.push_back(model.stateNames[s]);
    }
    return res;
}

TransformResult spiderTransform(const Mdp& model) {
    requireValid(model);
    SpiderOutcome sp = runSpider(model);
    if (sp.divergent) {
        std::string msg = "positively weight-divergent end component around state '" +
                          model.stateNames[sp.witnessStates.front()] + "'";
        throw SolverError(SolverErrorCode::WeightDivergent, msg);
    }
    TransformResult out;
    out.model = std::move(sp.model);
    out.trace.kind = TransformKind::Spider;
    out.trace.stateMapping.resize(model.stateCount());
    for (int s = 0; s < model.stateCount(); ++s) out.trace.stateMapping[s] = s;
    return out;
}

CriticalCheck checkCriticalScheduler(const Mdp& model) {
    requireValid(model);
    ReachabilityProfile prof = reachProbabilities(model);
    CriticalCheck res;
    if (prof.pMin[model.initial].sign() > 0) return res;

    int n = model.stateCount();
    std::vector<bool> inS0(n, false);
    std::vector<int> todo{model.initial};
    inS0[model.initial] = true;
    while (!todo.empty()) {
        int s = todo.back();
        todo.pop_back();
        for (size_t a = 0; a < model.actions[s].size(); ++a) {
            if (!prof.actMin[s][a]) continue;
            for (const Branch& br : model.actions[s][a].branches)
                if (!inS0[br.target]) {
                    inS0[br.target] = true;
                    todo.push_back(br.target);
                }
        }
    }

    // Longest-path relaxation over (S0, Act^min); an improvement after |S0|
    // rounds witnesses a positive cycle.
    int rounds = 0;
    for (int s = 0; s < n; ++s) rounds += inS0[s] ? 1 : 0;
    std::vector<bool> known(n, false);
    std::vector<Weight> dist(n);
    std::vector<int> pred(n, -1);
    known[model.initial] = true;
    int hot = -1;
    for (int r = 0; r <= rounds && hot < 0; ++r) {
        bool improved = false;
        for (int s = 0; s < n; ++s) {
            if (!inS0[s] || !known[s]) continue;
            for (size_t a = 0; a < model.actions[s].size(); ++a) {
                if (!prof.actMin[s][a]) continue;
                const Action& act = model.actions[s][a];
                for (const Branch& br : act.branches) {
                    Weight cand = dist[s] + act.weight;
                    if (!known[br.target] || cand > dist[br.target]) {
                        known[br.target] = true;
                        dist[br.target] = cand;
                        pred[br.target] = s;
                        improved = true;
                        if (r == rounds) hot = br.target;
                    }
                }
            }
        }
        if (!improved) break;
    }
    if (hot < 0) return res;

    res.critical = true;
    std::vector<int> mark(n, -1);
    int cur = hot;
    for (int i = 0; i < rounds + 1; ++i) cur = pred[cur];  // descend into the cycle
    int steps = 0;
    while (mark[cur] < 0) {
        mark[cur] = steps++;
        cur = pred[cur];
    }
    std::vector<int> cycle;
    int start = cur;
    do {
        cycle.push_back(cur);
        cur = pred[cur];
    } while (cur != start);
    std::reverse(cycle.begin(), cycle.end());
    res.cycle = cycle;
    return res;
}

TransformResult posminTransform(const Mdp& model) {
    requireValid(model);
    ReachabilityProfile prof = reachProbabilities(model);
    TransformResult out;
    out.trace.kind = TransformKind::Posmin;
    out.trace.stateMapping.resize(model.stateCount());
    for (int s = 0; s < model.stateCount(); ++s) out.trace.stateMapping[s] = s;

    if (prof.pMin[model.initial].sign() > 0) {
        out.model = model;
        return out;
    }
    CriticalCheck crit = checkCriticalScheduler(model);
    if (crit.critical)
        throw SolverError(SolverErrorCode::CriticalScheduler,
                          "critical scheduler: positive cycle through '" +
                              model.stateNames[crit.cycle.front()] + "' with goal probability 0");

    int n = model.stateCount();
    std::vector<bool> inS0(n, false);
    std::vector<int> todo{model.initial};
    inS0[model.initial] = true;
    while (!todo.empty()) {
        int s = todo.back();
        todo.pop_back();
        for (size_t a = 0; a < model.actions[s].size(); ++a) {
            if (!prof.actMin[s][a]) continue;
            for (const Branch& br : model.actions[s][a].branches)
                if (!inS0[br.target]) {
                    inS0[br.target] = true;
                    todo.push_back(br.target);
                }
        }
    }

    // Maximal path weight from the initial state within (S0, Act^min); the
    // relaxation stabilizes within |S0| rounds since positive cycles are out.
    int rounds = 0;
    for (int s = 0; s < n; ++s) rounds += inS0[s] ? 1 : 0;
    std::vector<bool> known(n, false);
    std::vector<Weight> w(n);
    known[model.initial] = true;
    for (int r = 0; r < rounds + 1; ++r) {
        bool improved = false;
        for (int s = 0; s < n; ++s) {
            if (!inS0[s] || !known[s]) continue;
            for (size_t a = 0; a < model.actions[s].size(); ++a) {
                if (!prof.actMin[s][a]) continue;
                const Action& act = model.actions[s][a];
                for (const Branch& br : act.branches) {
                    Weight cand = w[s] + act.weight;
                    if (!known[br.target] || cand > w[br.target]) {
                        known[br.target] = true;
                        w[br.target] = cand;
                        improved = true;
                    }
                }
            }
        }
        if (!improved) break;
        if (r == rounds) throw std::logic_error("longest-path relaxation failed to stabilize");
    }

    Mdp m = model;
    auto unique = [&](const std::string& base) {
        std::string name = base;
        for (int i = 1; m.findState(name) >= 0; ++i) name = base + "_" + std::to_string(i);
        return name;
    };
    int tInit = m.addState(unique("t_init"));
    bool any = false;
    for (int s = 0; s < n; ++s) {
        if (!inS0[s]) continue;
        for (size_t a = 0; a < model.actions[s].size(); ++a) {
            if (prof.actMin[s][a]) continue;
            any = true;
            const Action& orig = model.actions[s][a];
            int hold = m.addState(unique("t_" + model.stateNames[s] + "_" + orig.label));
            m.actions[hold].push_back(orig);
            Action go;
            go.label = freshLabel(m, tInit, "b_" + model.stateNames[s] + "_" + orig.label);
            go.weight = w[s];
            go.branches.push_back({hold, Rat(1)});
            m.actions[tInit].push_back(std::move(go));
        }
    }
    if (!any)
        throw SolverError(SolverErrorCode::GoalUnreachable,
                          "no deviation from minimum-probability actions exists; goal unreachable");
    m.initial = tInit;
    out.model = std::move(m);
    return out;
}

FinitenessVerdict classifyFiniteness(const Mdp& model) {
    requireValid(model);
    TransformResult col = collapseToFail(model);
    FinitenessVerdict v;
    if (col.model.initial == col.model.failState()) {
        v.peFinite = true;
        v.ceFinite = false;
        v.reason = FinitenessReason::GoalUnreachable;
        return v;
    }
    DivergenceCheck div = checkWeightDivergence(col.model);
    if (div.divergent) {
        v.peFinite = false;
        v.ceFinite = false;
        v.reason = FinitenessReason::WeightDivergentEC;
        v.witnessStates = div.witnessStates;
        return v;
    }
    v.peFinite = true;
    CriticalCheck crit = checkCriticalScheduler(col.model);
    if (crit.critical) {
        v.ceFinite = false;
        v.reason = FinitenessReason::CriticalScheduler;
        for (int s : crit.cycle) v.witnessStates.push_back(col.model.stateNames[s]);
        return v;
    }
    v.ceFinite = true;
    v.reason = FinitenessReason::Ok;
    return v;
}

const char* reasonName(FinitenessReason r) {
    switch (r) {
        case FinitenessReason::Ok: return "ok";
        case FinitenessReason::WeightDivergentEC: return "weightDivergentEC";
        case FinitenessReason::CriticalScheduler: return "criticalScheduler";
        case FinitenessReason::GoalUnreachable: return "goalUnreachable";
    }
    return "?";
}

}  // namespace mdpx
