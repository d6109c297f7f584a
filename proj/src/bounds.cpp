#include "mdpx/bounds.hpp"

#include <stdexcept>

#include "mdpx/errors.hpp"
#include "mdpx/linalg.hpp"

namespace mdpx {

bool SuperPotential::verify(const Mdp& model, const EndComponent& ec) const {
    int k = static_cast<int>(ec.states.size());
    for (int i = 0; i < k; ++i) {
        int s = ec.states[i];
        for (int a : ec.actionIdx[i]) {
            const Action& act = model.actions[s][a];
            Rat rhs = Rat(act.weight);
            for (const Branch& br : act.branches) {
                int j = ec.indexOf(br.target);
                if (j < 0) return false;
                rhs += br.prob * u[j];
            }
            if (-drift + u[i] < rhs) return false;
        }
    }
    return true;
}

namespace {

/// Relative values of a policy on an end component: h + gain = wgt + P h,
/// pinned to 0 at the lowest state of each recurrent class.
std::vector<Rat> policyBias(const Mdp& model, const EndComponent& ec, const std::vector<int>& policy,
                            const Rat& gain) {
    int k = static_cast<int>(ec.states.size());
    std::vector<std::vector<int>> adj(k);
    for (int i = 0; i < k; ++i)
        for (const Branch& br : model.actions[ec.states[i]][policy[i]].branches)
            adj[i].push_back(ec.indexOf(br.target));
    int nc = 0;
    std::vector<int> comp = sccDecompose(k, adj, nc);
    std::vector<bool> leaves(nc, false);
    for (int i = 0; i < k; ++i)
        for (int j : adj[i])
            if (comp[j] != comp[i]) leaves[comp[i]] = true;
    std::vector<int> pin(nc, -1);
    for (int i = k - 1; i >= 0; --i)
        if (!leaves[comp[i]]) pin[comp[i]] = i;  // lowest local index per bottom class

    std::vector<std::vector<Rat>> a(k, std::vector<Rat>(k));
    std::vector<Rat> b(k);
    for (int i = 0; i < k; ++i) {
        if (pin[comp[i]] == i) {
            a[i][i] = Rat(1);
            b[i] = Rat(0);
            continue;
        }
        const Action& act = model.actions[ec.states[i]][policy[i]];
        a[i][i] = Rat(1);
        b[i] = Rat(act.weight) - gain;
        for (const Branch& br : act.branches) a[i][ec.indexOf(br.target)] -= br.prob;
    }
    return solveDenseRat(std::move(a), std::move(b));
}

void normalize(SuperPotential& sp) {
    Rat lo = sp.u[0], hi = sp.u[0];
    for (const Rat& v : sp.u) {
        lo = min(lo, v);
        hi = max(hi, v);
    }
    for (Rat& v : sp.u) v -= lo;
    sp.spread = hi - lo;
}

}  // namespace

SuperPotential superPotential(const Mdp& model, const EndComponent& ec) {
    MeanPayoffResult mp = maxMeanPayoff(model, ec);
    if (mp.gain.sign() >= 0)
        throw std::invalid_argument("super-potential requires negative gain, got " + mp.gain.toString());

    SuperPotential sp;
    sp.drift = -mp.gain;
    sp.u = policyBias(model, ec, mp.policy, mp.gain);
    normalize(sp);
    if (sp.verify(model, ec)) return sp;

    sp.u = mp.potential;  // feasible by construction of the gain program
    normalize(sp);
    if (!sp.verify(model, ec)) throw std::logic_error("gain-program potential fails verification");
    return sp;
}

EcTailConstants ecTailConstants(const SuperPotential& sp, const Weight& maxAbsWeight) {
    EcTailConstants tc;
    tc.c = sp.spread + Rat(maxAbsWeight);
    if (tc.c.sign() <= 0) throw std::invalid_argument("tail constant c must be positive");
    Rat ratio = sp.drift / tc.c;
    tc.lambda = (Rat(1) - ratio) / (Rat(1) + ratio);
    if (tc.lambda.sign() < 0 || tc.lambda >= Rat(1))
        throw std::logic_error("tail decay outside [0,1)");
    return tc;
}

long windowExponent(const Rat& bigD, const Rat& lambda, const Rat& eps) {
    if (eps.sign() <= 0) throw std::invalid_argument("epsilon must be positive");
    Rat cur = bigD + bigD;
    long k = 0;
    while (cur > eps) {
        if (lambda.isZero()) return k + 1;
        cur *= lambda;
        if (++k > 100'000'000)
            throw SolverError(SolverErrorCode::ResourceLimit, "window exponent out of range");
    }
    return k;
}

BoundsReport computeBounds(const Mdp& model, const Rat& epsilon, const ReachabilityProfile& prof,
                           const ExtremeSchedulers& ext, bool wantCe) {
    BoundsReport rep;
    ModelConstants mc = modelConstants(model);
    rep.maxAbsWeight = mc.maxAbsWeight;
    rep.delta = mc.minProb;
    rep.stateCount = mc.stateCount;
    rep.epsilon = epsilon;

    MecDecomposition dec = mecDecompose(model);
    Rat sumC;
    Rat prodOneMinus(1);
    int fail = model.failState();
    for (size_t i = 0; i < dec.mecs.size(); ++i) {
        const EndComponent& ec = dec.mecs[i];
        if (ec.states.size() == 1 && (ec.states[0] == model.goal || ec.states[0] == fail)) continue;
        BoundsReport::PerMec pm;
        pm.mecIndex = static_cast<int>(i);
        pm.sp = superPotential(model, ec);
        pm.tail = ecTailConstants(pm.sp, rep.maxAbsWeight);
        sumC += pm.tail.c;
        prodOneMinus *= Rat(1) - pm.tail.lambda;
        rep.perMec.push_back(std::move(pm));
    }

    rep.cM = Rat(static_cast<long>(mc.stateCount)) * Rat(rep.maxAbsWeight) + sumC;
    rep.lambdaM = Rat(1) - rep.delta.pow(static_cast<unsigned long>(mc.stateCount)) * prodOneMinus;
    Rat oneMinus = Rat(1) - rep.lambdaM;
    Rat cw = rep.cM + Rat(rep.maxAbsWeight);
    rep.peUb = cw / (oneMinus * oneMinus);

    if (wantCe) {
        rep.q = prof.pMin[model.initial];
        if (rep.q->sign() > 0) rep.ceUb = rep.peUb / *rep.q;
    }

    rep.qPerState.assign(model.stateCount(), std::nullopt);
    bool anyQ = false;
    for (int s = 0; s < model.stateCount(); ++s) {
        bool constrained = false;
        Rat lowestOff;
        for (size_t a = 0; a < model.actions[s].size(); ++a) {
            if (prof.actMin[s][a]) continue;
            if (!constrained || prof.pMinByAction[s][a] < lowestOff) lowestOff = prof.pMinByAction[s][a];
            constrained = true;
        }
        if (!constrained) continue;
        Rat denom = prof.pMin[s] - lowestOff;  // negative off the min set
        Rat qs = (rep.peUb - ext.min.peVector[s]) / denom;
        rep.qPerState[s] = qs;
        if (!anyQ || qs < rep.qGlobal) rep.qGlobal = qs;
        anyQ = true;
    }
    if (!anyQ) rep.qGlobal = Rat(0);

    Rat minPe = Rat(0);
    bool first = true;
    for (int s = 0; s < model.stateCount(); ++s) {
        Rat m = min(ext.max.peVector[s], ext.min.peVector[s]);
        if (first || m < minPe) minPe = m;
        first = false;
    }
    rep.bigD = rep.peUb - minPe;

    long k = windowExponent(rep.bigD, rep.lambdaM, epsilon);
    rep.rPlus = (cw * Rat(k)).ceil();
    rep.rMinus = rep.qGlobal.floor() - rep.rPlus;
    return rep;
}

}  // namespace mdpx
