#include "doctest.h"
#include "helpers.hpp"
#include "mdpx/errors.hpp"
#include "mdpx/exact.hpp"
#include "mdpx/preprocess.hpp"
#include "mdpx/window_engine.hpp"

using namespace mdpx;
using mdpx::test::loadFixture;

namespace {

PreparedPe prepFixture(const char* name) { return prepareForPe(loadFixture(name)); }

Mdp twoActionRace() {
    // alpha: sure goal, weight 0; beta: weight +1 then goal w.p. 1/2 else lost
    Mdp m;
    int s = m.addState("s");
    int g = m.addState("goal");
    int d = m.addState("dead");
    m.initial = s;
    m.goal = g;
    m.actions[s].push_back({"alpha", 0, {{g, Rat(1)}}});
    m.actions[s].push_back({"beta", 1, {{g, Rat(1, 2)}, {d, Rat(1, 2)}}});
    m.actions[d].push_back({"l", 0, {{d, Rat(1)}}});
    m.actions[g].push_back({"l", 0, {{g, Rat(1)}}});
    return m;
}

}  // namespace

TEST_CASE("markov chain solver on mc_coin") {
    Mdp m = loadFixture("mc_coin.mdpw");
    TransformResult col = collapseToFail(m);
    ChainSolution sol = solveMarkovChain(col.model, Rat(0));
    CHECK(sol.pe == Rat(1));
    CHECK(sol.reach == Rat(1, 2));
    REQUIRE(sol.ce);
    CHECK(*sol.ce == Rat(2));

    ChainSolution biased = solveMarkovChain(col.model, Rat(3));
    CHECK(biased.pe == Rat(5, 2));  // 1 + 3/2
    CHECK(*biased.ce == Rat(2));
}

TEST_CASE("markov chain solver on a two-step chain") {
    Mdp m = parseMdp(
        "@initial a\n@goal g\n"
        "action a x 1\n-> b 1\n"
        "action b x 1\n-> g 1\n");
    TransformResult col = collapseToFail(m);
    ChainSolution sol = solveMarkovChain(col.model, Rat(0));
    CHECK(sol.pe == Rat(2));
    CHECK(*sol.ce == Rat(2));
}

TEST_CASE("extreme schedulers on m_gold") {
    PreparedPe pm = prepFixture("m_gold.mdpw");
    const Mdp& m = pm.model;
    int si = m.initial;
    // Max must actually attain probability one, so it exits through tau.
    CHECK(pm.ext.max.reachVector[si] == Rat(1));
    CHECK(pm.ext.max.peVector[si] == Rat(0));
    CHECK(m.actions[si][pm.ext.max.choice[si]].label == "tau");
    // Min avoids the goal entirely.
    CHECK(pm.ext.min.reachVector[si] == Rat(0));
    CHECK(pm.ext.min.peVector[si] == Rat(0));
    CHECK(m.actions[si][pm.ext.min.choice[si]].label == "sigma");
    // per-state values of the other component states
    CHECK(pm.ext.max.peVector[m.findState("s")] == Rat(-2));
    CHECK(pm.ext.max.peVector[m.findState("t")] == Rat(1));
}

TEST_CASE("extreme schedulers verified against evaluation") {
    for (const char* name : {"m_gold.mdpw", "n_gold.mdpw", "n_count.mdpw", "m_parity.mdpw"}) {
        PreparedPe pm = prepFixture(name);
        PolicyEvaluation evMax = evalMemoryless(pm.model, pm.ext.max.choice);
        PolicyEvaluation evMin = evalMemoryless(pm.model, pm.ext.min.choice);
        for (int s = 0; s < pm.model.stateCount(); ++s) {
            CHECK(evMax.reach[s] == pm.prof.pMax[s]);
            CHECK(evMin.reach[s] == pm.prof.pMin[s]);
            CHECK(evMax.pe[s] == pm.ext.max.peVector[s]);
            CHECK(evMin.pe[s] == pm.ext.min.peVector[s]);
        }
    }
}

TEST_CASE("max scheduler beats the alternative on a two-action race") {
    // brute force: alpha gives 0*1 = 0? no: alpha reaches goal surely with
    // weight 0 -> PE 0; beta reaches with probability 1/2 carrying +1 -> 1/2.
    // p^max = 1 via alpha, so Max must pick alpha even though beta pays more.
    PreparedPe pm = prepareForPe(twoActionRace());
    int s = pm.model.initial;
    CHECK(pm.prof.pMax[s] == Rat(1));
    CHECK(pm.model.actions[s][pm.ext.max.choice[s]].label == "alpha");
    CHECK(pm.ext.max.peVector[s] == Rat(0));
}

TEST_CASE("saturation point formula") {
    // every action max-consistent: the empty supremum defaults to 0
    PreparedPe coin = prepFixture("mc_coin.mdpw");
    CHECK(nonnegSaturationPoint(coin.model, coin.prof, coin.ext, Rat(0)) == Rat(0));

    // off-max action with value gap 1 and probability gap 1/2
    PreparedPe race = prepareForPe(twoActionRace());
    // PE^Max_{s,beta} = p*wgt + sum P * PE^Max = 1/2*1 + 0 = 1/2; PE^Max_s = 0
    // gap = (1/2 - 0) / (1 - 1/2) = 1
    Rat p0 = nonnegSaturationPoint(race.model, race.prof, race.ext, Rat(0));
    CHECK(p0 == Rat(1));
    CHECK(nonnegSaturationPoint(race.model, race.prof, race.ext, Rat(3)) == Rat(-2));

    Mdp negative = loadFixture("m_gold.mdpw");
    PreparedPe pg = prepareForPe(negative);
    CHECK_THROWS_AS(nonnegSaturationPoint(pg.model, pg.prof, pg.ext, Rat(0)), SolverError);
}

TEST_CASE("nonnegative exact solve") {
    PreparedPe coin = prepFixture("mc_coin.mdpw");
    ExactPeTable t = nonnegSolveExact(coin.model, coin.prof, coin.ext, Rat(0));
    CHECK(t.answer(coin.model.initial) == Rat(1));

    PreparedPe race = prepareForPe(twoActionRace());
    ExactPeTable t2 = nonnegSolveExact(race.model, race.prof, race.ext, Rat(0));
    CHECK(t2.answer(race.model.initial) == Rat(1, 2));
    // at weight 0 the riskier action still wins; above the saturation point
    // the max-probability action takes over
    int s = race.model.initial;
    CHECK(race.model.actions[s][t2.scheduler[s][0]].label == "beta");
    CHECK(t2.values[s][t2.windowTop] ==
          race.prof.pMax[s] * Rat(t2.windowTop) + race.ext.max.peVector[s]);
}

TEST_CASE("saturated rows are affine and recomputation is stable") {
    PreparedPe race = prepareForPe(twoActionRace());
    ExactPeTable t = nonnegSolveExact(race.model, race.prof, race.ext, Rat(0));
    int s = race.model.initial;
    for (long r = 0; r <= t.windowTop; ++r) {
        if (Rat(r) >= t.saturation)
            CHECK(t.values[s][r] == race.prof.pMax[s] * Rat(r) + race.ext.max.peVector[s]);
        // Bellman residual zero at the chosen action
        const Action& act = race.model.actions[s][t.scheduler[s][r]];
        Rat q;
        for (const Branch& br : act.branches) {
            long wt = r + act.weight.get_si();
            if (br.target == race.model.goal)
                q += br.prob * Rat(wt);
            else if (br.target != race.model.failState() && wt <= t.windowTop)
                q += br.prob * t.values[br.target][wt];
        }
        CHECK(q == t.values[s][r]);
    }
}

TEST_CASE("bias shifts chain values affinely") {
    Mdp m = loadFixture("mc_coin.mdpw");
    TransformResult col = collapseToFail(m);
    for (long num : {-7L, -1L, 0L, 3L, 11L}) {
        Rat b(num, 4);
        ChainSolution sol = solveMarkovChain(col.model, b);
        ChainSolution base = solveMarkovChain(col.model, Rat(0));
        CHECK(sol.pe == base.pe + b * base.reach);
    }
}
