#include "doctest.h"
#include "helpers.hpp"
#include "mdpx/bounds.hpp"
#include "mdpx/preprocess.hpp"
#include "mdpx/window_engine.hpp"

using namespace mdpx;
using mdpx::test::loadFixture;

namespace {

BoundsReport boundsFor(const char* name, const Rat& eps) {
    PreparedPe pm = prepareForPe(loadFixture(name));
    return computeBounds(pm.model, eps, pm.prof, pm.ext, false);
}

}  // namespace

TEST_CASE("super potential of a single negative loop") {
    Mdp m;
    int s = m.addState("s");
    int g = m.addState("goal");
    m.initial = s;
    m.goal = g;
    m.actions[s].push_back({"l", -1, {{s, Rat(1)}}});
    m.actions[g].push_back({"l", 0, {{g, Rat(1)}}});
    MecDecomposition dec = mecDecompose(m);
    const EndComponent& ec = dec.mecs[dec.membership[s]];
    SuperPotential sp = superPotential(m, ec);
    CHECK(sp.drift == Rat(1));
    CHECK(sp.u == std::vector<Rat>{Rat(0)});
    CHECK(sp.verify(m, ec));
}

TEST_CASE("super potential of the m_gold component") {
    Mdp m = loadFixture("m_gold.mdpw");
    MecDecomposition dec = mecDecompose(m);
    const EndComponent& ec = dec.mecs[0];
    SuperPotential sp = superPotential(m, ec);
    CHECK(sp.drift == Rat(1, 4));
    CHECK(sp.verify(m, ec));
    CHECK(sp.spread == Rat(3));  // forced by the three inequalities
}

TEST_CASE("super potential of a two-state deterministic cycle") {
    Mdp m;
    int a = m.addState("a");
    int b = m.addState("b");
    int g = m.addState("goal");
    m.initial = a;
    m.goal = g;
    m.actions[a].push_back({"x", -1, {{b, Rat(1)}}});
    m.actions[b].push_back({"x", -3, {{a, Rat(1)}}});
    m.actions[g].push_back({"l", 0, {{g, Rat(1)}}});
    MecDecomposition dec = mecDecompose(m);
    const EndComponent& ec = dec.mecs[dec.membership[a]];
    SuperPotential sp = superPotential(m, ec);
    CHECK(sp.drift == Rat(2));
    CHECK(sp.spread == Rat(1));
    CHECK(sp.verify(m, ec));
}

TEST_CASE("tail constants") {
    SuperPotential sp;
    sp.drift = Rat(1);
    sp.u = {Rat(0)};
    sp.spread = Rat(0);
    EcTailConstants tc = ecTailConstants(sp, Weight(1));
    CHECK(tc.c == Rat(1));
    CHECK(tc.lambda == Rat(0));

    sp.drift = Rat(1, 4);
    sp.spread = Rat(1);
    EcTailConstants tc2 = ecTailConstants(sp, Weight(2));
    CHECK(tc2.c == Rat(3));
    CHECK(tc2.lambda == Rat(11, 13));
}

TEST_CASE("bounds report for mc_coin follows the closed formulas") {
    BoundsReport rep = boundsFor("mc_coin.mdpw", Rat(1, 100));
    CHECK(rep.maxAbsWeight == 2);
    CHECK(rep.delta == Rat(1, 2));
    CHECK(rep.perMec.empty());
    CHECK(rep.cM == Rat(6));
    CHECK(rep.lambdaM == Rat(7, 8));
    CHECK(rep.peUb == Rat(512));
}

TEST_CASE("bounds report for m_gold") {
    BoundsReport rep = boundsFor("m_gold.mdpw", Rat(1, 100));
    REQUIRE(rep.perMec.size() == 1);
    CHECK(rep.perMec[0].sp.drift == Rat(1, 4));
    CHECK(rep.perMec[0].tail.c == Rat(5));
    CHECK(rep.perMec[0].tail.lambda == Rat(19, 21));
    CHECK(rep.cM == Rat(13));
    CHECK(rep.lambdaM == Rat(167, 168));
    CHECK(rep.peUb == Rat(15) * Rat(168) * Rat(168));
    CHECK(rep.lambdaM > Rat(0));
    CHECK(rep.lambdaM < Rat(1));
    CHECK(rep.rMinus < 0);
    CHECK(rep.rPlus > 0);
    // lower saturation only constrains s_init (the other states are single-action)
    int constrained = 0;
    for (const auto& q : rep.qPerState) constrained += q ? 1 : 0;
    CHECK(constrained == 1);
    CHECK(rep.qGlobal <= Rat(0));
}

TEST_CASE("halving epsilon never shrinks the window") {
    PreparedPe pm = prepareForPe(loadFixture("m_gold.mdpw"));
    BoundsReport a = computeBounds(pm.model, Rat(1, 100), pm.prof, pm.ext, false);
    BoundsReport b = computeBounds(pm.model, Rat(1, 200), pm.prof, pm.ext, false);
    CHECK(b.rPlus >= a.rPlus);
    CHECK(b.rMinus <= a.rMinus);
}

TEST_CASE("super-harmonic inequalities hold exactly on all fixtures") {
    for (const char* name : {"m_gold.mdpw", "n_gold.mdpw", "n_count.mdpw", "m_parity.mdpw"}) {
        PreparedPe pm = prepareForPe(loadFixture(name));
        MecDecomposition dec = mecDecompose(pm.model);
        int fail = pm.model.failState();
        for (const EndComponent& ec : dec.mecs) {
            if (ec.states.size() == 1 && (ec.states[0] == pm.model.goal || ec.states[0] == fail))
                continue;
            SuperPotential sp = superPotential(pm.model, ec);
            CHECK(sp.verify(pm.model, ec));
        }
    }
}

TEST_CASE("conditional bound routes through the positive-minimum transform") {
    Mdp n = loadFixture("n_gold.mdpw");
    TransformResult col = collapseToFail(n);
    TransformResult pos = posminTransform(col.model);
    PreparedPe pm = prepareForPe(pos.model);
    BoundsReport rep = computeBounds(pm.model, Rat(1, 100), pm.prof, pm.ext, true);
    REQUIRE(rep.q);
    CHECK(*rep.q == Rat(1, 2));
    REQUIRE(rep.ceUb);
    CHECK(*rep.ceUb == rep.peUb / Rat(1, 2));
}
