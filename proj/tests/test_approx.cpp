#include <random>

#include "doctest.h"
#include "helpers.hpp"
#include "mdpx/approx.hpp"
#include "mdpx/errors.hpp"
#include "mdpx/window_engine.hpp"

using namespace mdpx;
using mdpx::test::loadFixture;

TEST_CASE("n_count interval contains 13/12") {
    ApproxResult res = approxPe(loadFixture("n_count.mdpw"), Rat(1, 1000));
    CHECK(res.upper - res.lower <= Rat(1, 1000));
    CHECK(res.lower <= Rat(13, 12));
    CHECK(Rat(13, 12) <= res.upper);
}

TEST_CASE("m_gold interval contains the golden value at coarse accuracy") {
    ApproxResult res = approxPe(loadFixture("m_gold.mdpw"), Rat(1, 100));
    CHECK(res.upper - res.lower <= Rat(1, 100));
    CHECK(mdpx::test::bracketsGoldenPe(res.lower, res.upper));
}

TEST_CASE("goal unreachable collapses to the exact zero interval") {
    Mdp m = parseMdp("@initial s\n@goal g\naction s a 0\n-> s 1\naction g l 0\n-> g 1\n");
    ApproxResult res = approxPe(m, Rat(1, 10));
    CHECK(res.lower == Rat(0));
    CHECK(res.upper == Rat(0));
}

TEST_CASE("approximation rejects weight-divergent input") {
    Mdp m;
    int s = m.addState("s");
    int g = m.addState("goal");
    m.initial = s;
    m.goal = g;
    m.actions[s].push_back({"pump", 1, {{s, Rat(1)}}});
    m.actions[s].push_back({"out", 0, {{g, Rat(1)}}});
    m.actions[g].push_back({"l", 0, {{g, Rat(1)}}});
    CHECK_THROWS_AS(approxPe(m, Rat(1, 10)), SolverError);
}

TEST_CASE("window scheduler evaluation: immediate tau on m_gold") {
    PreparedPe pm = prepareForPe(loadFixture("m_gold.mdpw"));
    const Mdp& m = pm.model;
    WindowScheduler ws;
    ws.wLo = -2;
    ws.wHi = 2;
    ws.bias = Rat(0);
    ws.above = pm.ext.max;
    ws.below = pm.ext.min;
    ws.table.assign(m.stateCount(), {});
    for (int s = 0; s < m.stateCount(); ++s) {
        if (s == m.goal) continue;
        ws.table[s].assign(5, 0);
        if (s == m.initial)
            for (int j = 0; j < 5; ++j) ws.table[s][j] = 1;  // tau everywhere
    }
    WindowEvaluation ev = evaluateWindowScheduler(m, ws, Rat(0));
    CHECK(ev.pe == Rat(0));
    CHECK(ev.reach == Rat(1));
    REQUIRE(ev.ce);
    CHECK(*ev.ce == Rat(0));
}

TEST_CASE("window scheduler evaluation: cutoff at +2 approaches the golden value") {
    PreparedPe pm = prepareForPe(loadFixture("m_gold.mdpw"));
    const Mdp& m = pm.model;
    // play sigma below +2, tau at +2 and above; deep window so the truncation
    // below is under 1e-12
    long lo = -120, hi = 2;
    WindowScheduler ws;
    ws.wLo = lo;
    ws.wHi = hi;
    ws.bias = Rat(0);
    ws.above = pm.ext.max;
    ws.below = pm.ext.min;
    ws.table.assign(m.stateCount(), {});
    for (int s = 0; s < m.stateCount(); ++s) {
        if (s == m.goal) continue;
        ws.table[s].assign(hi - lo + 1, 0);
        if (s == m.initial)
            for (long w = lo; w <= hi; ++w) ws.table[s][w - lo] = w >= 2 ? 1 : 0;
    }
    WindowEvaluation ev = evaluateWindowScheduler(m, ws, Rat(0));
    // |pe - (3 - sqrt 5)| <= 1e-9, checked exactly against sqrt 5
    Rat tol(1, 1000000000);
    CHECK(mdpx::test::bracketsGoldenPe(ev.pe - tol, ev.pe + tol));
}

TEST_CASE("evaluation is affine in the bias") {
    PreparedPe pm = prepareForPe(loadFixture("n_count.mdpw"));
    const Mdp& m = pm.model;
    std::mt19937_64 rng(11);
    WindowScheduler ws;
    ws.wLo = -3;
    ws.wHi = 3;
    ws.bias = Rat(0);
    ws.above = pm.ext.max;
    ws.below = pm.ext.min;
    ws.table.assign(m.stateCount(), {});
    for (int s = 0; s < m.stateCount(); ++s) {
        if (s == m.goal || s == m.failState()) continue;
        ws.table[s].assign(7, 0);
        for (int j = 0; j < 7; ++j)
            ws.table[s][j] = static_cast<int>(rng() % m.actions[s].size());
    }
    WindowEvaluation base = evaluateWindowScheduler(m, ws, Rat(0));
    for (int i = 0; i < 5; ++i) {
        Rat b(static_cast<long>(rng() % 41) - 20, static_cast<long>(rng() % 7) + 1);
        WindowEvaluation ev = evaluateWindowScheduler(m, ws, b);
        CHECK(ev.pe == base.pe + b * base.reach);
        CHECK(ev.reach == base.reach);
    }
}

TEST_CASE("threshold correspondence for evaluated schedulers") {
    PreparedPe pm = prepareForPe(loadFixture("n_gold.mdpw"));
    const Mdp& m = pm.model;
    std::mt19937_64 rng(23);
    int done = 0;
    while (done < 20) {
        WindowScheduler ws;
        ws.wLo = -2 - static_cast<long>(rng() % 3);
        ws.wHi = 2 + static_cast<long>(rng() % 3);
        ws.bias = Rat(0);
        ws.above = pm.ext.max;
        ws.below = pm.ext.min;
        ws.table.assign(m.stateCount(), {});
        for (int s = 0; s < m.stateCount(); ++s) {
            if (s == m.goal || s == m.failState()) continue;
            ws.table[s].assign(ws.wHi - ws.wLo + 1, 0);
            for (long j = 0; j <= ws.wHi - ws.wLo; ++j)
                ws.table[s][j] = static_cast<int>(rng() % m.actions[s].size());
        }
        WindowEvaluation ev = evaluateWindowScheduler(m, ws, Rat(0));
        if (ev.reach.sign() == 0) continue;
        ++done;
        Rat ce = *ev.ce;
        for (int d = -1; d <= 1; ++d) {
            Rat theta = ce + Rat(d);
            WindowEvaluation shifted = evaluateWindowScheduler(m, ws, -theta);
            CHECK(shifted.pe.sign() == (ce - theta).sign());
        }
    }
}

TEST_CASE("interval is monotone under window extension") {
    Mdp m = loadFixture("n_count.mdpw");
    ApproxResult base = approxPe(m, Rat(1, 1000));
    // a tighter epsilon enlarges the window; the lower end must not drop
    ApproxResult wider = approxPe(m, Rat(1, 100000));
    CHECK(wider.lower >= base.lower - Rat(1, 1000));
    CHECK(wider.upper <= base.upper + Rat(1, 100000));
}

TEST_CASE("optimum is monotone and convex in the bias") {
    Mdp m = loadFixture("n_count.mdpw");
    Rat eps(1, 1000);
    ApproxResult r1 = approxPe(m, eps, Rat(-2));
    ApproxResult r2 = approxPe(m, eps, Rat(0));
    ApproxResult r3 = approxPe(m, eps, Rat(2));
    // nondecreasing in bias, up to interval slack
    CHECK(r1.lower <= r2.upper);
    CHECK(r2.lower <= r3.upper);
    // midpoint below the chord, up to slack (sup of affine maps is convex)
    Rat chord = (r1.lower + r3.upper) / Rat(2);
    CHECK(r2.lower <= chord + eps * Rat(3));
}

TEST_CASE("conditional approximation on mc_coin collapses to 2") {
    CeResult res = approxCe(loadFixture("mc_coin.mdpw"), Rat(1, 1000));
    CHECK((res.value - Rat(2)).abs() <= Rat(3, 1000));
    CHECK(static_cast<long>(res.trace.steps.size()) <= res.trace.iterationCap + 1);
}

TEST_CASE("conditional approximation rejects critical schedulers") {
    CHECK_THROWS_AS(approxCe(loadFixture("m_gold.mdpw"), Rat(1, 10)), SolverError);
}

TEST_CASE("n_gold conditional value at coarse accuracy") {
    Rat eps(1, 100);
    CeResult res = approxCe(loadFixture("n_gold.mdpw"), eps);
    CHECK(mdpx::test::nearGoldenCe(res.value, eps * Rat(3)));
    // bracket invariant: 3/(3+sqrt5) = (9-3sqrt5)/4 stays inside [a_i, b_i]
    for (const BinarySearchStep& st : res.trace.steps) {
        CHECK(mdpx::test::leSqrt5((Rat(9) - Rat(4) * st.b) / Rat(3)));
        CHECK(mdpx::test::geSqrt5((Rat(9) - Rat(4) * st.a) / Rat(3)));
    }
}
