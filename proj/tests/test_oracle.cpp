#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "mdpx/approx.hpp"
#include "mdpx/oracle.hpp"
#include "mdpx/window_engine.hpp"

using namespace mdpx;
using mdpx::test::loadFixture;

TEST_CASE("oracle on mc_coin") {
    OracleResult res = oraclePe(loadFixture("mc_coin.mdpw"), 4, Rat(0));
    CHECK(res.best == Rat(1));
    CHECK(res.enumerated >= 1);
}

TEST_CASE("oracle on n_count approaches 13/12") {
    OracleResult res = oraclePe(loadFixture("n_count.mdpw"), 20, Rat(0));
    CHECK((res.best - Rat(13, 12)).abs() <= Rat(1, 10000));
    CHECK(res.best <= Rat(13, 12));
}

TEST_CASE("oracle on m_gold approaches the golden value") {
    OracleResult res = oraclePe(loadFixture("m_gold.mdpw"), 10, Rat(0));
    // window truncation loses a little mass below; stays within 5e-3
    Rat tol(5, 1000);
    CHECK(mdpx::test::bracketsGoldenPe(res.best - tol, res.best + tol));
    CHECK(mdpx::test::geSqrt5(Rat(3) - res.best));  // best <= 3 - sqrt5 = optimum
}

TEST_CASE("oracle value is nondecreasing in the window") {
    Mdp m = loadFixture("m_gold.mdpw");
    Rat prev;
    bool first = true;
    for (long w : {2L, 4L, 8L, 12L}) {
        OracleResult res = oraclePe(m, w, Rat(0));
        if (!first) CHECK(res.best >= prev);
        prev = res.best;
        first = false;
    }
}

TEST_CASE("oracle matches the certified interval") {
    Mdp m = loadFixture("n_count.mdpw");
    ApproxResult ap = approxPe(m, Rat(1, 1000));
    OracleResult res = oraclePe(m, 25, Rat(0));
    CHECK(res.best <= ap.upper);
    CHECK(res.best >= ap.lower - Rat(1, 1000));
}

TEST_CASE("simulation of a deterministic chain is exact") {
    Mdp m = parseMdp(
        "@initial a\n@goal g\n"
        "action a x 2\n-> b 1\n"
        "action b x 3\n-> g 1\n");
    WindowScheduler ws;  // empty window: commits below; both policies are the only action
    ws.wLo = 1;
    ws.wHi = 0;
    ws.bias = Rat(0);
    ws.above.choice.assign(m.stateCount(), 0);
    ws.below.choice.assign(m.stateCount(), 0);
    SimulationEstimate est = simulate(m, ws, 1000, 100, 42);
    CHECK(est.mean == doctest::Approx(5.0));
    CHECK(est.stderror == 0.0);
}

TEST_CASE("simulation is reproducible for a fixed seed") {
    Mdp m = loadFixture("mc_coin.mdpw");
    WindowScheduler ws;
    ws.wLo = 1;
    ws.wHi = 0;
    ws.bias = Rat(0);
    ws.above.choice.assign(m.stateCount(), 0);
    ws.below.choice.assign(m.stateCount(), 0);
    SimulationEstimate a = simulate(m, ws, 20000, 50, 7);
    SimulationEstimate b = simulate(m, ws, 20000, 50, 7);
    CHECK(a.mean == b.mean);
    CHECK(a.stderror == b.stderror);
    // unbiased for the one-flip chain: PE = 1
    CHECK(std::abs(a.mean - 1.0) <= 4 * a.stderror + 1e-9);
}

TEST_CASE("simulated scheduler from the oracle lands near its exact value") {
    Mdp m = loadFixture("n_count.mdpw");
    OracleResult res = oraclePe(m, 12, Rat(0));
    WindowEvaluation exact = evaluateWindowScheduler(
        prepareForPe(m).model, res.argBest, Rat(0));
    SimulationEstimate est = simulate(m, res.argBest, 200000, 4000, 3);
    CHECK(std::abs(est.mean - exact.pe.toDouble()) <= 4 * est.stderror + 1e-6);
}
