#include <chrono>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "mdpx/approx.hpp"
#include "mdpx/bounds.hpp"
#include "mdpx/errors.hpp"
#include "mdpx/exact.hpp"
#include "mdpx/format.hpp"
#include "mdpx/oracle.hpp"
#include "mdpx/preprocess.hpp"
#include "mdpx/report.hpp"
#include "mdpx/window_engine.hpp"

namespace {

using mdpx::Json;
using mdpx::Mdp;
using mdpx::Rat;

struct Global {
    bool json = false;
    bool deterministic = false;
    bool internal = false;
    int digits = 10;
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
};

Json baseReport(const Global& g, const std::string& query, const std::string& path,
                const std::string& content) {
    Json j;
    j["query"] = query;
    j["input"] = {{"path", path}, {"digest", mdpx::contentDigest(content)}};
    (void)g;
    return j;
}

void finishReport(const Global& g, Json& j) {
    if (!g.deterministic) {
        auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                      std::chrono::steady_clock::now() - g.start)
                      .count();
        j["timings"] = {{"totalMs", ms}};
    }
    std::cout << j.dump(2) << "\n";
}

void printKv(const std::string& k, const std::string& v) { std::cout << k << ": " << v << "\n"; }

Mdp loadModel(const Global& g, const std::string& path, std::string& content) {
    content = mdpx::readFile(path);
    mdpx::ParseOptions opts;
    opts.internal = g.internal;
    return mdpx::parseMdp(content, opts);
}

Json schedulerJson(const Mdp& model, const mdpx::WindowScheduler& ws) {
    Json j;
    j["window"] = {ws.wLo, ws.wHi};
    j["bias"] = ws.bias.toString();
    Json table = Json::object();
    for (int s = 0; s < model.stateCount(); ++s) {
        if (ws.table.empty() || s >= static_cast<int>(ws.table.size()) || ws.table[s].empty()) continue;
        for (long w = ws.wLo; w <= ws.wHi; ++w) {
            int a = ws.table[s][w - ws.wLo];
            if (a < 0) continue;
            table[model.stateNames[s] + "@" + std::to_string(w)] = model.actions[s][a].label;
        }
    }
    j["table"] = table;
    Json above = Json::object(), below = Json::object();
    for (int s = 0; s < model.stateCount(); ++s) {
        if (!ws.above.choice.empty())
            above[model.stateNames[s]] = model.actions[s][ws.above.choice[s]].label;
        if (!ws.below.choice.empty())
            below[model.stateNames[s]] = model.actions[s][ws.below.choice[s]].label;
    }
    j["above"] = above;
    j["below"] = below;
    return j;
}

int runCheck(const Global& g, const std::string& path) {
    std::string content;
    Mdp model = loadModel(g, path, content);
    mdpx::FinitenessVerdict v = mdpx::classifyFiniteness(model);
    Json j = baseReport(g, "check", path, content);
    j["verdicts"] = {{"peFinite", v.peFinite},
                     {"ceFinite", v.ceFinite},
                     {"reason", mdpx::reasonName(v.reason)},
                     {"witness", v.witnessStates}};
    if (g.json) {
        finishReport(g, j);
    } else {
        printKv("peFinite", v.peFinite ? "true" : "false");
        printKv("ceFinite", v.ceFinite ? "true" : "false");
        printKv("reason", mdpx::reasonName(v.reason));
    }
    return 0;
}

int runExact(const Global& g, const std::string& path, const std::string& mode,
             const std::string& biasText) {
    std::string content;
    Mdp model = loadModel(g, path, content);
    Rat bias = Rat::fromString(biasText);
    Json j = baseReport(g, "exact-" + mode, path, content);

    if (model.isMarkovChain()) {
        mdpx::TransformResult col = mdpx::collapseToFail(model);
        mdpx::ChainSolution sol;
        if (col.model.initial == col.model.failState()) {
            sol.pe = Rat(0);
            sol.reach = Rat(0);
        } else {
            sol = mdpx::solveMarkovChain(col.model, bias);
        }
        if (mode == "ce" && !sol.ce)
            throw mdpx::SolverError(mdpx::SolverErrorCode::GoalUnreachable,
                                    "conditional expectation undefined: goal unreachable");
        j["values"] = Json::object();
        j["values"]["pe"] = mdpx::ratJson(sol.pe, g.digits);
        j["values"]["reach"] = mdpx::ratJson(sol.reach, g.digits);
        if (sol.ce) j["values"]["ce"] = mdpx::ratJson(*sol.ce, g.digits);
        if (g.json)
            finishReport(g, j);
        else
            printKv(mode, mode == "ce" ? sol.ce->toString() : sol.pe.toString());
        return 0;
    }

    if (mode == "ce")
        throw mdpx::SolverError(mdpx::SolverErrorCode::Unsupported,
                                "exact conditional values are limited to Markov chains; use "
                                "`approx --mode ce`");
    for (const auto& acts : model.actions)
        for (const mdpx::Action& act : acts)
            if (act.weight < 0)
                throw mdpx::SolverError(
                    mdpx::SolverErrorCode::NegativeWeights,
                    "exact solving needs nonnegative weights (the optimum may be irrational "
                    "otherwise); use `approx`");

    mdpx::PreparedPe pm = mdpx::prepareForPe(model);
    if (pm.goalUnreachable) {
        j["values"] = {{"pe", mdpx::ratJson(Rat(0), g.digits)}};
        if (g.json)
            finishReport(g, j);
        else
            printKv("pe", "0");
        return 0;
    }
    mdpx::ExactPeTable table = mdpx::nonnegSolveExact(pm.model, pm.prof, pm.ext, bias);
    j["values"] = Json::object();
    j["values"]["pe"] = mdpx::ratJson(table.answer(pm.model.initial), g.digits);
    j["values"]["saturation"] = mdpx::ratJson(table.saturation, g.digits);
    j["values"]["windowTop"] = table.windowTop;
    if (g.json)
        finishReport(g, j);
    else
        printKv("pe", table.answer(pm.model.initial).toString());
    return 0;
}

int runApprox(const Global& g, const std::string& path, const std::string& mode,
              const std::string& epsText, const std::string& biasText,
              const std::string& schedulerOut) {
    std::string content;
    Mdp model = loadModel(g, path, content);
    Rat eps = Rat::fromString(epsText);
    Json j = baseReport(g, "approx-" + mode, path, content);

    if (mode == "pe") {
        mdpx::ApproxResult res = mdpx::approxPe(model, eps, Rat::fromString(biasText));
        j["values"] = Json::object();
        j["values"]["lower"] = mdpx::ratJson(res.lower, g.digits);
        j["values"]["upper"] = mdpx::ratJson(res.upper, g.digits);
        j["values"]["width"] = mdpx::ratJson(res.upper - res.lower, g.digits);
        j["values"]["epsilon"] = res.epsilon.toString();
        j["values"]["bias"] = res.bias.toString();
        j["diagnostics"] = {{"cells", res.diag.cells},
                            {"window", {res.diag.windowLow.get_str(), res.diag.windowHigh.get_str()}},
                            {"policyIterations", res.diag.policyIterations},
                            {"exactArithmetic", res.diag.exactPath},
                            {"refinedBounds", res.diag.refinedBounds},
                            {"certifiedSlack", res.diag.certifiedSlack.toDecimalString(g.digits)}};
        if (!schedulerOut.empty()) {
            std::ofstream out(schedulerOut, std::ios::binary);
            if (!out) throw std::runtime_error("cannot write '" + schedulerOut + "'");
            // the scheduler lives on the prepared model; re-derive for naming
            mdpx::PreparedPe pm = mdpx::prepareForPe(model);
            out << schedulerJson(pm.model, res.scheduler).dump(2) << "\n";
        }
        if (g.json)
            finishReport(g, j);
        else {
            printKv("interval",
                    "[" + res.lower.toDecimalString(g.digits) + ", " + res.upper.toDecimalString(g.digits) + "]");
        }
    } else {
        mdpx::CeResult res = mdpx::approxCe(model, eps);
        j["values"] = Json::object();
        j["values"]["ce"] = mdpx::ratJson(res.value, g.digits);
        j["values"]["absoluteError"] = (res.epsilon * Rat(3)).toString();
        Json steps = Json::array();
        for (const auto& st : res.trace.steps)
            steps.push_back({{"a", st.a.toString()},
                             {"b", st.b.toString()},
                             {"theta", st.theta.toString()},
                             {"probe", st.probe.toDecimalString(g.digits)}});
        j["diagnostics"] = {{"iterations", res.trace.steps.size()},
                            {"iterationCap", res.trace.iterationCap},
                            {"a0", res.trace.a0.toDecimalString(g.digits)},
                            {"b0", res.trace.b0.toDecimalString(g.digits)},
                            {"minReach", res.trace.minReach.toString()},
                            {"steps", steps}};
        if (!schedulerOut.empty() && res.hasScheduler) {
            std::ofstream out(schedulerOut, std::ios::binary);
            if (!out) throw std::runtime_error("cannot write '" + schedulerOut + "'");
            mdpx::TransformResult col = mdpx::collapseToFail(model);
            mdpx::TransformResult pos = mdpx::posminTransform(col.model);
            mdpx::PreparedPe pm = mdpx::prepareForPe(pos.model);
            out << schedulerJson(pm.model, res.lastScheduler).dump(2) << "\n";
        }
        if (g.json)
            finishReport(g, j);
        else
            printKv("ce", res.value.toDecimalString(g.digits));
    }
    return 0;
}

int runBounds(const Global& g, const std::string& path, const std::string& epsText) {
    std::string content;
    Mdp model = loadModel(g, path, content);
    Rat eps = Rat::fromString(epsText);

    mdpx::FinitenessVerdict verdict = mdpx::classifyFiniteness(model);
    if (!verdict.peFinite)
        throw mdpx::SolverError(mdpx::SolverErrorCode::WeightDivergent,
                                "partial expectation infinite; bounds undefined");
    mdpx::TransformResult col = mdpx::collapseToFail(model);
    Mdp work = col.model;
    bool wantCe = verdict.ceFinite;
    if (wantCe) work = mdpx::posminTransform(work).model;
    work = mdpx::spiderTransform(work).model;
    mdpx::ReachabilityProfile prof = mdpx::reachProbabilities(work);
    mdpx::ExtremeSchedulers ext = mdpx::extremeSchedulers(work, prof);
    mdpx::BoundsReport rep = mdpx::computeBounds(work, eps, prof, ext, wantCe);

    Json j = baseReport(g, "bounds", path, content);
    Json vals;
    vals["W"] = rep.maxAbsWeight.get_str();
    vals["delta"] = mdpx::ratJson(rep.delta, g.digits);
    vals["stateCount"] = rep.stateCount;
    Json mecs = Json::array();
    for (const auto& pmc : rep.perMec) {
        Json u = Json::array();
        for (const Rat& v : pmc.sp.u) u.push_back(v.toString());
        mecs.push_back({{"mec", pmc.mecIndex},
                        {"drift", mdpx::ratJson(pmc.sp.drift, g.digits)},
                        {"potential", u},
                        {"spread", mdpx::ratJson(pmc.sp.spread, g.digits)},
                        {"c", mdpx::ratJson(pmc.tail.c, g.digits)},
                        {"lambda", mdpx::ratJson(pmc.tail.lambda, g.digits)}});
    }
    vals["perMec"] = mecs;
    vals["cM"] = mdpx::ratJson(rep.cM, g.digits);
    vals["lambdaM"] = mdpx::ratJson(rep.lambdaM, g.digits);
    vals["peUb"] = mdpx::ratJson(rep.peUb, g.digits);
    if (rep.q) vals["q"] = mdpx::ratJson(*rep.q, g.digits);
    if (rep.ceUb) vals["ceUb"] = mdpx::ratJson(*rep.ceUb, g.digits);
    Json qs = Json::object();
    for (int s = 0; s < static_cast<int>(rep.qPerState.size()); ++s)
        if (rep.qPerState[s]) qs[work.stateNames[s]] = mdpx::ratJson(*rep.qPerState[s], g.digits);
    vals["qPerState"] = qs;
    vals["qGlobal"] = mdpx::ratJson(rep.qGlobal, g.digits);
    vals["D"] = mdpx::ratJson(rep.bigD, g.digits);
    vals["rPlus"] = rep.rPlus.get_str();
    vals["rMinus"] = rep.rMinus.get_str();
    vals["epsilon"] = rep.epsilon.toString();
    j["values"] = vals;
    if (g.json)
        finishReport(g, j);
    else {
        printKv("peUb", rep.peUb.toDecimalString(g.digits));
        printKv("lambdaM", rep.lambdaM.toDecimalString(g.digits));
        printKv("window", "[" + rep.rMinus.get_str() + ", " + rep.rPlus.get_str() + "]");
    }
    return 0;
}

int runTransform(const Global& g, const std::string& path, bool collapse, bool spider, bool posmin,
                 const std::string& outPath) {
    std::string content;
    Mdp model = loadModel(g, path, content);
    int picked = (collapse ? 1 : 0) + (spider ? 1 : 0) + (posmin ? 1 : 0);
    if (picked != 1) throw CLI::ValidationError("transform", "pick exactly one of --collapse/--spider/--posmin");
    mdpx::TransformResult res = collapse ? mdpx::collapseToFail(model)
                               : spider  ? mdpx::spiderTransform(model)
                                         : mdpx::posminTransform(model);
    std::ofstream out(outPath, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write '" + outPath + "'");
    out << mdpx::serializeMdp(res.model);

    Json j = baseReport(g, "transform", path, content);
    Json mapping = Json::object();
    for (int s = 0; s < model.stateCount(); ++s)
        mapping[model.stateNames[s]] = res.model.stateNames[res.trace.stateMapping[s]];
    j["values"] = {{"kind", collapse ? "collapse" : spider ? "spider" : "posmin"},
                   {"out", outPath},
                   {"stateMapping", mapping},
                   {"states", res.model.stateCount()}};
    if (g.json)
        finishReport(g, j);
    else
        printKv("wrote", outPath);
    return 0;
}

int runOracle(const Global& g, const std::string& path, long window, long samples, long horizon,
              unsigned long seed, const std::string& biasText) {
    std::string content;
    Mdp model = loadModel(g, path, content);
    Rat bias = Rat::fromString(biasText);
    mdpx::OracleResult res = mdpx::oraclePe(model, window, bias);
    Json j = baseReport(g, "oracle", path, content);
    j["values"] = Json::object();
    j["values"]["best"] = mdpx::ratJson(res.best, g.digits);
    j["values"]["enumerated"] = res.enumerated;
    j["values"]["window"] = window;
    if (samples > 0) {
        mdpx::SimulationEstimate est = mdpx::simulate(model, res.argBest, samples, horizon, seed, bias);
        j["values"]["simulation"] = {{"mean", est.mean},
                                     {"stderr", est.stderror},
                                     {"samples", est.samples},
                                     {"horizon", est.horizon},
                                     {"seed", est.seed}};
    }
    if (g.json)
        finishReport(g, j);
    else
        printKv("best", res.best.toDecimalString(g.digits));
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Global g;
    CLI::App app{"mdpx: partial and conditional expected weights in integer-weighted MDPs"};
    app.require_subcommand(1);
    app.add_flag("--json", g.json, "emit a JSON report on stdout");
    app.add_flag("--deterministic", g.deterministic, "suppress timings for byte-stable output");
    app.add_flag("--internal", g.internal, "accept the reserved __fail identifier on input");
    app.add_option("--digits", g.digits, "decimal digits in renderings")->default_val(10);

    std::string path, mode = "pe", epsText = "1/1000", biasText = "0", schedOut, outPath;
    long window = 10, samples = 0, horizon = 10000;
    unsigned long seed = 1;
    bool tCollapse = false, tSpider = false, tPosmin = false;

    CLI::App* check = app.add_subcommand("check", "finiteness classification");
    check->add_option("file", path)->required();

    CLI::App* exact = app.add_subcommand("exact", "exact values (chains, nonnegative weights)");
    exact->add_option("file", path)->required();
    exact->add_option("--mode", mode)->check(CLI::IsMember({"pe", "ce"}));
    exact->add_option("--bias", biasText);

    CLI::App* approx = app.add_subcommand("approx", "certified approximation");
    approx->add_option("file", path)->required();
    approx->add_option("--epsilon", epsText)->required();
    approx->add_option("--mode", mode)->check(CLI::IsMember({"pe", "ce"}));
    approx->add_option("--bias", biasText);
    approx->add_option("--emit-scheduler", schedOut);

    CLI::App* bounds = app.add_subcommand("bounds", "quantitative bound report");
    bounds->add_option("file", path)->required();
    bounds->add_option("--epsilon", epsText);

    CLI::App* transform = app.add_subcommand("transform", "model transformations");
    transform->add_option("file", path)->required();
    transform->add_flag("--collapse", tCollapse);
    transform->add_flag("--spider", tSpider);
    transform->add_flag("--posmin", tPosmin);
    transform->add_option("--out", outPath)->required();

    CLI::App* oracle = app.add_subcommand("oracle", "window-scheduler ground truth");
    oracle->add_option("file", path)->required();
    oracle->add_option("--window", window)->required();
    oracle->add_option("--samples", samples);
    oracle->add_option("--horizon", horizon);
    oracle->add_option("--seed", seed);
    oracle->add_option("--bias", biasText);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (check->parsed()) return runCheck(g, path);
        if (exact->parsed()) return runExact(g, path, mode, biasText);
        if (approx->parsed()) return runApprox(g, path, mode, epsText, biasText, schedOut);
        if (bounds->parsed()) return runBounds(g, path, epsText);
        if (transform->parsed()) return runTransform(g, path, tCollapse, tSpider, tPosmin, outPath);
        if (oracle->parsed()) return runOracle(g, path, window, samples, horizon, seed, biasText);
    } catch (const mdpx::ParseError& e) {
        std::cerr << "parse error: " << e.what() << "\n";
        return 2;
    } catch (const mdpx::SolverError& e) {
        std::cerr << "error: " << e.what() << "\n";
        switch (e.code()) {
            case mdpx::SolverErrorCode::WeightDivergent:
            case mdpx::SolverErrorCode::CriticalScheduler:
            case mdpx::SolverErrorCode::GoalUnreachable:
                return 3;
            case mdpx::SolverErrorCode::ResourceLimit:
                return 4;
            default:
                return 1;
        }
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid input: " << e.what() << "\n";
        return 2;
    } catch (const std::runtime_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
