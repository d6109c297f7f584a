#include "mdpx/model.hpp"

#include <set>
#include <stdexcept>

namespace mdpx {

int Mdp::actionCount() const {
    int n = 0;
    for (const auto& acts : actions) n += static_cast<int>(acts.size());
    return n;
}

int Mdp::findState(const std::string& name) const {
    for (int i = 0; i < stateCount(); ++i)
        if (stateNames[i] == name) return i;
    return -1;
}

int Mdp::addState(const std::string& name) {
    stateNames.push_back(name);
    actions.emplace_back();
    return stateCount() - 1;
}

bool Mdp::isMarkovChain() const {
    for (const auto& acts : actions)
        if (acts.size() != 1) return false;
    return true;
}

ValidationReport validate(const Mdp& model) {
    ValidationReport report;
    auto flag = [&](std::string msg, int s = -1, int a = -1) {
        report.push_back({std::move(msg), s, a});
    };

    int n = model.stateCount();
    if (n == 0) {
        flag("model has no states");
        return report;
    }
    if (model.initial < 0 || model.initial >= n) flag("initial state missing or out of range");
    if (model.goal < 0 || model.goal >= n) flag("goal state missing or out of range");
    if (static_cast<int>(model.actions.size()) != n) {
        flag("action table size does not match state count");
        return report;
    }

    for (int s = 0; s < n; ++s) {
        const auto& acts = model.actions[s];
        if (acts.empty()) flag("state '" + model.stateNames[s] + "' has no enabled action", s);
        std::set<std::string> labels;
        for (int a = 0; a < static_cast<int>(acts.size()); ++a) {
            const Action& act = acts[a];
            if (!labels.insert(act.label).second)
                flag("duplicate action label '" + act.label + "' at state '" + model.stateNames[s] + "'", s, a);
            if (act.branches.empty()) {
                flag("action '" + act.label + "' at '" + model.stateNames[s] + "' has no branches", s, a);
                continue;
            }
            Rat sum;
            std::set<int> targets;
            for (const Branch& br : act.branches) {
                if (br.target < 0 || br.target >= n) {
                    flag("branch target out of range", s, a);
                    continue;
                }
                if (!targets.insert(br.target).second)
                    flag("duplicate branch target '" + model.stateNames[br.target] + "' in action '" + act.label + "'", s, a);
                if (br.prob.sign() <= 0)
                    flag("non-positive branch probability in action '" + act.label + "' at '" + model.stateNames[s] + "'", s, a);
                sum += br.prob;
            }
            if (sum != Rat(1))
                flag("distribution of action '" + act.label + "' at '" + model.stateNames[s] +
                         "' sums to " + sum.toString() + " != 1",
                     s, a);
        }
    }

    if (model.goal >= 0 && model.goal < n) {
        const auto& acts = model.actions[model.goal];
        bool absorbing = acts.size() == 1 && acts[0].branches.size() == 1 &&
                         acts[0].branches[0].target == model.goal &&
                         acts[0].branches[0].prob == Rat(1) && acts[0].weight == 0;
        if (!absorbing) flag("goal not absorbing (needs a single weight-0 self-loop)", model.goal);
    }
    return report;
}

void requireValid(const Mdp& model) {
    ValidationReport report = validate(model);
    if (!report.empty()) {
        std::string msg = "invalid model:";
        for (const auto& v : report) msg += "\n  " + v.message;
        throw std::invalid_argument(msg);
    }
}

ModelConstants modelConstants(const Mdp& model) {
    ModelConstants c;
    c.stateCount = model.stateCount();
    c.maxAbsWeight = 0;
    c.minProb = Rat(1);
    for (const auto& acts : model.actions) {
        for (const Action& act : acts) {
            Weight w = ::abs(act.weight);
            if (w > c.maxAbsWeight) c.maxAbsWeight = w;
            for (const Branch& br : act.branches)
                if (br.prob.sign() > 0 && br.prob < c.minProb) c.minProb = br.prob;
        }
    }
    return c;
}

}  // namespace mdpx
