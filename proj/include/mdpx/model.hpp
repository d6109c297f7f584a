#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdpx/rational.hpp"

namespace mdpx {

/// Integer action weight (arbitrary precision).
using Weight = mpz_class;

/// Name reserved for the absorbing sink that preprocessing introduces.
inline const std::string kFailName = "__fail";

struct Branch {
    int target = -1;
    Rat prob;
};

struct Action {
    std::string label;
    Weight weight;
    std::vector<Branch> branches;
};

/// Finite weighted MDP over positional state indices. String names are kept
/// for I/O only; all analysis identifies states and actions by index.
struct Mdp {
    std::vector<std::string> stateNames;
    std::vector<std::vector<Action>> actions;  // per state, label-unique
    int initial = -1;
    int goal = -1;

    int stateCount() const { return static_cast<int>(stateNames.size()); }
    int actionCount() const;
    int findState(const std::string& name) const;  // -1 if absent
    int addState(const std::string& name);

    /// Index of the `__fail` state or -1 when no transform introduced one.
    int failState() const { return findState(kFailName); }

    bool isMarkovChain() const;
};

struct Violation {
    std::string message;
    int state = -1;   // offending state, -1 if model-level
    int action = -1;  // offending action index within state, -1 if none
};

/// Structural well-formedness report; empty means valid.
using ValidationReport = std::vector<Violation>;

/// Checks all model invariants: distributions sum to one with positive
/// entries, every state enabled, goal absorbing, labels unique per state,
/// initial/goal designated. Violations are data, not errors.
ValidationReport validate(const Mdp& model);

void requireValid(const Mdp& model);  // throws std::invalid_argument on violations

struct ModelConstants {
    Weight maxAbsWeight;  // W
    Rat minProb;          // delta, minimum non-zero transition probability
    int stateCount = 0;
};

ModelConstants modelConstants(const Mdp& model);

}  // namespace mdpx
