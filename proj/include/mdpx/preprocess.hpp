#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mdpx/graph.hpp"
#include "mdpx/model.hpp"

namespace mdpx {

enum class TransformKind { Collapse, Spider, Posmin };

struct TransformTrace {
    TransformKind kind;
    /// Original state index -> state index in the transformed model.
    std::vector<int> stateMapping;
};

struct TransformResult {
    Mdp model;
    TransformTrace trace;
};

/// Merges every state that cannot reach the goal into the absorbing `__fail`
/// state, redirecting transitions. Identity (no `__fail` added) when all
/// states reach the goal.
TransformResult collapseToFail(const Mdp& model);

struct DivergenceCheck {
    bool divergent = false;
    int witnessMec = -1;  // index into mecDecompose(model) when divergent
    std::vector<std::string> witnessStates;
};

/// Decides whether the model admits an end component in which accumulated
/// weight can be driven above every bound almost surely. Detects both
/// strictly positive maximal mean payoff and zero-mean components whose
/// recurrent behaviour carries nonzero cycles.
DivergenceCheck checkWeightDivergence(const Mdp& model);

/// Flattens every zero-mean end component until all remaining components
/// (other than absorbing goal/`__fail`) have negative maximal mean payoff.
/// Partial expectations and goal probabilities are preserved scheduler-wise.
/// Throws SolverError(WeightDivergent) when the precondition fails.
TransformResult spiderTransform(const Mdp& model);

struct CriticalCheck {
    bool critical = false;
    std::vector<int> cycle;  // states of a positive-weight cycle, in order
};

/// A critical scheduler reaches a positive cycle while avoiding the goal
/// surely. Exists iff the sub-graph of minimum-probability actions reachable
/// from the initial state contains a positive cycle (only relevant when the
/// minimal goal probability from the initial state is zero).
CriticalCheck checkCriticalScheduler(const Mdp& model);

/// Adds a fresh initial state that commits immediately to the first
/// deviation from minimum-probability actions, accumulating the maximal
/// weight reachable up to that point. Afterwards the minimal goal
/// probability from the initial state is positive; conditional expectations
/// are preserved. Identity when it already is.
TransformResult posminTransform(const Mdp& model);

enum class FinitenessReason { Ok, WeightDivergentEC, CriticalScheduler, GoalUnreachable };

struct FinitenessVerdict {
    bool peFinite = false;
    bool ceFinite = false;
    FinitenessReason reason = FinitenessReason::Ok;
    std::vector<std::string> witnessStates;  // divergent component or positive cycle
};

FinitenessVerdict classifyFiniteness(const Mdp& model);

const char* reasonName(FinitenessReason r);

}  // namespace mdpx
